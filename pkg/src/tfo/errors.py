"""Exception and warning types shared across the pipeline."""


class TfoError(Exception):
    """Base class for package errors."""


class DataError(TfoError):
    """Malformed or inconsistent input data (CLI exit code 2)."""


class NumericalError(TfoError):
    """Numerical failure during model fitting (CLI exit code 3)."""


class MalformedClock(DataError):
    """Clock string is not M:SS / MM:SS with two second digits in 00-59."""


class SchemaMismatch(DataError):
    """Prediction input does not carry the columns the model was fit on."""


class DegenerateGroups(DataError):
    """Treatment or control arm is empty."""


class SeasonOverlap(DataError):
    """Cross-fit train and evaluation sets share seasons."""


class InsufficientData(DataError):
    """Too few rows to fit the requested model."""


class PositivityViolation(DataError):
    """A generated design implies propensities outside the allowed band."""


class RankDeficient(NumericalError):
    """Design matrix is column-rank deficient.

    Carries ``columns``, the names of the offending columns.
    """

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; offending columns: {self.columns}")


class NonConvergence(NumericalError):
    """IRLS failed to converge.

    Carries ``model``, the last iterate as a fitted model object.
    """

    def __init__(self, message, model=None):
        self.model = model
        super().__init__(message)


class LineupInconsistencyWarning(UserWarning):
    """A substituted-out player was not on court; swap forced best-effort."""


class UnresolvedOpportunityWarning(UserWarning):
    """Event stream ended mid-period before an opportunity resolved."""


class SeparationWarning(UserWarning):
    """More than 10% of fitted probabilities sit at the clip bounds."""
