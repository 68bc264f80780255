"""Player-name normalization shared by the play-by-play parser and the dataset join.

Every name key in the pipeline goes through :func:`normalize_name` first;
lookups that miss fall back to surname / surname+initial matching.
"""

import re
import unicodedata

_PUNCT = re.compile(r"[^\w\s]")
_WS = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    """Case-fold, strip diacritics and punctuation, collapse whitespace."""
    s = unicodedata.normalize("NFKD", str(name))
    s = "".join(c for c in s if not unicodedata.combining(c))
    s = _PUNCT.sub(" ", s.casefold())
    return _WS.sub(" ", s).strip()


def surname(name: str) -> str:
    """Last token of the normalized name ('' for empty input)."""
    toks = normalize_name(name).split()
    return toks[-1] if toks else ""


def surname_initial(name: str) -> str:
    """Key 'surname f' when a leading token exists, else just the surname."""
    toks = normalize_name(name).split()
    if not toks:
        return ""
    if len(toks) == 1:
        return toks[0]
    return f"{toks[-1]} {toks[0][0]}"


def match_name(name: str, candidates) -> str | None:
    """Resolve *name* against an iterable of candidate names.

    Tries, in order: exact normalized match, unique surname match, unique
    surname+initial match.  Returns the matching candidate (as given in
    *candidates*) or None.  Ambiguous fallback matches resolve to None.
    """
    target = normalize_name(name)
    cands = list(candidates)
    for c in cands:
        if normalize_name(c) == target:
            return c
    by_surname = [c for c in cands if surname(c) == surname(name)]
    if len(by_surname) == 1:
        return by_surname[0]
    key = surname_initial(name)
    by_initial = [c for c in by_surname if surname_initial(c) == key]
    if len(by_initial) == 1:
        return by_initial[0]
    return None
