import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from tfo import pbp, synth


@pytest.fixture
def worked_example_events():
    frame = synth.script_pbp(synth.worked_example_scenario())
    return pbp.canonicalize_game(pbp.rows_from_frame(frame))


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)
