import math

import numpy as np
import pytest


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def within(value, target, se, k=3.0):
    return abs(value - target) <= k * se


@pytest.fixture
def report(capsys):
    """Print a line to the terminal even while output is captured."""

    def emit(line):
        with capsys.disabled():
            print(line)

    return emit
