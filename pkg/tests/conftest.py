"""Shared test helpers."""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))   # make oracles importable

from mixtile.covmath import DistanceMetric, MaternParams  # noqa: E402

# Pass/fail lines accumulated by tests/test_acceptance.py.  Echoed in the
# terminal summary so they show up even without -s.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def tile_bytes(t):
    """Bitwise fingerprint of a tile payload."""
    return t.tobytes()


def factors_bitwise_equal(fa, fb):
    if fa.p != fb.p or fa.nb != fb.nb:
        return False
    for key, ta in fa.tiles.items():
        tb = fb.tiles.get(key)
        if tb is None or ta.dp.tobytes() != tb.dp.tobytes():
            return False
    return set(fa.tiles) == set(fb.tiles)


def random_dataset(n, seed, theta=None, metric=None):
    """Synthetic dataset on the unit square with a Matern field."""
    from mixtile import geodata

    theta = theta or MaternParams(1.0, 0.1, 0.5)
    metric = metric or DistanceMetric.euclidean()
    locs = geodata.generate_locations(n, seed=seed)
    return geodata.generate_field(locs, theta, metric=metric, seed=seed + 1)


def spd_matern_dense(n, seed, theta=None):
    """Dense SPD Matern covariance plus the locations that generated it."""
    from mixtile import geodata
    from mixtile.covmath import matern_array, pairwise_distance

    theta = theta or MaternParams(1.0, 0.1, 0.5)
    locs = geodata.generate_locations(n, seed=seed)
    d = pairwise_distance(locs, locs, DistanceMetric.euclidean())
    return matern_array(d, theta), locs
