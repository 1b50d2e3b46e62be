import math

import numpy as np
import pytest

from boojum import qtensor as qt
from boojum.profile1d import Grid1D


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def grid_fast():
    return Grid1D(12.0, 193)


@pytest.fixture(scope="session")
def grid_medium():
    return Grid1D(12.0, 769)


def random_unit(rng, avoid_poles=False):
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n < 1e-3:
            continue
        v = v / n
        if avoid_poles and float(np.hypot(v[0], v[1])) < 0.05:
            continue
        return v


def random_s0(rng, scale=1.0):
    return qt.to_matrix(scale * rng.normal(size=5))


def random_rotation(rng):
    A = rng.normal(size=(3, 3))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def rotation_about_e3(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
