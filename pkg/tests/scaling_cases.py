"""Small 2x2 inputs with known scaling behaviour, parameterized by a tiny z."""

import numpy as np


def outside_fixable(z):
    """Row/column norms differ by 1/z; outside scaling maps both to all-ones."""
    return np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([[z, 1.0], [z, 1.0]])


def inside_fixable(z):
    """Outside scaling is the identity here; inside scaling balances the k index."""
    return np.array([[1.0, z], [1.0, z]]), np.array([[z, z], [1.0, 1.0]])


def unfixable(z):
    """Every scaling mode leaves these unchanged."""
    a = np.array([[1.0, z], [z, 1.0]])
    return a, a.copy()


def o_first_wins(z):
    return np.array([[1.0, 1.0 / z], [1.0, 1.0]]), np.array([[z, 1.0], [z, 1.0]])


def i_first_wins(z):
    return np.array([[1.0, z], [z, z]]), np.array([[z, 1.0], [1.0, 1.0 / z]])


def slow_family(v):
    """A = [[1, 0], [1, 2^-2^v]], B = I: repeated scaling converges doubly slowly."""
    return np.array([[1.0, 0.0], [1.0, 2.0 ** -(2 ** v)]]), np.eye(2)
