import numpy as np
import pytest

from modesmc import reference_four_state
from modesmc import rng as rngmod


@pytest.fixture(scope="session")
def space():
    return reference_four_state()


@pytest.fixture()
def gen():
    return rngmod.stream(20240, 0, rngmod.REPLICATE)


def four_state_enumeration():
    """Independent plain-python enumeration of the reference instance."""
    pi = [0.4, 0.1, 0.2, 0.3]
    betas = [0.25, 0.5, 0.75, 1.0]
    cells = [0, 0, 1, 1]
    masses = [[p**b for p in pi] for b in betas]
    zs = [sum(row) for row in masses]
    probs = [[mass / z for mass in row] for row, z in zip(masses, zs)]
    cell_probs = [
        [sum(p for p, c in zip(row, cells) if c == j) for j in (0, 1)] for row in probs
    ]
    return {
        "pi": pi,
        "betas": betas,
        "cells": cells,
        "zs": zs,
        "probs": probs,
        "cell_probs": cell_probs,
    }


@pytest.fixture(scope="session")
def oracle():
    return four_state_enumeration()


def assert_frequencies_close(counts, probs, n_se=4.0):
    """Every empirical frequency within n_se binomial standard errors."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = counts.sum()
    freq = counts / n
    se = np.sqrt(np.maximum(probs * (1 - probs), 1e-12) / n)
    assert np.all(np.abs(freq - probs) <= n_se * se + 1e-9), (freq, probs)
