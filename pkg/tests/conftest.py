"""Shared test helpers: independent oracles and scripted classifiers."""

from __future__ import annotations

import numpy as np
import pytest


def central_difference(f, arrays, h=1e-5):
    """Gradients of ``f(list_of_arrays) -> float`` by central differences.

    Deliberately dumb and independent of the autodiff path: perturbs one
    scalar at a time.
    """
    grads = []
    for k, arr in enumerate(arrays):
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            up = [a.copy() for a in arrays]
            dn = [a.copy() for a in arrays]
            up[k][i] += h
            dn[k][i] -= h
            g[i] = (f(up) - f(dn)) / (2.0 * h)
        grads.append(g)
    return grads


def rel_err(a, b):
    """max |a-b| / (1 + max |b|), the agreement metric used throughout."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b)) / (1.0 + np.max(np.abs(b))))


class ConstantClassifier:
    """Predicts one fixed class for every sample."""

    def __init__(self, label: int):
        self.label = label

    def predict(self, x):
        return np.full(np.asarray(x).shape[0], self.label, dtype=np.int64)


class LookupClassifier:
    """Scripted predictions keyed by a sample's first feature value.

    Tests construct grids whose feature 0 is a unique exact float per
    sample, so the lookup is unambiguous.
    """

    def __init__(self, table: dict, default: int = 0):
        self.table = dict(table)
        self.default = default

    def predict(self, x):
        x = np.asarray(x)
        return np.array(
            [self.table.get(float(row[0]), self.default) for row in x], dtype=np.int64
        )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
