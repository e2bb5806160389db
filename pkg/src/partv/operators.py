"""Linear forward models with adjoints and step-size machinery.

Operators are immutable after construction and safe for concurrent use; all
matrix products go through numpy's BLAS path, whose reduction order is fixed
for a given build and thread count, so repeated applications are
bit-identical.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .grids import SeededRng


class LinearOperator:
    """Abstract forward model H: R^N -> R^M with an adjoint."""

    shape: tuple  # (M, N)

    def apply(self, x) -> np.ndarray:
        """H x."""
        raise NotImplementedError

    def apply_adjoint(self, u) -> np.ndarray:
        """H^T u."""
        raise NotImplementedError

    def _check_input(self, v, length, name):
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if v.size != length:
            raise ValueError(f"{name} has length {v.size}, expected {length}")
        return v


class DenseOperator(LinearOperator):
    """Explicit M x N matrix, row-major."""

    def __init__(self, entries):
        entries = np.ascontiguousarray(entries, dtype=np.float64)
        if entries.ndim != 2:
            raise ValueError("entries must be a 2-d matrix")
        if not np.all(np.isfinite(entries)):
            raise ValueError("matrix entries must be finite")
        entries.setflags(write=False)
        self.entries = entries
        self.shape = entries.shape

    def apply(self, x):
        x = self._check_input(x, self.shape[1], "x")
        return self.entries @ x

    def apply_adjoint(self, u):
        u = self._check_input(u, self.shape[0], "u")
        return self.entries.T @ u


class IdentityOperator(LinearOperator):
    def __init__(self, n: int):
        n = int(n)
        if n < 1:
            raise ValueError("size must be positive")
        self.shape = (n, n)

    def apply(self, x):
        return self._check_input(x, self.shape[1], "x").copy()

    def apply_adjoint(self, u):
        return self._check_input(u, self.shape[0], "u").copy()


def sample_gaussian_operator(m: int, n: int, rng: SeededRng) -> DenseOperator:
    """Random measurement matrix with i.i.d. N(0, 1/M) entries."""
    if m < 1 or n < 1:
        raise ValueError("operator dimensions must be positive")
    entries = rng.standard_normal((m, n)) / np.sqrt(m)
    return DenseOperator(entries)


class LipschitzEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


def lipschitz_constant(op: LinearOperator, tol: float = 1e-8,
                       max_iter: int = 10000, rng: SeededRng | None = None) -> LipschitzEstimate:
    """Largest eigenvalue of H^T H by power iteration from a random start.

    Stops when the relative change of the Rayleigh quotient between
    consecutive iterations is at most ``tol``; if the budget runs out first
    the last estimate is returned with ``converged=False``.  A zero (or
    numerically rank-zero) operator yields 0 with ``converged=True``; callers
    choosing steps as fractions of 1/L must reject that case themselves.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if rng is None:
        rng = SeededRng(0)
    n = op.shape[1]
    v = rng.standard_normal(n)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ValueError("degenerate random start")
    v = v / nv
    lam_prev = None
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = op.apply_adjoint(op.apply(v))
        lam = float(np.dot(v, w))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return LipschitzEstimate(0.0, True, it)
        v = w / nw
        if lam_prev is not None and abs(lam - lam_prev) <= tol * abs(lam):
            return LipschitzEstimate(lam, True, it)
        lam_prev = lam
    return LipschitzEstimate(lam, False, max_iter)


def gradient_data_term(op: LinearOperator, y, x) -> np.ndarray:
    """Gradient of the data term 0.5*||y - Hx||^2, i.e. H^T (Hx - y)."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size != op.shape[0]:
        raise ValueError(f"y has length {y.size}, expected {op.shape[0]}")
    return op.apply_adjoint(op.apply(x) - y)
