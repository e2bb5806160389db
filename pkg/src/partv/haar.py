"""Redundant shifted-Haar transform, discrete gradient, and the TV functional.

The frame is the union of K = 2D orthogonal transforms W_k, one per
(dimension d, shift s) pair.  W_k pairs adjacent samples along dimension d
starting at parity s with periodic wrap and maps each pair (a, b) to the
orthonormal Haar pair ((a+b)/sqrt(2), (b-a)/sqrt(2)).  The scaling value is
stored at the pair's first slot and the detail value at the second, so
coefficient grids keep the signal's shape and the detail set H_k is a simple
parity mask.  The pseudo-inverse (1/K) * sum_k W_k^T makes the family a
Parseval frame: applying it to the stacked forward transforms recovers the
signal exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grids import MAX_NDIM, SignalGrid

SQRT2 = math.sqrt(2.0)


class UnsupportedShapeError(ValueError):
    """Raised for grid shapes the frame cannot pair (odd dimension sizes)."""


@dataclass(frozen=True)
class FrameCoefficients:
    """Coefficients of one W_k: scaling and detail values interleaved in place."""

    k: int
    dims: tuple
    data: np.ndarray

    def asarray(self) -> np.ndarray:
        return self.data.reshape(self.dims)


def _axis_slices(ndim: int, d: int):
    even = [slice(None)] * ndim
    odd = [slice(None)] * ndim
    even[d] = slice(0, None, 2)
    odd[d] = slice(1, None, 2)
    return tuple(even), tuple(odd)


def _forward_axis(arr: np.ndarray, d: int, s: int) -> np.ndarray:
    """Single-level Haar pairs along axis d at parity s, periodic wrap."""
    xr = np.roll(arr, -s, axis=d) if s else arr
    even, odd = _axis_slices(arr.ndim, d)
    a = xr[even]
    b = xr[odd]
    out = np.empty_like(arr)
    out[even] = (a + b) / SQRT2
    out[odd] = (b - a) / SQRT2
    if s:
        out = np.roll(out, s, axis=d)
    return out


def _inverse_axis(arr: np.ndarray, d: int, s: int) -> np.ndarray:
    cr = np.roll(arr, -s, axis=d) if s else arr
    even, odd = _axis_slices(arr.ndim, d)
    sc = cr[even]
    de = cr[odd]
    out = np.empty_like(arr)
    out[even] = (sc - de) / SQRT2
    out[odd] = (sc + de) / SQRT2
    if s:
        out = np.roll(out, s, axis=d)
    return out


class ShiftedHaarFrame:
    """Union of K = 2D scaled orthogonal shifted-Haar transforms.

    Atoms are ordered (d=0,s=0), (d=0,s=1), (d=1,s=0), ... and that order is
    the documented reduction order for every K-way sum, so runs are
    reproducible regardless of how the K branches are scheduled.
    """

    def __init__(self, dims):
        dims = tuple(int(d) for d in dims)
        if len(dims) == 0 or len(dims) > MAX_NDIM:
            raise UnsupportedShapeError(f"need 1..{MAX_NDIM} dimensions, got {len(dims)}")
        if any(d < 2 or d % 2 for d in dims):
            raise UnsupportedShapeError(
                f"every dimension must be even and >= 2 for periodic pairing, got {dims}"
            )
        self.dims = dims
        self.ndim = len(dims)
        self.K = 2 * self.ndim
        self.size = math.prod(dims)
        self.atoms = tuple((d, s) for d in range(self.ndim) for s in (0, 1))
        self._masks = [None] * self.K

    def _check_k(self, k: int) -> tuple:
        if not 0 <= k < self.K:
            raise ValueError(f"transform index k={k} out of range [0, {self.K})")
        return self.atoms[k]

    def detail_mask(self, k: int) -> np.ndarray:
        """Flat boolean mask of the detail slots H_k (exactly N/2 entries true)."""
        d, s = self._check_k(k)
        if self._masks[k] is None:
            n_d = self.dims[d]
            along = (np.arange(n_d) - s) % 2 == 1
            shape = [1] * self.ndim
            shape[d] = n_d
            mask = np.broadcast_to(along.reshape(shape), self.dims)
            flat = np.ascontiguousarray(mask).reshape(-1)
            flat.setflags(write=False)
            self._masks[k] = flat
        return self._masks[k]

    def forward(self, k: int, x: SignalGrid) -> FrameCoefficients:
        """Apply W_k to a grid."""
        d, s = self._check_k(k)
        if x.dims != self.dims:
            raise ValueError(f"grid dims {x.dims} do not match frame dims {self.dims}")
        out = _forward_axis(x.asarray(), d, s)
        return FrameCoefficients(k=k, dims=self.dims, data=out.reshape(-1))

    def inverse(self, k: int, c: FrameCoefficients) -> SignalGrid:
        """Apply W_k^T (= W_k^{-1}) to a coefficient grid."""
        d, s = self._check_k(k)
        if c.dims != self.dims:
            raise ValueError(f"coefficient dims {c.dims} do not match frame dims {self.dims}")
        out = _inverse_axis(c.data.reshape(self.dims), d, s)
        return SignalGrid(self.dims, out.reshape(-1))

    def pseudo_inverse(self, coeffs) -> SignalGrid:
        """(1/K) * sum_k W_k^T c_k, reduced in fixed atom order."""
        coeffs = list(coeffs)
        if len(coeffs) != self.K:
            raise ValueError(f"need exactly K={self.K} coefficient sets, got {len(coeffs)}")
        acc = None
        for k, c in enumerate(coeffs):
            d, s = self._check_k(k)
            if c.dims != self.dims:
                raise ValueError(f"coefficient dims {c.dims} do not match frame dims {self.dims}")
            term = _inverse_axis(c.data.reshape(self.dims), d, s)
            acc = term if acc is None else acc + term
        return SignalGrid(self.dims, (acc / self.K).reshape(-1))


def frame_new(dims) -> ShiftedHaarFrame:
    return ShiftedHaarFrame(dims)


def discrete_gradient(x: SignalGrid, d: int) -> SignalGrid:
    """Periodic first difference along dimension ``d``: x[next_d(i)] - x[i]."""
    if not 0 <= d < x.ndim:
        raise ValueError(f"dimension index {d} out of range for {x.ndim}-d grid")
    arr = x.asarray()
    out = np.roll(arr, -1, axis=d) - arr
    return SignalGrid(x.dims, out.reshape(-1))


def tv_norm(x: SignalGrid, lam: float) -> float:
    """Anisotropic total variation: lam * sum_d sum_n |x[next_d(n)] - x[n]|."""
    if lam < 0:
        raise ValueError("regularization weight must be nonnegative")
    arr = x.asarray()
    total = 0.0
    for d in range(x.ndim):
        total += float(np.sum(np.abs(np.roll(arr, -1, axis=d) - arr)))
    return lam * total


@lru_cache(maxsize=32)
def neighbor_tables(dims: tuple):
    """Flat periodic neighbor indices per dimension: (next, prev), each (D, N) int64.

    next[d, i] is the flat index of i's successor along dimension d, so
    the discrete gradient is x[next[d]] - x and its transpose uses prev.
    """
    dims = tuple(int(d) for d in dims)
    n = math.prod(dims)
    idx = np.arange(n, dtype=np.int64).reshape(dims)
    nxt = np.empty((len(dims), n), dtype=np.int64)
    prv = np.empty((len(dims), n), dtype=np.int64)
    for d in range(len(dims)):
        nxt[d] = np.roll(idx, -1, axis=d).reshape(-1)
        prv[d] = np.roll(idx, 1, axis=d).reshape(-1)
    nxt.setflags(write=False)
    prv.setflags(write=False)
    return nxt, prv
