"""Proximal operators.

Two routes to the same denoising subproblem live here side by side: the
closed-form per-transform shrinkage proximal used by the parallel solver, and
a nested dual-ascent TV proximal (plus a long-run brute-force variant for
tiny grids) used as the reference.  The split proximal for transform k solves

    prox_{gamma R_k}(z),   R_k(x) = K * lam * sqrt(2) * sum_{n in H_k} |[W_k x]_n|

whose closed form is: transform, soft-threshold the detail slots by
sqrt(2)*K*gamma*lam, transform back.  Averaging the K of them with weight 1/K
recovers the TV regularizer exactly, which is the whole point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .grids import SignalGrid
from .haar import SQRT2, ShiftedHaarFrame, _forward_axis, _inverse_axis, neighbor_tables


@dataclass(frozen=True)
class ProxParams:
    """Step size, regularization weight, and frame redundancy for one prox call."""

    gamma: float
    lam: float
    K: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("step size gamma must be positive")
        if self.lam < 0:
            raise ValueError("regularization weight lam must be nonnegative")
        if self.K < 1:
            raise ValueError("frame redundancy K must be a positive integer")
        if not math.isfinite(self.threshold):
            raise ValueError("shrinkage threshold must be finite")

    @property
    def threshold(self) -> float:
        """Shrinkage level sqrt(2) * K * gamma * lam."""
        return SQRT2 * self.K * self.gamma * self.lam


@dataclass
class DualState:
    """Dual variable of the nested TV proximal, for optional warm starts.

    ``p`` has one entry per gradient coefficient (D x N), kept in [-1, 1] by
    projection; ``r`` is the momentum companion and ``t`` the inertia scalar.
    """

    p: np.ndarray
    r: np.ndarray
    t: float = 1.0


def soft_threshold(y, tau):
    """Component-wise shrinkage max(|y|-tau, 0)*sign(y); maps 0 to 0.

    Accepts scalars or arrays.
    """
    if np.any(np.asarray(tau) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)


def _prox_haar_array(frame: ShiftedHaarFrame, k: int, z: np.ndarray, tau: float) -> np.ndarray:
    """Shrinkage proximal for W_k on an already-shaped array."""
    d, s = frame.atoms[k]
    c = _forward_axis(z, d, s)
    flat = c.reshape(-1)
    mask = frame.detail_mask(k)
    flat[mask] = soft_threshold(flat[mask], tau)
    return _inverse_axis(c, d, s)


def prox_shifted_haar(frame: ShiftedHaarFrame, k: int, z: SignalGrid,
                      params: ProxParams) -> SignalGrid:
    """Closed-form proximal of gamma*R_k: shrink W_k's detail coefficients.

    Scaling coefficients pass through untouched; only the scaled differences
    are thresholded, at level ``params.threshold``.
    """
    frame._check_k(k)
    if z.dims != frame.dims:
        raise ValueError(f"grid dims {z.dims} do not match frame dims {frame.dims}")
    out = _prox_haar_array(frame, k, z.asarray(), params.threshold)
    return SignalGrid(frame.dims, out.reshape(-1))


class ProxTVResult(NamedTuple):
    x: SignalGrid
    converged: bool
    iterations: int
    dual: DualState


def prox_tv_dual(z: SignalGrid, tau: float, inner_iters: int = 200,
                 tol: float = 1e-10, warm: DualState | None = None) -> ProxTVResult:
    """Nested TV proximal via accelerated projected gradient on the dual.

    Solves prox_{tau*||D .||_1}(z) by minimizing 0.5*||z - tau*D^T p||^2 over
    ||p||_inf <= 1 (dual step 1/(tau^2*4D)) and recovering x = z - tau*D^T p.
    Stops on relative dual-objective change <= tol or at ``inner_iters``;
    non-convergence shows up in the returned flag, never as an error.

    The dual starts at p = 0 unless a ``warm`` state from a previous call on
    the same grid shape is supplied.
    """
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    if inner_iters < 1:
        raise ValueError("inner_iters must be at least 1")
    n = z.size
    ndim = z.ndim
    if tau == 0.0:
        zero = np.zeros((ndim, n))
        return ProxTVResult(z, True, 0, DualState(zero, zero.copy(), 1.0))
    nxt, prv = neighbor_tables(z.dims)
    p0 = warm.p if warm is not None else np.zeros((ndim, n))
    x, p, iters, converged = _kernels.dual_prox_fgp(
        z.data, nxt, prv, float(tau), int(inner_iters), float(tol), p0)
    return ProxTVResult(SignalGrid(z.dims, x), bool(converged), int(iters),
                        DualState(p, p.copy(), 1.0))


BRUTEFORCE_MAX_N = 8


def prox_tv_bruteforce(z: SignalGrid, tau: float, iterations: int = 1_000_000) -> SignalGrid:
    """Test oracle: TV proximal on tiny grids, solved to saturation.

    Runs plain projected gradient on the dual at half the standard step for
    at least one million sweeps, then verifies the subgradient optimality
    condition (z - x)/tau in the subdifferential of ||D .||_1 at x:
    every dual entry sits in [-1, 1] and equals sign([Dx]_n) to 1e-8 wherever
    [Dx]_n is nonzero.  Fails loudly if the certificate does not hold.
    """
    if z.size > BRUTEFORCE_MAX_N:
        raise ValueError(f"brute-force oracle is for N <= {BRUTEFORCE_MAX_N}, got N={z.size}")
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    if iterations < 1_000_000:
        raise ValueError("oracle contract requires at least 1e6 iterations")
    if tau == 0.0:
        return z
    nxt, prv = neighbor_tables(z.dims)
    x, p = _kernels.dual_prox_plain(z.data, nxt, prv, float(tau), int(iterations), 0.5)
    # optimality certificate
    scale = max(1.0, float(np.max(np.abs(z.data))))
    for d in range(z.ndim):
        diff = x[nxt[d]] - x
        active = np.abs(diff) > 1e-9 * scale
        if np.any(np.abs(p[d]) > 1.0 + 1e-12):
            raise RuntimeError("dual variable escaped the unit box")
        mismatch = np.abs(p[d][active] - np.sign(diff[active]))
        if active.any() and float(mismatch.max(initial=0.0)) > 1e-8:
            raise RuntimeError(
                f"subgradient certificate failed along dim {d}: "
                f"max |p - sign| = {float(mismatch.max()):.3e}")
    return SignalGrid(z.dims, x)
