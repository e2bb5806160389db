"""Self-check suites behind the CLI's frame-check and prox-check subcommands."""

from __future__ import annotations

import math

import numpy as np

from .grids import SeededRng, SignalGrid
from .haar import ShiftedHaarFrame, tv_norm
from .prox import ProxParams, prox_shifted_haar, prox_tv_bruteforce, prox_tv_dual


def frame_check(seed: int = 0) -> list:
    """Frame identity suite: (name, passed, worst-deviation) triples."""
    rng = SeededRng(seed)
    shapes = [(4,), (8,), (32,), (4, 4), (32, 32)]
    worst_recon = 0.0
    worst_parseval = 0.0
    worst_tv = 0.0
    for dims in shapes:
        frame = ShiftedHaarFrame(dims)
        for _ in range(8):
            x = SignalGrid(dims, rng.standard_normal(frame.size))
            coeffs = [frame.forward(k, x) for k in range(frame.K)]
            recon = frame.pseudo_inverse(coeffs)
            worst_recon = max(worst_recon, float(np.max(np.abs(recon.data - x.data))))
            energy = sum(float(np.dot(c.data, c.data)) for c in coeffs)
            xsq = float(np.dot(x.data, x.data))
            worst_parseval = max(worst_parseval, abs(energy - frame.K * xsq) / (frame.K * xsq))
            tv = tv_norm(x, 1.0)
            frame_sum = math.sqrt(2.0) * sum(
                float(np.sum(np.abs(c.data[frame.detail_mask(k)])))
                for k, c in enumerate(coeffs))
            worst_tv = max(worst_tv, abs(tv - frame_sum) / tv)
    return [
        ("pseudo-inverse reconstruction (W+W = I)", worst_recon <= 1e-12, worst_recon),
        ("Parseval tightness (sum_k |W_k x|^2 = K |x|^2)", worst_parseval <= 1e-10, worst_parseval),
        ("TV/frame identity", worst_tv <= 1e-10, worst_tv),
    ]


def prox_check(seed: int = 0) -> list:
    """Proximal oracle suite: shrinkage-prox optimality and dual-vs-bruteforce."""
    rng = SeededRng(seed)
    # subgradient characterization of the shifted-Haar proximal
    frame = ShiftedHaarFrame((8, 8))
    worst_opt = 0.0
    for i in range(25):
        z = SignalGrid(frame.dims, rng.standard_normal(frame.size))
        gamma = 10.0 ** float(rng.standard_normal()) * 0.1
        lam = abs(float(rng.standard_normal())) * 0.3
        params = ProxParams(gamma=gamma, lam=lam, K=frame.K)
        k = i % frame.K
        worst_opt = max(worst_opt, prox_haar_optimality_gap(frame, k, z, params))
    # nested dual prox against the saturated oracle
    worst_prox = 0.0
    for s in range(10):
        child = rng.child(s)
        z = SignalGrid((6,), child.standard_normal(6))
        tau = 0.05 + 0.4 * abs(float(child.standard_normal()))
        ref = prox_tv_bruteforce(z, tau)
        got = prox_tv_dual(z, tau, inner_iters=50000, tol=1e-12)
        worst_prox = max(worst_prox, float(np.max(np.abs(got.x.data - ref.data))))
    return [
        ("shifted-Haar prox subgradient optimality", worst_opt <= 1e-10, worst_opt),
        ("dual TV prox vs brute-force oracle", worst_prox <= 1e-6, worst_prox),
    ]


def prox_haar_optimality_gap(frame: ShiftedHaarFrame, k: int, z: SignalGrid,
                             params: ProxParams) -> float:
    """Worst violation of the prox optimality conditions for one evaluation.

    v = (z - x*)/gamma must be a subgradient of R_k at x*: in W_k
    coordinates its scaling entries vanish, detail entries equal
    lam*sqrt(2)*K*sign on the support of x*'s details, and lie within
    [-lam*sqrt(2)*K, lam*sqrt(2)*K] off the support.
    """
    x_star = prox_shifted_haar(frame, k, z, params)
    v = SignalGrid(frame.dims, (z.data - x_star.data) / params.gamma)
    wv = frame.forward(k, v).data
    wx = frame.forward(k, x_star).data
    mask = frame.detail_mask(k)
    level = math.sqrt(2.0) * frame.K * params.lam
    worst = float(np.max(np.abs(wv[~mask]), initial=0.0))
    active = mask & (wx != 0.0)
    inactive = mask & (wx == 0.0)
    if np.any(active):
        worst = max(worst, float(np.max(np.abs(wv[active] - level * np.sign(wx[active])))))
    if np.any(inactive):
        worst = max(worst, float(np.max(np.abs(wv[inactive])) - level))
    return worst
