"""Compiled inner loops.

The nested dual TV proximal and the long reference runs execute millions of
tiny array sweeps; plain numpy spends more time dispatching than computing at
these sizes, so the loops live here as numba kernels.  Everything is
sequential and allocation-light, which keeps results bit-deterministic for
fixed inputs.

Grids are passed flat together with periodic neighbor index tables
(next/prev per dimension, see :func:`partv.haar.neighbor_tables`); the
forward difference along dimension d is ``x[nxt[d]] - x`` and its transpose
is ``p[prv[d]] - p``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def dual_prox_fgp(z, nxt, prv, tau, inner_iters, tol, p_init):
    """Accelerated projected gradient on the TV-prox dual.

    Minimizes F(p) = 0.5*||z - tau*Dt(p)||^2 over ||p||_inf <= 1 with the
    dual step 1/(tau^2 * 4D) and FISTA momentum, then recovers
    x = z - tau*Dt(p).  Stops when the relative change of F between
    consecutive iterations drops to ``tol`` or at ``inner_iters``.

    Returns (x, p, iterations_used, converged).
    """
    ndim = nxt.shape[0]
    n = z.shape[0]
    p = p_init.copy()
    p_prev = np.empty_like(p)
    r = p_init.copy()
    xr = np.empty(n)
    xp = np.empty(n)
    c = 1.0 / (tau * 4.0 * ndim)

    # F at the starting point
    f_prev = 0.0
    for i in range(n):
        acc = z[i]
        for d in range(ndim):
            acc -= tau * (p[d, prv[d, i]] - p[d, i])
        xp[i] = acc
        f_prev += acc * acc
    f_prev *= 0.5

    t = 1.0
    converged = False
    iters = 0
    for k in range(inner_iters):
        iters = k + 1
        # gradient point: xr = z - tau*Dt(r)
        for i in range(n):
            acc = z[i]
            for d in range(ndim):
                acc -= tau * (r[d, prv[d, i]] - r[d, i])
            xr[i] = acc
        # projected step off the momentum point
        for d in range(ndim):
            for i in range(n):
                p_prev[d, i] = p[d, i]
                v = r[d, i] + c * (xr[nxt[d, i]] - xr[i])
                if v > 1.0:
                    v = 1.0
                elif v < -1.0:
                    v = -1.0
                p[d, i] = v
        # dual objective at the new p (xp doubles as the primal candidate)
        f_new = 0.0
        for i in range(n):
            acc = z[i]
            for d in range(ndim):
                acc -= tau * (p[d, prv[d, i]] - p[d, i])
            xp[i] = acc
            f_new += acc * acc
        f_new *= 0.5
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        for d in range(ndim):
            for i in range(n):
                r[d, i] = p[d, i] + beta * (p[d, i] - p_prev[d, i])
        t = t_new
        df = f_prev - f_new
        if df < 0.0:
            df = -df
        if df <= tol * f_new:
            converged = True
            break
        f_prev = f_new
    return xp, p, iters, converged


@njit(cache=True)
def dual_prox_plain(z, nxt, prv, tau, iterations, step_scale):
    """Plain projected gradient on the TV-prox dual, fixed iteration count.

    Runs exactly ``iterations`` sweeps at step_scale times the standard dual
    step; the brute-force oracle calls this with a long budget and a
    conservative step.  Returns (x, p).
    """
    ndim = nxt.shape[0]
    n = z.shape[0]
    p = np.zeros((ndim, n))
    x = np.empty(n)
    c = step_scale / (tau * 4.0 * ndim)
    for _ in range(iterations):
        for i in range(n):
            acc = z[i]
            for d in range(ndim):
                acc -= tau * (p[d, prv[d, i]] - p[d, i])
            x[i] = acc
        for d in range(ndim):
            for i in range(n):
                v = p[d, i] + c * (x[nxt[d, i]] - x[i])
                if v > 1.0:
                    v = 1.0
                elif v < -1.0:
                    v = -1.0
                p[d, i] = v
    for i in range(n):
        acc = z[i]
        for d in range(ndim):
            acc -= tau * (p[d, prv[d, i]] - p[d, i])
        x[i] = acc
    return x, p


@njit(cache=True)
def tv_flat(x, nxt, lam):
    """Anisotropic TV of a flat grid via the neighbor tables."""
    total = 0.0
    for d in range(nxt.shape[0]):
        for i in range(x.shape[0]):
            total += abs(x[nxt[d, i]] - x[i])
    return lam * total


@njit(cache=True)
def ista_reference_dense(h, ht, y, x0, gamma, lam, nxt, prv,
                         iterations, inner_iters, inner_tol):
    """Reference ISTA with the nested dual TV proximal, dense forward model.

    One fused loop so that very long reference runs (used to pin optimal
    costs) stay cheap.  The per-iteration cost C(x^t) is recorded by reusing
    the residual computed for the next gradient step, so each iteration does
    exactly one H and one H^T product.

    Returns (x_final, costs, inner_failures) where costs[t-1] = C(x^t).
    """
    n = x0.shape[0]
    x = x0.copy()
    costs = np.empty(iterations)
    tau = gamma * lam
    ndim = nxt.shape[0]
    p0 = np.zeros((ndim, n))
    inner_fail = 0
    tv_pend = 0.0
    for t in range(1, iterations + 1):
        r = np.dot(h, x) - y
        data = 0.5 * np.dot(r, r)
        if t >= 2:
            costs[t - 2] = data + tv_pend
        g = np.dot(ht, r)
        z = x - gamma * g
        if tau > 0.0:
            x, _, _, conv = dual_prox_fgp(z, nxt, prv, tau, inner_iters, inner_tol, p0)
            if not conv:
                inner_fail += 1
        else:
            x = z
        tv_pend = tv_flat(x, nxt, lam)
    r = np.dot(h, x) - y
    costs[iterations - 1] = 0.5 * np.dot(r, r) + tv_pend
    return x, costs, inner_fail
