"""Iterative schemes for TV-regularized least squares and their diagnostics.

Three variants share one driver:

* ``parallel-prox``  -- gradient step, then the average of the K closed-form
  shifted-Haar proximals (no nested iterations);
* ``fast-parallel-prox`` -- the same proximal stage on top of FISTA momentum;
* ``ista-ref``       -- classic ISTA whose TV proximal is evaluated by the
  nested dual-ascent method, used as the reference.

The diagnostics half turns the convergence analysis into runtime checks: a
bound G on gradient and subgradient norms is estimated along a recorded
trajectory, the per-iteration descent inequality

    C(x^t) - C(x) <= (1/(2*gamma)) * (||x^{t-1}-x||^2 - ||x^t-x||^2) + 8*gamma*G^2

is evaluated as a residual for any anchor x, and 8*gamma*G^2 is exposed as
the plateau bound that a fixed-step run can be tested against.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import _kernels
from .grids import SignalGrid
from .haar import ShiftedHaarFrame, neighbor_tables, tv_norm
from .operators import DenseOperator, IdentityOperator, LinearOperator
from .prox import _prox_haar_array

VARIANTS = ("ista-ref", "parallel-prox", "fast-parallel-prox")


class NumericalFailureError(RuntimeError):
    """An iterate went non-finite; carries the iteration index and partial records."""

    def __init__(self, iteration: int, records=None):
        super().__init__(f"non-finite iterate at iteration {iteration}")
        self.iteration = iteration
        self.records = list(records) if records is not None else []


def worker_count() -> int:
    """Thread budget for concurrent stages; TVPAR_THREADS caps it (0 = auto)."""
    raw = os.environ.get("TVPAR_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValueError(f"TVPAR_THREADS must be an integer, got {raw!r}") from exc
    if cap < 0:
        raise ValueError("TVPAR_THREADS must be nonnegative")
    auto = os.cpu_count() or 1
    return auto if cap == 0 else cap


@dataclass(frozen=True)
class ProblemInstance:
    """Forward model, measurements, regularization weight, and frame."""

    op: LinearOperator
    y: np.ndarray
    lam: float
    frame: ShiftedHaarFrame

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "y", y)
        m, n = self.op.shape
        if y.size != m:
            raise ValueError(f"y has length {y.size}, operator expects {m}")
        if self.frame.size != n:
            raise ValueError(f"frame covers N={self.frame.size}, operator expects {n}")
        if self.lam < 0:
            raise ValueError("regularization weight must be nonnegative")


@dataclass
class SolverConfig:
    """Algorithm selection and step policy.

    ``inner_iters``/``inner_tol`` only matter for the ista-ref variant.
    ``record_timing`` is off by default so that emitted records are fully
    deterministic; switch it on for profiling runs.
    """

    variant: str
    gamma: float
    iterations: int
    inner_iters: int = 200
    inner_tol: float = 1e-10
    record_diagnostics: bool = False
    concurrent_prox: bool = False
    record_timing: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if not self.gamma > 0:
            raise ValueError("step size gamma must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")


@dataclass
class SolverState:
    """Iterates as flat float64 arrays; ``u``/``q`` drive the fast variant."""

    x: np.ndarray
    x_prev: np.ndarray
    u: np.ndarray
    q: float
    t: int


@dataclass(frozen=True)
class IterationRecord:
    t: int
    cost: float
    gap: float | None = None
    wall_ms: float | None = None
    inner_converged: bool | None = field(default=None, compare=False)


@dataclass(frozen=True)
class IterationSnapshot:
    """Per-iteration quantities needed by the convergence diagnostics."""

    t: int
    gamma: float
    x_prev: np.ndarray
    grad_prev: np.ndarray
    z: np.ndarray
    prox_points: tuple
    x: np.ndarray


@dataclass
class SolveResult:
    state: SolverState
    records: list
    trajectory: list | None
    instance: ProblemInstance

    @property
    def solution(self) -> SignalGrid:
        return SignalGrid(self.instance.frame.dims, self.state.x)


def cost(instance: ProblemInstance, x: SignalGrid) -> float:
    """C(x) = 0.5*||y - Hx||^2 + lam*||Dx||_1."""
    if x.dims != instance.frame.dims:
        raise ValueError(f"grid dims {x.dims} do not match frame dims {instance.frame.dims}")
    return _cost_array(instance, x.data)


def _cost_array(instance, x):
    r = instance.op.apply(x) - instance.y
    nxt, _ = neighbor_tables(instance.frame.dims)
    return 0.5 * float(np.dot(r, r)) + float(_kernels.tv_flat(x, nxt, instance.lam))


def init_state(instance: ProblemInstance, x0: SignalGrid | None = None) -> SolverState:
    """Fresh state at x0 (zeros when omitted), with u^0 = x^0 and q_0 = 1."""
    n = instance.frame.size
    if x0 is None:
        x = np.zeros(n)
    else:
        if x0.dims != instance.frame.dims:
            raise ValueError(f"x0 dims {x0.dims} do not match frame dims {instance.frame.dims}")
        x = x0.data.copy()
    return SolverState(x=x, x_prev=x.copy(), u=x.copy(), q=1.0, t=0)


def _require_finite(arr, t, records=None):
    if not np.all(np.isfinite(arr)):
        raise NumericalFailureError(t, records)


def _prox_stage(instance, gamma, z, executor, want_terms):
    """Average of the K shrinkage proximals, reduced in fixed atom order."""
    frame = instance.frame
    tau = math.sqrt(2.0) * frame.K * gamma * instance.lam
    zs = z.reshape(frame.dims)
    if executor is not None and frame.K > 1:
        terms = list(executor.map(
            lambda k: _prox_haar_array(frame, k, zs, tau), range(frame.K)))
    else:
        terms = [_prox_haar_array(frame, k, zs, tau) for k in range(frame.K)]
    acc = terms[0].copy()
    for term in terms[1:]:
        acc += term
    acc /= frame.K
    flat = acc.reshape(-1)
    return flat, ([t.reshape(-1) for t in terms] if want_terms else None)


def _gradient(instance, x, r=None):
    if r is None:
        r = instance.op.apply(x) - instance.y
    return instance.op.apply_adjoint(r), r


def step_parallel_prox(instance: ProblemInstance, config: SolverConfig,
                       state: SolverState) -> SolverState:
    """One plain parallel-proximal iteration.

    Gradient step to z, then the average of the K independent shifted-Haar
    proximals with threshold sqrt(2)*K*gamma*lam.
    """
    t = state.t + 1
    g, _ = _gradient(instance, state.x)
    z = state.x - config.gamma * g
    _require_finite(z, t)
    if config.concurrent_prox:
        with ThreadPoolExecutor(max_workers=min(instance.frame.K, worker_count())) as ex:
            x_new, _ = _prox_stage(instance, config.gamma, z, ex, False)
    else:
        x_new, _ = _prox_stage(instance, config.gamma, z, None, False)
    _require_finite(x_new, t)
    return SolverState(x=x_new, x_prev=state.x.copy(), u=state.u.copy(), q=state.q, t=t)


def step_fast_parallel_prox(instance: ProblemInstance, config: SolverConfig,
                            state: SolverState) -> SolverState:
    """One accelerated iteration: proximal stage at the momentum point u."""
    t = state.t + 1
    g, _ = _gradient(instance, state.u)
    z = state.u - config.gamma * g
    _require_finite(z, t)
    if config.concurrent_prox:
        with ThreadPoolExecutor(max_workers=min(instance.frame.K, worker_count())) as ex:
            x_new, _ = _prox_stage(instance, config.gamma, z, ex, False)
    else:
        x_new, _ = _prox_stage(instance, config.gamma, z, None, False)
    _require_finite(x_new, t)
    q_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.q * state.q))
    u_new = x_new + ((state.q - 1.0) / q_new) * (x_new - state.x)
    _require_finite(u_new, t)
    return SolverState(x=x_new, x_prev=state.x.copy(), u=u_new, q=q_new, t=t)


def step_ista_reference(instance: ProblemInstance, config: SolverConfig,
                        state: SolverState) -> SolverState:
    """One reference ISTA iteration with the nested dual TV proximal."""
    t = state.t + 1
    g, _ = _gradient(instance, state.x)
    z = state.x - config.gamma * g
    _require_finite(z, t)
    x_new, _ = _ista_prox(instance, config, z)
    _require_finite(x_new, t)
    return SolverState(x=x_new, x_prev=state.x.copy(), u=state.u.copy(), q=state.q, t=t)


def _ista_prox(instance, config, z):
    tau = config.gamma * instance.lam
    if tau == 0.0:
        return z.copy(), True
    nxt, prv = neighbor_tables(instance.frame.dims)
    p0 = np.zeros((instance.frame.ndim, instance.frame.size))
    x, _, _, conv = _kernels.dual_prox_fgp(z, nxt, prv, tau,
                                           config.inner_iters, config.inner_tol, p0)
    return x, bool(conv)


def run(instance: ProblemInstance, config: SolverConfig,
        x0: SignalGrid | None = None, cstar: float | None = None) -> SolveResult:
    """Run the configured variant, recording cost (and gap vs ``cstar``) per iteration.

    Deterministic for fixed inputs, including across serial and concurrent
    proximal evaluation.  Raises :class:`NumericalFailureError` carrying the
    partial records if an iterate goes non-finite.
    """
    if cstar is not None and not cstar > 0:
        raise ValueError("cstar must be positive to define relative gaps")
    state = init_state(instance, x0)
    records: list[IterationRecord] = []
    trajectory: list[IterationSnapshot] | None = [] if config.record_diagnostics else None
    nxt, _ = neighbor_tables(instance.frame.dims)
    lam = instance.lam
    gamma = config.gamma
    executor = None
    try:
        if config.concurrent_prox and instance.frame.K > 1:
            executor = ThreadPoolExecutor(max_workers=min(instance.frame.K, worker_count()))
        fast = config.variant == "fast-parallel-prox"
        pending = None  # (t, tv(x^t), inner_flag) awaiting the next residual
        for t in range(1, config.iterations + 1):
            tic = time.perf_counter() if config.record_timing else None
            point = state.u if fast else state.x
            g, r = _gradient(instance, point)
            if pending is not None:
                pt, ptv, pflag = pending
                c = 0.5 * float(np.dot(r, r)) + ptv
                records.append(_make_record(pt, c, cstar, pflag, None))
                pending = None
            z = point - gamma * g
            _require_finite(z, t, records)
            inner_flag = None
            if config.variant == "ista-ref":
                x_new, inner_flag = _ista_prox(instance, config, z)
                terms = None
            else:
                x_new, terms = _prox_stage(instance, gamma, z, executor,
                                           config.record_diagnostics)
            _require_finite(x_new, t, records)
            if trajectory is not None:
                trajectory.append(IterationSnapshot(
                    t=t, gamma=gamma, x_prev=state.x.copy(), grad_prev=g.copy(),
                    z=z.copy(),
                    prox_points=tuple(terms) if terms is not None else (x_new.copy(),),
                    x=x_new.copy()))
            if fast:
                q_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.q * state.q))
                u_new = x_new + ((state.q - 1.0) / q_new) * (x_new - state.x)
                _require_finite(u_new, t, records)
                state = SolverState(x=x_new, x_prev=state.x, u=u_new, q=q_new, t=t)
                r_new = instance.op.apply(x_new) - instance.y
                c = 0.5 * float(np.dot(r_new, r_new)) + float(_kernels.tv_flat(x_new, nxt, lam))
                wall = (time.perf_counter() - tic) * 1e3 if tic is not None else None
                records.append(_make_record(t, c, cstar, None, wall))
            else:
                state = SolverState(x=x_new, x_prev=state.x, u=state.u, q=state.q, t=t)
                tv_new = float(_kernels.tv_flat(x_new, nxt, lam))
                pending = (t, tv_new, inner_flag)
        if pending is not None:
            pt, ptv, pflag = pending
            r = instance.op.apply(state.x) - instance.y
            c = 0.5 * float(np.dot(r, r)) + ptv
            records.append(_make_record(pt, c, cstar, pflag, None))
    finally:
        if executor is not None:
            executor.shutdown()
    return SolveResult(state=state, records=records, trajectory=trajectory,
                       instance=instance)


def _make_record(t, c, cstar, inner_flag, wall):
    gap = (c - cstar) / cstar if cstar is not None else None
    return IterationRecord(t=t, cost=c, gap=gap, wall_ms=wall, inner_converged=inner_flag)


class ReferenceResult(NamedTuple):
    solution: SignalGrid
    costs: np.ndarray
    inner_failures: int


def reference_solution(instance: ProblemInstance, gamma: float, iterations: int,
                       inner_iters: int = 2000, inner_tol: float = 1e-12,
                       x0: SignalGrid | None = None) -> ReferenceResult:
    """High-iteration reference ISTA driver.

    Same arithmetic as ``run`` with the ista-ref variant (one gradient step,
    one nested dual proximal per iteration, per-iteration costs), but executed
    as a single compiled loop so that reference runs of 1e5 iterations used to
    pin optimal costs stay affordable.  Dense and identity operators only.
    """
    op = instance.op
    if isinstance(op, DenseOperator):
        h = op.entries
        ht = np.ascontiguousarray(op.entries.T)
    elif isinstance(op, IdentityOperator):
        h = np.eye(op.shape[0])
        ht = h
    else:
        raise TypeError("reference_solution supports dense and identity operators; "
                        "use run() with the ista-ref variant otherwise")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    n = instance.frame.size
    start = x0.data.copy() if x0 is not None else np.zeros(n)
    nxt, prv = neighbor_tables(instance.frame.dims)
    x, costs, fails = _kernels.ista_reference_dense(
        h, ht, instance.y, start, float(gamma), float(instance.lam),
        nxt, prv, int(iterations), int(inner_iters), float(inner_tol))
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(costs)):
        raise NumericalFailureError(int(iterations))
    return ReferenceResult(SignalGrid(instance.frame.dims, x), costs, int(fails))


# ---------------------------------------------------------------------------
# convergence diagnostics


def estimate_G(instance: ProblemInstance, trajectory) -> float:
    """Bound on gradient and subgradient norms along a recorded trajectory.

    Takes the max over iterations of ||grad D(x^t)|| at every iterate and of
    the proximal subgradients ||(z^t - x_k^t)/gamma|| extracted from the
    optimality condition of each proximal evaluation.
    """
    trajectory = list(trajectory)
    if not trajectory:
        raise ValueError("trajectory must be nonempty")
    g_max = 0.0
    for snap in trajectory:
        g_max = max(g_max, float(np.linalg.norm(snap.grad_prev)))
        for xk in snap.prox_points:
            g_max = max(g_max, float(np.linalg.norm((snap.z - xk) / snap.gamma)))
    final_grad, _ = _gradient(instance, trajectory[-1].x)
    return max(g_max, float(np.linalg.norm(final_grad)))


def check_prop1(instance: ProblemInstance, trajectory, reference_x: SignalGrid,
                gamma: float, G: float) -> np.ndarray:
    """Residuals of the descent inequality against anchor ``reference_x``.

    Returns RHS - LHS per iteration; nonnegative values (up to float slack)
    mean the inequality holds at that iteration.
    """
    trajectory = list(trajectory)
    if not trajectory:
        raise ValueError("trajectory must be nonempty")
    ref = reference_x.data
    c_ref = cost(instance, reference_x)
    bound = prop2_bound(gamma, G)
    out = np.empty(len(trajectory))
    for i, snap in enumerate(trajectory):
        c_t = _cost_array(instance, snap.x)
        d_prev = snap.x_prev - ref
        d_cur = snap.x - ref
        rhs = (float(np.dot(d_prev, d_prev)) - float(np.dot(d_cur, d_cur))) / (2.0 * gamma)
        out[i] = rhs + bound - (c_t - c_ref)
    return out


def prop2_bound(gamma: float, G: float) -> float:
    """Size of the fixed-step convergence neighborhood: 8 * gamma * G^2."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if G < 0:
        raise ValueError("G must be nonnegative")
    return 8.0 * gamma * G * G


@dataclass
class ConvergenceDiagnostics:
    """Bundle of the runtime-checkable convergence quantities."""

    G: float
    prop2_bound: float
    prop1_residuals: np.ndarray | None
    subgradient_aggregates: list  # g^t = (z^t - x^t)/gamma per iteration
    prox_points: list             # the K intermediate proximal outputs per iteration
    max_combined_grad_sq: float   # max_t ||grad D(x^{t-1}) + g^t||^2 (bounded by 4 G^2)


def compute_diagnostics(instance: ProblemInstance, trajectory, gamma: float,
                        reference_x: SignalGrid | None = None) -> ConvergenceDiagnostics:
    trajectory = list(trajectory)
    G = estimate_G(instance, trajectory)
    aggregates = []
    combined = 0.0
    for snap in trajectory:
        gbar = (snap.z - np.mean(snap.prox_points, axis=0)) / snap.gamma
        aggregates.append(gbar)
        combined = max(combined, float(np.dot(snap.grad_prev + gbar, snap.grad_prev + gbar)))
    residuals = None
    if reference_x is not None:
        residuals = check_prop1(instance, trajectory, reference_x, gamma, G)
    return ConvergenceDiagnostics(
        G=G, prop2_bound=prop2_bound(gamma, G), prop1_residuals=residuals,
        subgradient_aggregates=aggregates,
        prox_points=[snap.prox_points for snap in trajectory],
        max_combined_grad_sq=combined)


# ---------------------------------------------------------------------------
# record serialization

CSV_HEADER = "t,cost,gap,wall_ms"


def _fmt(v) -> str:
    return "" if v is None else format(v, ".17g")


def write_records_csv(path, records) -> None:
    """One row per iteration; floats at 17 significant digits (exact round-trip)."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(f"{r.t},{_fmt(r.cost)},{_fmt(r.gap)},{_fmt(r.wall_ms)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_records_csv(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"not an iteration-record CSV: {path}")
    records = []
    for line in lines[1:]:
        t_s, cost_s, gap_s, wall_s = line.split(",")
        records.append(IterationRecord(
            t=int(t_s), cost=float(cost_s),
            gap=float(gap_s) if gap_s else None,
            wall_ms=float(wall_s) if wall_s else None))
    return records
