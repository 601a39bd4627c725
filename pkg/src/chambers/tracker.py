"""Numerical continuation: path tracking, monodromy, parameter homotopy.

All tracking is batched: every active path advances through the same numpy
calls with per-path step sizes and time variables, which is what makes the
pure-Python engine fast enough.  Single-path entry points wrap batches of
one.

Predictor: fourth-order Runge-Kutta on the Davidenko equation
dx/dt = -J^{-1} dH/dt.  Corrector: at most three Newton steps at fixed t;
a step is accepted when the last correction is small relative to the point.
Steps halve on corrector failure and grow 1.5x after four consecutive
successes.  Segments between parameter values are blended through a random
complex gamma, which keeps the path off the real discriminant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BezoutBudgetExceeded,
    ConjugationMismatch,
    InputError,
    NoConvergence,
    NumericalError,
    PathLoss,
    SeedFailure,
    SingularJacobian,
    TargetNotReached,
)
from .polysys import PolySystem

TraceFn = Callable[[dict], None]


class PathStatus(Enum):
    TRACKING = "tracking"
    SUCCESS = "success"
    DIVERGED = "diverged"
    SINGULAR = "singular"
    STEP_UNDERFLOW = "step-underflow"


@dataclass
class PathPoint:
    """Endpoint of one tracked path."""

    x: np.ndarray
    t: float
    step: float
    status: PathStatus
    residual: float = float("nan")


@dataclass
class TrackOptions:
    initial_step: float = 0.1
    max_step: float = 0.25
    min_step: float = 1e-12
    grow_factor: float = 1.5
    grow_after: int = 4
    newton_iters: int = 3
    tracking_tol: float = 1e-8
    divergence_norm: float = 1e12
    cond_max: float = 1e14
    max_steps: int = 3000
    workers: int = 1


@dataclass
class MonodromyConfig:
    """Knobs for :func:`monodromy_solve`.

    ``max_loops`` is the stall budget: the solve stops after that many
    consecutive loops that produce no new solutions (and reports failure if a
    target count was requested but not met).
    """

    target_count: int | None = None
    max_loops: int = 8
    loop_radius: float = 1.0
    seed: int = 0
    residual_tol: float = 1e-10
    dedup_tol: float = 1e-6
    imag_tol: float = 1e-8

    def __post_init__(self):
        if self.max_loops < 1:
            raise InputError("max_loops must be >= 1")
        if min(self.loop_radius, self.residual_tol, self.dedup_tol, self.imag_tol) <= 0:
            raise InputError("tolerances and loop radius must be positive")


# ---------------------------------------------------------------------------
# Parameter paths and homotopies
# ---------------------------------------------------------------------------


class SegmentPath:
    """Parameter segment a -> b blended through gamma:
    p(s) = (gamma (1-s) a + s b) / (gamma (1-s) + s).

    gamma = 1 is the plain straight line; a random unit gamma bends the path
    into the complex so it misses the real discriminant.
    """

    def __init__(self, a: Sequence[complex], b: Sequence[complex], gamma: complex = 1.0):
        self.a = np.asarray(a, dtype=complex)
        self.b = np.asarray(b, dtype=complex)
        self.gamma = complex(gamma)

    def __call__(self, s: np.ndarray):
        g = self.gamma
        s = np.asarray(s, dtype=complex)
        den = g * (1 - s) + s
        num = g * (1 - s)[:, None] * self.a[None, :] + s[:, None] * self.b[None, :]
        p = num / den[:, None]
        dnum = (self.b - g * self.a)[None, :]
        dden = 1 - g
        dp = dnum / den[:, None] - num * dden / (den**2)[:, None]
        return p, dp


class ParameterHomotopy:
    """H(x, s) = system at parameters path(s)."""

    def __init__(self, compiled, path: SegmentPath):
        self.compiled = compiled
        self.path = path
        self.n = compiled.n

    def eval(self, X: np.ndarray, t: np.ndarray, need_dt: bool = True):
        P, dP = self.path(t)
        return self.compiled.eval_all(X, P, dP if need_dt else None)


class TotalDegreeHomotopy:
    """H(x, t) = gamma (1-t) S(x) + t F(x) with start system x_e^{d_e} - r_e."""

    def __init__(self, compiled, degrees: Sequence[int], roots: Sequence[complex], gamma: complex):
        self.compiled = compiled
        self.n = compiled.n
        self.degrees = np.asarray(degrees, dtype=np.int64)
        self.roots = np.asarray(roots, dtype=complex)
        self.gamma = complex(gamma)
        if len(self.degrees) != self.n or len(self.roots) != self.n:
            raise InputError("total-degree start system must be square")

    def _start(self, X: np.ndarray):
        S = X**self.degrees[None, :] - self.roots[None, :]
        dS = self.degrees[None, :] * X ** np.maximum(self.degrees[None, :] - 1, 0)
        return S, dS

    def eval(self, X: np.ndarray, t: np.ndarray, need_dt: bool = True):
        P = np.zeros((X.shape[0], 0), dtype=complex)
        VF, JF, _ = self.compiled.eval_all(X, P, None)
        S, dS = self._start(X)
        w = (self.gamma * (1 - t))[:, None]
        V = w * S + t[:, None] * VF
        J = JF * t[:, None, None]
        idx = np.arange(self.n)
        J[:, idx, idx] += w * dS
        Ht = None
        if need_dt:
            Ht = VF - self.gamma * S
        return V, J, Ht


def _solve(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched linear solve; singular members come back as NaN rows."""
    try:
        return np.linalg.solve(J, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(rhs)
        for b in range(J.shape[0]):
            try:
                out[b] = np.linalg.solve(J[b], rhs[b])
            except np.linalg.LinAlgError:
                out[b] = np.nan
        return out


# ---------------------------------------------------------------------------
# Batched tracking
# ---------------------------------------------------------------------------


@dataclass
class BatchTrackResult:
    X: np.ndarray
    status: np.ndarray  # of PathStatus
    t: np.ndarray
    steps: np.ndarray


_TRACKING, _SUCCESS, _DIVERGED, _SINGULAR, _UNDERFLOW = range(5)
_CODE_TO_STATUS = {
    _TRACKING: PathStatus.TRACKING,
    _SUCCESS: PathStatus.SUCCESS,
    _DIVERGED: PathStatus.DIVERGED,
    _SINGULAR: PathStatus.SINGULAR,
    _UNDERFLOW: PathStatus.STEP_UNDERFLOW,
}


def _track_chunk(homotopy, X0: np.ndarray, opts: TrackOptions) -> BatchTrackResult:
    B, n = X0.shape
    X = X0.astype(complex).copy()
    t = np.zeros(B)
    dt = np.full(B, opts.initial_step)
    consec = np.zeros(B, dtype=np.int64)
    steps = np.zeros(B, dtype=np.int64)
    code = np.full(B, _TRACKING, dtype=np.int64)

    def davidenko(Xa, ta):
        _, J, Ht = homotopy.eval(Xa, ta, need_dt=True)
        return _solve(J, -Ht)

    rounds = 0
    while True:
        idx = np.nonzero(code == _TRACKING)[0]
        if idx.size == 0:
            break
        rounds += 1
        if rounds > 20 * opts.max_steps:
            code[idx] = _UNDERFLOW
            break
        xa, ta = X[idx], t[idx]
        h = np.minimum(dt[idx], 1.0 - ta)
        hc = h.astype(complex)[:, None]
        k1 = davidenko(xa, ta)
        k2 = davidenko(xa + 0.5 * hc * k1, ta + 0.5 * h)
        k3 = davidenko(xa + 0.5 * hc * k2, ta + 0.5 * h)
        k4 = davidenko(xa + hc * k3, ta + h)
        xp = xa + hc / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        tn = ta + h
        # Newton corrector at fixed tn
        ok = np.zeros(idx.size, dtype=bool)
        xc = np.where(np.isfinite(xp), xp, xa)
        for _ in range(opts.newton_iters):
            V, J, _ = homotopy.eval(xc, tn, need_dt=False)
            dx = _solve(J, -V)
            with np.errstate(invalid="ignore"):
                xc = xc + np.where(np.isfinite(dx), dx, np.nan)
            err = np.max(np.abs(dx), axis=1) / (1.0 + np.max(np.abs(xc), axis=1))
            ok = np.isfinite(err) & (err < opts.tracking_tol)
            if ok.all():
                break
        finite = np.all(np.isfinite(xc), axis=1)
        succ = ok & finite
        norms = np.where(finite, np.max(np.abs(xc), axis=1), np.inf)
        steps[idx] += 1

        g_succ = idx[succ]
        X[g_succ] = xc[succ]
        t[g_succ] = tn[succ]
        blown = succ & (norms > opts.divergence_norm)
        code[idx[blown]] = _DIVERGED
        arrived = succ & ~blown & (tn >= 1.0 - 1e-12)
        code[idx[arrived]] = _SUCCESS
        cont = succ & ~blown & ~arrived
        consec[idx[cont]] += 1
        grow = cont & (consec[idx] >= opts.grow_after)
        dt[idx[grow]] = np.minimum(dt[idx[grow]] * opts.grow_factor, opts.max_step)
        consec[idx[grow]] = 0

        fail = ~succ
        consec[idx[fail]] = 0
        dt[idx[fail]] *= 0.5
        under = fail & (dt[idx] < opts.min_step)
        for b in idx[under]:
            code[b] = _diagnose_failure(homotopy, X[b], t[b], opts)
        exhausted = (steps[idx] >= opts.max_steps) & (code[idx] == _TRACKING)
        code[idx[exhausted]] = _UNDERFLOW
    status = np.array([_CODE_TO_STATUS[c] for c in code], dtype=object)
    return BatchTrackResult(X=X, status=status, t=t, steps=steps)


def _diagnose_failure(homotopy, x: np.ndarray, t: float, opts: TrackOptions) -> int:
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > opts.divergence_norm:
        return _DIVERGED
    _, J, _ = homotopy.eval(x[None, :], np.array([t]), need_dt=False)
    if not np.all(np.isfinite(J)):
        return _SINGULAR
    cond = np.linalg.cond(J[0])
    if not np.isfinite(cond) or cond > opts.cond_max:
        return _SINGULAR
    return _UNDERFLOW


def track_batch(homotopy, X0: np.ndarray, opts: TrackOptions | None = None) -> BatchTrackResult:
    """Track every row of X0 from t=0 to t=1; splits across workers when asked."""
    opts = opts or TrackOptions()
    if opts.workers <= 1 or X0.shape[0] <= 1:
        return _track_chunk(homotopy, X0, opts)
    from concurrent.futures import ThreadPoolExecutor

    chunks = np.array_split(np.arange(X0.shape[0]), min(opts.workers, X0.shape[0]))
    with ThreadPoolExecutor(max_workers=opts.workers) as pool:
        results = list(pool.map(lambda c: _track_chunk(homotopy, X0[c], opts), chunks))
    return BatchTrackResult(
        X=np.concatenate([r.X for r in results]),
        status=np.concatenate([r.status for r in results]),
        t=np.concatenate([r.t for r in results]),
        steps=np.concatenate([r.steps for r in results]),
    )


def track_path(system_or_homotopy, params_path=None, start: Sequence[complex] | None = None,
               opts: TrackOptions | None = None) -> PathPoint:
    """Track a single start point; accepts a PolySystem plus a SegmentPath
    (or an (a, b) parameter pair) or a prebuilt homotopy."""
    opts = opts or TrackOptions()
    if isinstance(system_or_homotopy, PolySystem):
        if params_path is None:
            raise InputError("parameter path required")
        if isinstance(params_path, tuple) and len(params_path) == 2:
            params_path = SegmentPath(params_path[0], params_path[1])
        homotopy = ParameterHomotopy(system_or_homotopy.compile(), params_path)
    else:
        homotopy = system_or_homotopy
    X0 = np.asarray(start, dtype=complex)[None, :]
    res = track_batch(homotopy, X0, opts)
    residual = float("nan")
    if res.status[0] is PathStatus.SUCCESS and hasattr(homotopy, "compiled"):
        if isinstance(homotopy, ParameterHomotopy):
            P, _ = homotopy.path(np.array([1.0]))
            residual = float(homotopy.compiled.residuals(res.X, P)[0])
        else:
            P = np.zeros((1, 0), dtype=complex)
            residual = float(homotopy.compiled.residuals(res.X, P)[0])
    return PathPoint(
        x=res.X[0], t=float(res.t[0]), step=float("nan"), status=res.status[0], residual=residual
    )


# ---------------------------------------------------------------------------
# Solution sets with grid-backed deduplication
# ---------------------------------------------------------------------------


class SolutionSet:
    """Deduplicated complex solutions with residual metadata.

    Distance is relative: max-norm difference over (1 + max of the norms).
    A dict keyed by rounded coordinates gives O(1) duplicate hits; a
    vectorized scan over the stacked points settles misses exactly.
    """

    def __init__(self, n: int, dedup_tol: float = 1e-6, residual_tol: float = 1e-10):
        self.n = n
        self.dedup_tol = dedup_tol
        self.residual_tol = residual_tol
        self.points: list[np.ndarray] = []
        self.residuals: list[float] = []
        self.singular: list[bool] = []
        self._grid: dict[tuple, int] = {}
        self._stack: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)

    def _key(self, x: np.ndarray) -> tuple:
        cell = self.dedup_tol * (1.0 + float(np.max(np.abs(x))))
        flat = np.concatenate([x.real, x.imag]) / cell
        return tuple(np.round(flat).astype(np.int64).tolist())

    def _is_duplicate(self, x: np.ndarray) -> bool:
        if not self.points:
            return False
        if self._key(x) in self._grid:
            return True
        stack = self._stack
        if stack is None or stack.shape[0] != len(self.points):
            stack = self._stack = np.array(self.points)
        d = np.max(np.abs(stack - x[None, :]), axis=1)
        scale = 1.0 + np.maximum(np.max(np.abs(stack), axis=1), np.max(np.abs(x)))
        return bool(np.any(d / scale < self.dedup_tol))

    def add(self, x: np.ndarray, residual: float, singular: bool = False) -> bool:
        """Insert unless a point within dedup_tol is already known."""
        x = np.asarray(x, dtype=complex)
        if self._is_duplicate(x):
            return False
        self.points.append(x)
        self.residuals.append(float(residual))
        self.singular.append(bool(singular))
        self._grid[self._key(x)] = len(self.points) - 1
        self._stack = None
        return True

    def as_array(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, self.n), dtype=complex)
        return np.array(self.points)


# ---------------------------------------------------------------------------
# Newton refinement
# ---------------------------------------------------------------------------


def newton_batch(compiled, X: np.ndarray, P: np.ndarray, max_iter: int = 8,
                 tol: float = 1e-10):
    """Batched Newton at fixed parameters.

    Returns (X', residuals, converged, singular): residuals are relative
    backward errors; ``singular`` marks paths whose final Jacobian is
    numerically unusable.
    """
    X = X.astype(complex).copy()
    for _ in range(max_iter):
        V, J, _ = compiled.eval_all(X, P, None)
        res = np.max(np.abs(V) / compiled.scales(X, P), axis=1)
        if np.all(res < tol):
            break
        dx = _solve(J, -V)
        move = res >= tol
        bad = ~np.all(np.isfinite(dx), axis=1)
        dx[bad] = 0.0
        X[move] += dx[move]
    res = np.max(
        np.abs(compiled.values(X, P)) / compiled.scales(X, P), axis=1
    )
    finite = np.all(np.isfinite(X), axis=1)
    res = np.where(finite, res, np.inf)
    converged = res < tol
    singular = np.zeros(X.shape[0], dtype=bool)
    if not converged.all():
        _, J, _ = compiled.eval_all(X, P, None)
        for b in np.nonzero(~converged)[0]:
            Jb = J[b]
            if not np.all(np.isfinite(Jb)) or np.linalg.cond(Jb) > 1e14:
                singular[b] = True
    return X, res, converged, singular


def newton_refine(system: PolySystem, x: Sequence[complex], params: Sequence[complex] = (),
                  max_iter: int = 10, tol: float = 1e-10):
    """Refine one approximate solution; raises on failure.

    Returns (x', residual) with quadratic convergence at regular roots.
    """
    compiled = system.compile() if isinstance(system, PolySystem) else system
    X = np.asarray(x, dtype=complex)[None, :]
    P = np.asarray(params, dtype=complex)[None, :]
    Xr, res, ok, singular = newton_batch(compiled, X, P, max_iter=max_iter, tol=tol)
    if not ok[0]:
        if singular[0]:
            raise SingularJacobian(f"Jacobian singular near {x}")
        raise NoConvergence(f"Newton stalled at residual {res[0]:.3e}")
    return Xr[0], float(res[0])


# ---------------------------------------------------------------------------
# Seeding, monodromy, parameter homotopy, total-degree solve
# ---------------------------------------------------------------------------


def seed_pair(system: PolySystem, seed: int, compiled=None, max_tries: int = 32):
    """Random (point, parameters) pair solving the system.

    Draws a random complex point off the divisor, then solves the linear
    conditions on the parameters; any null-space direction gives a valid
    parameter vector.  Deterministic in the seed.
    """
    if system.nparams == 0:
        raise InputError("seed_pair needs a parameter-linear system")
    compiled = compiled or system.compile()
    rng = np.random.default_rng(seed)
    n, m = system.n, system.nparams
    for _ in range(max_tries):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        div = compiled.divisor_values(x[None, :])
        if div is not None and np.min(div) < 1e-6:
            continue
        if hasattr(compiled, "log_gradient_matrix"):
            M = compiled.log_gradient_matrix(x)
            b = np.zeros(n, dtype=complex)
        else:
            V, _, _ = compiled.eval_all(x[None, :], np.zeros((1, m), dtype=complex), None)
            M = np.empty((n, m), dtype=complex)
            unit = np.zeros((1, m), dtype=complex)
            for j in range(m):
                unit[:] = 0
                unit[0, j] = 1
                M[:, j] = compiled.values(x[None, :], unit)[0] - V[0]
            b = V[0]
        u, s, vh = np.linalg.svd(M)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
        if rank >= m and np.max(np.abs(b)) == 0:
            continue  # only the zero parameter solves; degenerate draw
        null = vh[rank:].conj().T
        p = np.zeros(m, dtype=complex)
        if np.max(np.abs(b)) > 0:
            p = -np.linalg.lstsq(M, b, rcond=None)[0]
        if null.shape[1]:
            coeffs = rng.standard_normal(null.shape[1]) + 1j * rng.standard_normal(null.shape[1])
            p = p + null @ coeffs
        if np.max(np.abs(p)) < 1e-8:
            continue
        res = float(compiled.residuals(x[None, :], p[None, :])[0])
        if res < 1e-12:
            return x, p
    raise SeedFailure(f"no verified seed pair after {max_tries} draws")


def _transport(compiled, X: np.ndarray, segments: list[SegmentPath], opts: TrackOptions):
    """Track a batch through consecutive parameter segments; returns surviving
    endpoints and the failure count."""
    failures = 0
    for seg in segments:
        if X.shape[0] == 0:
            break
        res = track_batch(ParameterHomotopy(compiled, seg), X, opts)
        keep = np.array([s is PathStatus.SUCCESS for s in res.status])
        failures += int((~keep).sum())
        X = res.X[keep]
    return X, failures


def monodromy_solve(
    system: PolySystem,
    config: MonodromyConfig,
    opts: TrackOptions | None = None,
    start: tuple[np.ndarray, np.ndarray] | None = None,
    trace: TraceFn | None = None,
) -> tuple[SolutionSet, np.ndarray, dict]:
    """Collect solutions at a fixed generic parameter value by looping.

    Returns (solutions, base_parameters, diagnostics).  Stops when
    ``target_count`` is reached, or after ``max_loops`` consecutive loops
    without a new solution (raising :class:`TargetNotReached` when a target
    was requested but missed).
    """
    opts = opts or TrackOptions()
    compiled = system.compile()
    if start is None:
        x0, p0 = seed_pair(system, config.seed, compiled=compiled)
    else:
        x0, p0 = start
    sols = SolutionSet(system.n, config.dedup_tol, config.residual_tol)
    X0, res, ok, _ = newton_batch(compiled, x0[None, :], p0[None, :], tol=config.residual_tol)
    if not ok[0]:
        raise SeedFailure("seed pair does not refine to a solution")
    sols.add(X0[0], float(res[0]))
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x6D6F6E6F]))
    scale = max(1.0, float(np.max(np.abs(p0)))) * config.loop_radius
    m = len(p0)
    diagnostics = {"loops": 0, "path_failures": 0, "rejected": 0}
    stall = 0
    while True:
        target = config.target_count
        if target is not None and len(sols) >= target:
            break
        if stall >= config.max_loops:
            if target is not None:
                raise TargetNotReached(
                    f"monodromy stalled at {len(sols)}/{target} solutions",
                    partial=sols,
                    diagnostics=diagnostics,
                )
            break
        q1 = scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
        q2 = scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
        segments = [SegmentPath(p0, q1), SegmentPath(q1, q2), SegmentPath(q2, p0)]
        X = sols.as_array()
        Xend, failed = _transport(compiled, X, segments, opts)
        diagnostics["path_failures"] += failed
        new_found = 0
        if Xend.shape[0]:
            P = np.tile(p0, (Xend.shape[0], 1))
            Xr, res, ok, singular = newton_batch(
                compiled, Xend, P, tol=config.residual_tol
            )
            keep = ok & _off_divisor(compiled, Xr)
            diagnostics["rejected"] += int((~keep).sum())
            for b in np.nonzero(keep)[0]:
                if sols.add(Xr[b], float(res[b]), bool(singular[b])):
                    new_found += 1
                    if target is not None and len(sols) >= target:
                        break
        diagnostics["loops"] += 1
        stall = 0 if new_found else stall + 1
        if trace:
            trace(
                {
                    "event": "monodromy_loop",
                    "loop": diagnostics["loops"],
                    "solutions": len(sols),
                    "new": new_found,
                    "failures": failed,
                }
            )
    return sols, p0, diagnostics


def _off_divisor(compiled, X: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    div = compiled.divisor_values(X) if hasattr(compiled, "divisor_values") else None
    if div is None:
        return np.ones(X.shape[0], dtype=bool)
    return np.min(div, axis=1) > tol


@dataclass
class HomotopyResult:
    solutions: SolutionSet
    start_count: int
    failures: list[dict] = field(default_factory=list)


def parameter_homotopy(
    system: PolySystem,
    sols: SolutionSet,
    params_from: Sequence[complex],
    params_to: Sequence[complex],
    opts: TrackOptions | None = None,
    seed: int = 0,
    gamma: complex | None = None,
    trace: TraceFn | None = None,
) -> HomotopyResult:
    """Track every solution from one parameter value to another.

    The segment is gamma-blended by default.  Raises :class:`PathLoss` (with
    the partial result attached) when fewer endpoints than starts survive;
    failures are reported per path, never silently dropped.
    """
    opts = opts or TrackOptions()
    compiled = system.compile()
    if gamma is None:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x67616D6D]))
        angle = rng.uniform(0.15, 2 * np.pi - 0.15)
        gamma = np.exp(1j * angle)
    seg = SegmentPath(params_from, params_to, gamma)
    X0 = sols.as_array()
    out = SolutionSet(system.n, sols.dedup_tol, sols.residual_tol)
    failures: list[dict] = []
    if X0.shape[0]:
        res = track_batch(ParameterHomotopy(compiled, seg), X0, opts)
        P = np.tile(np.asarray(params_to, dtype=complex), (X0.shape[0], 1))
        Xr, resid, ok, singular = newton_batch(compiled, res.X, P, tol=sols.residual_tol)
        for b in range(X0.shape[0]):
            good = res.status[b] is PathStatus.SUCCESS and ok[b] and _off_divisor(
                compiled, Xr[b : b + 1]
            )[0]
            if good:
                out.add(Xr[b], float(resid[b]), bool(singular[b]))
            else:
                failures.append({"path": b, "status": res.status[b].value, "residual": float(resid[b])})
    if trace:
        trace(
            {
                "event": "parameter_homotopy",
                "starts": X0.shape[0],
                "endpoints": len(out),
                "failures": len(failures),
            }
        )
    result = HomotopyResult(solutions=out, start_count=X0.shape[0], failures=failures)
    if len(out) < X0.shape[0]:
        raise PathLoss(
            f"parameter homotopy kept {len(out)} of {X0.shape[0]} solutions",
            result=result,
            failures=failures,
        )
    return result


BEZOUT_BUDGET = 10_000


def total_degree_solve(
    system: PolySystem,
    opts: TrackOptions | None = None,
    seed: int = 0,
    residual_tol: float = 1e-10,
    dedup_tol: float = 1e-6,
) -> SolutionSet:
    """All isolated finite solutions of a square plain system by tracking the
    standard start system x_e^{d_e} = r_e.

    Diverged paths are normal (solutions at infinity); endpoints that refine
    are deduplicated into the returned set, with singular endpoints flagged.
    """
    opts = opts or TrackOptions()
    if system.nparams:
        raise InputError("total_degree_solve expects a plain system")
    if len(system.equations) != system.n:
        raise InputError("total_degree_solve needs a square system")
    degrees = system.degrees()
    if any(d < 1 for d in degrees):
        raise InputError("every equation needs positive degree")
    bezout = 1
    for d in degrees:
        bezout *= d
    if bezout > BEZOUT_BUDGET:
        raise BezoutBudgetExceeded(f"Bezout number {bezout} exceeds budget {BEZOUT_BUDGET}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x746F74616C]))
    roots = np.exp(2j * np.pi * rng.uniform(size=system.n)) * (0.7 + 0.6 * rng.uniform(size=system.n))
    gamma = np.exp(2j * np.pi * rng.uniform())
    compiled = system.compile()
    homotopy = TotalDegreeHomotopy(compiled, degrees, roots, gamma)
    grids = [
        [r ** (1.0 / d) * np.exp(2j * np.pi * j / d) for j in range(d)]
        for r, d in zip(roots, degrees)
    ]
    starts = np.array(np.meshgrid(*grids, indexing="ij"), dtype=complex).reshape(system.n, -1).T
    res = track_batch(homotopy, starts, opts)
    # candidates: clean arrivals plus stalled paths close to t=1, which a
    # Newton jump at t=1 often rescues (solutions at infinity fail to refine
    # and are dropped by the norm cap)
    keep = np.array(
        [s is PathStatus.SUCCESS or (t >= 0.99 and np.all(np.isfinite(x)))
         for s, t, x in zip(res.status, res.t, res.X)]
    )
    sols = SolutionSet(system.n, dedup_tol, residual_tol)
    if keep.any():
        X = res.X[keep]
        P = np.zeros((X.shape[0], 0), dtype=complex)
        Xr, resid, ok, singular = newton_batch(compiled, X, P, tol=residual_tol)
        norms = np.max(np.abs(Xr), axis=1)
        ok = ok & (norms < opts.divergence_norm * 1e-4)
        for b in np.nonzero(ok)[0]:
            sols.add(Xr[b], float(resid[b]), bool(singular[b]))
    return sols


def classify_real(
    sols: SolutionSet, imag_tol: float = 1e-8, real_system: bool = True
) -> tuple[list[np.ndarray], int]:
    """Split refined solutions into real points and conjugate pairs.

    Returns (real points as float arrays, number of nonreal pairs); insists
    nonreal solutions of a real-coefficient system pair up under conjugation.
    """
    real_pts: list[np.ndarray] = []
    nonreal: list[np.ndarray] = []
    for x in sols.points:
        if np.max(np.abs(x.imag)) < imag_tol:
            real_pts.append(x.real.copy())
        else:
            nonreal.append(x)
    if real_system and len(nonreal) % 2 != 0:
        raise ConjugationMismatch(f"{len(nonreal)} nonreal solutions cannot pair up")
    if real_system and nonreal:
        used = [False] * len(nonreal)
        for i, x in enumerate(nonreal):
            if used[i]:
                continue
            match = None
            for j in range(i + 1, len(nonreal)):
                if used[j]:
                    continue
                d = np.max(np.abs(np.conj(x) - nonreal[j]))
                if d / (1.0 + np.max(np.abs(x))) < max(sols.dedup_tol, 1e-6) * 10:
                    match = j
                    break
            if match is None:
                raise ConjugationMismatch("nonreal solution without a conjugate partner")
            used[i] = used[match] = True
    return real_pts, len(nonreal) // 2
