"""One interior point per region: the Morse sampler and its LP baseline.

The Morse route solves the critical equations of
psi = sum u_i log|f_i| - v log|g| for a seeded positive quadric g by
monodromy (stopping at the region count) and tracks to the real weights
(1, ..., 1, ceil((k+1)/2)); each critical point is the unique maximum of psi
inside one region.  The LP baseline enumerates sign vectors and certifies
full-dimensional ones with an exact-rational Chebyshev-margin simplex.
Cross-checking the two sign-vector sets is the package's main end-to-end
verification.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .arrangement import (
    Arrangement,
    RegionCounts,
    rank_and_essential,
    region_counts,
    sign_vector_at,
)
from .errors import (
    NotEssential,
    NumericFailure,
    NumericalError,
    OnBoundary,
    PathLoss,
    SeedFailure,
    SignCollision,
    SubsetBudgetExceeded,
    TargetNotReached,
    UnboundedLP,
)
from .polysys import CriticalSystem, SparsePoly, build_critical_system, make_generic_quadric
from .tracker import (
    MonodromyConfig,
    TraceFn,
    TrackOptions,
    classify_real,
    monodromy_solve,
    parameter_homotopy,
)

LP_MAX_HYPERPLANES = 20
LP_MARGIN_MIN = Fraction(1, 10**7)
G_REDRAW_BUDGET = 3


@dataclass
class SampleReport:
    """One point per region, with the sign vectors that certify distinctness."""

    points: list[list[float]]
    sign_vectors: list[str]
    expected_count: int
    method: str
    timings: dict[str, float] = field(default_factory=dict)
    retries: int = 0
    residuals: list[float] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "expected_count": self.expected_count,
            "method": self.method,
            "points": self.points,
            "sign_vectors": self.sign_vectors,
            "residuals": self.residuals,
            "timings": self.timings,
            "retries": self.retries,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# Exact dense simplex (Bland's rule, two phases)
# ---------------------------------------------------------------------------


class _Simplex:
    """maximize c.z subject to A z = b, z >= 0, over exact rationals."""

    def __init__(self, A: list[list[Fraction]], b: list[Fraction], c: list[Fraction]):
        self.m = len(A)
        self.n = len(A[0]) if A else 0
        self.A = [row[:] for row in A]
        self.b = b[:]
        self.c = c[:]

    def solve(self) -> tuple[list[Fraction], Fraction]:
        m, n = self.m, self.n
        for r in range(m):
            if self.b[r] < 0:
                self.A[r] = [-v for v in self.A[r]]
                self.b[r] = -self.b[r]
        # phase 1: artificials form the starting basis
        T = [self.A[r] + [Fraction(0)] * m + [self.b[r]] for r in range(m)]
        for r in range(m):
            T[r][n + r] = Fraction(1)
        basis = list(range(n, n + m))
        # maximize -(sum of artificials), reduced against the artificial basis
        obj = [Fraction(0)] * (n + m + 1)
        for j in range(n + m):
            col_artificial = Fraction(-1) if j >= n else Fraction(0)
            obj[j] = col_artificial + sum(T[r][j] for r in range(m))
        obj[n + m] = sum(self.b[r] for r in range(m))
        self._pivot_loop(T, basis, obj, allowed=n + m)
        if obj[n + m] != 0:
            raise NumericFailure("phase-1 optimum nonzero on a feasible problem")
        # drive artificials out of the basis where possible
        for r in range(m):
            if basis[r] >= n:
                piv = next((j for j in range(n) if T[r][j] != 0), None)
                if piv is not None:
                    self._pivot(T, basis, obj, r, piv)
        rows = [r for r in range(m) if basis[r] < n]
        T = [[T[r][j] for j in range(n)] + [T[r][n + m]] for r in rows]
        basis = [basis[r] for r in rows]
        m = len(rows)
        # phase 2
        obj = self.c[:] + [Fraction(0)]
        for r in range(m):
            coef = obj[basis[r]]
            if coef != 0:
                for j in range(n + 1):
                    obj[j] -= coef * T[r][j]
        self._pivot_loop(T, basis, obj, allowed=n)
        z = [Fraction(0)] * n
        for r in range(m):
            z[basis[r]] = T[r][n]
        return z, -obj[n]

    def _pivot_loop(self, T, basis, obj, allowed: int):
        guard = 0
        while True:
            guard += 1
            if guard > 20000:
                raise NumericFailure("simplex pivot budget exhausted")
            col = next((j for j in range(allowed) if obj[j] > 0), None)
            if col is None:
                return
            best_r, best_ratio = None, None
            ncols = len(T[0]) - 1
            for r in range(len(T)):
                if T[r][col] > 0:
                    ratio = T[r][ncols] / T[r][col]
                    if (
                        best_ratio is None
                        or ratio < best_ratio
                        or (ratio == best_ratio and basis[r] < basis[best_r])
                    ):
                        best_r, best_ratio = r, ratio
            if best_r is None:
                raise UnboundedLP("unbounded pivot column")
            self._pivot(T, basis, obj, best_r, col)

    @staticmethod
    def _pivot(T, basis, obj, r: int, col: int):
        ncols = len(T[0])
        inv = Fraction(1) / T[r][col]
        T[r] = [v * inv for v in T[r]]
        for rr in range(len(T)):
            if rr != r and T[rr][col] != 0:
                coef = T[rr][col]
                T[rr] = [a - coef * b for a, b in zip(T[rr], T[r])]
        coef = obj[col]
        if coef != 0:
            for j in range(ncols):
                obj[j] -= coef * T[r][j]
        basis[r] = col


_FLOAT_EPS = 1e-9


def _simplex_float(A: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, float]:
    """Float twin of :class:`_Simplex` for fast screening; same Bland logic
    with epsilon comparisons.  Raises :class:`NumericFailure` on breakdown so
    callers can fall back to the exact solver."""
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    obj = np.concatenate([T[:, : n + m].sum(axis=0), [b.sum()]])
    obj[n : n + m] -= 1.0

    def pivot_loop(allowed: int):
        guard = 0
        while True:
            guard += 1
            if guard > 5000:
                raise NumericFailure("float simplex pivot budget exhausted")
            cols = np.nonzero(obj[:allowed] > _FLOAT_EPS)[0]
            if cols.size == 0:
                return
            col = int(cols[0])
            pos = T[:, col] > _FLOAT_EPS
            if not pos.any():
                raise UnboundedLP("unbounded pivot column")
            ratios = np.where(pos, T[:, -1] / np.where(pos, T[:, col], 1.0), np.inf)
            best = np.min(ratios)
            ties = np.nonzero(ratios <= best * (1 + 1e-12) + 1e-15)[0]
            r = int(min(ties, key=lambda rr: basis[rr]))
            piv = T[r] / T[r, col]
            T[:] -= np.outer(T[:, col], piv)
            T[r] = piv
            obj[:] -= obj[col] * piv
            basis[r] = col

    pivot_loop(n + m)
    if abs(obj[-1]) > 1e-6:
        raise NumericFailure("float phase-1 failed to zero out")
    for r in range(m):
        if basis[r] >= n:
            nz = np.nonzero(np.abs(T[r, :n]) > 1e-7)[0]
            if nz.size:
                col = int(nz[0])
                piv = T[r] / T[r, col]
                T[:] -= np.outer(T[:, col], piv)
                T[r] = piv
                obj[:] -= obj[col] * piv
                basis[r] = col
    keep = [r for r in range(m) if basis[r] < n]
    T = np.hstack([T[keep][:, :n], T[keep][:, -1:]])
    basis = [basis[r] for r in keep]
    m = len(keep)
    obj = np.concatenate([c, [0.0]]).astype(float)
    for r in range(m):
        coef = obj[basis[r]]
        if coef != 0:
            obj -= coef * T[r]
    pivot_loop(n)
    z = np.zeros(n)
    for r in range(m):
        z[basis[r]] = T[r, -1]
    return z, float(-obj[-1])


@dataclass(frozen=True)
class LpProblem:
    """Chebyshev-margin LP for one (partial) sign vector inside a box.

    maximize t subject to sigma_i (a_i . x - b_i) >= t, -B <= x_j <= B and
    t <= 1; optimal t > 0 certifies a full-dimensional region and returns a
    well-centered interior point.  The float solver screens; margins inside
    the uncertainty band are recomputed with the exact rational simplex.
    """

    arrangement: Arrangement
    sigma: str
    box: Fraction

    def _standard_form(self):
        A = self.arrangement
        n = A.n
        B = self.box
        k = len(self.sigma)
        nvars = n + 2 + k + n + 1  # y, t+, t-, margin slacks, box slacks, cap slack
        rows: list[list[Fraction]] = []
        rhs: list[Fraction] = []
        for i in range(k):
            h = A.hyperplanes[i]
            s = 1 if self.sigma[i] == "+" else -1
            row = [Fraction(0)] * nvars
            for j in range(n):
                row[j] = s * h.normal[j]
            row[n] = Fraction(-1)
            row[n + 1] = Fraction(1)
            row[n + 2 + i] = Fraction(-1)
            rows.append(row)
            rhs.append(s * h.offset + B * s * sum(h.normal))
        for j in range(n):
            row = [Fraction(0)] * nvars
            row[j] = Fraction(1)
            row[n + 2 + k + j] = Fraction(1)
            rows.append(row)
            rhs.append(2 * B)
        row = [Fraction(0)] * nvars
        row[n] = Fraction(1)
        row[n + 1] = Fraction(-1)
        row[n + 2 + k + n] = Fraction(1)
        rows.append(row)
        rhs.append(Fraction(1))
        c = [Fraction(0)] * nvars
        c[n] = Fraction(1)
        c[n + 1] = Fraction(-1)
        return rows, rhs, c

    def solve_exact(self) -> tuple[list[Fraction], Fraction]:
        rows, rhs, c = self._standard_form()
        z, value = _Simplex(rows, rhs, c).solve()
        B = self.box
        return [z[j] - B for j in range(self.arrangement.n)], value

    def decide(self, band: float = 1e-5) -> tuple[list[float] | None, float]:
        """(interior point or None, margin): the float solve answers outright
        when its margin is far from the threshold; otherwise the exact
        rational simplex certifies the verdict."""
        rows, rhs, c = self._standard_form()
        thr = float(LP_MARGIN_MIN)
        try:
            z, value = _simplex_float(
                np.array(rows, dtype=float), np.array(rhs, dtype=float), np.array(c, dtype=float)
            )
            if abs(value - thr) > band:
                point = [float(z[j] - self.box) for j in range(self.arrangement.n)]
                return (point if value > thr else None), value
        except (NumericFailure, UnboundedLP):
            pass
        pt, margin = self.solve_exact()
        if margin > LP_MARGIN_MIN:
            return [float(v) for v in pt], float(margin)
        return None, float(margin)


def lp_interior_point(
    arrangement: Arrangement, sigma: str, box: float | Fraction
) -> list[float] | None:
    """Interior point realizing the sign vector, or None when the (boxed)
    region is empty or lower-dimensional."""
    if len(sigma) != arrangement.k:
        raise NumericFailure(f"sign vector length {len(sigma)} != {arrangement.k}")
    B = Fraction(box) if not isinstance(box, Fraction) else box
    return LpProblem(arrangement, sigma, B).decide()[0]


def _default_box(arrangement: Arrangement) -> Fraction:
    worst = 1.0
    for h in arrangement.hyperplanes:
        norm = math.sqrt(float(sum(v * v for v in h.normal)))
        worst = max(worst, abs(float(h.offset)) / norm)
    return Fraction(math.ceil(1.0 + worst))


def _enumerate_signs(arrangement: Arrangement, box: Fraction) -> tuple[list[list[float]], list[str]]:
    """Depth-first sign-vector enumeration with margin-LP pruning: a prefix
    whose margin already collapses cannot produce a region."""
    points: list[list[float]] = []
    signs: list[str] = []

    def rec(prefix: str):
        point, _ = LpProblem(arrangement, prefix, box).decide()
        if point is None:
            return
        if len(prefix) == arrangement.k:
            points.append(point)
            signs.append(prefix)
            return
        rec(prefix + "+")
        rec(prefix + "-")

    rec("")
    return points, signs


def lp_enumerate_regions(
    arrangement: Arrangement, box: float | Fraction | None = None
) -> SampleReport:
    """One interior point per region by exhaustive sign-vector LP feasibility.

    With no box given, the box grows tenfold until the set of feasible sign
    vectors stabilizes, which handles unbounded regions.
    """
    if arrangement.k > LP_MAX_HYPERPLANES:
        raise SubsetBudgetExceeded(
            f"sign enumeration guard: {arrangement.k} > {LP_MAX_HYPERPLANES} hyperplanes"
        )
    t0 = time.perf_counter()
    adaptive = box is None
    B = _default_box(arrangement) if box is None else Fraction(box)
    points, signs = _enumerate_signs(arrangement, B)
    grow_rounds = 0
    while adaptive:
        B10 = B * 10
        points10, signs10 = _enumerate_signs(arrangement, B10)
        grow_rounds += 1
        if set(signs10) == set(signs):
            break
        B, points, signs = B10, points10, signs10
        if grow_rounds > 8:
            raise NumericFailure("LP box failed to stabilize")
    elapsed = (time.perf_counter() - t0) * 1000.0
    expected = region_counts(arrangement).regions
    return SampleReport(
        points=points,
        sign_vectors=signs,
        expected_count=expected,
        method="lp",
        timings={"lp_ms": elapsed},
        diagnostics={"box": str(B), "grow_rounds": grow_rounds},
    )


# ---------------------------------------------------------------------------
# Morse sampling (Algorithm: monodromy + parameter homotopy + verification)
# ---------------------------------------------------------------------------


def _linear_factors(arrangement: Arrangement) -> list[SparsePoly]:
    return [SparsePoly.linear(list(h.normal), -h.offset) for h in arrangement.hyperplanes]


def target_weights(k: int) -> list[float]:
    """(u, v) = (1, ..., 1, ceil((k+1)/2)): positive weights with 2v > k."""
    return [1.0] * k + [float((k + 2) // 2)]


def psi_hessian(system: CriticalSystem, x: Sequence[float], weights: Sequence[float]) -> np.ndarray:
    """Hessian of the smooth psi (rational-function form) at a real point."""
    compiled = system.compile()
    X = np.asarray(x, dtype=complex)[None, :]
    F, dF, d2F = compiled._unpack(compiled._pack.values(X))
    W = np.asarray(weights, dtype=float) * compiled._signs
    n = system.n
    H = np.zeros((n, n), dtype=complex)
    for i in range(compiled.m):
        fi = F[0, i]
        gi = dF[0, i]
        H += W[i] * (d2F[0, i] / fi - np.outer(gi, gi) / fi**2)
    return H.real


def hessian_negative_definite(system: CriticalSystem, points: Sequence[Sequence[float]],
                              weights: Sequence[float]) -> bool:
    for p in points:
        eigs = np.linalg.eigvalsh(psi_hessian(system, p, weights))
        if np.any(eigs >= 0):
            return False
    return True


def morse_sample(
    arrangement: Arrangement,
    seed: int = 0,
    opts: TrackOptions | None = None,
    trace: TraceFn | None = None,
    check_hessian: bool = True,
) -> SampleReport:
    """One interior point per region via critical points of psi.

    Steps: seeded positive quadric g; region count N from the characteristic
    polynomial; monodromy with target N; parameter homotopy to the real
    weights; verify realness, residuals and pairwise-distinct sign vectors.
    A stalled monodromy or a lost path triggers a fresh g (budget 3); a sign
    collision is surfaced, never repaired.
    """
    rank, essential = rank_and_essential(arrangement)
    if not essential:
        raise NotEssential(f"normals span only rank {rank} < {arrangement.n}")
    opts = opts or TrackOptions()
    t_all = time.perf_counter()
    rc = region_counts(arrangement)
    n_regions = rc.regions
    charpoly_ms = (time.perf_counter() - t_all) * 1000.0
    fs = _linear_factors(arrangement)
    k = arrangement.k
    weights = target_weights(k)
    last_error: NumericalError | None = None
    for attempt in range(1 + G_REDRAW_BUDGET):
        gseed = (seed + 1) * 7919 + attempt
        quadric = make_generic_quadric(arrangement.n, gseed)
        system = build_critical_system(fs, quadric.poly())
        config = MonodromyConfig(target_count=n_regions, seed=seed * 613 + attempt)
        try:
            t0 = time.perf_counter()
            sols, p0, diag = monodromy_solve(system, config, opts=opts, trace=trace)
            monodromy_ms = (time.perf_counter() - t0) * 1000.0
            t0 = time.perf_counter()
            hres = parameter_homotopy(
                system, sols, p0, np.array(weights, dtype=complex),
                opts=opts, seed=seed * 389 + attempt, trace=trace,
            )
            homotopy_ms = (time.perf_counter() - t0) * 1000.0
        except (TargetNotReached, PathLoss, SeedFailure) as exc:
            last_error = exc
            if trace:
                trace({"event": "g_redraw", "attempt": attempt, "reason": type(exc).__name__})
            continue
        t0 = time.perf_counter()
        real_pts, nonreal_pairs = classify_real(hres.solutions, config.imag_tol)
        if nonreal_pairs or len(real_pts) != n_regions:
            last_error = TargetNotReached(
                f"{len(real_pts)} real points of {n_regions} expected "
                f"({nonreal_pairs} nonreal pairs)"
            )
            continue
        try:
            signs = [sign_vector_at(arrangement, p, eps=1e-7) for p in real_pts]
        except OnBoundary as exc:
            last_error = exc
            continue
        if len(set(signs)) != len(signs):
            raise SignCollision("two sampled points share a sign vector")
        hessian_ok = (
            hessian_negative_definite(system, real_pts, weights) if check_hessian else None
        )
        verify_ms = (time.perf_counter() - t0) * 1000.0
        report = SampleReport(
            points=[[float(v) for v in p] for p in real_pts],
            sign_vectors=signs,
            expected_count=n_regions,
            method="morse",
            timings={
                "charpoly_ms": charpoly_ms,
                "monodromy_ms": monodromy_ms,
                "homotopy_ms": homotopy_ms,
                "verify_ms": verify_ms,
                "total_ms": (time.perf_counter() - t_all) * 1000.0,
            },
            retries=attempt,
            residuals=list(hres.solutions.residuals),
            diagnostics={
                "monodromy_loops": diag["loops"],
                "path_failures": diag["path_failures"],
                "hessian_negative_definite": hessian_ok,
                "nonreal_pairs": nonreal_pairs,
            },
        )
        return report
    raise TargetNotReached(
        f"morse sampling failed after {G_REDRAW_BUDGET} quadric redraws: {last_error}",
        diagnostics={"last_error": str(last_error)},
    )


def verify_reports_agree(r1: SampleReport, r2: SampleReport) -> bool:
    """True iff both reports realize exactly the same sign-vector set."""
    return set(r1.sign_vectors) == set(r2.sign_vectors)


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------


def benchmark(
    arrangements: Sequence[tuple[str, Arrangement]],
    methods: Sequence[str] = ("morse", "lp"),
    repetitions: int = 1,
    seed: int = 0,
) -> list[dict]:
    """Wall-clock comparison rows: n, k, N, method, ms, retries (NA on failure)."""
    rows: list[dict] = []
    for name, arrangement in arrangements:
        n_regions = region_counts(arrangement).regions
        for method in methods:
            for rep in range(repetitions):
                row = {
                    "instance": name,
                    "n": arrangement.n,
                    "k": arrangement.k,
                    "N": n_regions,
                    "method": method,
                    "rep": rep,
                    "ms": "NA",
                    "retries": "NA",
                }
                t0 = time.perf_counter()
                try:
                    if method == "morse":
                        rep_out = morse_sample(arrangement, seed=seed + rep, check_hessian=False)
                    elif method == "lp":
                        rep_out = lp_enumerate_regions(arrangement)
                    else:
                        raise NumericFailure(f"unknown method {method}")
                    row["ms"] = round((time.perf_counter() - t0) * 1000.0, 3)
                    row["retries"] = rep_out.retries
                except Exception:
                    pass
                rows.append(row)
    return rows


def benchmark_csv(rows: Sequence[dict]) -> str:
    header = ["instance", "n", "k", "N", "method", "rep", "ms", "retries"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[h]) for h in header))
    return "\n".join(lines) + "\n"
