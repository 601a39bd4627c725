"""Exact sparse multivariate polynomials and log-likelihood critical systems.

Two coefficient worlds: construction is exact (ints/Fractions), numerical
path tracking uses a one-way lossy conversion to complex doubles.  The
central object is the cleared-denominator critical system of

    psi(x) = sum_i u_i log f_i(x) + sum_m v_m log g_m(x),

whose j-th equation multiplies grad psi through by prod f_i * prod g_m.  The
cleared form admits spurious solutions where two or more divisor components
meet; those are filtered downstream by a divisor-distance test.

Residual convention: ``residual`` values everywhere in this package are
componentwise *relative* backward errors, |eq_j(x)| divided by the sum of
term magnitudes of eq_j at x.  A regular root refined by Newton sits at a
few units of machine epsilon regardless of coefficient scale.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError, ParseError

Exponent = tuple[int, ...]


def _normalize_terms(terms: Mapping[Exponent, object]) -> dict:
    out = {}
    for e, c in terms.items():
        if c == 0:
            continue
        out[tuple(int(v) for v in e)] = c
    return out


class SparsePoly:
    """Immutable sparse polynomial in variables x1..xn (indices 0..n-1)."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[Exponent, object] | None = None):
        self.n = int(n)
        self.terms = _normalize_terms(terms or {})
        for e in self.terms:
            if len(e) != self.n or any(v < 0 for v in e):
                raise InputError(f"bad exponent {e} for {self.n} variables")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "SparsePoly":
        return cls(n, {})

    @classmethod
    def constant(cls, n: int, c) -> "SparsePoly":
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, i: int, n: int) -> "SparsePoly":
        e = [0] * n
        e[i] = 1
        return cls(n, {tuple(e): 1})

    @classmethod
    def linear(cls, coeffs: Sequence, constant=0) -> "SparsePoly":
        n = len(coeffs)
        terms = {}
        for i, c in enumerate(coeffs):
            if c != 0:
                e = [0] * n
                e[i] = 1
                terms[tuple(e)] = c
        if constant != 0:
            terms[(0,) * n] = constant
        return cls(n, terms)

    # -- ring operations ----------------------------------------------------

    def _coerce(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            if other.n != self.n:
                raise InputError("variable counts differ")
            return other
        return SparsePoly.constant(self.n, other)

    def __add__(self, other) -> "SparsePoly":
        other = self._coerce(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0) + c
        return SparsePoly(self.n, terms)

    __radd__ = __add__

    def __neg__(self) -> "SparsePoly":
        return SparsePoly(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "SparsePoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "SparsePoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "SparsePoly":
        other = self._coerce(other)
        terms: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return SparsePoly(self.n, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "SparsePoly":
        if k < 0:
            raise InputError("negative polynomial power")
        result = SparsePoly.constant(self.n, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other) -> bool:
        return isinstance(other, SparsePoly) and self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    # -- calculus and structure ---------------------------------------------

    def diff(self, i: int) -> "SparsePoly":
        terms = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            ne = list(e)
            ne[i] -= 1
            terms[tuple(ne)] = terms.get(tuple(ne), 0) + c * e[i]
        return SparsePoly(self.n, terms)

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_homogeneous(self) -> bool:
        degs = {sum(e) for e in self.terms}
        return len(degs) <= 1

    def evaluate(self, x: Sequence):
        """Exact when coefficients and x are exact; works for complex x too."""
        acc = 0
        for e, c in self.terms.items():
            term = c
            for xi, ei in zip(x, e):
                if ei:
                    term = term * xi**ei
            acc = acc + term
        return acc

    def substitute_linear(self, matrix: Sequence[Sequence]) -> "SparsePoly":
        """Compose with the linear map x_i = sum_j matrix[i][j] y_j.

        ``matrix`` has one row per original variable; the result lives in
        ``len(matrix[0])`` variables.
        """
        m = len(matrix[0]) if matrix else 0
        images = [SparsePoly.linear(row) if len(row) == m else None for row in matrix]
        if len(images) != self.n:
            raise InputError("substitution matrix needs one row per variable")
        powers: list[dict[int, SparsePoly]] = [dict() for _ in range(self.n)]

        def img_pow(i: int, k: int) -> SparsePoly:
            if k not in powers[i]:
                powers[i][k] = images[i] ** k
            return powers[i][k]

        out = SparsePoly.zero(m)
        for e, c in self.terms.items():
            term = SparsePoly.constant(m, c)
            for i, ei in enumerate(e):
                if ei:
                    term = term * img_pow(i, ei)
            out = out + term
        return out

    def homogenize(self) -> "SparsePoly":
        """Homogenization with a fresh first variable x0; result in n+1 variables."""
        d = self.total_degree()
        terms = {}
        for e, c in self.terms.items():
            terms[(d - sum(e),) + e] = c
        return SparsePoly(self.n + 1, terms)

    def map_coefficients(self, fn) -> "SparsePoly":
        return SparsePoly(self.n, {e: fn(c) for e, c in self.terms.items()})

    def to_complex(self) -> "SparsePoly":
        return self.map_coefficients(complex)

    def coefficients_dict(self) -> dict:
        return dict(self.terms)

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), key=lambda t: (-sum(t[0]), t[0])):
            mono = "*".join(
                f"x{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k
            )
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def gradient(f: SparsePoly) -> list[SparsePoly]:
    """Formal partial derivatives, one per variable."""
    return [f.diff(i) for i in range(f.n)]


# ---------------------------------------------------------------------------
# Parser: +, -, *, ^, parentheses, rational literals, variables x1..xn
# ---------------------------------------------------------------------------


def parse_poly(text: str, n: int) -> SparsePoly:
    """Parse an expression in x1..xn into canonical sparse form."""
    pos = 0
    length = len(text)

    def skip_ws():
        nonlocal pos
        while pos < length and text[pos].isspace():
            pos += 1

    def peek() -> str:
        skip_ws()
        return text[pos] if pos < length else ""

    def expect(ch: str):
        nonlocal pos
        if peek() != ch:
            raise ParseError(f"expected {ch!r}", pos)
        pos += 1

    def parse_int() -> int:
        nonlocal pos
        skip_ws()
        start = pos
        while pos < length and text[pos].isdigit():
            pos += 1
        if start == pos:
            raise ParseError("expected integer", pos)
        return int(text[start:pos])

    def parse_atom() -> SparsePoly:
        nonlocal pos
        ch = peek()
        if ch == "(":
            expect("(")
            e = parse_expr()
            expect(")")
            return e
        if ch == "-":
            expect("-")
            return -parse_atom()
        if ch == "+":
            expect("+")
            return parse_atom()
        if ch == "x":
            pos += 1
            idx = parse_int()
            if not 1 <= idx <= n:
                raise ParseError(f"variable x{idx} out of range 1..{n}", pos)
            return SparsePoly.variable(idx - 1, n)
        if ch.isdigit():
            num = parse_int()
            skip_ws()
            if pos < length and text[pos] == "/":
                pos += 1
                den = parse_int()
                if den == 0:
                    raise ParseError("zero denominator", pos)
                return SparsePoly.constant(n, Fraction(num, den))
            return SparsePoly.constant(n, Fraction(num))
        raise ParseError(f"unexpected character {ch!r}" if ch else "unexpected end of input", pos)

    def parse_power() -> SparsePoly:
        nonlocal pos
        base = parse_atom()
        if peek() == "^":
            expect("^")
            return base ** parse_int()
        return base

    def parse_term() -> SparsePoly:
        acc = parse_power()
        while peek() == "*":
            expect("*")
            acc = acc * parse_power()
        return acc

    def parse_expr() -> SparsePoly:
        acc = parse_term()
        while True:
            ch = peek()
            if ch == "+":
                expect("+")
                acc = acc + parse_term()
            elif ch == "-":
                expect("-")
                acc = acc - parse_term()
            else:
                return acc

    result = parse_expr()
    skip_ws()
    if pos != length:
        raise ParseError("trailing input", pos)
    return result


# ---------------------------------------------------------------------------
# Batched numeric evaluation of one polynomial
# ---------------------------------------------------------------------------


class PackedEvaluator:
    """Joint evaluator for a family of polynomials sharing variables.

    Collects the union of exponent tuples once; evaluation is a single
    power-table monomial matrix times a coefficient matrix, so the whole
    family costs one matmul per batch regardless of how many polynomials are
    packed.
    """

    def __init__(self, polys: Sequence[SparsePoly]):
        if not polys:
            raise InputError("cannot pack an empty family")
        self.n = polys[0].n
        universe = sorted({e for p in polys for e in p.terms}) or [(0,) * self.n]
        index = {e: i for i, e in enumerate(universe)}
        self.E = np.array(universe, dtype=np.int64)
        self.C = np.zeros((len(universe), len(polys)), dtype=complex)
        for j, p in enumerate(polys):
            for e, c in p.terms.items():
                self.C[index[e], j] = complex(c)
        self.max_exp = self.E.max(axis=0)
        self.absC = np.abs(self.C)

    def monomials(self, X: np.ndarray) -> np.ndarray:
        """X: (B, n) -> (B, U) monomial values via per-variable power tables."""
        B = X.shape[0]
        monos = np.ones((B, self.E.shape[0]), dtype=X.dtype)
        for v in range(self.n):
            mx = int(self.max_exp[v])
            if mx == 0:
                continue
            pows = np.empty((B, mx + 1), dtype=X.dtype)
            pows[:, 0] = 1
            for k in range(1, mx + 1):
                pows[:, k] = pows[:, k - 1] * X[:, v]
            monos = monos * pows[:, self.E[:, v]]
        return monos

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.monomials(X.astype(complex)) @ self.C

    def values_and_magnitudes(self, X: np.ndarray):
        vals = self.monomials(X.astype(complex)) @ self.C
        mags = self.monomials(np.abs(X)).real @ self.absC
        return vals, mags

    def magnitudes(self, X: np.ndarray) -> np.ndarray:
        return self.monomials(np.abs(X)).real @ self.absC


class BatchPoly:
    """Complex-double evaluator for one sparse polynomial over point batches."""

    def __init__(self, poly: SparsePoly):
        self.n = poly.n
        self._packed = PackedEvaluator([poly])

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """X: (B, n) complex -> (B,) values."""
        return self._packed.values(X)[:, 0]

    def magnitudes(self, X: np.ndarray) -> np.ndarray:
        """Sum of |coeff * monomial| per point; the residual scale."""
        return self._packed.magnitudes(X)[:, 0]


# ---------------------------------------------------------------------------
# Parameter-linear polynomial systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamLinearEq:
    """One equation base(x) + sum_j p_j * coeff_j(x), linear in the parameters."""

    base: SparsePoly
    coeffs: tuple[SparsePoly, ...]

    def total_degree(self) -> int:
        return max(
            [self.base.total_degree()] + [c.total_degree() for c in self.coeffs],
            default=0,
        )


class PolySystem:
    """Square system of parameter-linear equations in x1..xn.

    ``params`` may be empty, in which case this is a plain polynomial system.
    Exact data lives here; :meth:`compile` produces the numeric evaluator the
    tracker consumes.
    """

    def __init__(self, n: int, params: Sequence[str], equations: Sequence[ParamLinearEq]):
        self.n = int(n)
        self.params = tuple(params)
        self.equations = tuple(equations)
        for eq in self.equations:
            if eq.base.n != self.n or any(c.n != self.n for c in eq.coeffs):
                raise InputError("equation variable count mismatch")
            if len(eq.coeffs) != len(self.params):
                raise InputError("equation parameter count mismatch")

    @classmethod
    def from_polys(cls, polys: Sequence[SparsePoly]) -> "PolySystem":
        if not polys:
            raise InputError("empty system")
        n = polys[0].n
        return cls(n, (), tuple(ParamLinearEq(p, ()) for p in polys))

    @property
    def nparams(self) -> int:
        return len(self.params)

    def degrees(self) -> list[int]:
        return [eq.total_degree() for eq in self.equations]

    def evaluate(self, x: Sequence, params: Sequence = ()) -> list:
        """Exact or mixed evaluation; returns raw equation values."""
        out = []
        for eq in self.equations:
            v = eq.base.evaluate(x)
            for p, cp in zip(params, eq.coeffs):
                v = v + p * cp.evaluate(x)
            out.append(v)
        return out

    def jacobian(self, x: Sequence, params: Sequence = ()) -> list[list]:
        rows = []
        for eq in self.equations:
            row = []
            for j in range(self.n):
                v = eq.base.diff(j).evaluate(x)
                for p, cp in zip(params, eq.coeffs):
                    v = v + p * cp.diff(j).evaluate(x)
                row.append(v)
            rows.append(row)
        return rows

    def specialize(self, params: Sequence) -> "PolySystem":
        """Plain system with the parameters fixed to numeric values."""
        if len(params) != self.nparams:
            raise InputError("parameter count mismatch")
        polys = []
        for eq in self.equations:
            acc = eq.base
            for p, cp in zip(params, eq.coeffs):
                acc = acc + cp * p
            polys.append(acc)
        return PolySystem.from_polys(polys)

    def expand(self) -> list[SparsePoly]:
        """Equations as sparse polynomials in n + nparams variables
        (parameters appended after the x block).  Exponential in size for
        large products; intended for dumps and small-instance tests."""
        total = self.n + self.nparams
        out = []
        for eq in self.equations:
            acc = _embed(eq.base, total)
            for j, cp in enumerate(eq.coeffs):
                acc = acc + _embed(cp, total) * SparsePoly.variable(self.n + j, total)
            out.append(acc)
        return out

    def to_json(self) -> str:
        def poly_dict(p: SparsePoly) -> dict:
            return {",".join(map(str, e)): str(c) for e, c in sorted(p.terms.items())}

        data = {
            "n": self.n,
            "params": list(self.params),
            "equations": [
                {"base": poly_dict(eq.base), "coeffs": [poly_dict(c) for c in eq.coeffs]}
                for eq in self.equations
            ],
        }
        return json.dumps(data, indent=2, sort_keys=True)

    def compile(self) -> "CompiledSystem":
        cached = getattr(self, "_compiled", None)
        if cached is None:
            cached = self._compiled = CompiledSystem(self)
        return cached


def _embed(p: SparsePoly, total: int) -> SparsePoly:
    pad = total - p.n
    return SparsePoly(total, {e + (0,) * pad: c for e, c in p.terms.items()})


class CompiledSystem:
    """Batched complex evaluator for a :class:`PolySystem`.

    ``eval_all(X, P, dP)`` returns (values, Jacobian, dH/dt) where dH/dt uses
    the parameter velocities dP; ``scales`` gives per-equation term-magnitude
    sums used for relative residuals.  One packed family holds the bases,
    parameter coefficients and all their x-derivatives, so an evaluation is a
    single monomial matmul plus reshapes.
    """

    def __init__(self, system: PolySystem):
        self.system = system
        self.n = system.n
        self.nparams = system.nparams
        self.neq = len(system.equations)
        # layout per equation: for each of base, coeff_1..coeff_m in order,
        # its value followed by its n partials -> blocks (1+m, 1+n)
        polys: list[SparsePoly] = []
        for eq in system.equations:
            for p in [eq.base, *eq.coeffs]:
                polys.append(p)
                polys.extend(p.diff(j) for j in range(self.n))
        self._pack = PackedEvaluator(polys)

    def _unpack(self, flat: np.ndarray):
        B = flat.shape[0]
        blocks = flat.reshape(B, self.neq, 1 + self.nparams, 1 + self.n)
        base = blocks[:, :, 0, 0]
        coeff = blocks[:, :, 1:, 0]
        dbase = blocks[:, :, 0, 1:]
        dcoeff = blocks[:, :, 1:, 1:]
        return base, coeff, dbase, dcoeff

    def eval_all(self, X: np.ndarray, P: np.ndarray, dP: np.ndarray | None = None):
        base, coeff, dbase, dcoeff = self._unpack(self._pack.values(X))
        if self.nparams:
            V = base + np.einsum("bej,bj->be", coeff, P)
            J = dbase + np.einsum("bejm,bj->bem", dcoeff, P)
        else:
            V, J = base, dbase
        Ht = None
        if dP is not None:
            if self.nparams:
                Ht = np.einsum("bej,bj->be", coeff, dP)
            else:
                Ht = np.zeros_like(V)
        return V, J, Ht

    def values(self, X: np.ndarray, P: np.ndarray) -> np.ndarray:
        return self.eval_all(X, P)[0]

    def scales(self, X: np.ndarray, P: np.ndarray) -> np.ndarray:
        mags = self._pack.magnitudes(X)
        B = mags.shape[0]
        blocks = mags.reshape(B, self.neq, 1 + self.nparams, 1 + self.n)
        out = blocks[:, :, 0, 0].copy()
        if self.nparams:
            out += np.einsum("bej,bj->be", blocks[:, :, 1:, 0], np.abs(P))
        return np.maximum(out, 1e-300)

    def residuals(self, X: np.ndarray, P: np.ndarray) -> np.ndarray:
        V = self.values(X, P)
        return np.max(np.abs(V) / self.scales(X, P), axis=1)

    def divisor_values(self, X: np.ndarray) -> np.ndarray | None:
        """Scaled distances to the divisor components; None when untagged."""
        return None


# ---------------------------------------------------------------------------
# The generic positive quadric of the sampling algorithm
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadricSpec:
    """g(x) = sum (x_i - a_i)^2 + (sum b_i x_i)^2 + 1; positive on R^n."""

    a: tuple[Fraction, ...]
    b: tuple[Fraction, ...]

    @property
    def n(self) -> int:
        return len(self.a)

    def poly(self) -> SparsePoly:
        n = self.n
        g = SparsePoly.constant(n, Fraction(1))
        for i, ai in enumerate(self.a):
            g = g + (SparsePoly.variable(i, n) - ai) ** 2
        lin = SparsePoly.linear(self.b)
        return g + lin * lin


def _random_small_rational(rng: random.Random, lo: int = -2, hi: int = 2) -> Fraction:
    den = rng.randint(1, 8)
    num = rng.randint(lo * den, hi * den)
    return Fraction(num, den)


def make_generic_quadric(n: int, seed: int) -> QuadricSpec:
    """Seeded draw of the positive quadric; small rationals in [-2, 2]."""
    rng = random.Random(seed)
    a = tuple(_random_small_rational(rng) for _ in range(n))
    b = tuple(_random_small_rational(rng) for _ in range(n))
    return QuadricSpec(a, b)


def homogenize_divisor(f: SparsePoly) -> SparsePoly:
    """The projective divisor hf * x0 in n+1 variables (x0 first)."""
    if f.is_zero():
        raise InputError("cannot homogenize the zero polynomial")
    return f.homogenize() * SparsePoly.variable(0, f.n + 1)


# ---------------------------------------------------------------------------
# Critical systems of psi
# ---------------------------------------------------------------------------


class CriticalSystem(PolySystem):
    """Cleared critical equations of psi = sum u_i log f_i + sum v_m log g_m.

    Parameters are (u_1..u_k, v_1..v_r).  The j-th equation is

        sum_i u_i (d f_i/d x_j) prod_{l != i} f_l prod_m g_m
      + sum_m v_m (d g_m/d x_j) prod_i f_i prod_{l != m} g_l,

    with ``negate_g`` flipping the sign of every v-column (the sampler's
    psi carries -v log g).  The expanded :class:`PolySystem` equations are
    built lazily: the compiled evaluator works from the factors directly via
    pointwise exclusion products, so large arrangements never pay for the
    product expansion.
    """

    def __init__(self, fs: Sequence[SparsePoly], gs: Sequence[SparsePoly],
                 negate_g: bool = False):
        if not fs and not gs:
            raise InputError("critical system needs at least one divisor factor")
        polys = list(fs) + list(gs)
        n = polys[0].n
        if any(p.n != n for p in polys):
            raise InputError("all divisor factors must share the variable count")
        if any(p.is_zero() for p in polys):
            raise InputError("divisor factors must be nonzero")
        self.fs = tuple(fs)
        self.gs = tuple(gs)
        self._v_sign = -1.0 if negate_g else 1.0
        k, r = len(fs), len(gs)
        self.n = n
        self.params = tuple(f"u{i + 1}" for i in range(k)) + tuple(
            f"v{m + 1}" for m in range(r)
        )
        self._equations_cache: tuple[ParamLinearEq, ...] | None = None

    @property
    def equations(self) -> tuple[ParamLinearEq, ...]:
        if self._equations_cache is None:
            polys = list(self.fs) + list(self.gs)
            k = len(self.fs)
            equations = []
            for j in range(self.n):
                coeffs = []
                for i, p in enumerate(polys):
                    prod = p.diff(j)
                    for l, q in enumerate(polys):
                        if l != i:
                            prod = prod * q
                    if i >= k and self._v_sign < 0:
                        prod = -prod
                    coeffs.append(prod)
                equations.append(ParamLinearEq(SparsePoly.zero(self.n), tuple(coeffs)))
            self._equations_cache = tuple(equations)
        return self._equations_cache

    def compile(self) -> "CompiledCritical":
        cached = getattr(self, "_compiled", None)
        if cached is None:
            cached = self._compiled = CompiledCritical(self)
        return cached


def build_critical_system(fs: Sequence[SparsePoly], g: SparsePoly) -> CriticalSystem:
    """Critical system of psi = sum u_i log f_i - v log g (one quadric,
    negative weight): parameters (u_1..u_k, v) with the sign folded into the
    v-column."""
    return CriticalSystem(fs, [g], negate_g=True)


class CompiledCritical:
    """Structured evaluator for :class:`CriticalSystem` without expansion.

    Uses pairwise-exclusion products: with F_l the factor values, Q_i the
    product over l != i and Q_{il} over l not in {i, l}, the values, Jacobian
    and parameter derivative all come out of O(k^2) batched multiplies.
    """

    def __init__(self, system: CriticalSystem):
        self.system = system
        self.n = system.n
        polys = list(system.fs) + list(system.gs)
        self.m = len(polys)
        self.nparams = self.m
        self._v_sign = getattr(system, "_v_sign", 1.0)
        self._signs = np.ones(self.m)
        if self._v_sign < 0:
            self._signs[len(system.fs):] = -1.0
        # one packed family: per factor its value, n first and n^2 second partials
        family: list[SparsePoly] = []
        for p in polys:
            family.append(p)
            grads = [p.diff(j) for j in range(self.n)]
            family.extend(grads)
            for gj in grads:
                family.extend(gj.diff(l) for l in range(self.n))
        self._pack = PackedEvaluator(family)
        self._fpack = PackedEvaluator(polys)

    def _unpack(self, flat: np.ndarray):
        B = flat.shape[0]
        blocks = flat.reshape(B, self.m, 1 + self.n + self.n * self.n)
        F = blocks[:, :, 0]
        dF = blocks[:, :, 1 : 1 + self.n]
        d2F = blocks[:, :, 1 + self.n :].reshape(B, self.m, self.n, self.n)
        return F, dF, d2F

    def _factor_values(self, X: np.ndarray):
        F, dF, _ = self._unpack(self._pack.values(X))
        return F, dF

    @staticmethod
    def _exclusion_products(F: np.ndarray):
        """Q (B,m): product excluding one index; Qd (B,m,m): excluding two
        (diagonal entries equal Q)."""
        B, m = F.shape
        E = np.repeat(F[:, None, :], m, axis=1)
        idx = np.arange(m)
        E[:, idx, idx] = 1.0
        pre = np.cumprod(E, axis=2)
        suf = np.cumprod(E[:, :, ::-1], axis=2)[:, :, ::-1]
        Q = pre[:, :, -1]
        Qd = np.empty((B, m, m), dtype=complex)
        Qd[:, :, 0] = suf[:, :, 1] if m > 1 else 1.0
        if m > 1:
            Qd[:, :, -1] = pre[:, :, -2]
            for l in range(1, m - 1):
                Qd[:, :, l] = pre[:, :, l - 1] * suf[:, :, l + 1]
        else:
            Qd[:, :, 0] = 1.0
        Q_diag = Q[:, idx]
        Qd[:, idx, idx] = Q_diag
        return Q_diag, Qd

    def values(self, X: np.ndarray, P: np.ndarray) -> np.ndarray:
        F, dF = self._factor_values(X)
        Q, _ = self._exclusion_products(F)
        W = P * self._signs
        return np.einsum("bi,bij,bi->bj", W, dF, Q)

    def eval_all(self, X: np.ndarray, P: np.ndarray, dP: np.ndarray | None = None):
        F, dF, d2F = self._unpack(self._pack.values(X))
        Q, Qd = self._exclusion_products(F)
        W = P * self._signs
        # dQ[b,i,m] = sum_{l != i} dF[b,l,m] * Qd[b,i,l]
        Qd_off = Qd.copy()
        idx = np.arange(self.m)
        Qd_off[:, idx, idx] = 0.0
        dQ = np.einsum("bil,blm->bim", Qd_off, dF)
        V = np.einsum("bi,bij,bi->bj", W, dF, Q)
        J = np.einsum("bi,bijm,bi->bjm", W, d2F, Q) + np.einsum("bi,bij,bim->bjm", W, dF, dQ)
        Ht = None
        if dP is not None:
            dW = dP * self._signs
            Ht = np.einsum("bi,bij,bi->bj", dW, dF, Q)
        return V, J, Ht

    def scales(self, X: np.ndarray, P: np.ndarray) -> np.ndarray:
        mags = self._pack.magnitudes(X)
        B = mags.shape[0]
        blocks = mags.reshape(B, self.m, 1 + self.n + self.n * self.n)
        Fa = blocks[:, :, 0].astype(complex)
        dFa = blocks[:, :, 1 : 1 + self.n]
        Qa, _ = self._exclusion_products(Fa)
        return np.maximum(
            np.einsum("bi,bij,bi->bj", np.abs(P), dFa, np.abs(Qa)).real, 1e-300
        )

    def residuals(self, X: np.ndarray, P: np.ndarray) -> np.ndarray:
        V = self.values(X, P)
        return np.max(np.abs(V) / self.scales(X, P), axis=1)

    def divisor_values(self, X: np.ndarray) -> np.ndarray:
        """|factor(x)| / (term magnitude sum): relative distance to each component."""
        vals, mags = self._fpack.values_and_magnitudes(X)
        return np.abs(vals) / np.maximum(mags, 1e-300)

    def log_gradient_matrix(self, x: np.ndarray) -> np.ndarray:
        """Rows j, columns i: d log|poly_i| / dx_j at one point (with the v
        sign folded in); the seed pair solves M p = 0."""
        X = x[None, :]
        F, dF = self._factor_values(X)
        M = (dF[0] / F[0][:, None]).T  # (n, m)
        return M * self._signs[None, :]
