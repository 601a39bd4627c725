"""FastAPI surface wrapping the core computations.

Every computation is exposed as a POST endpoint with pydantic request and
response models; the CLI is a thin client of the same handlers (in-process
by default, over HTTP with --server).  Handlers are pure functions of their
request models, so responses are deterministic given the seed.

Error mapping: malformed input raises 400 (422 for schema violations, via
FastAPI); numerical failures such as a stalled monodromy raise 409 with the
error class in the detail.  The CLI translates these to exit codes 2 and 3.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .arrangement import (
    Arrangement,
    char_poly_finite_field,
    char_poly_mobius,
    char_poly_whitney,
    next_primes,
    rank_and_essential,
    region_counts,
    resonance_arrangement,
)
from .errors import InputError, NumericalError
from .eulercalc import (
    b_coefficients,
    chi_arrangement_plus_generic,
    region_bound_bezout,
    region_bound_complex,
    region_bound_morse,
)
from .milnor import ProjectiveDivisor, milnor_numbers
from .polysys import build_critical_system, homogenize_divisor, make_generic_quadric, parse_poly
from .sampler import (
    SampleReport,
    benchmark,
    benchmark_csv,
    lp_enumerate_regions,
    morse_sample,
)
from .tracker import TraceFn, TrackOptions

DEFAULT_SEED = 20240802
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Wire models (mirroring the JSON file formats)
# ---------------------------------------------------------------------------


class HyperplaneModel(BaseModel):
    normal: list[str | int]
    offset: str | int = 0


class ArrangementModel(BaseModel):
    """{"n": 2, "hyperplanes": [{"normal": ["0","1"], "offset": "2"}, ...]};
    rationals as decimal-integer or "p/q" strings."""

    n: int
    hyperplanes: list[HyperplaneModel] = Field(default_factory=list)

    def build(self) -> Arrangement:
        return Arrangement.from_dict(self.model_dump())


class CharpolyRequest(BaseModel):
    arrangement: ArrangementModel
    method: Literal["mobius", "whitney", "finite-field"] = "mobius"
    primes: Optional[list[int]] = None


class CharpolyResponse(BaseModel):
    format_version: int = FORMAT_VERSION
    coeffs: list[int]
    text: str
    method: str


class RegionsRequest(BaseModel):
    arrangement: ArrangementModel


class RegionsResponse(BaseModel):
    format_version: int = FORMAT_VERSION
    regions: int
    bounded: int
    essential: bool
    rank: int
    coeffs: list[int]


class EulerRequest(BaseModel):
    arrangement: ArrangementModel
    degrees: list[int] = Field(default_factory=list)


class EulerResponse(BaseModel):
    format_version: int = FORMAT_VERSION
    chi: int
    b: list[int]
    bound_complex: int


class ReportModel(BaseModel):
    count: int
    expected_count: int
    method: str
    points: list[list[float]]
    sign_vectors: list[str]
    residuals: list[float]
    timings: dict[str, float]
    retries: int
    diagnostics: dict

    @classmethod
    def from_report(cls, report: SampleReport) -> "ReportModel":
        return cls(**report.to_dict())


class SampleRequest(BaseModel):
    arrangement: ArrangementModel
    method: Literal["morse", "lp", "both"] = "morse"
    seed: int = DEFAULT_SEED
    threads: int = 1
    box: Optional[float] = None


class SampleResponse(BaseModel):
    format_version: int = FORMAT_VERSION
    morse: Optional[ReportModel] = None
    lp: Optional[ReportModel] = None
    agree: Optional[bool] = None


class MilnorRequest(BaseModel):
    poly: str
    nvars: Optional[int] = None
    seed: int = DEFAULT_SEED
    threads: int = 1


class MilnorResponse(BaseModel):
    format_version: int = FORMAT_VERSION
    mu: list[int]
    degree: int
    bezout_bounds: list[int]


class BoundRequest(BaseModel):
    poly: str
    nvars: Optional[int] = None
    chi_real: Optional[int] = None
    seed: int = DEFAULT_SEED
    threads: int = 1


class BoundResponse(BaseModel):
    format_version: int = FORMAT_VERSION
    mu: list[int]
    degree: int
    bound_complex: int
    bound_bezout: int
    bound_morse: Optional[int] = None


class BenchRequest(BaseModel):
    suite: Literal["resonance"] = "resonance"
    dmax: int = 3
    methods: list[Literal["morse", "lp"]] = Field(default_factory=lambda: ["morse", "lp"])
    repetitions: int = 1
    seed: int = DEFAULT_SEED


class BenchResponse(BaseModel):
    format_version: int = FORMAT_VERSION
    rows: list[dict]
    csv: str


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str = __version__


# ---------------------------------------------------------------------------
# Handlers (shared by the HTTP endpoints and the in-process CLI client)
# ---------------------------------------------------------------------------


def handle_charpoly(req: CharpolyRequest) -> CharpolyResponse:
    arrangement = req.arrangement.build()
    if req.method == "mobius":
        chi = char_poly_mobius(arrangement)
    elif req.method == "whitney":
        chi = char_poly_whitney(arrangement)
    else:
        primes = req.primes or next_primes(10_000, arrangement.n + 2)
        chi = char_poly_finite_field(arrangement, primes)
    return CharpolyResponse(coeffs=list(chi.coeffs), text=str(chi), method=req.method)


def handle_regions(req: RegionsRequest) -> RegionsResponse:
    arrangement = req.arrangement.build()
    chi = char_poly_mobius(arrangement)
    rc = region_counts(arrangement)
    rank, _ = rank_and_essential(arrangement)
    return RegionsResponse(
        regions=rc.regions,
        bounded=rc.bounded,
        essential=rc.essential,
        rank=rank,
        coeffs=list(chi.coeffs),
    )


def handle_euler(req: EulerRequest) -> EulerResponse:
    arrangement = req.arrangement.build()
    chi = char_poly_mobius(arrangement)
    value = chi_arrangement_plus_generic(chi, req.degrees)
    b = b_coefficients(arrangement.n, req.degrees)
    bound = abs(chi(-1))
    return EulerResponse(chi=value, b=b, bound_complex=bound)


def handle_sample(req: SampleRequest, trace: TraceFn | None = None) -> SampleResponse:
    arrangement = req.arrangement.build()
    opts = TrackOptions(workers=max(1, req.threads))
    morse_report = lp_report = None
    if req.method in ("morse", "both"):
        morse_report = morse_sample(arrangement, seed=req.seed, opts=opts, trace=trace)
    if req.method in ("lp", "both"):
        lp_report = lp_enumerate_regions(arrangement, box=req.box)
    agree = None
    if morse_report and lp_report:
        agree = set(morse_report.sign_vectors) == set(lp_report.sign_vectors)
    return SampleResponse(
        morse=ReportModel.from_report(morse_report) if morse_report else None,
        lp=ReportModel.from_report(lp_report) if lp_report else None,
        agree=agree,
    )


def _divisor_from_text(poly: str, nvars: Optional[int]) -> ProjectiveDivisor:
    n = nvars
    if n is None:
        import re

        indices = [int(m) for m in re.findall(r"x(\d+)", poly)]
        if not indices:
            raise InputError("polynomial mentions no variables; pass nvars explicitly")
        n = max(indices)
    f = parse_poly(poly, n)
    return ProjectiveDivisor(homogenize_divisor(f))


def handle_milnor(req: MilnorRequest, trace: TraceFn | None = None) -> MilnorResponse:
    divisor = _divisor_from_text(req.poly, req.nvars)
    opts = TrackOptions(workers=max(1, req.threads))
    mu = milnor_numbers(divisor, seed=req.seed, opts=opts)
    d = divisor.degree - 1  # affine degree of the input polynomial
    bounds = [max(d, 1) ** i if d >= 1 else (1 if i == 0 else 0) for i in range(divisor.n + 1)]
    return MilnorResponse(mu=list(mu.values), degree=divisor.degree, bezout_bounds=bounds)


def handle_bound(req: BoundRequest, trace: TraceFn | None = None) -> BoundResponse:
    divisor = _divisor_from_text(req.poly, req.nvars)
    opts = TrackOptions(workers=max(1, req.threads))
    mu = milnor_numbers(divisor, seed=req.seed, opts=opts)
    n = divisor.n
    d = divisor.degree - 1
    morse_bound = None
    if req.chi_real is not None:
        morse_bound = region_bound_morse(region_bound_complex(mu), req.chi_real)
    return BoundResponse(
        mu=list(mu.values),
        degree=divisor.degree,
        bound_complex=region_bound_complex(mu),
        bound_bezout=region_bound_bezout(max(d, 1), n),
        bound_morse=morse_bound,
    )


def handle_bench(req: BenchRequest) -> BenchResponse:
    if req.dmax < 2 or req.dmax > 6:
        raise InputError("bench suite supports 2 <= dmax <= 6")
    arrangements = [(f"resonance-{d}", resonance_arrangement(d)) for d in range(2, req.dmax + 1)]
    rows = benchmark(arrangements, methods=req.methods, repetitions=req.repetitions, seed=req.seed)
    return BenchResponse(rows=rows, csv=benchmark_csv(rows))


def handle_health() -> HealthResponse:
    return HealthResponse()


# ---------------------------------------------------------------------------
# FastAPI application
# ---------------------------------------------------------------------------

app = FastAPI(
    title="chambers",
    version=__version__,
    description="Arrangement invariants, Euler characteristics and region sampling",
)


def _translate(exc: Exception) -> HTTPException:
    if isinstance(exc, InputError):
        return HTTPException(status_code=400, detail={"error": type(exc).__name__, "message": str(exc)})
    if isinstance(exc, NumericalError):
        return HTTPException(status_code=409, detail={"error": type(exc).__name__, "message": str(exc)})
    raise exc


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return handle_health()


@app.post("/charpoly", response_model=CharpolyResponse)
def charpoly(req: CharpolyRequest) -> CharpolyResponse:
    try:
        return handle_charpoly(req)
    except (InputError, NumericalError) as exc:
        raise _translate(exc) from exc


@app.post("/regions", response_model=RegionsResponse)
def regions(req: RegionsRequest) -> RegionsResponse:
    try:
        return handle_regions(req)
    except (InputError, NumericalError) as exc:
        raise _translate(exc) from exc


@app.post("/euler", response_model=EulerResponse)
def euler(req: EulerRequest) -> EulerResponse:
    try:
        return handle_euler(req)
    except (InputError, NumericalError) as exc:
        raise _translate(exc) from exc


@app.post("/sample", response_model=SampleResponse)
def sample(req: SampleRequest) -> SampleResponse:
    try:
        return handle_sample(req)
    except (InputError, NumericalError) as exc:
        raise _translate(exc) from exc


@app.post("/milnor", response_model=MilnorResponse)
def milnor(req: MilnorRequest) -> MilnorResponse:
    try:
        return handle_milnor(req)
    except (InputError, NumericalError) as exc:
        raise _translate(exc) from exc


@app.post("/bound", response_model=BoundResponse)
def bound(req: BoundRequest) -> BoundResponse:
    try:
        return handle_bound(req)
    except (InputError, NumericalError) as exc:
        raise _translate(exc) from exc


@app.post("/bench", response_model=BenchResponse)
def bench(req: BenchRequest) -> BenchResponse:
    try:
        return handle_bench(req)
    except (InputError, NumericalError) as exc:
        raise _translate(exc) from exc
