"""Command-line client for the chambers service.

By default every subcommand calls the service handlers in process; with
``--server URL`` the same requests go over HTTP to a running instance
(``chambers serve``).  Results are printed as JSON (sorted keys, stable
formatting), so identical argv + seed give byte-identical output in
single-worker mode.

Exit codes: 0 success, 2 input error (bad files, flags, budgets), 3
numerical failure (stalled monodromy, sign collision, no convergence).
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .errors import InputError, NumericalError
from .service import (
    DEFAULT_SEED,
    ArrangementModel,
    BenchRequest,
    BoundRequest,
    CharpolyRequest,
    EulerRequest,
    MilnorRequest,
    RegionsRequest,
    SampleRequest,
    handle_bench,
    handle_bound,
    handle_charpoly,
    handle_euler,
    handle_milnor,
    handle_regions,
    handle_sample,
)


@dataclass
class CliState:
    seed: int
    threads: int
    trace: bool
    server: Optional[str]

    def trace_fn(self):
        if not self.trace:
            return None

        def emit(event: dict):
            click.echo(json.dumps(event, sort_keys=True), err=True)

        return emit


def _remote_call(server: str, path: str, payload: dict) -> dict:
    import httpx

    resp = httpx.Client(base_url=server, timeout=3600.0).post(path, json=payload)
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail", {})
    except Exception:
        detail = {}
    message = detail.get("message", resp.text) if isinstance(detail, dict) else str(detail)
    if resp.status_code in (400, 422):
        raise InputError(message)
    if resp.status_code == 409:
        raise NumericalError(message)
    raise NumericalError(f"service error {resp.status_code}: {message}")


def _dispatch(state: CliState, path: str, request, handler, wants_trace: bool = False) -> dict:
    if state.server:
        return _remote_call(state.server, path, request.model_dump())
    if wants_trace:
        response = handler(request, trace=state.trace_fn())
    else:
        response = handler(request)
    return response.model_dump()


def _emit(data: dict, output: Optional[str]) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if output:
        Path(output).write_text(text + "\n")
    else:
        click.echo(text)


def _load_arrangement(path: str) -> ArrangementModel:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict) or "n" not in data:
        raise InputError(f"{path}: arrangement JSON needs 'n' and 'hyperplanes'")
    return ArrangementModel.model_validate(data)


def _read_poly_file(path: str) -> str:
    try:
        return Path(path).read_text().strip()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _parse_int_list(text: Optional[str], what: str) -> list[int]:
    if not text:
        return []
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise InputError(f"cannot parse {what} list {text!r}") from None


def _run(fn):
    try:
        fn()
    except InputError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)


@click.group()
@click.version_option(__version__)
@click.option("--seed", default=DEFAULT_SEED, show_default=True, help="Seed for all random draws.")
@click.option("--threads", default=1, show_default=True, help="Tracker worker pool size; 1 = deterministic mode.")
@click.option("--trace", is_flag=True, help="Stream structured JSON diagnostics to stderr.")
@click.option("--server", default=None, help="Base URL of a running chambers service.")
@click.pass_context
def main(ctx, seed, threads, trace, server):
    """Arrangement invariants, Euler characteristics and region sampling."""
    ctx.obj = CliState(seed=seed, threads=threads, trace=trace, server=server)


@main.command()
@click.argument("arrangement_file")
@click.option("--method", type=click.Choice(["mobius", "whitney", "finite-field"]), default="mobius",
              show_default=True)
@click.option("--primes", default=None, help="Comma-separated primes for the finite-field method.")
@click.option("--output", default=None, help="Write JSON here instead of stdout.")
@click.pass_obj
def charpoly(state, arrangement_file, method, primes, output):
    """Characteristic polynomial of an arrangement file."""

    def go():
        req = CharpolyRequest(
            arrangement=_load_arrangement(arrangement_file),
            method=method,
            primes=_parse_int_list(primes, "prime") or None,
        )
        _emit(_dispatch(state, "/charpoly", req, handle_charpoly), output)

    _run(go)


@main.command()
@click.argument("arrangement_file")
@click.option("--output", default=None)
@click.pass_obj
def regions(state, arrangement_file, output):
    """Region and bounded-region counts (Zaslavsky evaluations)."""

    def go():
        req = RegionsRequest(arrangement=_load_arrangement(arrangement_file))
        _emit(_dispatch(state, "/regions", req, handle_regions), output)

    _run(go)


@main.command()
@click.argument("arrangement_file")
@click.option("--degrees", default="", help="Generic hypersurface degrees, e.g. 2,3.")
@click.option("--output", default=None)
@click.pass_obj
def euler(state, arrangement_file, degrees, output):
    """Euler characteristic of the complement with generic hypersurfaces added."""

    def go():
        req = EulerRequest(
            arrangement=_load_arrangement(arrangement_file),
            degrees=_parse_int_list(degrees, "degree"),
        )
        _emit(_dispatch(state, "/euler", req, handle_euler), output)

    _run(go)


@main.command()
@click.argument("arrangement_file")
@click.option("--method", type=click.Choice(["morse", "lp", "both"]), default="morse", show_default=True)
@click.option("--seed", default=None, type=int, help="Override the global seed.")
@click.option("--box", default=None, type=float, help="Fixed LP box half-width (default adaptive).")
@click.option("--output", default=None)
@click.option("--dump-system", default=None, help="Write the critical system (factored JSON) here.")
@click.pass_obj
def sample(state, arrangement_file, method, seed, box, output, dump_system):
    """One interior point per region (Morse sampler, LP baseline, or both)."""

    def go():
        model = _load_arrangement(arrangement_file)
        req = SampleRequest(
            arrangement=model,
            method=method,
            seed=state.seed if seed is None else seed,
            threads=state.threads,
            box=box,
        )
        if dump_system:
            _dump_critical_system(model, req.seed, dump_system)
        data = _dispatch(state, "/sample", req, handle_sample, wants_trace=True)
        if method != "both":
            report = data["morse"] if method == "morse" else data["lp"]
            data = {"format_version": data["format_version"], **report}
        _emit(data, output)

    _run(go)


def _dump_critical_system(model: ArrangementModel, seed: int, path: str) -> None:
    from .polysys import SparsePoly, make_generic_quadric

    arrangement = model.build()
    quadric = make_generic_quadric(arrangement.n, (seed + 1) * 7919)
    fs = [SparsePoly.linear(list(h.normal), -h.offset) for h in arrangement.hyperplanes]
    payload = {
        "variables": arrangement.n,
        "parameters": [f"u{i + 1}" for i in range(arrangement.k)] + ["v"],
        "psi": "sum_i u_i log|f_i| - v log|g|",
        "factors": {
            "f": [repr(f) for f in fs],
            "g": repr(quadric.poly()),
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


@main.command()
@click.option("--poly", "poly_file", required=True, help="File with one polynomial in x1..xn.")
@click.option("--nvars", default=None, type=int, help="Variable count (default: highest index used).")
@click.option("--output", default=None)
@click.pass_obj
def milnor(state, poly_file, nvars, output):
    """Milnor numbers of the projectivized divisor of an affine polynomial."""

    def go():
        req = MilnorRequest(
            poly=_read_poly_file(poly_file), nvars=nvars, seed=state.seed, threads=state.threads
        )
        _emit(_dispatch(state, "/milnor", req, handle_milnor, wants_trace=True), output)

    _run(go)


@main.command()
@click.option("--poly", "poly_file", required=True, help="File with one polynomial in x1..xn.")
@click.option("--nvars", default=None, type=int)
@click.option("--chi-real", default=None, type=int, help="Euler characteristic of the real complement.")
@click.option("--output", default=None)
@click.pass_obj
def bound(state, poly_file, nvars, chi_real, output):
    """Region-count bounds from Milnor numbers (and optionally chi of R^n minus the divisor)."""

    def go():
        req = BoundRequest(
            poly=_read_poly_file(poly_file),
            nvars=nvars,
            chi_real=chi_real,
            seed=state.seed,
            threads=state.threads,
        )
        _emit(_dispatch(state, "/bound", req, handle_bound, wants_trace=True), output)

    _run(go)


@main.command()
@click.option("--suite", type=click.Choice(["resonance"]), default="resonance", show_default=True)
@click.option("--dmax", default=3, show_default=True)
@click.option("--methods", default="morse,lp", show_default=True)
@click.option("--repetitions", default=1, show_default=True)
@click.option("--out", "out_csv", default=None, help="Write the CSV here (default stdout).")
@click.pass_obj
def bench(state, suite, dmax, methods, repetitions, out_csv):
    """Wall-clock benchmark rows (CSV: instance,n,k,N,method,rep,ms,retries)."""

    def go():
        mlist = [m.strip() for m in methods.split(",") if m.strip()]
        for m in mlist:
            if m not in ("morse", "lp"):
                raise InputError(f"unknown method {m!r}")
        req = BenchRequest(
            suite=suite, dmax=dmax, methods=mlist, repetitions=repetitions, seed=state.seed
        )
        data = _dispatch(state, "/bench", req, handle_bench)
        if out_csv:
            Path(out_csv).write_text(data["csv"])
        else:
            click.echo(data["csv"], nl=False)

    _run(go)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
