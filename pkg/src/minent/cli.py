"""Command-line front end: ``minent <command> [options]``.

Every command is a thin wrapper over library calls.  Reports go to stdout or
are written atomically to ``--output``.

Exit codes: 0 success, 1 infeasible, 2 invalid input, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__
from .dephasing import plan_catalytic_dephasing, verify_dephasing
from .entropy import entropy_profile, feasibility, profile_columns, renyi_entropy
from .errors import (
    CapacityExceeded,
    InfeasibleSpectrum,
    InvalidState,
    MinEntropyError,
    NotMajorized,
    UnsupportedOrder,
)
from .instrument import verify_instrument
from .masking import build_scheme, verify_masking
from .pst import plan_pst, verify_pst
from .qstate import (
    BipartitePureState,
    DensityMatrix,
    matrix_from_json,
    random_state,
    schmidt_decompose,
    vector_from_json,
)
from .tolerances import get_tolerances, merged, parse_overrides, use_tolerances
from .transition import catalyst_bounds, execute_transition, plan_transition

log = logging.getLogger(__name__)

SPEC_VERSION = "1.0"
COMMANDS = ("entropy", "feasibility", "synth-pst", "verify-pst", "mask", "dephase", "transit", "sweep")
TOL_ENV = "MINENT_TOL"

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2, 3


class InputError(ValueError):
    """Malformed command-line input."""


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    fmt: str = "json"
    output: str | None = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if self.fmt not in ("json", "csv"):
            raise InputError(f"unknown format {self.fmt!r}")
        for name, value in self.tolerances.items():
            if not value > 0:
                raise InputError(f"tolerance {name} must be positive, got {value}")


# --------------------------------------------------------------------------
# input parsing
# --------------------------------------------------------------------------


def _parse_spectrum(text: str) -> list[float]:
    try:
        vals = [float(eval_fraction(x)) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse spectrum {text!r}: {exc}") from exc
    if not vals:
        raise InputError("empty spectrum")
    return vals


def eval_fraction(text: str) -> float:
    """``"0.25"`` or ``"1/4"`` as a float."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        if float(den) == 0.0:
            raise ValueError(f"zero denominator in {text!r}")
        return float(num) / float(den)
    return float(text)


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_state(inputs: dict, key: str, spectrum_key: str | None = None) -> DensityMatrix:
    path = inputs.get(key)
    spec = inputs.get(spectrum_key) if spectrum_key else None
    if path:
        obj = _read_json(path)
        try:
            if "amp_re" in obj:
                vec, dims = vector_from_json(obj)
                return DensityMatrix.from_vector(vec, dims)
            mat, dims = matrix_from_json(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path} is not a matrix JSON document: {exc}") from exc
        return DensityMatrix(mat, dims)
    if spec:
        return DensityMatrix.diagonal(_parse_spectrum(spec))
    raise InputError(f"missing input: give --{key.replace('_', '-')}"
                     + (f" or --{spectrum_key.replace('_', '-')}" if spectrum_key else ""))


def _load_pad(inputs: dict) -> BipartitePureState:
    path = inputs.get("pad")
    if path:
        obj = _read_json(path)
        try:
            vec, dims = vector_from_json(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path} is not a vector JSON document: {exc}") from exc
        if len(dims) != 2:
            raise InputError(f"pad must have two factors, got dims {dims}")
        return schmidt_decompose(vec, dims[0], dims[1])
    if inputs.get("spectrum"):
        return BipartitePureState.from_spectrum(_parse_spectrum(inputs["spectrum"]))
    raise InputError("missing pad: give --pad or --spectrum")


def _require(inputs: dict, key: str):
    if inputs.get(key) is None:
        raise InputError(f"missing required option --{key.replace('_', '-')}")
    return inputs[key]


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


class Table(NamedTuple):
    columns: list
    rows: list


class Infeasible(Exception):
    """Carries a report for an infeasible (exit 1) verdict."""

    def __init__(self, report: dict, message: str):
        super().__init__(message)
        self.report = report


def _cmd_entropy(cfg: RunConfig):
    state = _load_state(cfg.inputs, "state", "spectrum")
    alpha = cfg.inputs.get("alpha", "inf")
    a = math.inf if str(alpha).lower() in ("inf", "infinity", "min") else float(alpha)
    return {"alpha": "inf" if math.isinf(a) else a, "bits": renyi_entropy(state, a)}, EXIT_OK


def _cmd_feasibility(cfg: RunConfig):
    if cfg.inputs.get("pad"):
        state = _load_pad(cfg.inputs)
    else:
        state = _load_state(cfg.inputs, "state", "spectrum")
    rep = feasibility(state, int(_require(cfg.inputs, "d")), cfg.inputs.get("task") or "pst")
    if not rep["feasible"]:
        raise Infeasible(rep, f"infeasible: {rep['message']}")
    return rep, EXIT_OK


def _cmd_synth_pst(cfg: RunConfig):
    pad = _load_pad(cfg.inputs)
    proto = plan_pst(pad, int(_require(cfg.inputs, "d")))
    rep = proto.to_dict()
    check = verify_instrument(proto.instrument, pad)
    rep["instrument_report"] = check.to_dict()
    rep["pass"] = check.passed
    return rep, EXIT_OK if check.passed else EXIT_VERIFY


def _cmd_verify_pst(cfg: RunConfig):
    pad = _load_pad(cfg.inputs)
    proto = plan_pst(pad, int(_require(cfg.inputs, "d")))
    rep = verify_pst(proto, int(cfg.inputs.get("secrets") or 20), cfg.seed)
    return rep.to_dict(), EXIT_OK if rep.passed else EXIT_VERIFY


def _cmd_mask(cfg: RunConfig):
    scheme = build_scheme(int(_require(cfg.inputs, "d")))
    rep = verify_masking(scheme, int(cfg.inputs.get("secrets") or 100), cfg.seed)
    out = rep.to_dict()
    out["scheme"] = scheme.to_dict()
    return out, EXIT_OK if rep.passed else EXIT_VERIFY


def _cmd_dephase(cfg: RunConfig):
    sigma = _load_state(cfg.inputs, "catalyst", "spectrum")
    plan = plan_catalytic_dephasing(sigma, int(_require(cfg.inputs, "d")))
    rep = verify_dephasing(plan, int(cfg.inputs.get("inputs") or 20), cfg.seed)
    out = rep.to_dict()
    out["plan"] = plan.to_dict()
    return out, EXIT_OK if rep.passed else EXIT_VERIFY


def _cmd_transit(cfg: RunConfig):
    source = _load_state(cfg.inputs, "source", "source_spectrum")
    target = _load_state(cfg.inputs, "target", "target_spectrum")
    sigma = _load_state(cfg.inputs, "catalyst", "catalyst_spectrum")
    plan = plan_transition(source, target, sigma)
    run = execute_transition(plan)
    ok = run.distance <= get_tolerances().tol_eq
    out = {
        "pass": ok,
        "trace_distance": run.distance,
        "catalyst_bounds": catalyst_bounds(source.dim),
        "plan": plan.to_dict(),
    }
    return out, EXIT_OK if ok else EXIT_VERIFY


def _sweep_cases(spec, seed: int):
    if not isinstance(spec, dict):
        raise InputError("sweep spec must be a JSON object")
    unknown = set(spec) - {"spectra", "ginibre", "d"}
    if unknown:
        raise InputError(f"unknown sweep keys {sorted(unknown)}")
    ds = spec.get("d", [2])
    if isinstance(ds, int):
        ds = [ds]
    if not isinstance(ds, list) or not all(isinstance(x, int) and x >= 1 for x in ds):
        raise InputError("sweep 'd' must be a positive integer or a list of them")
    spectra = spec.get("spectra", [])
    if not isinstance(spectra, list):
        raise InputError("sweep 'spectra' must be a list of spectra")
    cases = []
    for k, s in enumerate(spectra):
        if not isinstance(s, list) or not s:
            raise InputError(f"spectrum #{k} must be a non-empty list")
        try:
            vals = [eval_fraction(x) if isinstance(x, str) else float(x) for x in s]
        except (TypeError, ValueError) as exc:
            raise InputError(f"spectrum #{k}: {exc}") from exc
        cases.append((f"spectrum:{k}", DensityMatrix.diagonal(vals)))
    g = spec.get("ginibre")
    if g is not None:
        if not isinstance(g, dict) or not isinstance(g.get("dim"), int) or g["dim"] < 1:
            raise InputError("sweep 'ginibre' needs an integer 'dim'")
        seeds = g.get("seeds", 0)
        if isinstance(seeds, int):
            seeds = [seed + k for k in range(seeds)]
        if not isinstance(seeds, list) or not all(isinstance(x, int) for x in seeds):
            raise InputError("sweep 'ginibre.seeds' must be a count or a list of integers")
        for sd in seeds:
            cases.append((f"ginibre:{sd}", random_state("ginibre_mixed", g["dim"], seed=sd)))
    return cases, ds


def _cmd_sweep(cfg: RunConfig):
    path = cfg.inputs.get("spec")
    spec = _read_json(path) if path else {}
    cases, ds = _sweep_cases(spec, cfg.seed)
    rows = [{"case": label, **entropy_profile(state, ds)} for label, state in cases]
    return Table(["case", *profile_columns(ds)], rows), EXIT_OK


HANDLERS = {
    "entropy": _cmd_entropy,
    "feasibility": _cmd_feasibility,
    "synth-pst": _cmd_synth_pst,
    "verify-pst": _cmd_verify_pst,
    "mask": _cmd_mask,
    "dephase": _cmd_dephase,
    "transit": _cmd_transit,
    "sweep": _cmd_sweep,
}


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (dict, list)):
        return json.dumps(_jsonable(v), sort_keys=True)
    return str(v)


def render(report, fmt: str) -> str:
    """Serialize a report dict or a :class:`Table`."""
    if isinstance(report, Table):
        header, rows = report.columns, report.rows
    else:
        header, rows = list(report.keys()), [report]
    if fmt == "json":
        doc = rows if isinstance(report, Table) else report
        return json.dumps(_jsonable(doc), indent=2, ensure_ascii=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(r.get(h, "")) for h in header])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg: RunConfig, report) -> None:
    text = render(report, cfg.fmt)
    if cfg.output:
        write_atomic(cfg.output, text)
    else:
        sys.stdout.write(text)


def run(config: RunConfig) -> int:
    """Execute one command; returns the exit code."""
    try:
        tol = merged(get_tolerances(), config.tolerances)
    except (TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    with use_tolerances(tol):
        try:
            report, code = HANDLERS[config.command](config)
        except Infeasible as exc:
            _emit(config, exc.report)
            print(str(exc), file=sys.stderr)
            return EXIT_INFEASIBLE
        except (InfeasibleSpectrum, NotMajorized) as exc:
            _emit(config, {"pass": False, "error": type(exc).__name__, "message": str(exc)})
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        except (UnsupportedOrder, CapacityExceeded, InvalidState, InputError, MinEntropyError, ValueError) as exc:
            print(f"invalid input: {exc}", file=sys.stderr)
            return EXIT_INVALID
        _emit(config, report)
        if code == EXIT_VERIFY:
            print("verification failed", file=sys.stderr)
        return code


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                        help="tolerance override, repeatable; wins over $MINENT_TOL")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    common.add_argument("--output", "-o", help="report path (written atomically); default stdout")

    p = argparse.ArgumentParser(prog="minent", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"minent {__version__} (spec {SPEC_VERSION})")
    sub = p.add_subparsers(dest="command", required=True)

    def state_opts(sp, name="state", spectrum="spectrum"):
        sp.add_argument(f"--{name}", help="density matrix in matrix JSON")
        sp.add_argument(f"--{spectrum}", help="comma separated eigenvalues, e.g. 1/2,1/4,1/4")

    sp = sub.add_parser("entropy", parents=[common], help="Renyi entropy of a state")
    state_opts(sp)
    sp.add_argument("--alpha", default="inf")

    sp = sub.add_parser("feasibility", parents=[common], help="min-entropy criterion for a task")
    state_opts(sp)
    sp.add_argument("--pad", help="bipartite pure state in vector JSON")
    sp.add_argument("--task", choices=("pst", "mask", "dephase"), default="pst")
    sp.add_argument("--d", type=int, required=True)

    for name, helptext in (("synth-pst", "build a transfer protocol"),
                           ("verify-pst", "run the transfer protocol on random secrets")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--pad", help="bipartite pure state in vector JSON")
        sp.add_argument("--spectrum", help="Schmidt spectrum of a canonical pad")
        sp.add_argument("--d", type=int, required=True)
        if name == "verify-pst":
            sp.add_argument("--secrets", type=int, default=20)

    sp = sub.add_parser("mask", parents=[common], help="build and verify a masker")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--secrets", type=int, default=100)

    sp = sub.add_parser("dephase", parents=[common], help="plan and verify catalytic dephasing")
    state_opts(sp, "catalyst", "spectrum")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--inputs", type=int, default=20)

    sp = sub.add_parser("transit", parents=[common], help="catalytic state transition")
    state_opts(sp, "source", "source-spectrum")
    state_opts(sp, "target", "target-spectrum")
    state_opts(sp, "catalyst", "catalyst-spectrum")

    sp = sub.add_parser("sweep", parents=[common], help="entropy and feasibility table")
    sp.add_argument("--spec", help="sweep description in JSON")
    return p


def config_from_args(ns: argparse.Namespace, env: dict | None = None) -> RunConfig:
    env = os.environ if env is None else env
    tols: dict = {}
    try:
        if env.get(TOL_ENV):
            tols.update(parse_overrides(env[TOL_ENV]))
        for item in ns.tol:
            tols.update(parse_overrides(item))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    skip = {"command", "seed", "tol", "fmt", "output"}
    inputs = {k: v for k, v in vars(ns).items() if k not in skip}
    return RunConfig(ns.command, inputs, ns.seed, tols, ns.fmt, ns.output)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INVALID
    try:
        cfg = config_from_args(ns)
    except InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
