"""Command-line entry point: ``ccdc <subcommand> [flags]``.

JSON goes to stdout (or ``--out``); human-readable text goes to stderr.
Exit codes: 0 success, 1 invalid input or failed validation, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import sdp
from .approximations import HierarchyLevel, StateSet, build_inner_set, build_outer_set_qubit
from .processes import (
    BUILTINS,
    ProcessError,
    ProcessMatrix,
    canonical_process,
    validate_ordered,
    validate_tripartite_ordered,
)
from .robustness import (
    analytic_bounds,
    analytic_witnesses,
    dual_witness,
    robustness,
    verify_witness_sufficient,
)
from .sampling import SamplerSpec, sample_process, seesaw
from .tensor import LayoutError

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


class InputError(Exception):
    pass


def _emit(obj, args) -> None:
    text = json.dumps(obj, indent=2, default=_default)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_process(args) -> ProcessMatrix:
    if args.builtin and args.input:
        raise InputError("give either --builtin or --in, not both")
    if args.builtin:
        try:
            return canonical_process(args.builtin)
        except ValueError as exc:
            raise InputError(f"{exc}; builtins are {', '.join(BUILTINS)}") from exc
    if args.input:
        try:
            return ProcessMatrix.from_json(Path(args.input).read_text())
        except OSError as exc:
            raise InputError(str(exc)) from exc
    raise InputError("a process is required: --builtin NAME or --in FILE")


def _parse_states(spec: str | None, d: int, seed: int | None):
    """``family:n``, ``random:N`` or a StateSet JSON file."""
    if spec is None:
        if d == 2:
            return "family", 171
        return "random", 200
    if ":" in spec and not Path(spec).exists():
        kind, _, num = spec.partition(":")
        if kind.lower() not in ("family", "random") or not num.isdigit():
            raise InputError(f"bad --states value {spec!r}")
        return kind.lower(), int(num)
    try:
        return "file", StateSet.from_json(Path(spec).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read state set {spec!r}: {exc}") from exc


def _level(args, w: ProcessMatrix) -> HierarchyLevel:
    method = args.method.lower()
    if method == "ppt":
        return HierarchyLevel.ppt(args.k)
    kind, val = _parse_states(args.states, w.d_ai, args.seed)
    if method == "inner":
        if kind == "family":
            states = build_inner_set(2, ("POLYHEDRON_FAMILY", val))
        elif kind == "random":
            states = build_inner_set(w.d_ai, ("RANDOM", val, args.seed or 0))
        else:
            states = val
        return HierarchyLevel.inner(states)
    if kind == "family":
        states = build_outer_set_qubit(val)
    elif kind == "file":
        states = val
    else:
        raise InputError("outer levels need --states family:n or a file of operators")
    return HierarchyLevel.outer(states, args.k if method == "outer-poly-ppt" else None)


# ------------------------------------------------------------- subcommands

def cmd_validate(args) -> int:
    w = _load_process(args)
    rep = validate_tripartite_ordered(w, args.tol) if w.tripartite else validate_ordered(w, args.tol)
    out = rep.as_dict()
    out["process"] = w.name
    _emit(out, args)
    ok = rep.passed
    _say(f"{w.name or 'process'}: {'valid' if ok else 'INVALID'} ordered process")
    return EXIT_OK if ok else EXIT_INVALID


def _check_valid(w: ProcessMatrix, tol: float) -> None:
    rep = validate_tripartite_ordered(w, tol) if w.tripartite else validate_ordered(w, tol)
    if not rep.passed:
        raise InputError(f"input is not a valid ordered process: {rep.as_dict()}")


def cmd_robustness(args) -> int:
    w = _load_process(args)
    _check_valid(w, args.tol)
    level = _level(args, w)
    rep = robustness(w, args.kind, level)
    out = rep.as_dict(include_witness=False)
    out["caps"] = {k: v for k, v in analytic_bounds(w).items() if k.endswith("cap")}
    _emit(out, args)
    _say(f"{w.name} {rep.kind} {rep.method}: {rep.value:.6f} ({rep.direction})")
    return EXIT_OK


def cmd_witness(args) -> int:
    if args.analytic:
        try:
            wit = analytic_witnesses(args.analytic, args.d)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        rep = None
    else:
        w = _load_process(args)
        _check_valid(w, args.tol)
        wit, rep = dual_witness(w, args.kind, _level(args, w))
    check = verify_witness_sufficient(wit)
    out = {"witness": wit.as_dict(), "sufficient_check": check.as_dict()}
    if rep is not None:
        out["report"] = rep.as_dict(include_witness=False)
        _say(f"witness value -tr(SW) = {rep.value:.6f}")
    _say(f"sufficient conditions {'hold' if check.passed else 'do not hold'}")
    _emit(out, args)
    return EXIT_OK


def _dims(text: str) -> tuple[int, int, int]:
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise InputError(f"bad --dims {text!r}") from exc
    if len(dims) != 3:
        raise InputError("--dims takes three comma-separated integers")
    return dims


def cmd_sample(args) -> int:
    try:
        spec = SamplerSpec(args.sampler, _dims(args.dims), args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    w = sample_process(spec)
    _emit(w.as_dict(), args)
    _say(f"sampled {w.name} with dims {w.dims}")
    return EXIT_OK


def cmd_seesaw(args) -> int:
    dims = _dims(args.dims)
    if args.input or args.builtin:
        initial = _load_process(args)
    else:
        try:
            initial = SamplerSpec(args.sampler, dims, args.seed)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    trace = seesaw(dims, args.kind, HierarchyLevel.ppt(1), eps=args.eps, initial=initial,
                   max_iter=args.max_iter, log=_say)
    _emit(trace.as_dict(), args)
    _say(f"final robustness {trace.final_value:.6f} ({trace.stopping_reason})")
    return EXIT_OK if not trace.stopping_reason.startswith("solver failure") else EXIT_SOLVER


def cmd_reproduce_table(args) -> int:
    from .table import DEFAULT_ROWS, STRETCH_ROWS, format_table, reproduce_table, write_outputs

    rows = list(DEFAULT_ROWS) if not args.rows else [r.strip() for r in args.rows.split(",")]
    if args.include_stretch:
        rows += [r for r in STRETCH_ROWS if r not in rows]
    try:
        table = reproduce_table(rows, jobs=args.jobs, seed=args.seed or 0,
                                family_n=args.family_n, log=_say)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out_dir = Path(args.out_dir)
    paths = write_outputs(table, out_dir)
    _say(format_table(table))
    _say(f"wrote {', '.join(paths.values())}")
    _emit({"rows": table, "files": paths}, args)
    failed = any(c["value"] is None for r in table for c in r["cells"].values())
    return EXIT_SOLVER if failed else EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccdc", description="Classical CCDC robustness toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, process=True):
        if process:
            sp.add_argument("--builtin", help=f"named process ({', '.join(BUILTINS)})")
            sp.add_argument("--in", dest="input", help="process JSON file")
        sp.add_argument("--out", help="write JSON here instead of stdout")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tol", type=float, default=1e-8, help="validation tolerance")

    def level_flags(sp):
        sp.add_argument("--kind", default="generalized",
                        choices=["generalized", "whitenoise"])
        sp.add_argument("--method", default="ppt",
                        choices=["ppt", "inner", "outer-poly", "outer-poly-ppt"])
        sp.add_argument("--k", type=int, default=1)
        sp.add_argument("--states", help="FILE, family:n or random:N")

    sp = sub.add_parser("validate", help="check the ordered-process conditions")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("robustness", help="robustness under one hierarchy level")
    common(sp)
    level_flags(sp)
    sp.set_defaults(func=cmd_robustness)

    sp = sub.add_parser("witness", help="optimal dual witness or an analytic witness")
    common(sp)
    level_flags(sp)
    sp.add_argument("--analytic", help="DDD2 or W222")
    sp.add_argument("--d", type=int, default=2, help="dimension for DDD2")
    sp.set_defaults(func=cmd_witness)

    sp = sub.add_parser("seesaw", help="see-saw search for the most robust process")
    common(sp)
    sp.add_argument("--dims", default="2,2,2")
    sp.add_argument("--kind", default="whitenoise", choices=["generalized", "whitenoise"])
    sp.add_argument("--sampler", default="M1", choices=["M1", "M2", "M3"])
    sp.add_argument("--eps", type=float, default=1e-4)
    sp.add_argument("--max-iter", type=int, default=100)
    sp.set_defaults(func=cmd_seesaw)

    sp = sub.add_parser("sample", help="draw a random ordered process")
    common(sp, process=False)
    sp.add_argument("--dims", default="2,2,2")
    sp.add_argument("--sampler", default="M1", choices=["M1", "M2", "M3"])
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("reproduce-table", help="robustness table with CSV, JSON and PNG output")
    common(sp, process=False)
    sp.add_argument("--rows", help="comma-separated process names")
    sp.add_argument("--include-stretch", action="store_true",
                    help="add the long-running W_333^2 and W_FB rows")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--family-n", type=int, default=171, help="qubit polyhedron family size")
    sp.add_argument("--out-dir", default="table_output")
    sp.set_defaults(func=cmd_reproduce_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except (InputError, ProcessError, LayoutError) as exc:
        _say(f"error: {exc}")
        return EXIT_INVALID
    except sdp.SolverError as exc:
        _say(f"solver failure: {exc}")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
