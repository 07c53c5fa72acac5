"""The ``wco`` command line.

Exit codes: 0 success, 1 negative mathematical result, 2 input error.
3 is reserved for a failed internal cross-check (a bug, never an answer).
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .calculus import compute_h
from .errors import ExtensionError, PostconditionError, PreconditionError
from .generators import KINDS, generate_instance
from .operator import WcOperator, h_n, kernel_basis, operator_norm
from .report import (
    certificate_dict,
    cc_dict,
    classification_dict,
    extension_dict,
    solution_dict,
    to_json,
    to_text,
)
from .scenario import Scenario, ScenarioError, dumps_scenario, load_scenario, scenario_to_dict
from .selftest import run_selftest
from .structure import classify, injectivity_report, polar_decompose
from .subnormality import (
    N_MAX,
    build_extension,
    certify_subnormal,
    default_grid,
    intertwining_residual,
    isometry_residual,
    lemma_cc_equivalences,
    main1_battery,
    product_h,
    solve_cc,
    verify_cc,
    verify_cc1,
)
from .tolerance import DEFAULT, Tolerances

OK, NEGATIVE, INPUT_ERROR, INTERNAL_ERROR = 0, 1, 2, 3
COMMANDS = ("analyze", "classify", "check-cc", "extend", "solve-cc", "certify", "selftest", "generate")
SCENARIO_COMMANDS = {"analyze", "classify", "check-cc", "extend", "solve-cc", "certify"}


class InputError(Exception):
    pass


@dataclass
class Settings:
    tolerances: Tolerances
    nmax: int
    grid: np.ndarray | None
    certifying: bool


def _parse_grid(text: str) -> np.ndarray:
    try:
        grid = np.array([float(x) for x in text.split(",") if x.strip()], float)
    except ValueError:
        raise InputError(f"--grid: expected comma-separated numbers, got {text!r}") from None
    if grid.size == 0 or np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise InputError("--grid: expected a nonempty list of finite numbers >= 0")
    return grid


def resolve_settings(args: argparse.Namespace, sc: Scenario | None) -> Settings:
    """Flags win over ``WCO_TOL``, which wins over scenario options and defaults."""
    options = sc.options if sc is not None else {}
    tol = options.get("tol", DEFAULT.abs)
    raw = os.environ.get("WCO_TOL", "").strip()
    if raw:
        try:
            tol = float(raw)
        except ValueError:
            raise InputError(f"WCO_TOL: not a number: {raw!r}") from None
    if args.tol is not None:
        tol = args.tol
    if not (np.isfinite(tol) and tol > 0):
        raise InputError(f"tolerance must be a positive number, got {tol!r}")
    nmax = args.nmax if args.nmax is not None else options.get("nmax", N_MAX)
    grid = None
    if args.grid is not None:
        grid = _parse_grid(args.grid)
    elif sc is not None and sc.grid is not None:
        grid = np.asarray(sc.grid, float)
    return Settings(DEFAULT.with_abs(tol), int(nmax), grid, not args.bare)


def _atom_rows(sc: Scenario, **columns) -> list[dict]:
    inst = sc.instance
    rows = []
    for i, a in enumerate(inst.space.atoms):
        row = {"atom": a, "mu": float(inst.mu[i]), "phi": inst.space.atoms[int(inst.phi[i])],
               "w": complex(inst.w[i])}
        for name, values in columns.items():
            row[name] = values[i]
        rows.append(row)
    return rows


def _require_family(sc: Scenario, command: str):
    if sc.family is None:
        raise InputError(f"{command} needs a scenario with a 'family' section")
    return sc.family


# --------------------------------------------------------------------------
# commands: each returns (exit code, report body)


def cmd_analyze(sc: Scenario, st: Settings):
    inst = sc.instance
    op = WcOperator(inst)
    h = op.h.values
    polar = polar_decompose(op)
    hn = {str(n): h_n(inst, n).values for n in range(st.nmax + 1)}
    body = {
        "atom_table": _atom_rows(sc, h=h, sqrt_h=polar.modulus.values, w_tilde=polar.w_tilde),
        "derived": {
            "h": dict(zip(inst.space.atoms, h)),
            "h_n": {n: dict(zip(inst.space.atoms, v)) for n, v in hn.items()},
            "kernel": [inst.space.atoms[int(np.argmax(np.abs(e.coeffs)))] for e in kernel_basis(op)],
            "operator_norm": operator_norm(op),
            "polar": {
                "modulus": dict(zip(inst.space.atoms, polar.modulus.values)),
                "w_tilde": dict(zip(inst.space.atoms, polar.w_tilde)),
            },
        },
        "classification": classification_dict(classify(op), injectivity_report(op)),
    }
    return OK, body


def cmd_classify(sc: Scenario, st: Settings):
    op = WcOperator(sc.instance)
    cls = classify(op)
    return OK, {
        "atom_table": _atom_rows(sc, h=op.h.values),
        "classification": classification_dict(cls, injectivity_report(op)),
    }


def cmd_check_cc(sc: Scenario, st: Settings):
    fam = _require_family(sc, "check-cc")
    inst, tol = sc.instance, st.tolerances.abs
    cc = verify_cc(inst, fam, tol=tol)
    body = {
        "cc": cc_dict(main1_battery(inst, fam, n_max=st.nmax, tol=tol) if cc.satisfied else cc),
        "cc1": cc_dict(verify_cc1(inst, fam, tol=tol)),
        "cc_formulations": lemma_cc_equivalences(inst, fam, tol=tol),
    }
    return (OK if cc.satisfied else NEGATIVE), body


def cmd_extend(sc: Scenario, st: Settings):
    fam = _require_family(sc, "extend")
    inst, tol = sc.instance, st.tolerances.abs
    try:
        ext = build_extension(inst, fam, tol=tol)
    except ExtensionError as exc:
        return NEGATIVE, {"extension": {"defined": False, "reason": str(exc), "violations": exc.violations}}
    op = ext.operator
    cls = classify(op)
    body = {
        "extension": {
            "defined": True,
            "quasinormal": cls.quasinormal,
            "intertwining_residual": intertwining_residual(ext),
            "isometry_residual": isometry_residual(ext),
            **extension_dict(ext, product_h(ext)),
        },
        "extension_classification": classification_dict(cls),
        "cc": {"satisfied": verify_cc(inst, fam, tol=tol).satisfied},
    }
    return (OK if cls.quasinormal else NEGATIVE), body


def cmd_solve_cc(sc: Scenario, st: Settings):
    inst = sc.instance
    grid = st.grid if st.grid is not None else default_grid(inst)
    sol = solve_cc(inst, grid, certifying=st.certifying, tol=st.tolerances.solver)
    return (OK if sol.feasible else NEGATIVE), {"solution": solution_dict(sol)}


def cmd_certify(sc: Scenario, st: Settings):
    inst = sc.instance
    cert = certify_subnormal(inst, sc.family, st.grid, n_max=st.nmax, tol=st.tolerances.abs)
    op = WcOperator(inst)
    body = {
        "atom_table": _atom_rows(sc, h=compute_h(inst).values),
        "certificate": certificate_dict(cert),
        "classification": classification_dict(classify(op), injectivity_report(op)),
    }
    return (OK if cert.certified else NEGATIVE), body


HANDLERS = {
    "analyze": cmd_analyze,
    "classify": cmd_classify,
    "check-cc": cmd_check_cc,
    "extend": cmd_extend,
    "solve-cc": cmd_solve_cc,
    "certify": cmd_certify,
}


def _residual_summary(body: dict) -> dict:
    """Every numeric entry whose key mentions a residual, gap or deviation."""
    out = {}

    def walk(prefix, v):
        if isinstance(v, dict):
            for k, x in v.items():
                walk(f"{prefix}.{k}" if prefix else k, x)
        elif isinstance(v, (float, np.floating)) and any(s in prefix for s in ("residual", "gap", "deviation", "eigenvalue", "commutator")):
            out[prefix] = float(v)

    walk("", {k: v for k, v in body.items() if k != "atom_table"})
    return out


def run(command: str, sc: Scenario | None, st: Settings) -> tuple[int, dict]:
    """Dispatch a scenario command; returns ``(exit code, report)``."""
    if command not in HANDLERS:
        raise InputError(f"unknown command {command!r}")
    if sc is None:
        raise InputError(f"{command} needs --scenario")
    code, body = HANDLERS[command](sc, st)
    return code, _envelope(command, code, st, sc, body)


def _envelope(command, code, st, sc, body, message=None) -> dict:
    status = {OK: "ok", NEGATIVE: "negative", INPUT_ERROR: "input-error"}.get(code, "internal-error")
    report = {
        "tool": "wco",
        "version": __version__,
        "command": command,
        "exit_code": code,
        "status": status,
    }
    if message:
        report["message"] = message
    if st is not None:
        report["tolerances"] = {**st.tolerances.as_dict(), "n_max": st.nmax}
    if sc is not None:
        report["scenario"] = scenario_to_dict(sc)
    report.update(body)
    if body:
        report["residual_summary"] = _residual_summary(body)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wco", description="Weighted composition operators on finite atomic spaces.")
    p.add_argument("--version", action="version", version=f"wco {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", metavar="PATH")
    p.add_argument("--grid", metavar="T1,T2,...", help="grid of candidate locations for solve-cc/certify")
    p.add_argument("--nmax", type=int, help=f"highest moment / power checked (default {N_MAX})")
    p.add_argument("--tol", type=float, help="residual tolerance (overrides WCO_TOL)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument("--bare", action="store_true", help="solve-cc: impose CC only, not the certifying equations")
    p.add_argument("--kind", choices=KINDS, help="generate: instance kind")
    p.add_argument("--size", type=int, default=4, help="generate: instance size")
    p.add_argument("--count", type=int, default=500, help="selftest: number of instances")
    p.add_argument("--workers", type=int, default=1, help="selftest: worker processes")
    return p


def _emit(report: dict, fmt: str, output: str | None) -> None:
    text = to_json(report) if fmt == "json" else to_text(report)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sc, st = None, None
    try:
        if args.nmax is not None and args.nmax < 0:
            raise InputError("--nmax must be >= 0")
        if args.command == "generate":
            if args.kind is None:
                raise InputError("generate needs --kind")
            try:
                gen = generate_instance(args.kind, args.size, args.seed)
            except ValueError as exc:
                raise InputError(str(exc)) from None
            text = dumps_scenario(gen)
            if args.output:
                with open(args.output, "w", encoding="utf-8") as fh:
                    fh.write(text + "\n")
            else:
                print(text)
            return OK
        if args.scenario is not None:
            sc = load_scenario(args.scenario)
        st = resolve_settings(args, sc)
        if args.command == "selftest":
            if args.count < 1 or args.workers < 1:
                raise InputError("--count and --workers must be >= 1")
            summary = run_selftest(args.count, seed=args.seed, workers=args.workers)
            code = OK if summary["failed"] == 0 else NEGATIVE
            report = _envelope("selftest", code, st, None, {"selftest": summary})
        else:
            code, report = run(args.command, sc, st)
    except (ScenarioError, InputError, PreconditionError) as exc:
        code = INPUT_ERROR
        detail = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        if isinstance(exc, ScenarioError):
            detail["error"]["field"] = exc.field
        report = _envelope(args.command, code, st, sc, detail, message=str(exc))
        print(f"wco: error: {exc}", file=sys.stderr)
    except PostconditionError as exc:
        code = INTERNAL_ERROR
        report = _envelope(args.command, code, st, sc, {"error": {"type": "PostconditionError", "message": str(exc)}},
                           message=str(exc))
        print(f"wco: internal check failed: {exc}", file=sys.stderr)
    _emit(report, args.format, args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
