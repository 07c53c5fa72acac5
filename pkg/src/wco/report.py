"""Conversion of results into JSON-ready dicts and fixed-width text."""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .structure import Classification, InjectivityReport
from .subnormality import Certificate, CcReport, CcSolution, ExtensionSystem, MomentReport


def plain(obj: Any) -> Any:
    """Recursively turn numpy scalars/arrays and complex numbers into JSON types.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` or ``"nan"``.
    """
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [plain(float(obj.real)), plain(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _real_table(atoms, values) -> dict:
    return {a: float(v) for a, v in zip(atoms, values)}


def classification_dict(c: Classification, inj: InjectivityReport | None = None) -> dict:
    out = {
        "quasinormal": c.quasinormal,
        "hyponormal": c.hyponormal,
        "normal": c.normal,
        "injective_on_support": c.injective_on_support,
        "residuals": c.residuals,
        "witnesses": c.witnesses,
    }
    if inj is not None:
        out["injectivity_conditions"] = inj.conditions
        out["injectivity_agree"] = inj.agree
    return out


def cc_dict(rep: CcReport) -> dict:
    out = {
        "variant": rep.variant,
        "satisfied": rep.satisfied,
        "max_residual": rep.max_residual,
        "tolerance": rep.tolerance,
        "worst": rep.worst(),
        "residuals": rep.residual_table(),
    }
    if rep.main1_battery is not None:
        out["main1_battery"] = rep.main1_battery
    if rep.implications is not None:
        out["implications"] = rep.implications
    return out


def family_dict(fam) -> dict:
    return {a: [{"t": t, "p": p} for t, p in m] for a, m in fam.as_dict().items()}


def extension_dict(ext: ExtensionSystem, big_h: np.ndarray) -> dict:
    inst = ext.instance
    atoms = inst.space.atoms
    return {
        "atoms": [
            {"id": a, "base": ext.base.space.atoms[x], "t": t, "mass": float(m),
             "phi": atoms[int(j)], "w": complex(wv), "H": float(hv)}
            for a, (x, t), m, j, wv, hv in zip(atoms, ext.pairs, inst.mu, inst.phi, inst.w, big_h)
        ],
        "redirected": [{"atom": a, "t": t} for a, t in ext.redirected],
    }


def moments_dict(m: MomentReport) -> dict:
    return {"passed": m.passed, "n_max": m.n_max, "max_deviation": m.max_deviation,
            "deviations": m.deviations}


def solution_dict(sol: CcSolution) -> dict:
    return {
        "feasible": sol.feasible,
        "certifying": sol.certifying,
        "grid": sol.grid,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "family": family_dict(sol.family) if sol.family is not None else None,
    }


def certificate_dict(cert: Certificate) -> dict:
    out = {
        "certified": cert.certified,
        "reason": cert.reason,
        "family_source": cert.family_source,
        "family": family_dict(cert.family) if cert.family is not None else None,
        "extension_quasinormal": cert.extension_quasinormal,
        "intertwining_residual": cert.intertwining_residual,
        "isometry_residual": cert.isometry_residual,
        "normal": cert.normal,
        "normal_route": cert.normal_route,
        "adjoint_certified": cert.adjoint_certified,
        "checks": cert.checks,
    }
    if cert.cc is not None:
        out["cc"] = {"satisfied": cert.cc.satisfied, "max_residual": cert.cc.max_residual,
                     "tolerance": cert.cc.tolerance}
    if cert.moments is not None:
        out["moments"] = moments_dict(cert.moments)
    return out


def to_json(report: dict) -> str:
    return json.dumps(plain(report), indent=2, allow_nan=False)


# --------------------------------------------------------------------------
# text


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        re, im = v
        return f"{re:.6g}{im:+.6g}j"
    if v is None:
        return "-"
    return str(v)


def table(rows: list[dict], columns: list[str] | None = None) -> list[str]:
    if not rows:
        return ["  (none)"]
    columns = columns or list(rows[0])
    cells = [[_fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[k]) for row in cells)) for k, c in enumerate(columns)]
    lines = ["  " + "  ".join(c.ljust(wd) for c, wd in zip(columns, widths))]
    lines.append("  " + "  ".join("-" * wd for wd in widths))
    lines += ["  " + "  ".join(x.rjust(wd) for x, wd in zip(row, widths)) for row in cells]
    return lines


def _flatten(prefix: str, value, out: list[str], tables: list[tuple[str, list]]) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out, tables)
    elif isinstance(value, list) and value and all(isinstance(r, dict) for r in value):
        tables.append((prefix, value))
    else:
        out.append(f"{prefix}: {_fmt(value)}")


def to_text(report: dict) -> str:
    report = plain(report)
    head = [f"wco {report['version']}  command={report['command']}  exit={report['exit_code']}  status={report['status']}"]
    if report.get("scenario"):
        head.append(f"scenario: {report['scenario'].get('name')}")
    if report.get("message"):
        head.append(f"message: {report['message']}")
    lines, tables = [], []
    atom_rows = report.get("atom_table")
    for key, value in report.items():
        if key in {"version", "command", "exit_code", "status", "scenario", "message", "atom_table", "tool"}:
            continue
        _flatten(key, value, lines, tables)
    out = head[:]
    if atom_rows:
        out += ["", "atoms:"] + table(atom_rows)
    if lines:
        out += [""] + lines
    for name, rows in tables:
        out += ["", f"{name}:"] + table(rows)
    return "\n".join(out)
