"""Combined solve + diagnostics report: assembly and text rendering.

The JSON layout is stable (field ``schema`` = 1): numeric arrays are
pre-sorted descending by value, names are the user-facing variable and
equation names, and floats round-trip exactly through ``json``.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .diagnostics import DiagnosticReport
from .model import SystemModel
from .solver import SolveReport

SCHEMA_VERSION = 1


def _direction(sign: int) -> str:
    return {1: "increase", -1: "decrease"}.get(sign, "none")


def build_report(case: str, preset: str, model: SystemModel,
                 solve: SolveReport, diag: DiagnosticReport | None,
                 note: str | None = None) -> dict[str, Any]:
    """Assemble the schema-1 report dict from a solve and its diagnostics."""
    vn = model.var_names
    en = model.eq_names
    out: dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "case": case,
        "preset": preset,
        "status": solve.status.value,
        "iterations": solve.iterations,
        "lambda": None,
        "norms": None,
        "alpha": [],
        "gamma": [],
        "sigma_diag": [],
        "sufficient_condition": None,
        "suspects": [],
        "note": note,
        "warnings": list(solve.warnings),
    }
    if diag is None:
        return out

    out["lambda"] = diag.lam
    out["norms"] = {
        "f_x0_inf": diag.norms.f_x0_inf,
        "r_x0_inf": diag.norms.r_x0_inf,
        "f_x1_star_inf": diag.norms.f_x1_star_inf,
    }
    out["alpha"] = [{"eq": en[i], "value": float(v)} for i, v in diag.alpha.ranking()]
    out["gamma"] = [
        {"eq": en[i], "var_j": vn[j], "var_k": vn[k], "value": float(v)}
        for (i, j, k), v in diag.gamma.ranking()
    ]
    out["sigma_diag"] = [{"var": vn[j], "value": float(v)} for j, v in diag.sigma.ranking()]
    out["sufficient_condition"] = {
        "alpha": diag.sufficient.alpha,
        "beta": diag.sufficient.beta,
        "holds": diag.sufficient.holds,
    }
    suspects = []
    for s in diag.suspects:
        evidence = []
        for e in s.evidence:
            entry: dict[str, Any] = {"kind": e.kind, "value": float(e.value)}
            if e.eq is not None:
                entry["eq"] = en[e.eq]
            if e.var_j is not None:
                entry["var_j"] = vn[e.var_j]
            if e.var_k is not None:
                entry["var_k"] = vn[e.var_k]
            if e.var is not None:
                entry["var"] = vn[e.var]
            evidence.append(entry)
        suspects.append({
            "var": vn[s.var],
            "score": float(s.score),
            "direction": _direction(s.direction),
            "increment": float(s.increment),
            "critical": bool(s.critical),
            "evidence": evidence,
        })
    out["suspects"] = suspects
    if diag.note and not out["note"]:
        out["note"] = diag.note
    return out


def _num(v: float) -> str:
    if v != v or abs(v) >= 1e4 or (v != 0 and abs(v) < 5e-4):
        return f"{v:.3e}"
    return f"{v:.3f}"


def render_text(report: dict[str, Any], top: int = 10) -> str:
    """Human-readable view of a report dict; 3-decimal numbers like the tables."""
    lines: list[str] = []
    lines.append(f"case {report['case']} preset {report['preset']}")
    lines.append(f"status: {report['status']} after {report['iterations']} iteration(s)")
    if report.get("lambda") is not None:
        lines.append(f"first-step damping: lambda = {report['lambda']:.3f}")
    norms = report.get("norms")
    if norms:
        lines.append("norms: |f(x0)| = {}  |r(x0)| = {}  |f(x1*)| = {}".format(
            _num(norms["f_x0_inf"]), _num(norms["r_x0_inf"]), _num(norms["f_x1_star_inf"])))
    if report.get("alpha"):
        lines.append("alpha (higher-order residual share, by equation):")
        for row in report["alpha"][:top]:
            lines.append(f"  {row['eq']:<20} {_num(row['value'])}")
    if report.get("gamma"):
        lines.append("gamma (curvature factors):")
        for row in report["gamma"][:top]:
            lines.append(f"  {row['eq']:<20} ({row['var_j']}, {row['var_k']})  {_num(row['value'])}")
    if report.get("sigma_diag"):
        lines.append("sigma diagonal (first-iterate sensitivity):")
        for row in report["sigma_diag"][:top]:
            lines.append(f"  {row['var']:<20} {_num(row['value'])}")
    suff = report.get("sufficient_condition")
    if suff:
        holds = {True: "holds", False: "violated", None: "not applicable (damped step)"}[suff["holds"]]
        lines.append(
            f"one-step residual bound: alpha = {_num(suff['alpha'])}  beta = {_num(suff['beta'])}  "
            f"alpha+beta = {_num(suff['alpha'] + suff['beta'])}  {holds}")
    if report.get("suspects"):
        lines.append("ranked suspects:")
        for rank, s in enumerate(report["suspects"][:top], start=1):
            mark = " (critical)" if s.get("critical") else ""
            lines.append(f"  {rank:2d}. {s['var']:<16} score {_num(s['score'])}  "
                         f"direction {s['direction']}{mark}")
    if report.get("note"):
        lines.append(f"note: {report['note']}")
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def run_pipeline(case, preset_name: str, guess: np.ndarray,
                 opts=None, threshold: float = 1.0) -> tuple[dict[str, Any], bool]:
    """Damped first step + full diagnostics + plain solve, as one report.

    Returns (report dict, converged flag).  Diagnostic failures (guess not
    evaluable, singular start Jacobian) degrade to a report without
    indicator sections rather than raising.
    """
    from .diagnostics import diagnose
    from .errors import NrdiagError
    from .solver import SolveOptions, first_step_damped, newton_solve

    opts = opts or SolveOptions()
    model = case.model
    note = None
    diag = None
    step = None
    try:
        step = first_step_damped(model, guess, opts)
        diag = diagnose(model, guess, opts, step=step, threshold=threshold)
    except NrdiagError as exc:
        note = f"diagnostics unavailable: {exc}"
    solve = newton_solve(model, guess, opts, first_step=step)
    report = build_report(case.name, preset_name, model, solve, diag, note=note)
    return report, solve.converged
