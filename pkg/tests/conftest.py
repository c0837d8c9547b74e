from __future__ import annotations

import time

import pytest

from nrdiag.diagnostics import diagnose
from nrdiag.problems import get_case
from nrdiag.solver import SolveOptions, first_step_damped, newton_solve


@pytest.fixture(scope="session")
def hex_case():
    return get_case("hex")


@pytest.fixture(scope="session")
def dc_case():
    return get_case("dc")


@pytest.fixture(scope="session")
def ac4_case():
    return get_case("ac", n=4)


def _record(model, x0, solve, diag, top=10):
    """Compact summary of one run (the full sensitivity block is too big to keep)."""
    vn, en = model.var_names, model.eq_names
    alpha_top = [(en[i], float(v), sorted(vn[j] for j in model.hessian_structure(i, x0)))
                 for i, v in diag.alpha.ranking()[:top]]
    gamma_top = [(en[i], vn[j], vn[k], float(v)) for (i, j, k), v in diag.gamma.ranking()[:top]]
    sigma_top = [(vn[j], float(v)) for j, v in diag.sigma.ranking()[:top]]
    suspects_top = [(vn[s.var], float(s.score)) for s in diag.suspects[:top]]
    return {
        "status": solve.status.value,
        "converged": solve.converged,
        "iterations": solve.iterations,
        "lam": diag.lam,
        "alpha_max": diag.sufficient.alpha,
        "beta": diag.sufficient.beta,
        "holds": diag.sufficient.holds,
        "r_x0_inf": diag.norms.r_x0_inf,
        "f_x1_star_inf": diag.norms.f_x1_star_inf,
        "alpha_top": alpha_top,
        "gamma_top": gamma_top,
        "sigma_top": sigma_top,
        "suspects_top": suspects_top,
    }


ALTERED_VOLTAGES = ["v_5_1", "v_13_17", "v_13_18", "v_14_18", "v_12_20", "v_13_20"]


@pytest.fixture(scope="session")
def ac20_battery():
    """The full large-grid benchmark battery, computed once and shared.

    Runs the reference solve, the named test guesses, and the ranking-driven
    repair loop for the multi-alteration test; returns compact per-run
    records plus the total wall time.
    """
    t0 = time.perf_counter()
    case = get_case("ac")
    model = case.model
    exact = case.exact_solution
    opts = SolveOptions(max_iter=15)

    records: dict[str, dict] = {}
    for name in ("test1", "test2", "test4", "test5", "test7"):
        guess = case.preset(name)
        step = first_step_damped(model, guess, opts)
        diag = diagnose(model, guess, opts, step=step)
        solve = newton_solve(model, guess, opts, first_step=step)
        records[name] = _record(model, guess, solve, diag)

    # repair loop: fix the highest-ranked altered voltage at 80% of the
    # solution, rerun, repeat until convergence
    fixes: list[str] = []
    x = case.preset("test7")
    final = None
    for _ in range(len(ALTERED_VOLTAGES) + 2):
        step = first_step_damped(model, x, opts)
        diag = diagnose(model, x, opts, step=step)
        solve = newton_solve(model, x, opts, first_step=step)
        final = _record(model, x, solve, diag)
        if solve.converged:
            break
        rank: dict[str, int] = {}
        for pos, s in enumerate(diag.suspects):
            base = model.var_names[s.var].rsplit("_", 1)[0]
            rank.setdefault(base, pos)
        remaining = [v for v in ALTERED_VOLTAGES if v not in fixes]
        if not remaining:
            break
        remaining.sort(key=lambda v: rank.get(v, 10**9))
        pick = remaining[0]
        fixes.append(pick)
        x = x.copy()
        for sfx in ("_re", "_im"):
            j = case.var_index(pick + sfx)
            x[j] = 0.8 * exact[j]

    elapsed = time.perf_counter() - t0
    return {"case": case, "records": records, "repair_fixes": fixes,
            "repair_final": final, "elapsed": elapsed}
