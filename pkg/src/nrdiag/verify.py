"""Self-checks for a benchmark case: declared structure, derivatives, sensitivity.

Everything here compares an analytic quantity against an independent
finite-difference route: Jacobian and Hessian callbacks against central
differences, the declared w/z split and equation classes against
FD-observed structure, and the sensitivity matrix against a differenced
first iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linops
from .diagnostics import compute_sigma, sigma_fd_oracle
from .model import verify_structure
from .problems import ProblemCase
from .solver import SolveOptions, first_step_damped


@dataclass
class VerifyCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerifyResult:
    case: str
    checks: list[VerifyCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _sample_points(case: ProblemCase, count: int = 3, seed: int = 7) -> list[np.ndarray]:
    """Random points near the solution, kept strictly inside the residual domain.

    Points shrink each variable by a random fraction (solutions can sit right
    at a domain boundary from above) and are rejected unless the point and
    its finite-difference stencil neighbourhood all evaluate.
    """
    rng = np.random.default_rng(seed)
    base = case.exact_solution
    if base is None:
        base = case.preset(case.default_preset)
    margin = 1.5 * linops.MACHINE_EPS**0.25 * np.maximum(np.abs(base), 1.0)
    pts: list[np.ndarray] = []
    for _ in range(count):
        for delta in (0.02, 0.005, 0.001, 2e-4):
            x = base * (1.0 - delta * rng.uniform(0.0, 1.0, size=base.size))
            ok = all(case.model.evaluate(probe).ok
                     for probe in (x, x + margin, x - margin))
            if ok:
                pts.append(x)
                break
        else:
            raise RuntimeError(f"could not find evaluable sample points for case {case.name!r}")
    return pts


def _oracle_point(case: ProblemCase) -> np.ndarray:
    names = case.preset_names()
    pick = names[1] if len(names) > 1 else names[0]
    return case.preset(pick)


def run_verification(case: ProblemCase) -> VerifyResult:
    model = case.model
    checks: list[VerifyCheck] = []
    pts = _sample_points(case)

    structure = verify_structure(model, pts)
    for c in structure.checks:
        checks.append(VerifyCheck(name=f"structure: {c.name}", passed=c.passed, detail=c.detail))

    if model.jacobian is not None:
        worst = 0.0
        for x in pts:
            fd = linops.fd_jacobian(model.residual_or_raise, x)
            an = model.jacobian_at(x)
            scale = max(linops.inf_norm(an), 1.0)
            worst = max(worst, linops.inf_norm(fd - an) / scale)
        checks.append(VerifyCheck(
            name="analytic Jacobian vs central differences",
            passed=worst <= 1e-5,
            detail=f"max scaled deviation {worst:.2e}"))

    if model.hessian is not None:
        worst = 0.0
        x = pts[0]
        w = model.w_indices
        wpos = {int(j): a for a, j in enumerate(w)}
        for i in model.nonlinear_eqs:
            i = int(i)

            def f_i(xp, _i=i):
                return float(model.residual_or_raise(xp)[_i])

            fd = linops.fd_hessian(f_i, x, columns=w)
            an = np.zeros_like(fd)
            for j, k, v in model.hessian_at(i, x):
                an[wpos[int(j)], wpos[int(k)]] += v
            scale = max(linops.inf_norm(an), 1.0)
            worst = max(worst, linops.inf_norm(fd - an) / scale)
        checks.append(VerifyCheck(
            name="analytic Hessians vs central differences",
            passed=worst <= 1e-4,
            detail=f"max scaled deviation {worst:.2e}"))

    x0 = _oracle_point(case)
    step = first_step_damped(model, x0, SolveOptions())
    sig = compute_sigma(model, step)
    fd_sigma = sigma_fd_oracle(model, x0)
    full = sig.full_matrix(model.m)
    dev = np.abs(full - fd_sigma) / np.maximum(np.abs(fd_sigma), 1.0)
    worst = float(dev.max()) if dev.size else 0.0
    checks.append(VerifyCheck(
        name="sensitivity matrix vs differenced first iterate",
        passed=worst <= 1e-3,
        detail=f"max deviation {worst:.2e}"))

    z = model.z_indices
    zmax = linops.inf_norm(fd_sigma[:, z]) if z.size else 0.0
    checks.append(VerifyCheck(
        name="z-columns of differenced sensitivity vanish",
        passed=zmax <= 1e-7,
        detail=f"max |entry| {zmax:.2e}"))

    return VerifyResult(case=case.name, checks=checks)
