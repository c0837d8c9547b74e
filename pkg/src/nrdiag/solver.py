"""Newton-Raphson iteration with damped first step and trajectory capture.

The main loop always takes full (undamped) steps; damping exists only in
``first_step_damped``, which shrinks the first increment until the residual
becomes evaluable so the diagnostics engine has a usable point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import linops
from .errors import (
    DampingExhaustedError,
    NonEvaluableError,
    SingularJacobianError,
    SingularMatrixError,
)
from .linops import LuFactors, Mat, Vec, inf_norm
from .model import EvalOutcome, SystemModel

# Enable the frozen-base low-rank update path automatically above this size
# when the nonlinear block is small enough to pay off.
_LOW_RANK_MIN_M = 512


class SolveStatus(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    NON_EVALUABLE = "NonEvaluable"
    SINGULAR_JACOBIAN = "SingularJacobian"


@dataclass
class SolveOptions:
    max_iter: int = 100
    increment_tol: float = 1e-12
    damping_factor: float = 0.7
    lambda_min: float = 1e-6
    capture_trajectory: bool = False
    # rcond below which the Jacobian is treated as singular (hard failure)
    # and below which it is merely flagged in the report.
    singular_rcond: float = linops.RCOND_SINGULAR
    warn_rcond: float = linops.RCOND_WARN
    # "direct": factor the Jacobian every iteration; "low-rank": factor once
    # and apply rank-p corrections on the nonlinear rows (verified per step,
    # falling back to direct on accuracy loss); "auto" picks by problem size.
    jacobian_strategy: str = "auto"

    def __post_init__(self) -> None:
        if not 0.0 < self.damping_factor < 1.0:
            raise ValueError("damping_factor must lie in (0, 1)")
        if self.lambda_min > 1.0:
            raise ValueError("lambda_min must be <= 1")
        if self.jacobian_strategy not in ("auto", "direct", "low-rank"):
            raise ValueError(f"unknown jacobian_strategy {self.jacobian_strategy!r}")


@dataclass
class SolveReport:
    status: SolveStatus
    iterations: int
    lambda_used: float
    x: Vec
    final_residual_inf: float | None
    increment_norms: list[float] = field(default_factory=list)
    trajectory: list[Vec] | None = None
    rcond: float | None = None
    failure: EvalOutcome | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


@dataclass
class FirstStepResult:
    """Everything the diagnostics need about the first NR step from x0."""

    x0: Vec
    x1: Vec               # full undamped step, always computed
    x1_star: Vec          # damped point where f is evaluable
    lam: float
    f_x0: Vec
    f_x1_star: Vec
    jacobian_at_x0: Mat
    factors: LuFactors
    # columns of J^-1 at nonlinear-equation positions, computed on demand and
    # shared between the sensitivity solve and the low-rank solver path
    _nl_inv_columns: Mat | None = None

    @property
    def increment(self) -> Vec:
        return self.x1 - self.x0

    def nl_inverse_columns(self, nonlinear_eqs: np.ndarray) -> Mat:
        if self._nl_inv_columns is None:
            m = self.factors.n
            nl = np.asarray(nonlinear_eqs, dtype=int)
            rhs = np.zeros((m, nl.size), order="F")
            rhs[nl, np.arange(nl.size)] = 1.0
            self._nl_inv_columns = linops.lu_solve(self.factors, rhs)
        return self._nl_inv_columns


def _factor_jacobian(model: SystemModel, x: Vec, opts: SolveOptions) -> tuple[Mat, LuFactors]:
    jac = model.jacobian_at(x)
    if not np.all(np.isfinite(jac)):
        raise NonEvaluableError(reason="non-finite", message="Jacobian has non-finite entries")
    try:
        factors = linops.lu_factor(jac)
    except SingularMatrixError as exc:
        raise SingularJacobianError(rcond=exc.rcond) from exc
    if factors.rcond < opts.singular_rcond:
        raise SingularJacobianError(rcond=factors.rcond)
    return jac, factors


def newton_step(model: SystemModel, x_prev: Vec, opts: SolveOptions | None = None) -> Vec:
    """One full NR step: solve f_x(x_prev) (x_next - x_prev) = -f(x_prev)."""
    opts = opts or SolveOptions()
    x_prev = np.asarray(x_prev, dtype=float)
    f = model.residual_or_raise(x_prev)
    _, factors = _factor_jacobian(model, x_prev, opts)
    return x_prev + linops.lu_solve(factors, -f)


def first_step_damped(model: SystemModel, x0: Vec, opts: SolveOptions | None = None) -> FirstStepResult:
    """Compute the undamped first step, then shrink it until f is evaluable.

    lambda runs through exactly 1, d, d^2, ... (d = damping_factor) and stops
    at the first value where f(x0 + lambda*(x1 - x0)) evaluates; below
    lambda_min the search gives up.
    """
    opts = opts or SolveOptions()
    x0 = np.asarray(x0, dtype=float)
    f0 = model.residual_or_raise(x0)
    jac, factors = _factor_jacobian(model, x0, opts)
    dx = linops.lu_solve(factors, -f0)
    x1 = x0 + dx

    k = 0
    lam = 1.0
    while True:
        x1_star = x0 + lam * dx if k else x1
        out = model.evaluate(x1_star)
        if out.ok:
            return FirstStepResult(x0=x0, x1=x1, x1_star=x1_star, lam=lam,
                                   f_x0=f0, f_x1_star=out.value,
                                   jacobian_at_x0=jac, factors=factors)
        k += 1
        lam = opts.damping_factor**k
        if lam < opts.lambda_min:
            raise DampingExhaustedError(opts.lambda_min)


class _LowRankStepper:
    """Newton steps against a frozen base LU plus nonlinear-row corrections.

    Only the nonlinear-equation rows of the Jacobian change between
    iterates, so J(x) = J0 + E_p W(x) with E_p selecting those p rows and
    W(x) nonzero exactly at the Hessian-structural positions.  Each step is
    solved through the Woodbury identity and verified against the true
    Jacobian rows; on accuracy loss the base is refactored at the current
    point.  Linear algebra stays dense throughout.
    """

    def __init__(self, model: SystemModel, opts: SolveOptions, x_base: Vec,
                 base_jac: Mat, base_factors: LuFactors, g: Mat | None = None):
        self.model = model
        self.opts = opts
        self.nl = np.asarray(model.nonlinear_eqs, dtype=int)
        self.p = self.nl.size
        rows: list[int] = []
        cols: list[int] = []
        for local, i in enumerate(self.nl):
            for c in sorted(model.hessian_structure(int(i), x_base)):
                rows.append(local)
                cols.append(c)
        self.r_idx = np.asarray(rows, dtype=int)
        self.c_idx = np.asarray(cols, dtype=int)
        self.base_jac = base_jac
        self.base_jac_norm = inf_norm(base_jac)
        self.base_nl_rows = base_jac[self.nl, :].copy()
        self.factors = base_factors
        self.g = g if g is not None else self._solve_selector()

    def _solve_selector(self) -> Mat:
        m = self.factors.n
        rhs = np.zeros((m, self.p), order="F")
        rhs[self.nl, np.arange(self.p)] = 1.0
        return linops.lu_solve(self.factors, rhs)

    def _rebase(self, x: Vec) -> Vec:
        jac = self.model.jacobian_at(x)
        if not np.all(np.isfinite(jac)):
            raise NonEvaluableError(reason="non-finite",
                                    message="Jacobian has non-finite entries")
        try:
            self.factors = linops.lu_factor(jac)
        except SingularMatrixError as exc:
            raise SingularJacobianError(rcond=exc.rcond) from exc
        if self.factors.rcond < self.opts.singular_rcond:
            raise SingularJacobianError(rcond=self.factors.rcond)
        self.base_jac = jac
        self.base_jac_norm = inf_norm(jac)
        self.base_nl_rows = jac[self.nl, :].copy()
        self.g = self._solve_selector()
        return jac

    def step(self, x: Vec, f: Vec) -> tuple[Vec, float]:
        """Return (increment, rcond estimate) for J(x) dx = -f."""
        rows_k = self.model.jacobian_rows_at(x, self.nl)
        dx = None
        cap_rcond = 0.0
        if np.all(np.isfinite(rows_k)):
            w_vals = rows_k[self.r_idx, self.c_idx] - self.base_nl_rows[self.r_idx, self.c_idx]
            y0 = linops.lu_solve(self.factors, -f)
            cap = np.eye(self.p)
            np.add.at(cap, self.r_idx, w_vals[:, None] * self.g[self.c_idx, :])
            try:
                cfac = linops.lu_factor(cap)
                wy = np.zeros(self.p)
                np.add.at(wy, self.r_idx, w_vals * y0[self.c_idx])
                dx = y0 - self.g @ linops.lu_solve(cfac, wy)
                cap_rcond = cfac.rcond
            except SingularMatrixError:
                dx = None
        if dx is not None and np.all(np.isfinite(dx)):
            # verify against the exact rows, not the structural approximation
            jdx = self.base_jac @ dx
            jdx[self.nl] += rows_k @ dx - self.base_nl_rows @ dx
            resid = inf_norm(jdx + f)
            scale = max(self.base_jac_norm, inf_norm(rows_k))
            bound = 1e-8 * (scale * inf_norm(dx) + inf_norm(f))
            if resid <= bound:
                return dx, min(self.factors.rcond, self.factors.rcond * cap_rcond)
        jac = self._rebase(x)
        return linops.lu_solve(self.factors, -f), self.factors.rcond


def _use_low_rank(model: SystemModel, opts: SolveOptions) -> bool:
    if opts.jacobian_strategy == "direct":
        return False
    if opts.jacobian_strategy == "low-rank":
        return True
    # auto: worth it only for big systems with a small nonlinear block, and
    # only when the Hessian structure is analytic (FD structure probes on a
    # large model would dwarf the factorization savings)
    return (model.hessian is not None
            and model.m >= _LOW_RANK_MIN_M and 0 < model.p <= model.m // 3)


def newton_solve(model: SystemModel, x0: Vec, opts: SolveOptions | None = None,
                 first_step: FirstStepResult | None = None) -> SolveReport:
    """Iterate full NR steps until the increment inf-norm drops to tolerance.

    ``iterations`` counts productive steps: the final step, whose increment
    is already below ``increment_tol``, only confirms convergence and is not
    counted.  Failures are carried in the report status, never raised.
    ``first_step`` may pass in a precomputed first Jacobian/LU (from
    ``first_step_damped``) to avoid refactoring at x0.
    """
    opts = opts or SolveOptions()
    x = np.asarray(x0, dtype=float)
    trajectory: list[Vec] | None = [x.copy()] if opts.capture_trajectory else None
    increments: list[float] = []
    warnings: list[str] = []
    last_resid: float | None = None
    rcond_min: float | None = None
    low_rank = _use_low_rank(model, opts)
    stepper: _LowRankStepper | None = None
    iterations = 0

    def report(status: SolveStatus, failure: EvalOutcome | None = None,
               rcond: float | None = None) -> SolveReport:
        return SolveReport(status=status, iterations=iterations, lambda_used=1.0,
                           x=x, final_residual_inf=last_resid,
                           increment_norms=increments, trajectory=trajectory,
                           rcond=rcond if rcond is not None else rcond_min,
                           failure=failure, warnings=warnings)

    for k in range(1, opts.max_iter + 1):
        out = model.evaluate(x)
        if not out.ok:
            return report(SolveStatus.NON_EVALUABLE, failure=out)
        f = out.value
        last_resid = inf_norm(f)

        if k == 1 and first_step is not None and np.array_equal(first_step.x0, x):
            jac, factors = first_step.jacobian_at_x0, first_step.factors
            if factors.rcond < opts.singular_rcond:
                return report(SolveStatus.SINGULAR_JACOBIAN, rcond=factors.rcond)
            dx = first_step.increment
            rc = factors.rcond
            if low_rank:
                stepper = _LowRankStepper(model, opts, x, jac, factors,
                                          g=first_step._nl_inv_columns)
        else:
            try:
                if low_rank and stepper is not None:
                    dx, rc = stepper.step(x, f)
                else:
                    jac, factors = _factor_jacobian(model, x, opts)
                    dx = linops.lu_solve(factors, -f)
                    rc = factors.rcond
                    if low_rank:
                        stepper = _LowRankStepper(model, opts, x, jac, factors)
            except SingularJacobianError as exc:
                return report(SolveStatus.SINGULAR_JACOBIAN, rcond=exc.rcond)
            except NonEvaluableError as exc:
                return report(SolveStatus.NON_EVALUABLE,
                              failure=EvalOutcome(reason=exc.reason, equation=exc.equation,
                                                  variable=exc.variable))

        if rc < opts.singular_rcond:
            return report(SolveStatus.SINGULAR_JACOBIAN, rcond=rc)
        rcond_min = rc if rcond_min is None else min(rcond_min, rc)
        if rc < opts.warn_rcond and not warnings:
            warnings.append(f"badly conditioned Jacobian (rcond {rc:.2e}) at iteration {k}")

        if not np.all(np.isfinite(dx)):
            return report(SolveStatus.NON_EVALUABLE, failure=EvalOutcome(reason="non-finite"))
        x = x + dx
        step_norm = inf_norm(dx)
        increments.append(step_norm)
        if trajectory is not None:
            trajectory.append(x.copy())
        if step_norm <= opts.increment_tol:
            out = model.evaluate(x)
            if out.ok:
                last_resid = inf_norm(out.value)
            return report(SolveStatus.CONVERGED)
        iterations += 1

    return report(SolveStatus.MAX_ITERATIONS)
