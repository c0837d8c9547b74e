"""Convergence-failure indicators and the ranked suspect report.

Three indicator families are computed from the first NR step out of x0:

* alpha: normalized third-and-higher-order Taylor remainder per nonlinear
  equation (how far the step leaves each equation's locally quadratic
  regime),
* gamma: normalized second-order (curvature) contribution per equation and
  variable pair,
* sigma: sensitivity of the first iterate to the initial guess; only the
  dimensionless diagonal is ranked.

Large entries point at the initial guesses most likely responsible for a
convergence failure; the merged ranking orders variables by their worst
piece of evidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linops
from .errors import DegenerateResidualError
from .linops import Mat, Vec, inf_norm
from .model import SystemModel
from .solver import FirstStepResult, SolveOptions, newton_step

DEGENERATE_RESIDUAL_TOL = 1e-14
THEOREM_BOUND_SLACK = 1e-10


@dataclass
class NonlinearResidual:
    r: Vec
    inf_norm: float


@dataclass
class AlphaSet:
    values: dict[int, float]
    alpha_max: float
    lam: float

    def ranking(self) -> list[tuple[int, float]]:
        return sorted(self.values.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass
class GammaSet:
    # full (i, j, k) entries, mixed pairs stored in both orders
    entries: dict[tuple[int, int, int], float]
    beta: float
    row_sums: dict[int, float]

    def ranking(self) -> list[tuple[tuple[int, int, int], float]]:
        """Descending entries with symmetric (j,k)/(k,j) twins collapsed."""
        seen: set[tuple[int, int, int]] = set()
        out: list[tuple[tuple[int, int, int], float]] = []
        for key, v in sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0])):
            i, j, k = key
            canon = (i, min(j, k), max(j, k))
            if canon in seen:
                continue
            seen.add(canon)
            out.append((key, v))
        return out


@dataclass
class SensitivityMatrix:
    w_indices: np.ndarray
    sigma_wblock: Mat          # m x q block of the nonzero columns
    sigma_diag: Vec            # sigma_jj for j in w_indices

    def full_matrix(self, m: int) -> Mat:
        full = np.zeros((m, m))
        full[:, self.w_indices] = self.sigma_wblock
        return full

    def ranking(self) -> list[tuple[int, float]]:
        order = sorted(range(self.w_indices.size),
                       key=lambda p: (-abs(self.sigma_diag[p]), self.w_indices[p]))
        return [(int(self.w_indices[p]), float(self.sigma_diag[p])) for p in order]


@dataclass
class Norms:
    f_x0_inf: float
    r_x0_inf: float
    f_x1_star_inf: float


@dataclass
class SufficientCondition:
    alpha: float
    beta: float
    lam: float
    applies: bool            # the bound is only asserted for undamped steps
    holds: bool | None
    per_equation_ok: bool = True

    @property
    def alpha_plus_beta(self) -> float:
        return self.alpha + self.beta


@dataclass
class IndicatorEntry:
    kind: str                     # "alpha" | "gamma" | "sigma"
    value: float
    eq: int | None = None
    var_j: int | None = None
    var_k: int | None = None
    var: int | None = None


@dataclass
class Suspect:
    var: int
    score: float
    direction: int               # sign of the first-step increment
    increment: float
    critical: bool
    evidence: list[IndicatorEntry] = field(default_factory=list)


@dataclass
class DiagnosticReport:
    norms: Norms
    lam: float
    alpha: AlphaSet
    gamma: GammaSet
    sigma: SensitivityMatrix
    sufficient: SufficientCondition
    suspects: list[Suspect]
    threshold: float
    note: str | None = None


def nonlinear_residual(model: SystemModel, x0: Vec, x1: Vec,
                       jacobian_at_x0: Mat | None = None) -> NonlinearResidual:
    """r(x0) = -f_w(w0) (w1 - w0): the z0-invariant residual of the start point."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    jac = jacobian_at_x0 if jacobian_at_x0 is not None else model.jacobian_at(x0)
    w = model.w_indices
    r = -(jac[:, w] @ (x1 - x0)[w]) if w.size else np.zeros(model.m)
    return NonlinearResidual(r=r, inf_norm=inf_norm(r))


def _rnorm_or_raise(model: SystemModel, step: FirstStepResult,
                    r: NonlinearResidual | None) -> float:
    if r is None:
        r = nonlinear_residual(model, step.x0, step.x1, step.jacobian_at_x0)
    if r.inf_norm < DEGENERATE_RESIDUAL_TOL:
        raise DegenerateResidualError(
            f"nonlinear residual {r.inf_norm:.2e} below {DEGENERATE_RESIDUAL_TOL:g}; "
            "start point already solves the nonlinear part")
    return r.inf_norm


def compute_alpha(model: SystemModel, step: FirstStepResult,
                  r: NonlinearResidual | None = None) -> AlphaSet:
    """Higher-order Taylor remainder of each nonlinear equation across the step.

    Uses the damped point x1*; at lambda = 1 the expression reduces to the
    plain remainder |f(x1) - quadratic prediction| / ||r||.
    """
    rn = _rnorm_or_raise(model, step, r)
    lam = step.lam
    dxs = step.x1_star - step.x0
    values: dict[int, float] = {}
    for i in model.nonlinear_eqs:
        i = int(i)
        quad = 0.0
        for j, k, v in model.hessian_at(i, step.x0):
            quad += v * dxs[j] * dxs[k]
        quad *= 0.5
        h_i = step.f_x1_star[i] - (1.0 - lam) * step.f_x0[i] - quad
        values[i] = abs(h_i) / (lam**3 * rn)
    alpha_max = max(values.values()) if values else 0.0
    return AlphaSet(values=values, alpha_max=alpha_max, lam=lam)


def compute_gamma(model: SystemModel, step: FirstStepResult,
                  r: NonlinearResidual | None = None) -> GammaSet:
    """Curvature factors on the full (undamped) increment, one per structurally
    nonzero Hessian entry; beta is the largest per-equation sum."""
    rn = _rnorm_or_raise(model, step, r)
    dx = step.increment
    entries: dict[tuple[int, int, int], float] = {}
    row_sums: dict[int, float] = {}
    for i in model.nonlinear_eqs:
        i = int(i)
        total = 0.0
        for j, k, v in model.hessian_at(i, step.x0):
            g = abs(0.5 * v * dx[j] * dx[k]) / rn
            entries[(i, int(j), int(k))] = g
            total += g
        row_sums[i] = total
    beta = max(row_sums.values()) if row_sums else 0.0
    return GammaSet(entries=entries, beta=beta, row_sums=row_sums)


def compute_sigma(model: SystemModel, step: FirstStepResult) -> SensitivityMatrix:
    """Sensitivity of the first iterate to the guess, d x1 / d x0.

    Built as -J^-1 Htilde with Htilde_i = (w1-w0)' f^i_ww(w0); only the
    nonlinear-equation rows of Htilde are nonzero, so the solve needs p
    right-hand sides regardless of q.
    """
    w = model.w_indices
    m = model.m
    nl = model.nonlinear_eqs
    wpos = {int(j): p for p, j in enumerate(w)}
    dx = step.increment
    h_rows = np.zeros((nl.size, w.size))
    for row, i in enumerate(nl):
        for j, k, v in model.hessian_at(int(i), step.x0):
            h_rows[row, wpos[int(k)]] += dx[j] * v
    if nl.size:
        g = step.nl_inverse_columns(nl)
        block = -(g @ h_rows)
    else:
        block = np.zeros((m, w.size))
    diag = np.array([block[int(j), wpos[int(j)]] for j in w]) if w.size else np.empty(0)
    return SensitivityMatrix(w_indices=np.asarray(w, dtype=int),
                             sigma_wblock=block, sigma_diag=diag)


def sigma_fd_oracle(model: SystemModel, x0: Vec, opts: SolveOptions | None = None) -> Mat:
    """Finite-difference d x1 / d x0: the independent check on compute_sigma.

    Perturbs every component of x0 by 1e-6 * max(|x0_j|, 1), recomputes one
    undamped step and differences centrally.
    """
    opts = opts or SolveOptions()
    x0 = np.asarray(x0, dtype=float)
    m = x0.size
    out = np.empty((m, m))
    for j in range(m):
        h = 1e-6 * max(abs(x0[j]), 1.0)
        xp = x0.copy()
        xp[j] = x0[j] + h
        x1p = newton_step(model, xp, opts)
        xp[j] = x0[j] - h
        x1m = newton_step(model, xp, opts)
        out[:, j] = (x1p - x1m) / (2.0 * h)
    return out


def sufficient_condition_check(alpha: AlphaSet, gamma: GammaSet, norms: Norms) -> SufficientCondition:
    """Report alpha, beta and whether the one-step residual bound held.

    The bound ||f(x1)|| <= (alpha + beta) ||r(x0)|| is only meaningful for an
    undamped step (lambda = 1), where f(x1*) is f at the true first iterate.
    """
    applies = alpha.lam == 1.0
    holds: bool | None = None
    if applies:
        bound = (alpha.alpha_max + gamma.beta) * norms.r_x0_inf + THEOREM_BOUND_SLACK
        holds = bool(norms.f_x1_star_inf <= bound)
    return SufficientCondition(alpha=alpha.alpha_max, beta=gamma.beta,
                               lam=alpha.lam, applies=applies, holds=holds)


def rank_indicators(model: SystemModel, alpha: AlphaSet, gamma: GammaSet,
                    sigma: SensitivityMatrix, step: FirstStepResult,
                    r: NonlinearResidual | None = None,
                    threshold: float = 1.0,
                    note: str | None = None) -> DiagnosticReport:
    """Merge the three families into the ranked suspect report.

    A variable's score is the largest indicator pointing at it: alpha of any
    nonlinear equation containing it (per the equation's Hessian structure),
    any curvature factor on one of its pairs, or its own |sigma_jj|.  Ties
    break on ascending variable index; scores above ``threshold`` mark the
    variable critical.  The suggested direction is the sign of the variable's
    full first-step increment.
    """
    if r is None:
        r = nonlinear_residual(model, step.x0, step.x1, step.jacobian_at_x0)
    norms = Norms(f_x0_inf=inf_norm(step.f_x0), r_x0_inf=r.inf_norm,
                  f_x1_star_inf=inf_norm(step.f_x1_star))
    sufficient = sufficient_condition_check(alpha, gamma, norms)

    evidence: dict[int, list[IndicatorEntry]] = {}

    def add(var: int, entry: IndicatorEntry) -> None:
        evidence.setdefault(int(var), []).append(entry)

    for i, value in alpha.values.items():
        for var in sorted(model.hessian_structure(i, step.x0)):
            add(var, IndicatorEntry(kind="alpha", value=value, eq=i))
    seen_pairs: set[tuple[int, int, int]] = set()
    for (i, j, k), value in gamma.entries.items():
        canon = (i, min(j, k), max(j, k))
        if canon in seen_pairs:
            continue
        seen_pairs.add(canon)
        add(j, IndicatorEntry(kind="gamma", value=value, eq=i, var_j=j, var_k=k))
        if k != j:
            add(k, IndicatorEntry(kind="gamma", value=value, eq=i, var_j=j, var_k=k))
    for pos, j in enumerate(sigma.w_indices):
        add(int(j), IndicatorEntry(kind="sigma", value=abs(float(sigma.sigma_diag[pos])),
                                   var=int(j)))

    dx = step.increment
    suspects: list[Suspect] = []
    for var, entries in evidence.items():
        score = max(e.value for e in entries)
        inc = float(dx[var])
        suspects.append(Suspect(
            var=var, score=score,
            direction=int(np.sign(inc)),
            increment=inc,
            critical=score > threshold,
            evidence=sorted(entries, key=lambda e: -e.value),
        ))
    suspects.sort(key=lambda s: (-s.score, s.var))

    return DiagnosticReport(norms=norms, lam=step.lam, alpha=alpha, gamma=gamma,
                            sigma=sigma, sufficient=sufficient, suspects=suspects,
                            threshold=threshold, note=note)


def diagnose(model: SystemModel, x0: Vec, opts: SolveOptions | None = None,
             step: FirstStepResult | None = None,
             threshold: float = 1.0) -> DiagnosticReport:
    """First step + all indicator families + ranking in one call.

    When the start point already solves the nonlinear part the indicators
    are reported as all-zero with an explanatory note.
    """
    from .solver import first_step_damped

    opts = opts or SolveOptions()
    if step is None:
        step = first_step_damped(model, x0, opts)
    r = nonlinear_residual(model, step.x0, step.x1, step.jacobian_at_x0)
    sigma = compute_sigma(model, step)
    try:
        alpha = compute_alpha(model, step, r)
        gamma = compute_gamma(model, step, r)
        note = None
    except DegenerateResidualError:
        alpha = AlphaSet(values={int(i): 0.0 for i in model.nonlinear_eqs},
                         alpha_max=0.0, lam=step.lam)
        gamma = GammaSet(entries={}, beta=0.0,
                         row_sums={int(i): 0.0 for i in model.nonlinear_eqs})
        note = "start point already solves the nonlinear part; indicators are all zero"
    return rank_indicators(model, alpha, gamma, sigma, step, r=r,
                           threshold=threshold, note=note)
