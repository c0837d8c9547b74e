"""System-of-equations abstraction with structural metadata.

A SystemModel is a square residual system f(x) = 0 together with the
structural facts the solver and the diagnostics engine rely on: which
variables the Jacobian actually depends on (``w``), which enter only
linearly (``z``), and which equations carry a nonzero Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import linops
from .errors import (
    InvalidPartitionError,
    NonEvaluableError,
    NonPositiveScaleError,
)
from .linops import Mat, Vec

# (j, k, value) with j, k restricted to w-indices; mixed pairs appear in both
# orders so per-equation sums count (j, k) and (k, j) separately.
HessianTriplets = list[tuple[int, int, float]]


@dataclass
class EvalOutcome:
    """Either a residual vector or a located failure, never both."""

    value: Vec | None = None
    reason: str | None = None
    equation: int | None = None
    variable: int | None = None

    @property
    def ok(self) -> bool:
        return self.value is not None


@dataclass
class SystemModel:
    m: int
    residual: Callable[[Vec], Vec]
    jacobian: Callable[[Vec], Mat] | None = None
    hessian: Callable[[int, Vec], HessianTriplets] | None = None
    w_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    z_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    nonlinear_eqs: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    var_names: list[str] = field(default_factory=list)
    eq_names: list[str] = field(default_factory=list)
    residual_scales: np.ndarray | None = None
    # optional fast path: Jacobian restricted to a subset of equation rows
    jacobian_rows: Callable[[Vec, np.ndarray], Mat] | None = None

    def __post_init__(self) -> None:
        self.w_indices = np.asarray(self.w_indices, dtype=int)
        self.z_indices = np.asarray(self.z_indices, dtype=int)
        self.nonlinear_eqs = np.asarray(self.nonlinear_eqs, dtype=int)
        if not self.var_names:
            self.var_names = [f"x{j}" for j in range(self.m)]
        if not self.eq_names:
            self.eq_names = [f"eq{i}" for i in range(self.m)]
        if self.residual_scales is None:
            self.residual_scales = np.ones(self.m)
        else:
            self.residual_scales = np.asarray(self.residual_scales, dtype=float)
            if np.any(self.residual_scales <= 0):
                raise NonPositiveScaleError("residual_scales must be positive")
        check_partition(self.m, self.w_indices, self.z_indices)

    @property
    def q(self) -> int:
        return int(self.w_indices.size)

    @property
    def p(self) -> int:
        return int(self.nonlinear_eqs.size)

    def evaluate(self, x: Vec) -> EvalOutcome:
        """Evaluate the residual, folding failures into an EvalOutcome."""
        try:
            r = np.asarray(self.residual(np.asarray(x, dtype=float)), dtype=float)
        except NonEvaluableError as exc:
            return EvalOutcome(reason=exc.reason, equation=exc.equation, variable=exc.variable)
        if r.shape != (self.m,):
            raise ValueError(f"residual returned shape {r.shape}, expected ({self.m},)")
        if not np.all(np.isfinite(r)):
            bad = int(np.flatnonzero(~np.isfinite(r))[0])
            return EvalOutcome(reason="non-finite", equation=bad)
        return EvalOutcome(value=r)

    def residual_or_raise(self, x: Vec) -> Vec:
        out = self.evaluate(x)
        if not out.ok:
            raise NonEvaluableError(reason=out.reason or "non-finite",
                                    equation=out.equation, variable=out.variable)
        return out.value

    def jacobian_at(self, x: Vec) -> Mat:
        """Analytic Jacobian when provided, central-difference fallback otherwise."""
        if self.jacobian is not None:
            return np.asarray(self.jacobian(np.asarray(x, dtype=float)), dtype=float)
        return linops.fd_jacobian(self.residual_or_raise, x)

    def jacobian_rows_at(self, x: Vec, rows: np.ndarray) -> Mat:
        """Jacobian rows for a subset of equations, via the fast path if any."""
        rows = np.asarray(rows, dtype=int)
        if self.jacobian_rows is not None:
            return np.asarray(self.jacobian_rows(np.asarray(x, dtype=float), rows), dtype=float)
        return self.jacobian_at(x)[rows, :]

    def hessian_at(self, i: int, x: Vec) -> HessianTriplets:
        """Sparse Hessian triplets of equation i over w-indices.

        Falls back to a finite-difference Hessian restricted to the w
        subspace when no analytic callback is present.
        """
        if self.hessian is not None:
            return self.hessian(i, np.asarray(x, dtype=float))
        w = self.w_indices

        def f_i(xp: Vec) -> float:
            return float(self.residual_or_raise(xp)[i])

        dense = linops.fd_hessian(f_i, x, columns=w)
        out: HessianTriplets = []
        scale = max(linops.inf_norm(dense), 1.0)
        for a in range(w.size):
            for b in range(w.size):
                if abs(dense[a, b]) > 1e-7 * scale:
                    out.append((int(w[a]), int(w[b]), float(dense[a, b])))
        return out

    def hessian_structure(self, i: int, x: Vec) -> set[int]:
        """Variables appearing in equation i's (structural) Hessian."""
        vars_: set[int] = set()
        for j, k, _ in self.hessian_at(i, x):
            vars_.add(int(j))
            vars_.add(int(k))
        return vars_


def check_partition(m: int, w_indices: np.ndarray, z_indices: np.ndarray) -> None:
    w = set(int(j) for j in w_indices)
    z = set(int(j) for j in z_indices)
    if w & z:
        raise InvalidPartitionError(f"w and z overlap: {sorted(w & z)}")
    if w | z != set(range(m)):
        missing = set(range(m)) - (w | z)
        extra = (w | z) - set(range(m))
        raise InvalidPartitionError(f"partition must cover 0..{m - 1}; missing {sorted(missing)}, extra {sorted(extra)}")


@dataclass
class Partition:
    """Permutations between user ordering and canonical [w; z] / [n; l] ordering.

    ``var_perm[c] = u`` maps canonical position c to user index u, and the
    inverse arrays go the other way; both round-trip to the identity.
    """

    q: int
    p: int
    var_perm: np.ndarray
    var_inv: np.ndarray
    eq_perm: np.ndarray
    eq_inv: np.ndarray

    def to_user_var(self, c: int) -> int:
        return int(self.var_perm[c])

    def to_canonical_var(self, u: int) -> int:
        return int(self.var_inv[u])


def canonicalize(model: SystemModel) -> tuple[SystemModel, Partition]:
    """Reorder a model so w-variables and nonlinear equations come first.

    The returned model wraps the original callbacks with the permutations;
    names travel along so reports stay in user vocabulary.
    """
    m = model.m
    w = np.asarray(sorted(int(j) for j in model.w_indices))
    z = np.asarray(sorted(int(j) for j in model.z_indices))
    nl = np.asarray(sorted(int(i) for i in model.nonlinear_eqs))
    lin = np.asarray([i for i in range(m) if i not in set(nl.tolist())])
    var_perm = np.concatenate([w, z]).astype(int) if m else np.empty(0, dtype=int)
    eq_perm = np.concatenate([nl, lin]).astype(int) if m else np.empty(0, dtype=int)
    var_inv = np.empty(m, dtype=int)
    var_inv[var_perm] = np.arange(m)
    eq_inv = np.empty(m, dtype=int)
    eq_inv[eq_perm] = np.arange(m)
    part = Partition(q=w.size, p=nl.size, var_perm=var_perm, var_inv=var_inv,
                     eq_perm=eq_perm, eq_inv=eq_inv)

    base_res, base_jac, base_hess = model.residual, model.jacobian, model.hessian

    def residual(xc: Vec) -> Vec:
        return np.asarray(base_res(np.asarray(xc)[var_inv]), dtype=float)[eq_perm]

    jacobian = None
    if base_jac is not None:
        def jacobian(xc: Vec) -> Mat:
            j = np.asarray(base_jac(np.asarray(xc)[var_inv]), dtype=float)
            return j[np.ix_(eq_perm, var_perm)]

    hessian = None
    if base_hess is not None:
        def hessian(ic: int, xc: Vec) -> HessianTriplets:
            tri = base_hess(int(eq_perm[ic]), np.asarray(xc)[var_inv])
            return [(int(var_inv[j]), int(var_inv[k]), v) for j, k, v in tri]

    canon = SystemModel(
        m=m,
        residual=residual,
        jacobian=jacobian,
        hessian=hessian,
        w_indices=np.arange(w.size),
        z_indices=np.arange(w.size, m),
        nonlinear_eqs=np.arange(nl.size),
        var_names=[model.var_names[u] for u in var_perm],
        eq_names=[model.eq_names[u] for u in eq_perm],
        residual_scales=np.asarray(model.residual_scales)[eq_perm],
    )
    return canon, part


def scale_model(model: SystemModel, var_scales: Vec, eq_scales: Vec) -> SystemModel:
    """Rescale variables and equation residuals: x' = x / d, f' = f / s.

    Partition, equation classes and names are preserved; unit scales give a
    behaviorally identical model.
    """
    d = np.asarray(var_scales, dtype=float)
    s = np.asarray(eq_scales, dtype=float)
    if d.shape != (model.m,) or s.shape != (model.m,):
        raise NonPositiveScaleError(f"scales must have length {model.m}")
    if np.any(d <= 0) or np.any(s <= 0):
        raise NonPositiveScaleError("scales must be strictly positive")

    base_res, base_jac, base_hess = model.residual, model.jacobian, model.hessian

    def residual(xp: Vec) -> Vec:
        return np.asarray(base_res(np.asarray(xp) * d), dtype=float) / s

    jacobian = None
    if base_jac is not None:
        def jacobian(xp: Vec) -> Mat:
            return np.asarray(base_jac(np.asarray(xp) * d), dtype=float) * (d[None, :] / s[:, None])

    hessian = None
    if base_hess is not None:
        def hessian(i: int, xp: Vec) -> HessianTriplets:
            tri = base_hess(i, np.asarray(xp) * d)
            return [(j, k, v * d[j] * d[k] / s[i]) for j, k, v in tri]

    base_rows = model.jacobian_rows
    jacobian_rows = None
    if base_rows is not None:
        def jacobian_rows(xp: Vec, rows: np.ndarray) -> Mat:
            block = np.asarray(base_rows(np.asarray(xp) * d, rows), dtype=float)
            return block * (d[None, :] / s[np.asarray(rows, dtype=int), None])

    return replace(
        model,
        residual=residual,
        jacobian=jacobian,
        hessian=hessian,
        jacobian_rows=jacobian_rows,
        residual_scales=np.asarray(model.residual_scales) * s,
    )


@dataclass
class StructureCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class StructureReport:
    checks: list[StructureCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[StructureCheck]:
        return [c for c in self.checks if not c.passed]


def verify_structure(model: SystemModel, sample_points: Sequence[Vec],
                     jac_tol: float = 1e-6, hess_tol: float = 1e-6) -> StructureReport:
    """Check the declared partition and equation classes by finite differences.

    At every sample point: z-columns of the FD Jacobian must agree across
    samples (f linear in z), Hessian rows/columns at z-indices must vanish,
    and declared-linear equations must have an all-zero Hessian.  The report
    also classifies each nonlinear equation as quadratic when its Hessian is
    constant across the samples.
    """
    checks: list[StructureCheck] = []
    pts = [np.asarray(x, dtype=float) for x in sample_points]
    z = model.z_indices
    nl = set(int(i) for i in model.nonlinear_eqs)

    jacs = [linops.fd_jacobian(model.residual_or_raise, x) for x in pts]
    scale = max(max(linops.inf_norm(j) for j in jacs), 1.0)
    bad_vars: list[str] = []
    for j in z:
        cols = np.stack([jac[:, j] for jac in jacs])
        if linops.inf_norm(cols - cols[0]) > jac_tol * scale:
            bad_vars.append(model.var_names[int(j)])
    checks.append(StructureCheck(
        name="z-columns of Jacobian constant",
        passed=not bad_vars,
        detail="" if not bad_vars else "varying columns: " + ", ".join(bad_vars),
    ))

    # Full FD Hessians of every equation at every sample, via the vector
    # residual so one stencil serves all equations at once.
    hess_sets: list[list[Mat]] = []
    for x in pts:
        hess_sets.append(_fd_hessian_stack(model, x))

    bad_z: list[str] = []
    hscale = max(max(linops.inf_norm(h) for hs in hess_sets for h in hs), 1.0)
    for hs in hess_sets:
        for i in range(model.m):
            block = np.abs(hs[i][np.ix_(np.arange(model.m), z)]) if z.size else np.empty((model.m, 0))
            if block.size and block.max() > hess_tol * hscale:
                j = int(z[int(np.unravel_index(block.argmax(), block.shape)[1])])
                tag = f"{model.eq_names[i]}/{model.var_names[j]}"
                if tag not in bad_z:
                    bad_z.append(tag)
    checks.append(StructureCheck(
        name="Hessian rows/columns at z-indices vanish",
        passed=not bad_z,
        detail="" if not bad_z else "nonzero at: " + ", ".join(bad_z[:8]),
    ))

    bad_lin: list[str] = []
    for i in range(model.m):
        if i in nl:
            continue
        for hs in hess_sets:
            if linops.inf_norm(hs[i]) > hess_tol * hscale:
                bad_lin.append(model.eq_names[i])
                break
    checks.append(StructureCheck(
        name="declared-linear equations have zero Hessian",
        passed=not bad_lin,
        detail="" if not bad_lin else "nonzero Hessian: " + ", ".join(bad_lin),
    ))

    quad: list[str] = []
    general: list[str] = []
    for i in sorted(nl):
        stack = np.stack([hs[i] for hs in hess_sets])
        hnorm = linops.inf_norm(stack[0])
        if linops.inf_norm(stack - stack[0]) <= max(1e-4 * hnorm, 1e-10):
            quad.append(model.eq_names[i])
        else:
            general.append(model.eq_names[i])
    checks.append(StructureCheck(
        name="equation classes",
        passed=True,
        detail=f"quadratic: [{', '.join(quad)}]; general: [{', '.join(general)}]",
    ))

    return StructureReport(checks=checks)


def _fd_hessian_stack(model: SystemModel, x: Vec) -> list[Mat]:
    """FD Hessians of all m equations at once (shared stencil evaluations)."""
    m = model.m
    x = np.asarray(x, dtype=float)
    steps = linops._STEP_HESS * np.maximum(np.abs(x), 1.0)
    f0 = model.residual_or_raise(x)
    hs = [np.zeros((m, m)) for _ in range(m)]

    def ev(xp: Vec) -> Vec:
        return model.residual_or_raise(xp)

    for a in range(m):
        ha = steps[a]
        xp = x.copy()
        xp[a] = x[a] + ha
        fp = ev(xp)
        xp[a] = x[a] - ha
        fm = ev(xp)
        daa = (fp - 2.0 * f0 + fm) / (ha * ha)
        for i in range(m):
            hs[i][a, a] = daa[i]
        for b in range(a + 1, m):
            hb = steps[b]
            xp = x.copy()
            xp[a] = x[a] + ha
            xp[b] = x[b] + hb
            v = ev(xp)
            xp[b] = x[b] - hb
            v = v - ev(xp)
            xp[a] = x[a] - ha
            v = v + ev(xp)
            xp[b] = x[b] + hb
            v = v - ev(xp)
            dab = v / (4.0 * ha * hb)
            for i in range(m):
                hs[i][a, b] = hs[i][b, a] = dab[i]
    return hs
