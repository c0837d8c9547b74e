"""Dense linear-algebra and finite-difference kernel.

Vectors and matrices are plain float64 numpy arrays; LU factorization is
LAPACK ``getrf``/``getrs`` with a 1-norm reciprocal-condition estimate
attached to every factorization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgWarning, lapack

from .errors import NonEvaluableError, SingularMatrixError

Vec = np.ndarray
Mat = np.ndarray

MACHINE_EPS = float(np.finfo(np.float64).eps)

# Below this rcond a factorization is numerically meaningless at double
# precision; between this and RCOND_WARN results are usable but suspect.
# Corpus trajectories that must still converge dip to rcond ~2.5e-16, so the
# hard floor sits at eps^2 rather than any fixed 1e-12-style cutoff.
RCOND_SINGULAR = MACHINE_EPS**2
RCOND_WARN = 1e-12

_STEP_JAC = MACHINE_EPS ** (1.0 / 3.0)
_STEP_HESS = MACHINE_EPS**0.25


def inf_norm(v: Vec) -> float:
    """Max-abs norm; 0 for empty input."""
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


@dataclass
class LuFactors:
    """Packed LU factors of a square matrix with partial pivoting.

    ``rcond`` is the 1-norm reciprocal condition estimate of the factored
    matrix; ``anorm`` the 1-norm it was computed against.
    """

    lu: Mat
    piv: np.ndarray
    rcond: float
    anorm: float

    @property
    def n(self) -> int:
        return self.lu.shape[0]


def lu_factor(a: Mat) -> LuFactors:
    """Factor a square matrix as P*L*U.

    Raises SingularMatrixError on an exactly zero pivot; graded
    ill-conditioning is left to the attached rcond estimate.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.size == 0:
        return LuFactors(lu=a.copy(), piv=np.empty(0, dtype=np.int32), rcond=1.0, anorm=0.0)
    anorm = float(np.linalg.norm(a, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv, info = lapack.dgetrf(a)
    if info < 0:
        raise ValueError(f"illegal argument to dgetrf: {info}")
    if info > 0 or np.min(np.abs(np.diag(lu))) == 0.0:
        raise SingularMatrixError(rcond=0.0)
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    return LuFactors(lu=lu, piv=piv, rcond=float(rcond), anorm=anorm)


def lu_solve(f: LuFactors, b: Vec | Mat) -> Vec | Mat:
    """Solve A x = b for one right-hand side vector or a matrix of them."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.n:
        raise ValueError(f"rhs length {b.shape[0]} != matrix size {f.n}")
    if b.size == 0:
        return b.copy()
    x, info = lapack.dgetrs(f.lu, f.piv, b)
    if info != 0:
        raise ValueError(f"dgetrs failed: {info}")
    return x


def _eval(f: Callable[[Vec], Vec], x: Vec) -> Vec:
    try:
        y = np.asarray(f(x), dtype=float)
    except NonEvaluableError:
        raise
    except (FloatingPointError, ValueError, OverflowError) as exc:
        raise NonEvaluableError(reason="domain-violation", message=str(exc)) from exc
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        raise NonEvaluableError(reason="non-finite", equation=bad)
    return y


def fd_jacobian(f: Callable[[Vec], Vec], x: Vec, columns: np.ndarray | None = None) -> Mat:
    """Central-difference Jacobian of a vector residual.

    Column j uses step ``cbrt(eps) * max(|x_j|, 1)``.  ``columns`` restricts
    differentiation to a subset of variables (other columns are omitted).
    Raises NonEvaluableError if any perturbed evaluation fails.
    """
    x = np.asarray(x, dtype=float)
    cols = np.arange(x.size) if columns is None else np.asarray(columns)
    m = _eval(f, x).size
    jac = np.empty((m, cols.size))
    for c, j in enumerate(cols):
        h = _STEP_JAC * max(abs(x[j]), 1.0)
        xp = x.copy()
        xp[j] = x[j] + h
        fp = _eval(f, xp)
        xp[j] = x[j] - h
        fm = _eval(f, xp)
        jac[:, c] = (fp - fm) / (2.0 * h)
    return jac


def fd_hessian(f_i: Callable[[Vec], float], x: Vec, columns: np.ndarray | None = None) -> Mat:
    """Second-order central-stencil Hessian of a scalar residual.

    Step for variable j is ``eps**0.25 * max(|x_j|, 1)``; the result is
    symmetric by construction (mirrored off-diagonal entries).
    """
    x = np.asarray(x, dtype=float)
    cols = np.arange(x.size) if columns is None else np.asarray(columns)
    n = cols.size
    steps = np.array([_STEP_HESS * max(abs(x[j]), 1.0) for j in cols])

    def ev(xp: Vec) -> float:
        y = _eval(f_i, xp)
        return float(y) if y.ndim == 0 else float(y.item())

    f0 = ev(x)
    hess = np.empty((n, n))
    for a in range(n):
        j, hj = cols[a], steps[a]
        xp = x.copy()
        xp[j] = x[j] + hj
        fp = ev(xp)
        xp[j] = x[j] - hj
        fm = ev(xp)
        hess[a, a] = (fp - 2.0 * f0 + fm) / (hj * hj)
        for b in range(a + 1, n):
            k, hk = cols[b], steps[b]
            xp = x.copy()
            xp[j] = x[j] + hj
            xp[k] = x[k] + hk
            v = ev(xp)
            xp[k] = x[k] - hk
            v -= ev(xp)
            xp[j] = x[j] - hj
            v += ev(xp)
            xp[k] = x[k] + hk
            v -= ev(xp)
            hess[a, b] = hess[b, a] = v / (4.0 * hj * hk)
    return hess
