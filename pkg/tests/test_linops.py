import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrdiag.errors import NonEvaluableError, SingularMatrixError
from nrdiag.linops import fd_hessian, fd_jacobian, inf_norm, lu_factor, lu_solve


def test_lu_identity():
    f = lu_factor(np.eye(3))
    assert np.allclose(np.abs(np.diag(f.lu)), 1.0)
    assert f.rcond == pytest.approx(1.0)
    assert np.allclose(lu_solve(f, np.array([3.0, 4.0, 5.0])), [3, 4, 5])


def test_lu_permutation():
    f = lu_factor(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(lu_solve(f, np.array([1.0, 2.0])), [2.0, 1.0])


def test_lu_diagonal():
    f = lu_factor(np.diag([2.0, 4.0]))
    assert np.allclose(lu_solve(f, np.array([2.0, 4.0])), [1.0, 1.0])


def test_lu_singular_raises():
    with pytest.raises(SingularMatrixError):
        lu_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularMatrixError):
        lu_factor(np.zeros((2, 2)))


def test_lu_rectangular_rejected():
    with pytest.raises(ValueError):
        lu_factor(np.ones((2, 3)))


def test_lu_solve_known_solution():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((20, 20)) + 20.0 * np.eye(20)
    y = rng.standard_normal(20)
    f = lu_factor(a)
    assert np.linalg.norm(lu_solve(f, a @ y) - y) <= 1e-9 * np.linalg.norm(y)


@pytest.mark.parametrize("n", [2, 17, 60, 200])
def test_lu_residual_bound(n):
    rng = np.random.default_rng(n)
    a = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n)
    x = lu_solve(lu_factor(a), b)
    resid = inf_norm(a @ x - b)
    assert resid <= 1e-10 * (inf_norm(a) * inf_norm(x) + inf_norm(b))


def test_lu_matrix_rhs():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((8, 8)) + 8 * np.eye(8)
    b = rng.standard_normal((8, 5))
    x = lu_solve(lu_factor(a), b)
    assert np.allclose(a @ x, b, atol=1e-10)


def test_hex_jacobian_at_solution_factorable(hex_case):
    jac = hex_case.model.jacobian_at(hex_case.exact_solution)
    f = lu_factor(jac)
    assert f.rcond > 1e-12


def test_fd_jacobian_identity_map():
    jac = fd_jacobian(lambda x: x.copy(), np.array([0.3, -2.0, 5.0]))
    assert np.allclose(jac, np.eye(3), atol=1e-9)


def test_fd_jacobian_simple_polynomial():
    f = lambda x: np.array([x[0] ** 2, x[0] * x[1]])
    jac = fd_jacobian(f, np.array([2.0, 3.0]))
    assert np.allclose(jac, [[4.0, 0.0], [3.0, 2.0]], atol=1e-6)


def test_fd_jacobian_matches_analytic_hex(hex_case):
    x = hex_case.preset("#2")
    fd = fd_jacobian(hex_case.model.residual_or_raise, x)
    an = hex_case.model.jacobian_at(x)
    assert np.all(np.abs(fd - an) <= 1e-5 * np.maximum(np.abs(an), 1.0))


def test_fd_jacobian_propagates_failure():
    def f(x):
        if x[0] > 1.0:
            raise NonEvaluableError(reason="domain-violation", variable=0)
        return np.array([x[0]])

    with pytest.raises(NonEvaluableError):
        fd_jacobian(f, np.array([1.0]))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0), min_size=12, max_size=12),
       st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_fd_jacobian_cubic_polynomials(coeffs, point):
    c = np.array(coeffs).reshape(4, 3)
    x0 = np.array(point)

    def f(x):
        return np.array([c[0] @ x**3 + c[1] @ x**2 + c[2] @ x + c[3].sum()])

    fd = fd_jacobian(f, x0)
    an = (3 * c[0] * x0**2 + 2 * c[1] * x0 + c[2])[None, :]
    assert np.all(np.abs(fd - an) <= 1e-5 * np.maximum(np.abs(an), 1.0))


def test_fd_hessian_linear_is_zero():
    h = fd_hessian(lambda x: 3.0 * x[0] - 2.0 * x[1] + 1.0, np.array([0.7, -0.4]))
    assert inf_norm(h) <= 1e-6


def test_fd_hessian_bilinear():
    h = fd_hessian(lambda x: x[0] * x[1], np.array([5.0, -3.0]))
    assert np.allclose(h, [[0.0, 1.0], [1.0, 0.0]], atol=1e-5)


def test_fd_hessian_symmetric_by_construction():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4))
    h = fd_hessian(lambda x: np.sin(x[0]) * x[1] + x[2] ** 3 * x[3], rng.standard_normal(4))
    assert np.array_equal(h, h.T)


def test_fd_hessian_diode_curvature(dc_case):
    i_s, v_t = 6.9144e-13, 25e-3
    x = dc_case.preset("#3")  # v_d = 0.63

    def f0(xp):
        return float(dc_case.model.residual_or_raise(xp)[0])

    h = fd_hessian(f0, x)
    analytic = -i_s / v_t**2 * np.exp(0.63 / v_t)
    assert h[1, 1] == pytest.approx(analytic, rel=1e-4)


def test_fd_hessian_column_restriction():
    f = lambda x: x[0] ** 2 + x[1] * x[2]
    h = fd_hessian(f, np.array([1.0, 2.0, 3.0]), columns=np.array([1, 2]))
    assert np.allclose(h, [[0.0, 1.0], [1.0, 0.0]], atol=1e-5)
