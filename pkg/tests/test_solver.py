import numpy as np
import pytest

from nrdiag.errors import DampingExhaustedError, NonEvaluableError
from nrdiag.linops import inf_norm
from nrdiag.model import SystemModel
from nrdiag.solver import (
    SolveOptions,
    SolveStatus,
    first_step_damped,
    newton_solve,
    newton_step,
)


def linear_model(a: np.ndarray, b: np.ndarray) -> SystemModel:
    return SystemModel(
        m=a.shape[0],
        residual=lambda x: a @ x + b,
        jacobian=lambda x: a.copy(),
        hessian=lambda i, x: [],
        w_indices=[],
        z_indices=list(range(a.shape[0])),
        nonlinear_eqs=[],
    )


def guarded_line_model(bound: float) -> SystemModel:
    """1-d residual 2(x - 1), only evaluable left of ``bound``."""

    def residual(x):
        if x[0] > bound:
            raise NonEvaluableError(reason="domain-violation", variable=0)
        return np.array([2.0 * (x[0] - 1.0)])

    return SystemModel(m=1, residual=residual, jacobian=lambda x: np.array([[2.0]]),
                       hessian=lambda i, x: [], w_indices=[0], z_indices=[],
                       nonlinear_eqs=[])


@pytest.mark.parametrize("seed", range(20))
def test_linear_systems_converge_in_one_iteration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    a = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n)
    x0 = rng.uniform(-10.0, 10.0, n)
    report = newton_solve(linear_model(a, b), x0)
    assert report.status is SolveStatus.CONVERGED
    assert report.iterations == 1
    assert inf_norm(a @ report.x + b) <= 1e-8


def test_newton_step_solves_linear_exactly():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((5, 5)) + 5 * np.eye(5)
    b = rng.standard_normal(5)
    x1 = newton_step(linear_model(a, b), rng.uniform(-3, 3, 5))
    assert inf_norm(a @ x1 + b) <= 1e-10


def test_newton_step_contracts_near_solution(hex_case):
    x1 = newton_step(hex_case.model, hex_case.preset("#1"))
    assert inf_norm(x1 - hex_case.exact_solution) < 1e-4


def test_first_step_increment_of_vd_positive(dc_case):
    step = first_step_damped(dc_case.model, dc_case.preset("#2"))
    assert step.increment[1] > 0.0


def test_start_at_solution_converges_immediately(hex_case):
    report = newton_solve(hex_case.model, hex_case.exact_solution)
    assert report.status is SolveStatus.CONVERGED
    assert report.iterations == 0


@pytest.mark.parametrize("preset,lam,reductions", [("#2", 1.0, 0), ("#3", 0.49, 2), ("#6", 0.7, 1)])
def test_damping_factors_on_hex(hex_case, preset, lam, reductions):
    step = first_step_damped(hex_case.model, hex_case.preset(preset))
    assert step.lam == pytest.approx(lam, rel=1e-12)
    assert step.lam == pytest.approx(0.7**reductions, rel=1e-15)
    # damped point lies on the segment toward the full step
    assert np.allclose(step.x1_star - step.x0, step.lam * (step.x1 - step.x0), rtol=1e-12)


def test_lambda_sequence_exact_powers():
    step = first_step_damped(guarded_line_model(bound=0.4), np.array([0.0]))
    assert step.lam == 0.7**3
    assert step.x1[0] == pytest.approx(1.0)
    assert step.x1_star[0] <= 0.4


def test_damping_exhausted():
    with pytest.raises(DampingExhaustedError):
        first_step_damped(guarded_line_model(bound=1e-8), np.array([0.0]),
                          SolveOptions(lambda_min=1e-6))


def test_max_iterations_status():
    # x^2 + 1 has no real root; the iteration wanders forever
    model = SystemModel(m=1, residual=lambda x: np.array([x[0] ** 2 + 1.0]),
                        jacobian=lambda x: np.array([[2.0 * x[0]]]),
                        hessian=lambda i, x: [(0, 0, 2.0)],
                        w_indices=[0], z_indices=[], nonlinear_eqs=[0])
    report = newton_solve(model, np.array([0.3]), SolveOptions(max_iter=30))
    assert report.status is SolveStatus.MAX_ITERATIONS
    assert report.iterations == 30


def test_hex_iteration_counts(hex_case):
    expected = {"#1": 3, "#2": 5}
    for preset, n in expected.items():
        report = newton_solve(hex_case.model, hex_case.preset(preset))
        assert report.status is SolveStatus.CONVERGED
        assert report.iterations == n
    for preset in ("#3", "#4", "#5", "#6"):
        report = newton_solve(hex_case.model, hex_case.preset(preset))
        assert report.status is SolveStatus.NON_EVALUABLE
        assert report.iterations <= 2


def test_dc4_fails_by_second_iteration_with_rcond(dc_case):
    report = newton_solve(dc_case.model, dc_case.preset("#4"))
    assert report.status is SolveStatus.SINGULAR_JACOBIAN
    assert report.iterations <= 2
    assert report.rcond is not None and report.rcond < 1e-30


def test_conditioning_warning_on_hard_trajectory(dc_case):
    from nrdiag.problems import perturb_preset

    x0 = perturb_preset(dc_case, {"v_d": 0.61}, preset="#4")
    report = newton_solve(dc_case.model, x0)
    assert report.status is SolveStatus.CONVERGED
    assert report.iterations == 37
    assert any("badly conditioned" in w for w in report.warnings)


def test_trajectory_capture(dc_case):
    report = newton_solve(dc_case.model, dc_case.preset("#1"),
                          SolveOptions(capture_trajectory=True))
    assert report.trajectory is not None
    assert len(report.trajectory) == len(report.increment_norms) + 1
    assert np.array_equal(report.trajectory[0], dc_case.preset("#1"))
    assert report.increment_norms[-1] <= 1e-12


def test_converged_residuals_small_on_corpus(hex_case, dc_case, ac4_case):
    runs = [(hex_case, "#1"), (hex_case, "#2"), (dc_case, "#1"), (dc_case, "#2"),
            (dc_case, "#3"), (dc_case, "#5"), (ac4_case, "test1")]
    for case, preset in runs:
        report = newton_solve(case.model, case.preset(preset))
        assert report.status is SolveStatus.CONVERGED
        assert report.final_residual_inf <= 1e-8


def test_low_rank_strategy_matches_direct(ac4_case):
    x0 = ac4_case.preset("test1")
    direct = newton_solve(ac4_case.model, x0, SolveOptions(jacobian_strategy="direct"))
    lowrank = newton_solve(ac4_case.model, x0, SolveOptions(jacobian_strategy="low-rank"))
    assert direct.status is lowrank.status is SolveStatus.CONVERGED
    assert direct.iterations == lowrank.iterations
    assert np.allclose(direct.x, lowrank.x, rtol=1e-9, atol=1e-12)


def test_first_step_reuse_gives_same_report(dc_case):
    x0 = dc_case.preset("#2")
    step = first_step_damped(dc_case.model, x0)
    seeded = newton_solve(dc_case.model, x0, first_step=step)
    plain = newton_solve(dc_case.model, x0)
    assert seeded.iterations == plain.iterations
    assert np.allclose(seeded.x, plain.x, rtol=1e-12)


def test_solve_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(damping_factor=1.5)
    with pytest.raises(ValueError):
        SolveOptions(jacobian_strategy="magic")


def test_low_rank_fallback_on_incomplete_structure():
    # Hessian callback that hides the curvature at the start point: the
    # stepper's structural correction is then wrong, the per-step residual
    # verification must notice and fall back to a fresh factorization.
    def residual(x):
        return np.array([x[0] ** 3 / 3.0 - 9.0, x[0] + x[1] - 4.0])

    def jacobian(x):
        return np.array([[x[0] ** 2, 0.0], [1.0, 1.0]])

    def hessian(i, x):
        if i == 0 and x[0] != 1.0:
            return [(0, 0, 2.0 * x[0])]
        return []  # structurally empty exactly at the start point

    model = SystemModel(m=2, residual=residual, jacobian=jacobian, hessian=hessian,
                        w_indices=[0], z_indices=[1], nonlinear_eqs=[0])
    x0 = np.array([1.0, 0.0])
    lowrank = newton_solve(model, x0, SolveOptions(jacobian_strategy="low-rank"))
    direct = newton_solve(model, x0, SolveOptions(jacobian_strategy="direct"))
    assert lowrank.status is SolveStatus.CONVERGED
    assert lowrank.x[0] == pytest.approx(3.0, rel=1e-12)
    assert lowrank.iterations == direct.iterations


def test_low_rank_auto_requires_analytic_hessian():
    from nrdiag.solver import _use_low_rank

    def residual(x):
        return x**2 - 1.0

    big_fd = SystemModel(m=600, residual=residual,
                         w_indices=list(range(600)), z_indices=[],
                         nonlinear_eqs=list(range(100)))
    assert not _use_low_rank(big_fd, SolveOptions())
    big_analytic = SystemModel(m=600, residual=residual,
                               jacobian=lambda x: np.diag(2.0 * x),
                               hessian=lambda i, x: [(i, i, 2.0)],
                               w_indices=list(range(600)), z_indices=[],
                               nonlinear_eqs=list(range(100)))
    assert _use_low_rank(big_analytic, SolveOptions())


def test_canonical_model_solves_identically(dc_case):
    from nrdiag.model import canonicalize

    canon, part = canonicalize(dc_case.model)
    x0 = dc_case.preset("#2")
    plain = newton_solve(dc_case.model, x0)
    mapped = newton_solve(canon, x0[part.var_perm])
    assert mapped.iterations == plain.iterations
    assert np.allclose(mapped.x[part.var_inv], plain.x, rtol=1e-10)
