import numpy as np
import pytest
import scipy.sparse as sp

from aeroflex import linalg, solvers
from aeroflex.solvers import ForcingSequence, NewtonConfig, SplitJacobian


def square(y):
    return y * y - 4.0


def square_jac(y):
    return sp.diags(2.0 * y).tocsr()


def test_config_validation():
    for bad in (dict(tol=0.0), dict(max_steps=0), dict(variant="secant"), dict(damping="x"),
                dict(armijo_c=1.0)):
        with pytest.raises(ValueError):
            NewtonConfig(**bad)


def test_forcing_values():
    assert solvers.forcing_eta("variant1", 0, 0.2) == 0.2
    assert solvers.forcing_eta("variant1", 0, 3.0) == 0.5
    assert solvers.forcing_eta("variant2", 0, 3.0) == pytest.approx(5e-6)
    assert solvers.forcing_eta("variant1", 0, 0.0) == 1e-16
    assert solvers.forcing_eta("constant", 4, 9.0, value=1e-12) == 1e-12
    with pytest.raises(ValueError):
        solvers.forcing_eta("variant1", 0, -1.0)
    assert ForcingSequence.parse("const:1e-12").eta(0, 1.0) == 1e-12
    assert ForcingSequence.parse("variant2").describe() == "variant2"
    with pytest.raises(ValueError):
        ForcingSequence.parse("sometimes")


def test_exact_newton_hand_iterates():
    y, rep = solvers.newton_exact(square, square_jac, np.array([3.0]), NewtonConfig(tol=1e-14))
    # 3 -> 13/6 -> 313/156 -> ...
    assert rep.converged and y[0] == pytest.approx(2.0, abs=1e-14)
    hist = rep.residual_history
    assert hist[1] == pytest.approx(abs((13 / 6) ** 2 - 4), rel=1e-14)
    assert hist[2] == pytest.approx(abs((313 / 156) ** 2 - 4), rel=1e-12)
    assert rep.newton_steps == len(hist) - 1


def test_linear_problem_one_step_and_zero_steps():
    A = sp.csr_matrix(np.array([[3.0, 1.0], [1.0, 2.0]]))
    b = np.array([1.0, -1.0])
    y, rep = solvers.newton_exact(lambda y: A @ y - b, lambda y: A, np.array([10.0, 7.0]))
    assert rep.newton_steps == 1
    y2, rep2 = solvers.newton_exact(lambda y: A @ y - b, lambda y: A, y)
    assert rep2.newton_steps == 0 and np.array_equal(y, y2)


def _split_system(rho_target=0.3, seed=0):
    """B diagonal, C = Q D Q^T B so that C B^-1 is symmetric with spectral radius rho_target."""
    rng = np.random.default_rng(seed)
    B = np.diag([2.0, 3.0, 4.0, 5.0, 6.0])
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    D = np.diag([rho_target, -0.25, 0.1, 0.2, -0.05])
    C = Q @ D @ Q.T @ B
    return B, C


def test_quasi_linear_rate_matches_spectral_radius():
    B, C = _split_system(0.3)
    b = np.ones(5)
    y_star = np.linalg.solve(B + C, b)
    F = lambda y: (B + C) @ y - b
    y, rep = solvers.newton_quasi(F, lambda y: sp.csr_matrix(B), np.zeros(5), NewtonConfig(tol=1e-13))
    assert np.allclose(y, y_star, atol=1e-12)
    h = rep.residual_history
    ratios = [h[k + 1] / h[k] for k in range(5, len(h) - 2)]
    assert np.allclose(ratios, 0.3, atol=0.02)


def test_quasi_step_equals_first_refinement():
    rng = np.random.default_rng(7)
    B, C = _split_system(0.3, seed=3)
    Bs = sp.csr_matrix(B)
    J = SplitJacobian(Bs, C, None, 5)
    F = rng.standard_normal(5)
    fac = linalg.factorize(Bs)
    dy_ref, _ = solvers.refine_step(fac, J, F, 1e-300, 1)
    captured = []

    def res(y):
        return F if not captured else np.zeros(5)

    def kstr(y):
        captured.append(True)
        return Bs

    y, _ = solvers.newton_quasi(res, kstr, np.zeros(5), NewtonConfig(max_steps=2))
    assert np.array_equal(y, dy_ref)


def test_refinement_meets_forcing_and_contracts():
    B, C = _split_system(0.3, seed=1)
    J = SplitJacobian(sp.csr_matrix(B), C, None, 5)
    F = np.arange(1.0, 6.0)
    fac = linalg.factorize(sp.csr_matrix(B))
    dy, norms = solvers.refine_step(fac, J, F, 1e-9, 100)
    assert norms[-1] <= 1e-9 * norms[0]
    assert np.linalg.norm(linalg.matvec(J, dy) + F) == pytest.approx(norms[-1], rel=1e-6, abs=1e-15)
    assert all(b <= 0.3 * a + 1e-10 for a, b in zip(norms[:-1], norms[1:]))
    assert solvers.estimate_contraction(fac, J, 5, 200, seed=2) == pytest.approx(0.3, abs=0.01)


def test_refinement_stall_when_not_contractive():
    B = np.eye(3)
    C = 1.5 * np.eye(3)
    J = SplitJacobian(sp.csr_matrix(B), C, None, 3)
    with pytest.raises(solvers.RefinementStall):
        solvers.refine_step(linalg.factorize(sp.csr_matrix(B)), J, np.ones(3), 1e-6, 50)


def test_refinement_cap_returns_best_effort():
    B, C = _split_system(0.3)
    J = SplitJacobian(sp.csr_matrix(B), C, None, 5)
    _, norms = solvers.refine_step(linalg.factorize(sp.csr_matrix(B)), J, np.ones(5), 1e-15, 3)
    assert len(norms) == 4


def _nonlinear_split():
    B, C = _split_system(0.3, seed=5)

    def F(y):
        return (B + C) @ y + 0.1 * y ** 3 - np.ones(5)

    def kstr(y):
        return sp.csr_matrix(B + np.diag(0.3 * y ** 2))

    def kfull(y):
        return SplitJacobian(kstr(y), C, None, 5)

    return F, kstr, kfull


def test_inexact_with_tight_forcing_matches_exact():
    F, kstr, kfull = _nonlinear_split()
    cfg = NewtonConfig(tol=1e-12)
    y_e, rep_e = solvers.newton_exact(F, kfull, np.zeros(5), cfg)
    y_i, rep_i = solvers.newton_inexact(F, kstr, kfull, np.zeros(5), cfg, ForcingSequence("constant", value=1e-12))
    assert rep_i.newton_steps == rep_e.newton_steps
    assert np.allclose(y_i, y_e, rtol=1e-12, atol=1e-15)
    assert rep_i.refinement_steps >= rep_i.newton_steps


def test_inexact_forcing_satisfied_each_step():
    F, kstr, kfull = _nonlinear_split()
    seen = []
    orig = solvers.refine_step

    def spy(fac, J, Fv, eta, max_ref):
        dy, norms = orig(fac, J, Fv, eta, max_ref)
        seen.append(np.linalg.norm(linalg.matvec(J, dy) + Fv) <= eta * np.linalg.norm(Fv))
        return dy, norms

    solvers.refine_step = spy
    try:
        _, rep = solvers.newton_inexact(F, kstr, kfull, np.full(5, 0.5), NewtonConfig(tol=1e-12))
    finally:
        solvers.refine_step = orig
    assert seen and all(seen)
    assert len(rep.forcing) == rep.newton_steps


def test_variant1_needs_fewer_refinements_than_variant2():
    F, kstr, kfull = _nonlinear_split()
    cfg = NewtonConfig(tol=1e-10)
    _, r1 = solvers.newton_inexact(F, kstr, kfull, np.zeros(5), cfg, ForcingSequence("variant1"))
    _, r2 = solvers.newton_inexact(F, kstr, kfull, np.zeros(5), cfg, ForcingSequence("variant2"))
    assert r1.refinement_steps < r2.refinement_steps


def test_armijo_examples():
    ident = lambda y: y
    y = np.array([1.0, -2.0])
    assert solvers.line_search_armijo(ident, y, -y) == 1.0
    assert solvers.line_search_armijo(ident, y, -3 * y, c=0.5) == 0.5
    with pytest.raises(solvers.LineSearchFailed):
        solvers.line_search_armijo(ident, y, y)


def test_armijo_damped_newton_converges():
    f = lambda y: np.arctan(y)
    jac = lambda y: sp.diags(1.0 / (1.0 + y ** 2)).tocsr()
    # undamped iterates from 2 grow without bound until the Jacobian underflows
    with np.errstate(over="ignore"), pytest.raises((solvers.SolverError, linalg.LinalgError)):
        solvers.newton_exact(f, jac, np.array([2.0]), NewtonConfig(max_steps=20))
    y, rep = solvers.newton_exact(f, jac, np.array([2.0]), NewtonConfig(damping="armijo"))
    assert abs(y[0]) < 1e-8 and min(rep.step_lengths) < 1.0


def test_max_steps_carries_best_iterate():
    with pytest.raises(solvers.MaxStepsExceeded) as info:
        solvers.newton_exact(square, square_jac, np.array([3.0]), NewtonConfig(max_steps=2, tol=1e-15))
    exc = info.value
    assert exc.y[0] == pytest.approx(313 / 156)
    assert len(exc.report.residual_history) == 3


def test_quasi_divergence_detected():
    # structural part with the wrong sign: refinement factor 2
    A = np.eye(2)
    F = lambda y: 3.0 * A @ y - 1.0
    with pytest.raises(solvers.Divergence):
        solvers.newton_quasi(F, lambda y: sp.csr_matrix(A), np.zeros(2), NewtonConfig(max_steps=40))


def test_singular_jacobian_propagates():
    with pytest.raises(linalg.SingularMatrix):
        solvers.newton_exact(square, square_jac, np.array([0.0]))


def test_timer_categories():
    timer = solvers.SectionTimer()
    _, rep = solvers.newton_exact(square, square_jac, np.array([3.0]), NewtonConfig(), timer)
    assert rep.linear_solver > 0 and rep.linear_solver == timer.get("linear_solver")
    assert rep.eval_uvlm == 0.0


def test_dispatch():
    F, kstr, kfull = _nonlinear_split()
    for v in solvers.VARIANTS:
        y, rep = solvers.newton_solve(NewtonConfig(variant=v, tol=1e-11), F, kstr, kfull, np.zeros(5))
        assert rep.converged and np.linalg.norm(F(y)) <= 1e-11
