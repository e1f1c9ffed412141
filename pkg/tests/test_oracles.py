"""Oracle constructors, prox correctness against scalar minimization, and
the curvature inequalities behind every downstream certificate."""

import numpy as np
import pytest

import proxflow as pf
from conftest import central_gradient, scalar_prox_oracle


def test_quadratic_identity_gradient():
    f = pf.make_quadratic(np.eye(2), np.zeros(2))
    assert np.allclose(f.gradient(np.array([1.0, 2.0])), [1.0, 2.0])


def test_quadratic_diagonal_constants():
    f = pf.make_quadratic(np.diag([1.0, 3.0]), np.zeros(2))
    assert f.m_f == 1.0 and f.L_f == 3.0


def test_quadratic_offdiagonal_constants():
    f = pf.make_quadratic(np.array([[2.0, 1.0], [1.0, 2.0]]), np.zeros(2))
    # characteristic polynomial of the 2x2 matrix, solved independently
    roots = np.sort(np.roots([1.0, -4.0, 3.0]))
    assert abs(f.m_f - roots[0]) < 1e-12
    assert abs(f.L_f - roots[1]) < 1e-12


def test_quadratic_rejects_asymmetric():
    Q = np.array([[1.0, 1e-6], [0.0, 1.0]])
    with pytest.raises(ValueError, match="symmetric"):
        pf.make_quadratic(Q, np.zeros(2))


def test_quadratic_rejects_singular():
    with pytest.raises(ValueError, match="positive definite"):
        pf.make_quadratic(np.diag([0.0, 1.0]), np.zeros(2))


def test_quadratic_psd_accepts_singular_rejects_indefinite():
    f = pf.make_quadratic_psd(np.diag([0.0, 1.0]), np.zeros(2))
    assert f.m_f == 0.0 and f.L_f == 1.0
    with pytest.raises(ValueError, match="indefinite"):
        pf.make_quadratic_psd(np.diag([-1.0, 1.0]), np.zeros(2))


def test_least_squares_constants_and_gradient():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((12, 4))
    b = rng.standard_normal(12)
    f = pf.make_least_squares(A, b)
    s = np.linalg.svd(A, compute_uv=False)
    assert abs(f.L_f - s[0] ** 2) < 1e-10
    assert abs(f.m_f - s[-1] ** 2) < 1e-10
    x = rng.standard_normal(4)
    assert np.allclose(f.gradient(x), A.T @ (A @ x - b), atol=1e-12)


def test_logistic_rejects_bad_labels():
    with pytest.raises(ValueError, match="labels"):
        pf.make_logistic(np.ones((3, 2)), np.array([1.0, 0.5, -1.0]), ridge=0.1)


@pytest.mark.parametrize("key", ["lasso", "box-qp", "pl-quadratic", "logistic-l1"])
def test_gradient_matches_finite_differences(key):
    p = pf.get_problem(key)
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = rng.standard_normal(p.n)
        fd = central_gradient(p.f.value, x)
        an = p.f.gradient(x)
        assert np.linalg.norm(fd - an) <= 1e-5 * (1.0 + np.linalg.norm(an))


def test_hessian_apply_matches_gradient_differences(logistic_l1):
    f = logistic_l1.f
    rng = np.random.default_rng(2)
    x = rng.standard_normal(f.dim)
    v = rng.standard_normal(f.dim)
    h = 1e-6
    fd = (f.gradient(x + h * v) - f.gradient(x - h * v)) / (2.0 * h)
    assert np.linalg.norm(fd - f.hessian_apply(x, v)) <= 1e-5


def test_gradient_sandwich_inequality(strongly_convex):
    # m ||dx|| <= ||dgrad|| <= L ||dx|| on >= 1e3 pairs per oracle
    rng = np.random.default_rng(3)
    for p in strongly_convex:
        f = p.f
        x = 3.0 * rng.standard_normal((1000, f.dim))
        xh = 3.0 * rng.standard_normal((1000, f.dim))
        dx = np.linalg.norm(x - xh, axis=-1)
        dg = np.linalg.norm(f.gradient(x) - f.gradient(xh), axis=-1)
        slack = 1e-10 * np.maximum(1.0, dx)
        assert np.all(f.m_f * dx <= dg + slack)
        assert np.all(dg <= f.L_f * dx + slack)


def test_joint_curvature_inequality(strongly_convex):
    rng = np.random.default_rng(4)
    for p in strongly_convex:
        f = p.f
        x = 3.0 * rng.standard_normal((1000, f.dim))
        xh = 3.0 * rng.standard_normal((1000, f.dim))
        dgrad = f.gradient(x) - f.gradient(xh)
        dx = x - xh
        lhs = np.sum(dgrad * dx, axis=-1)
        c1 = f.m_f * f.L_f / (f.m_f + f.L_f)
        c2 = 1.0 / (f.m_f + f.L_f)
        rhs = c1 * np.sum(dx * dx, axis=-1) + c2 * np.sum(dgrad * dgrad, axis=-1)
        assert np.all(lhs >= rhs - 1e-10 * np.maximum(1.0, np.abs(rhs)))


def test_l1_prox_frozen_and_oracle():
    g = pf.make_l1(1.0)
    for v, expected in [(2.0, 1.0), (0.5, 0.0), (-3.0, -2.0)]:
        got = float(g.prox(1.0, np.array([v]))[0])
        assert abs(got - expected) <= 1e-12
        oracle = scalar_prox_oracle(lambda z: abs(z), 1.0, v)
        assert abs(got - oracle) <= 1e-8


def test_l1_prox_random_against_oracle():
    rng = np.random.default_rng(5)
    for _ in range(25):
        lam = float(rng.uniform(0.1, 3.0))
        mu = float(rng.uniform(0.1, 3.0))
        v = float(rng.uniform(-5.0, 5.0))
        g = pf.make_l1(lam)
        got = float(g.prox(mu, np.array([v]))[0])
        oracle = scalar_prox_oracle(lambda z: lam * abs(z), mu, v)
        assert abs(got - oracle) <= 1e-8


def test_l1_rejects_nonpositive_weight():
    with pytest.raises(ValueError):
        pf.make_l1(0.0)


def test_box_prox_frozen_and_oracle():
    g01 = pf.make_box_indicator([0.0], [1.0])
    assert float(g01.prox(1.0, np.array([2.0]))[0]) == 1.0
    assert float(g01.prox(1.0, np.array([0.5]))[0]) == 0.5
    g11 = pf.make_box_indicator([-1.0], [1.0])
    assert float(g11.prox(1.0, np.array([-7.0]))[0]) == -1.0
    # interval-constrained scalar minimization as the oracle
    rng = np.random.default_rng(6)
    for _ in range(20):
        v = float(rng.uniform(-3.0, 3.0))
        mu = float(rng.uniform(0.1, 2.0))
        got = float(g11.prox(mu, np.array([v]))[0])
        oracle = scalar_prox_oracle(lambda z: 0.0, mu, v, lo=-1.0, hi=1.0)
        assert abs(got - oracle) <= 1e-8


def test_box_prox_ignores_mu():
    g = pf.make_box_indicator([-1.0, 0.0], [1.0, 2.0])
    v = np.array([3.0, -1.0])
    assert np.array_equal(g.prox(0.1, v), g.prox(10.0, v))


def test_box_rejects_inverted_bounds():
    with pytest.raises(ValueError, match=r"lo\[1\]"):
        pf.make_box_indicator([0.0, 2.0], [1.0, 1.0])


def test_point_indicator_prox_and_value():
    g = pf.make_point_indicator(np.zeros(2))
    assert np.array_equal(g.prox(0.7, np.array([3.0, -4.0])), np.zeros(2))
    assert g.value(np.zeros(2)) == 0.0
    assert np.isinf(g.value(np.array([1.0, 0.0])))


def test_firm_nonexpansiveness_of_prox():
    rng = np.random.default_rng(7)
    oracles = [pf.make_l1(0.7), pf.make_box_indicator(-np.ones(6), np.ones(6)),
               pf.make_zero(), pf.make_point_indicator(np.zeros(6))]
    for g in oracles:
        u = 4.0 * rng.standard_normal((1000, 6))
        v = 4.0 * rng.standard_normal((1000, 6))
        pu, pv = g.prox(0.8, u), g.prox(0.8, v)
        lhs = np.sum((pu - pv) ** 2, axis=-1)
        rhs = np.sum((u - v) * (pu - pv), axis=-1)
        assert np.all(lhs <= rhs + 1e-12)


@pytest.mark.parametrize("key", ["lasso", "box-qp"])
def test_subgradient_membership_at_prox_point(key):
    p = pf.get_problem(key)
    rng = np.random.default_rng(8)
    for _ in range(50):
        x = 2.0 * rng.standard_normal(p.n)
        s = pf.gmap(p.f, p.g, p.mu, x) - p.f.gradient(x)
        point = p.g.prox(p.mu, x - p.mu * p.f.gradient(x))
        assert p.g.subgradient_contains(point, s)
        # subgradient inequality against feasible comparison points
        xh = p.g.prox(p.mu, 2.0 * rng.standard_normal(p.n))
        lhs = p.g.value(xh)
        rhs = p.g.value(point) + float(s @ (xh - point))
        assert lhs >= rhs - 1e-9


def test_prox_smooth_scalar_resolvent():
    f = pf.make_quadratic(np.eye(1), np.zeros(1))
    z = pf.prox_smooth(f, 1.0, np.array([2.0]))
    assert abs(float(z[0]) - 1.0) <= 1e-14


def test_prox_smooth_diagonal_example():
    f = pf.make_quadratic(np.diag([1.0, 3.0]), np.zeros(2))
    z = pf.prox_smooth(f, 0.5, np.array([2.0, 2.0]))
    assert np.allclose(z, [4.0 / 3.0, 0.8], atol=1e-14)


def test_prox_smooth_vanishing_mu_limit(logistic_l1):
    v = np.array([0.3, -1.2, 0.7, 0.1, -0.4])
    z = pf.prox_smooth(logistic_l1.f, 1e-9, v)
    assert np.linalg.norm(z - v) <= 1e-6


@pytest.mark.parametrize("key", ["lasso", "logistic-l1"])
def test_prox_smooth_residual_contract(key):
    p = pf.get_problem(key)
    rng = np.random.default_rng(9)
    for _ in range(10):
        v = 3.0 * rng.standard_normal(p.n)
        z = pf.prox_smooth(p.f, p.mu, v)
        res = np.linalg.norm(z + p.mu * p.f.gradient(z) - v)
        assert res <= 1e-12


def test_prox_smooth_newton_matches_closed_form():
    Q = np.array([[2.0, 0.5], [0.5, 1.5]])
    f = pf.make_quadratic(Q, np.array([0.3, -0.7]))
    # same function, with the quadratic shortcut stripped off
    f_newton = pf.SmoothOracle(dim=2, value=f.value, gradient=f.gradient,
                               hessian_apply=f.hessian_apply,
                               m_f=f.m_f, L_f=f.L_f)
    v = np.array([1.0, -2.0])
    assert np.allclose(pf.prox_smooth(f_newton, 0.7, v),
                       pf.prox_smooth(f, 0.7, v), atol=1e-10)


def test_prox_smooth_reports_residual_on_stall(logistic_l1):
    with pytest.raises(pf.ProxSolveError, match="residual") as info:
        pf.prox_smooth(logistic_l1.f, 1.0, np.ones(5), max_iter=1, tol=1e-16)
    assert info.value.residual >= 0.0


def test_conjugate_quadratic_double_conjugate():
    rng = np.random.default_rng(10)
    M = rng.standard_normal((4, 4))
    Q = M @ M.T + 0.5 * np.eye(4)
    q = rng.standard_normal(4)
    cq = pf.ConjugateQuadratic(Q=Q, q=q)
    for _ in range(10):
        x = rng.standard_normal(4)
        w = Q @ x + q  # maximizer of <x, w> - f*(w)
        again = float(x @ w) - cq.conjugate_value(w)
        assert abs(again - cq.value(x)) <= 1e-10 * (1.0 + abs(cq.value(x)))


def test_conjugate_quadratic_needs_quadratic(logistic_l1):
    with pytest.raises(ValueError, match="quadratic"):
        pf.ConjugateQuadratic.from_smooth(logistic_l1.f)
