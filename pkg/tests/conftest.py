"""Shared fixtures and independent verification helpers."""

from contextlib import contextmanager

import mpmath
import numpy as np
import pytest

import proxflow as pf


@pytest.fixture(scope="session")
def lasso():
    return pf.get_problem("lasso")


@pytest.fixture(scope="session")
def box_qp():
    return pf.get_problem("box-qp")


@pytest.fixture(scope="session")
def pl_quadratic():
    return pf.get_problem("pl-quadratic")


@pytest.fixture(scope="session")
def logistic_l1():
    return pf.get_problem("logistic-l1")


@pytest.fixture(scope="session")
def qp_equality():
    return pf.get_problem("qp-equality")


@pytest.fixture(scope="session")
def lasso_ref(lasso):
    return pf.solve_reference(lasso)


@pytest.fixture(scope="session")
def box_qp_ref(box_qp):
    return pf.solve_reference(box_qp)


@pytest.fixture(scope="session")
def strongly_convex(lasso, box_qp, logistic_l1):
    return [lasso, box_qp, logistic_l1]


def golden_section(fun, lo, hi, max_iter=300):
    """Golden-section search for the minimizer of a unimodal scalar function.

    Runs in extended precision: near the minimizer the objective varies only
    quadratically, so double-precision value ties would cap the location
    accuracy at ~1e-8.
    """
    with mpmath.workdps(50):
        invphi = (mpmath.sqrt(5) - 1) / 2
        tol = mpmath.mpf("1e-18")
        a, b = mpmath.mpf(lo), mpmath.mpf(hi)
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        fc, fd = fun(c), fun(d)
        for _ in range(max_iter):
            if b - a <= tol:
                break
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = fun(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = fun(d)
        return float((a + b) / 2)


def scalar_prox_oracle(g_scalar, mu, v, lo=-50.0, hi=50.0):
    """Independent 1-d prox: golden-section minimization of
    ``g(z) + (z - v)^2 / (2 mu)``."""
    return golden_section(lambda z: g_scalar(z) + (z - v) ** 2 / (2 * mu),
                          lo, hi)


def central_gradient(fun, x, h=1e-6):
    """Componentwise central finite differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    n = x.size
    g = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def batched_central_gradient(batch_value, x, h=1e-6):
    """Central differences through one batched evaluation of 2n points."""
    x = np.asarray(x, dtype=float)
    n = x.size
    pts = np.concatenate([x + h * np.eye(n), x - h * np.eye(n)], axis=0)
    vals = np.asarray(batch_value(pts), dtype=float)
    return (vals[:n] - vals[n:]) / (2.0 * h)


def soft_threshold_kink(g, mu, dim):
    """Locate the soft-threshold break of an l1 prox without reading its
    weight: for large v, ``v - prox(v)`` equals the threshold."""
    probe = np.full(dim, 1e6)
    return float((probe - g.prox(mu, probe))[0])


def sample_l1_kink_free(p, rng, count, margin):
    """Points whose forward-step argument keeps all coordinates at least
    ``margin`` away from the soft-threshold kinks."""
    thr = soft_threshold_kink(p.g, p.mu, p.n)
    out = []
    while len(out) < count:
        x = 2.0 * rng.standard_normal((4 * count, p.n))
        v = x - p.mu * p.f.gradient(x)
        ok = np.all(np.abs(np.abs(v) - thr) >= margin, axis=-1)
        out.extend(x[ok])
    return np.asarray(out[:count])


@contextmanager
def criterion(label):
    """Print one pass/fail line per acceptance criterion."""
    try:
        yield
    except BaseException:
        print(f"{label}: FAIL")
        raise
    print(f"{label}: PASS")
