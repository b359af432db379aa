import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from edge_spectral_lab.numerics import (
    NumericalError,
    QuadratureRule,
    TriDiag,
    as_symmetric,
    brent_root,
    composite_gauss_legendre,
    gauss_legendre,
    hermite_phi,
    inverse_iteration,
    jacobi_eigs,
    sturm_count,
    sym_sqrt,
    tridiag_eigs,
)
from oracles import dense_tridiag_eigs, fd_laplacian_eigs, hermite_function

# magnitudes below 1e-6 other than zero are excluded: squares of subnormal
# couplings defeat the LAPACK oracle itself
finite = st.one_of(st.just(0.0), st.floats(1e-6, 10), st.floats(-10, -1e-6))


@st.composite
def tridiagonals(draw, max_n=30):
    n = draw(st.integers(1, max_n))
    d = draw(arrays(float, n, elements=finite))
    e = draw(arrays(float, n - 1, elements=finite))
    return TriDiag(d, e)


# ---------------------------------------------------------------------------
# containers


def test_tridiag_validation():
    with pytest.raises(ValueError):
        TriDiag(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        TriDiag(np.ones(3), np.ones(3))
    with pytest.raises(ValueError):
        TriDiag(np.array([1.0, np.nan]), np.array([0.0]))


def test_quadrature_rule_validation():
    with pytest.raises(ValueError):
        QuadratureRule(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        QuadratureRule(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


def test_as_symmetric_lower_triangle_wins():
    a = np.array([[1.0, 99.0], [2.0, 3.0]])
    np.testing.assert_array_equal(as_symmetric(a), [[1, 2], [2, 3]])


# ---------------------------------------------------------------------------
# Sturm counts


def test_sturm_diagonal():
    assert sturm_count(TriDiag(np.array([1.0, 2, 3]), np.zeros(2)), 2.5) == 2


def test_sturm_two_by_two():
    assert sturm_count(TriDiag(np.array([2.0, 2]), np.array([-1.0])), 1.5) == 1


@given(tridiagonals())
def test_sturm_below_gershgorin_is_zero(T):
    assert sturm_count(T, -1e9) == 0
    assert sturm_count(T, T.gershgorin()[1] + 1.0) == T.n


@given(tridiagonals(), finite, finite)
def test_sturm_monotone(T, a, b):
    lo, hi = min(a, b), max(a, b)
    assert sturm_count(T, lo) <= sturm_count(T, hi)


@given(tridiagonals(), finite)
def test_sturm_matches_lapack(T, x):
    ev = dense_tridiag_eigs(T.diag, T.offdiag)
    # skip shifts within roundoff of an eigenvalue
    if np.min(np.abs(ev - x)) < 1e-9 * (1 + np.abs(ev).max()):
        return
    assert sturm_count(T, x) == int(np.sum(ev < x))


# ---------------------------------------------------------------------------
# bisection eigenvalues


def test_tridiag_eigs_small():
    np.testing.assert_allclose(tridiag_eigs(TriDiag(np.array([3.0, 1, 2]), np.zeros(2)), 3), [1, 2, 3])
    np.testing.assert_allclose(tridiag_eigs(TriDiag(np.array([2.0, 2]), np.array([-1.0])), 2), [1, 3], atol=1e-13)


def test_dirichlet_laplacian_ground_state():
    n = 999
    h = 1.0 / (n + 1)
    T = TriDiag(np.full(n, 2 / h**2), np.full(n - 1, -1 / h**2))
    lam = tridiag_eigs(T, 1)[0]
    assert abs(lam - math.pi**2) / math.pi**2 < 1e-4
    assert abs(lam - fd_laplacian_eigs(n)[0]) / lam < 1e-10


def test_fd_laplacian_full_spectrum():
    n = 500
    h = 1.0 / (n + 1)
    T = TriDiag(np.full(n, 2 / h**2), np.full(n - 1, -1 / h**2))
    ev = tridiag_eigs(T, n)
    exact = fd_laplacian_eigs(n)
    assert np.max(np.abs(ev - exact) / exact) < 1e-10


def test_tridiag_eigs_count_range():
    T = TriDiag(np.ones(3), np.zeros(2))
    with pytest.raises(ValueError):
        tridiag_eigs(T, 0)
    with pytest.raises(ValueError):
        tridiag_eigs(T, 4)


@given(tridiagonals())
def test_tridiag_eigs_match_lapack_and_sturm(T):
    ev = tridiag_eigs(T, T.n)
    ref = dense_tridiag_eigs(T.diag, T.offdiag)
    scale = 1 + np.abs(ref).max()
    assert np.all(np.diff(ev) >= 0)
    np.testing.assert_allclose(ev, ref, atol=1e-11 * scale)
    for i, lam in enumerate(ev):
        delta = 1e-9 * (1 + abs(lam))
        if np.sum(np.abs(ref - lam) < 2 * delta) > 1:
            continue  # a cluster: index bookkeeping is ambiguous at this resolution
        assert sturm_count(T, lam - delta) == i
        assert sturm_count(T, lam + delta) >= i + 1


# ---------------------------------------------------------------------------
# inverse iteration


def test_inverse_iteration_diagonal():
    v = inverse_iteration(TriDiag(np.array([1.0, 2, 3]), np.zeros(2)), 2.0)
    np.testing.assert_allclose(np.abs(v), [0, 1, 0], atol=1e-12)


def test_inverse_iteration_two_by_two():
    v = inverse_iteration(TriDiag(np.array([2.0, 2]), np.array([-1.0])), 1.0)
    np.testing.assert_allclose(np.abs(v), [2**-0.5, 2**-0.5], atol=1e-12)


def test_inverse_iteration_rejects_cluster():
    T = TriDiag(np.array([1.0, 1.0 + 1e-10, 3]), np.zeros(2))
    with pytest.raises(NumericalError):
        inverse_iteration(T, 1.0)


@given(tridiagonals(max_n=25), st.data())
def test_inverse_iteration_residual(T, data):
    ev = dense_tridiag_eigs(T.diag, T.offdiag)
    i = data.draw(st.integers(0, T.n - 1))
    gaps = np.abs(np.delete(ev, i) - ev[i])
    if gaps.size and gaps.min() < 1e-6 * max(1.0, abs(ev[i])):
        return
    v = inverse_iteration(T, ev[i])
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    rq = v @ T.matvec(v)
    assert np.linalg.norm(T.matvec(v) - rq * v) <= 1e-10 * max(T.norm(), 1e-300)


# ---------------------------------------------------------------------------
# dense symmetric routines


def test_jacobi_diagonal():
    w, V = jacobi_eigs(np.diag([5.0, -1.0]))
    np.testing.assert_allclose(w, [-1, 5])
    np.testing.assert_allclose(np.abs(V), [[0, 1], [1, 0]])


def test_jacobi_swap_matrix():
    w, V = jacobi_eigs(np.array([[0.0, 1], [1, 0]]))
    np.testing.assert_allclose(w, [-1, 1], atol=1e-15)
    np.testing.assert_allclose(np.abs(V), 2**-0.5, atol=1e-15)


def test_jacobi_reconstruction_50():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((50, 50))
    S = 0.5 * (A + A.T)
    w, V = jacobi_eigs(S)
    assert np.linalg.norm(V @ np.diag(w) @ V.T - S) < 1e-10


@given(arrays(float, (12, 12), elements=finite))
def test_jacobi_properties(A):
    S = as_symmetric(A)
    w, V = jacobi_eigs(S)
    assert np.all(np.diff(w) >= 0)
    assert np.linalg.norm(V.T @ V - np.eye(12)) < 1e-12
    assert abs(w.sum() - np.trace(S)) <= 1e-10 * max(1.0, np.abs(S).sum())
    np.testing.assert_allclose(w, np.linalg.eigvalsh(S), atol=1e-10 * max(1.0, np.linalg.norm(S)))


def test_sym_sqrt_examples():
    np.testing.assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    np.testing.assert_allclose(sym_sqrt(np.eye(5)), np.eye(5), atol=1e-14)


def test_sym_sqrt_rejects_indefinite():
    with pytest.raises(NumericalError, match="not PSD"):
        sym_sqrt(np.diag([1.0, -0.5]))


@given(arrays(float, (20, 20), elements=finite))
def test_sym_sqrt_roundtrip(A):
    S = A @ A.T
    if np.linalg.norm(S) == 0:
        return
    R = sym_sqrt(S)
    np.testing.assert_allclose(R, R.T)
    assert np.linalg.eigvalsh(R).min() >= -1e-10 * np.linalg.norm(R)
    assert np.linalg.norm(R @ R - S) <= 1e-10 * np.linalg.norm(S)


# ---------------------------------------------------------------------------
# roots and quadrature


def test_brent_examples():
    assert abs(brent_root(lambda x: x * x - 2, 1, 2, tol=1e-12) - math.sqrt(2)) < 1e-12
    assert brent_root(lambda x: x, -1, 1) == 0.0
    with pytest.raises(NumericalError):
        brent_root(lambda x: x * x + 1, -1, 1)


@given(st.floats(-5, 5), st.floats(0.1, 3))
def test_brent_linear(root, slope):
    x = brent_root(lambda t: slope * (t - root), -10, 10, tol=1e-13)
    assert abs(x - root) < 1e-12


def test_gauss_legendre_examples():
    r = gauss_legendre(1)
    np.testing.assert_allclose(r.nodes, [0.0], atol=1e-16)
    np.testing.assert_allclose(r.weights, [2.0])
    assert abs(gauss_legendre(2).integrate(lambda x: x * x) - 2 / 3) < 1e-15
    assert abs(gauss_legendre(60, -8, 8).integrate(lambda x: np.exp(-x * x)) - math.sqrt(math.pi)) < 1e-12


@given(st.integers(1, 12), st.data())
def test_gauss_legendre_exactness(n, data):
    deg = data.draw(st.integers(0, 2 * n - 1))
    a = data.draw(st.floats(-3, 2))
    b = a + data.draw(st.floats(0.1, 3))
    r = gauss_legendre(n, a, b)
    exact = (b ** (deg + 1) - a ** (deg + 1)) / (deg + 1)
    assert abs(r.integrate(lambda x: x**deg) - exact) <= 1e-13 * max(1.0, abs(a), abs(b)) ** (deg + 1)


def test_composite_rule_integrates_gaussian():
    r = composite_gauss_legendre(np.linspace(-10, 10, 21), 10)
    assert abs(r.integrate(lambda x: np.exp(-x * x)) - math.sqrt(math.pi)) < 1e-13


# ---------------------------------------------------------------------------
# Hermite functions


def test_hermite_values():
    assert abs(hermite_phi(1, 0.0) - math.pi**-0.25) < 1e-15
    assert hermite_phi(2, 0.0) == 0.0
    assert hermite_phi(5, 60.0) == 0.0


def test_hermite_normalization_quadrature():
    r = gauss_legendre(200, -12, 12)
    assert abs(r.integrate(lambda x: hermite_phi(3, x) ** 2) - 1) < 1e-10


def test_hermite_orthogonality():
    r = gauss_legendre(200, -14, 14)
    for i in range(1, 7):
        for j in range(1, i):
            assert abs(r.integrate(lambda x: hermite_phi(i, x) * hermite_phi(j, x))) < 1e-10


@given(st.integers(1, 20), st.floats(-8, 8))
def test_hermite_matches_explicit_polynomials(j, x):
    assert abs(hermite_phi(j, x) - hermite_function(j, x)) < 1e-12


@pytest.mark.parametrize("j", [1, 2, 3, 6])
def test_hermite_oscillator_equation(j):
    x = np.linspace(-6, 6, 241)
    h = 1e-3
    f = lambda t: hermite_phi(j, t)
    d2 = (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)
    resid = -d2 + x * x * f(x) - (2 * j - 1) * f(x)
    assert np.max(np.abs(resid)) <= 1e-6
