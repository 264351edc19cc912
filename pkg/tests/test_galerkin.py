import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from lgnet.errors import (
    CGNonConvergence,
    DimensionMismatch,
    InsufficientQuadrature,
    InvalidN,
)
from lgnet.galerkin import (
    BoundaryCondition,
    assemble,
    assemble_2d,
    assemble_2d_quadrature,
    assemble_quadrature,
    basis_deriv,
    basis_eval,
    basis_table,
    default_quadrature_order,
    load_vector,
    load_vector_2d,
    make_basis,
    reconstruct,
    reconstruct_2d,
    reconstruct_deriv,
    solve_exact,
    solve_exact_2d,
    spectrum_bounds,
)
from lgnet.legendre import gll_rule

BCS = list(BoundaryCondition)


def _series(spec, k):
    """Legendre-series coefficients of phi_k (k is 1-based)."""
    c = np.zeros(k + 3)
    c[k], c[k + 1], c[k + 2] = 1.0, spec.a[k - 1], spec.b[k - 1]
    return c


def _exact_integral(c):
    I = npleg.legint(c)
    return npleg.legval(1.0, I) - npleg.legval(-1.0, I)


def oracle_matrices(spec):
    n = spec.size
    cs = [_series(spec, k) for k in range(1, n + 1)]
    dcs = [npleg.legder(c) for c in cs]
    M = np.array([[_exact_integral(npleg.legmul(ci, cj)) for cj in cs] for ci in cs])
    S = np.array([[_exact_integral(npleg.legmul(ci, cj)) for cj in dcs] for ci in dcs])
    return S, M


@pytest.mark.parametrize("bc", BCS)
def test_basis_satisfies_boundary_condition(bc):
    spec = make_basis(20, bc)
    for k in range(1, spec.size + 1):
        for x in (-1.0, 1.0):
            if bc is BoundaryCondition.DIRICHLET:
                assert basis_eval(spec, k, x) == pytest.approx(0.0, abs=1e-13)
            else:
                assert basis_deriv(spec, k, x) == pytest.approx(0.0, abs=1e-10)


def test_dirichlet_coefficients():
    spec = make_basis(10, "dirichlet")
    assert np.all(spec.a == 0) and np.all(spec.b == -1)
    assert spec.size == 9 and spec.degree == 11


def test_neumann_coefficients():
    spec = make_basis(10, BoundaryCondition.NEUMANN)
    k = np.arange(1, 10)
    np.testing.assert_allclose(spec.b, -k * (k + 1) / ((k + 2) * (k + 3)))


def test_basis_coefficients_read_only():
    spec = make_basis(6, "dirichlet")
    with pytest.raises(ValueError):
        spec.b[0] = 3.0


@pytest.mark.parametrize("N", [0, 1])
def test_invalid_N(N):
    with pytest.raises(InvalidN):
        make_basis(N, "dirichlet")


def test_basis_index_out_of_range():
    spec = make_basis(5, "dirichlet")
    with pytest.raises(IndexError):
        basis_eval(spec, 0, 0.0)
    with pytest.raises(IndexError):
        basis_eval(spec, 5, 0.0)


def test_basis_table_shape_and_values():
    spec = make_basis(7, "neumann")
    x = np.linspace(-1, 1, 9)
    phi, dphi = basis_table(spec, x)
    assert phi.shape == dphi.shape == (6, 9)
    for k in range(1, 7):
        np.testing.assert_allclose(phi[k - 1], npleg.legval(x, _series(spec, k)), atol=1e-13)
        np.testing.assert_allclose(dphi[k - 1], npleg.legval(x, npleg.legder(_series(spec, k))), atol=1e-11)


@pytest.mark.parametrize("bc", BCS)
@pytest.mark.parametrize("N", [2, 3, 8, 21])
def test_closed_forms_match_exact_integration(bc, N):
    spec = make_basis(N, bc)
    S_ref, M_ref = oracle_matrices(spec)
    sys = assemble(spec, 1.0)
    np.testing.assert_allclose(sys.S, S_ref, atol=1e-12)
    np.testing.assert_allclose(sys.M, M_ref, atol=1e-12)


@pytest.mark.parametrize("bc", BCS)
@pytest.mark.parametrize("N", [8, 16, 32, 64])
@pytest.mark.parametrize("nu", [0.0, 1.0])
def test_analytic_equals_quadrature(bc, N, nu):
    spec = make_basis(N, bc)
    a = assemble(spec, nu)
    q = assemble_quadrature(spec, nu, gll_rule(N + 3))
    for X, Y in ((a.S, q.S), (a.M, q.M), (a.A, q.A)):
        assert np.max(np.abs(X - Y)) <= 1e-10


def test_structure():
    spec = make_basis(16, "neumann")
    sys = assemble(spec, 2.5)
    k = np.arange(1, 16)
    assert np.array_equal(np.diag(sys.S), -(4 * k + 6) * spec.b)
    assert np.count_nonzero(sys.S - np.diag(np.diag(sys.S))) == 0
    assert np.all(np.triu(sys.M, 3) == 0) and np.all(np.tril(sys.M, -3) == 0)
    np.testing.assert_array_equal(sys.M, sys.M.T)
    np.testing.assert_array_equal(sys.A, sys.S + 2.5 * sys.M)


def test_dirichlet_mass_has_zero_first_band():
    d0, d1, d2 = assemble(make_basis(12, "dirichlet"), 1.0).M_bands()
    k = np.arange(1, 12)
    np.testing.assert_allclose(d0, 2 / (2 * k + 1) + 2 / (2 * k + 5))
    assert np.all(d1 == 0)
    np.testing.assert_allclose(d2, -2 / (2 * k[:-2] + 5))


def test_insufficient_quadrature():
    spec = make_basis(10, "dirichlet")
    with pytest.raises(InsufficientQuadrature):
        assemble_quadrature(spec, 1.0, gll_rule(12))
    assemble_quadrature(spec, 1.0, gll_rule(13))


def test_negative_nu_rejected():
    with pytest.raises(ValueError):
        assemble(make_basis(5, "dirichlet"), -1.0)


def test_matrices_read_only():
    sys = assemble(make_basis(5, "dirichlet"), 1.0)
    with pytest.raises(ValueError):
        sys.A[0, 0] = 0.0


@given(st.integers(2, 40), st.sampled_from(BCS), st.floats(0.0, 100.0), st.integers(0, 2**31))
def test_banded_matvec_matches_dense(N, bc, nu, seed):
    sys = assemble(make_basis(N, bc), nu)
    x = np.random.default_rng(seed).standard_normal((3, sys.size))
    np.testing.assert_allclose(sys.matvec(x), x @ sys.A.T, rtol=1e-13, atol=1e-12)


@given(st.integers(2, 40), st.sampled_from(BCS), st.floats(0.01, 100.0), st.integers(0, 2**31))
def test_solve_inverts_A(N, bc, nu, seed):
    sys = assemble(make_basis(N, bc), nu)
    F = np.random.default_rng(seed).standard_normal(sys.size)
    alpha = solve_exact(sys, F)
    np.testing.assert_allclose(sys.A @ alpha, F, atol=1e-10 * max(1, np.abs(F).max()))


@given(st.integers(2, 30), st.sampled_from(BCS), st.floats(0.0, 10.0), st.integers(0, 2**31))
def test_A_is_spd(N, bc, nu, seed):
    sys = assemble(make_basis(N, bc), nu)
    x = np.random.default_rng(seed).standard_normal(sys.size)
    assert x @ sys.A @ x > 0


def test_batched_solve():
    sys = assemble(make_basis(12, "dirichlet"), 1.0)
    F = np.random.default_rng(0).standard_normal((5, 11))
    np.testing.assert_allclose(solve_exact(sys, F), np.linalg.solve(sys.A, F.T).T, rtol=1e-12)
    with pytest.raises(DimensionMismatch):
        solve_exact(sys, np.ones(10))


def test_load_vector_inputs_agree():
    spec = make_basis(9, "dirichlet")
    rule = gll_rule(default_quadrature_order(9))
    f = lambda x: np.exp(x) * np.cos(3 * x)  # noqa: E731
    a = load_vector(spec, f, rule)
    b = load_vector(spec, f(rule.nodes), rule)
    c = load_vector(spec, np.stack([f(rule.nodes)] * 2), rule)
    np.testing.assert_allclose(a, b)
    np.testing.assert_allclose(c, np.stack([a, a]))
    with pytest.raises(DimensionMismatch):
        load_vector(spec, np.ones(rule.order + 1), rule)


def test_load_vector_exact_for_polynomials():
    spec = make_basis(6, "dirichlet")
    F = load_vector(spec, lambda x: x**2, gll_rule(default_quadrature_order(6)))
    ref = [_exact_integral(npleg.legmul(_series(spec, k), npleg.poly2leg([0, 0, 1]))) for k in range(1, 6)]
    np.testing.assert_allclose(F, ref, atol=1e-14)


def _manufactured_1d(N):
    spec = make_basis(N, "dirichlet")
    sys = assemble(spec, 1.0)
    rule = gll_rule(default_quadrature_order(N))
    alpha = solve_exact(sys, load_vector(spec, lambda x: (np.pi**2 + 1) * np.sin(np.pi * x), rule))
    fine = gll_rule(3 * N)
    err = reconstruct(spec, alpha, fine.nodes) - np.sin(np.pi * fine.nodes)
    return np.sqrt(fine.weights @ err**2) / np.sqrt(fine.weights @ np.sin(np.pi * fine.nodes) ** 2), spec, alpha


def test_manufactured_solution_spectral():
    errs = [_manufactured_1d(N)[0] for N in (6, 10, 14, 18)]
    assert all(b < a / 10 for a, b in zip(errs, errs[1:]))
    assert _manufactured_1d(32)[0] <= 1e-8


def test_reconstruct_derivative():
    _, spec, alpha = _manufactured_1d(32)
    x = np.linspace(-1, 1, 50)
    np.testing.assert_allclose(reconstruct_deriv(spec, alpha, x), np.pi * np.cos(np.pi * x), atol=1e-9)


def test_neumann_manufactured():
    spec = make_basis(30, "neumann")
    sys = assemble(spec, 1.0)
    rule = gll_rule(default_quadrature_order(30))
    alpha = solve_exact(sys, load_vector(spec, lambda x: (np.pi**2 + 1) * np.cos(np.pi * x), rule))
    x = np.linspace(-1, 1, 41)
    np.testing.assert_allclose(reconstruct(spec, alpha, x), np.cos(np.pi * x), atol=1e-9)


def _power_bounds(A, iters=3000):
    v = np.ones(A.shape[0])
    for _ in range(iters):
        v = A @ v
        v /= np.linalg.norm(v)
    hi = v @ A @ v
    L = np.linalg.cholesky(A)
    w = np.ones(A.shape[0])
    for _ in range(iters):
        w = np.linalg.solve(L.T, np.linalg.solve(L, w))
        w /= np.linalg.norm(w)
    lo = w @ A @ w
    return lo, hi


@pytest.mark.parametrize("bc", BCS)
def test_spectrum_bounds_match_power_iteration(bc):
    sys = assemble(make_basis(12, bc), 1.0)
    lo, hi = spectrum_bounds(sys)
    plo, phi = _power_bounds(np.array(sys.A))
    assert lo == pytest.approx(plo, rel=1e-8)
    assert hi == pytest.approx(phi, rel=1e-8)


# 2D


def test_2d_kronecker_matches_brute_force():
    spec = make_basis(4, "dirichlet")
    sys2 = assemble_2d(spec, 1.0)
    brute = assemble_2d_quadrature(spec, 1.0, gll_rule(10))
    assert np.max(np.abs(sys2.dense() - brute)) <= 1e-10


@given(st.integers(3, 12), st.floats(0.0, 5.0), st.integers(0, 2**31))
def test_2d_matvec_matches_dense(N, nu, seed):
    sys2 = assemble_2d(make_basis(N, "dirichlet"), nu)
    x = np.random.default_rng(seed).standard_normal(sys2.size)
    np.testing.assert_allclose(sys2.matvec(x), sys2.dense() @ x, rtol=1e-12, atol=1e-12)


def test_2d_neumann_rejected():
    with pytest.raises(ValueError):
        assemble_2d(make_basis(6, "neumann"), 1.0)


def test_2d_manufactured():
    N = 24
    spec = make_basis(N, "dirichlet")
    sys2 = assemble_2d(spec, 1.0)
    rule = gll_rule(default_quadrature_order(N))
    F = load_vector_2d(spec, lambda X, Y: (2 * np.pi**2 + 1) * np.sin(np.pi * X) * np.sin(np.pi * Y), rule)
    alpha = solve_exact_2d(sys2, F)
    fine = gll_rule(40)
    U = reconstruct_2d(spec, alpha, fine.nodes, fine.nodes)
    ref = np.outer(np.sin(np.pi * fine.nodes), np.sin(np.pi * fine.nodes))
    W = np.outer(fine.weights, fine.weights)
    assert np.sqrt(np.sum(W * (U - ref) ** 2) / np.sum(W * ref**2)) <= 1e-6


def test_2d_cg_matches_direct_solve():
    sys2 = assemble_2d(make_basis(8, "dirichlet"), 0.5)
    F = np.random.default_rng(3).standard_normal(sys2.size)
    np.testing.assert_allclose(solve_exact_2d(sys2, F, rtol=1e-12), np.linalg.solve(sys2.dense(), F), rtol=1e-8)
    assert np.all(solve_exact_2d(sys2, np.zeros(sys2.size)) == 0)


def test_2d_cg_nonconvergence_raises():
    sys2 = assemble_2d(make_basis(12, "dirichlet"), 1.0)
    with pytest.raises(CGNonConvergence):
        solve_exact_2d(sys2, np.random.default_rng(0).standard_normal(sys2.size), rtol=1e-14, maxiter=2)


def test_assembly_is_fast():
    t0 = time.perf_counter()
    for N in (8, 16, 32, 64):
        for bc in BCS:
            assemble(make_basis(N, bc), 1.0)
    assert time.perf_counter() - t0 < 1.0
