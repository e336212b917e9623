import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from wienerlab.errors import DegenerateFitWarning, InvalidArgumentError
from wienerlab.projection import (FINITE_SAMPLE_NOTE, MatrixSymbol, builtin_matrix_symbol, decell_pseudoinverse,
                                  gamma_estimate, matrix_symbol_from_dict, obstruction_check, penrose_residuals,
                                  projection_symbol, projection_values, sphere_samples, tabulated_matrix_symbol,
                                  validate_A1_A2_A3)


def random_matrix(rng, n, rank):
    """Complex ``n x n`` matrix of the given rank with singular values spread over two decades."""
    if rank == 0:
        return np.zeros((n, n), dtype=complex)
    u = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    v = rng.normal(size=(rank, n)) + 1j * rng.normal(size=(rank, n))
    return u @ np.diag(10.0 ** rng.uniform(-1, 1, size=rank)) @ v


def rel(x, ref):
    n = np.linalg.norm(ref)
    return np.linalg.norm(x - ref) / n if n > 0 else np.linalg.norm(x)


def quiet_gamma(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateFitWarning)
        return gamma_estimate(*args, **kw)


# --- Decell --------------------------------------------------------------------------

def test_identity_pseudoinverse():
    rep = decell_pseudoinverse(np.eye(2))
    assert np.allclose(rep.pinv, np.eye(2), atol=1e-15)
    assert rep.s == 2


def test_rank_one_diagonal():
    rep = decell_pseudoinverse(np.diag([1.0, 0.0]))
    assert rep.s == 1
    assert rep.coefficients[0] == 1
    assert rep.coefficients[1] == pytest.approx(-1, abs=1e-15)
    assert np.allclose(rep.pinv, np.diag([1.0, 0.0]), atol=1e-15)


def test_zero_matrix_has_zero_pseudoinverse():
    rep = decell_pseudoinverse(np.zeros((3, 3)))
    assert rep.s == 0
    assert np.all(rep.pinv == 0)


def test_random_corpus_matches_svd_and_penrose():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        A = random_matrix(rng, n, int(rng.integers(0, n + 1)))
        rep = decell_pseudoinverse(A)
        assert rel(rep.pinv, np.linalg.pinv(A, rcond=1e-12)) <= 1e-8
        assert max(rep.residuals) <= 1e-10


@given(st.integers(0, 2**32 - 1))
def test_rank_detection_matches_svd(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    rank = int(rng.integers(0, n + 1))
    rep = decell_pseudoinverse(random_matrix(rng, n, rank))
    assert rep.s == rank


def test_penrose_residuals_detect_wrong_inverse():
    A = np.diag([2.0, 0.0])
    assert max(penrose_residuals(A, np.eye(2))) > 0.1


def test_invalid_inputs_rejected():
    with pytest.raises(InvalidArgumentError):
        decell_pseudoinverse(np.ones((2, 3)))
    with pytest.raises(InvalidArgumentError):
        decell_pseudoinverse(np.array([[np.nan]]))


# --- projection symbol -----------------------------------------------------------------

def test_curl2_projection_is_omega_omega_transpose():
    w = sphere_samples(2, 64)
    P = projection_values(builtin_matrix_symbol("curl2"), w)
    assert np.allclose(P, w[:, :, None] * w[:, None, :], atol=1e-12)


def test_invertible_symbol_projects_to_zero():
    P = projection_symbol(builtin_matrix_symbol("identity_3"))((0.2, -0.4, 0.9))
    assert np.allclose(P, 0, atol=1e-15)


def test_zero_symbol_projects_to_identity():
    zero = MatrixSymbol("zero", 2, 2, lambda w: np.zeros((len(w), 2, 2)))
    assert np.array_equal(projection_symbol(zero)((1.0, 3.0)), np.eye(2))


@pytest.mark.parametrize("name", ["curl2", "curl3_completed", "gradient_3", "diag_omega1", "identity_2"])
def test_projection_is_orthogonal_onto_kernel(name):
    A = builtin_matrix_symbol(name)
    w = sphere_samples(A.d, 50)
    mats = A.evaluate(w)
    P = projection_values(A, w)
    assert np.max(np.abs(P @ P - P)) <= 1e-10
    assert np.max(np.abs(P - np.conj(np.swapaxes(P, 1, 2)))) <= 1e-10
    assert np.max(np.abs(mats @ P)) <= 1e-10
    for Ak, Pk in zip(mats, P):
        pinv = np.linalg.pinv(Ak)
        rank_P = np.linalg.matrix_rank(Pk, tol=1e-8)
        rank_PA = np.linalg.matrix_rank(pinv @ Ak, tol=1e-8)
        assert rank_P + rank_PA == A.N


def test_symbol_is_zero_homogeneous():
    A = builtin_matrix_symbol("curl3_completed")
    xi = np.array([[0.3, -1.2, 2.0]])
    assert np.array_equal(A.evaluate(xi), A.evaluate(7.5 * xi))


def test_projection_invariant_under_scaling():
    A = builtin_matrix_symbol("curl2")
    w = sphere_samples(2, 40)
    P = projection_values(A, w)
    for c in (3.0, 0.01, -2.0, 1.5j):
        assert np.max(np.abs(projection_values(A.scaled(c), w) - P)) <= 1e-12


def test_tabulated_symbol_uses_nearest_direction():
    A = tabulated_matrix_symbol([(1, 0), (0, 1)], [np.eye(2), np.zeros((2, 2))])
    assert np.array_equal(A((0.9, 0.1)), np.eye(2))
    assert np.array_equal(A((0.1, 0.9)), np.zeros((2, 2)))
    doc = {"kind": "tabulated_sphere", "directions": [[1, 0], [0, 1]], "re": [np.eye(2).tolist(), [[0, 0], [0, 0]]]}
    assert np.array_equal(matrix_symbol_from_dict(doc)((0.9, 0.1)), np.eye(2))


def test_unknown_builtin_rejected():
    with pytest.raises(InvalidArgumentError):
        builtin_matrix_symbol("divergence")


# --- conditions A1-A3 ----------------------------------------------------------------

def test_conditions_for_curl2():
    rep = validate_A1_A2_A3(builtin_matrix_symbol("curl2"))
    assert rep.n_directions >= 100
    assert rep.stacked_rank == 2 and rep.A2
    assert rep.A3


def test_conditions_for_identity():
    rep = validate_A1_A2_A3(builtin_matrix_symbol("identity_2"))
    assert rep.A2 and not rep.A3


def test_conditions_for_diag_omega1():
    rep = validate_A1_A2_A3(builtin_matrix_symbol("diag_omega1"), tol=0.1)
    assert rep.A2 and rep.A3
    assert abs(rep.cap_center[0]) < 0.1


def test_conditions_need_two_directions():
    with pytest.raises(InvalidArgumentError):
        validate_A1_A2_A3(builtin_matrix_symbol("curl2"), [(1.0, 0.0)])


def test_sphere_samples_are_unit_vectors():
    for d in (2, 3, 5):
        w = sphere_samples(d, 100)
        assert np.allclose(np.linalg.norm(w, axis=1), 1)


# --- Gamma ------------------------------------------------------------------------------

def test_gamma_for_curl2_along_axes():
    K = projection_symbol(builtin_matrix_symbol("curl2"))
    g1 = quiet_gamma(K, (1.0, 0.0), 0.05, [1e4])
    g2 = quiet_gamma(K, (0.0, 1.0), 0.05, [1e4])
    assert g1.limit[0, 0].real >= 0.99 and g1.limit[1, 1].real <= 0.01
    assert g2.limit[0, 0].real <= 0.01 and g2.limit[1, 1].real >= 0.99


def test_gamma_of_constant_symbol():
    M = np.array([[1.0, 2.0j], [0.5, -1.0]])
    K = MatrixSymbol("const", 2, 2, lambda w: np.broadcast_to(M, (len(w), 2, 2)).copy())
    for w in [(1.0, 0.0), (0.6, -0.8)]:
        assert np.allclose(quiet_gamma(K, w, 0.1, [1e2, 3e2, 1e3]).limit, M, atol=1e-12)


def test_gamma_converges_to_continuous_ball_average():
    """Along e1 the (2,2) entry tends to the mean of sin^2 over B(e1, eps), computed by cubature."""
    eps = 0.05

    def halfwidth(x):
        return np.sqrt(max(eps**2 - (x - 1) ** 2, 0.0))

    val, _ = integrate.dblquad(lambda y, x: y * y / (x * x + y * y), 1 - eps, 1 + eps,
                               lambda x: -halfwidth(x), halfwidth, epsabs=1e-15, epsrel=1e-13)
    oracle = val / (np.pi * eps**2)
    K = projection_symbol(builtin_matrix_symbol("curl2"))
    err = [abs(quiet_gamma(K, (1.0, 0.0), eps, [t]).samples[0][1, 1] - oracle) for t in (1e3, 1e4)]
    assert err[1] < err[0]


def test_gamma_invariant_under_scaling():
    A = builtin_matrix_symbol("curl2")
    base = quiet_gamma(projection_symbol(A), (0.6, 0.8), 0.05, [1e3])
    scaled = quiet_gamma(projection_symbol(A.scaled(4.0)), (0.6, 0.8), 0.05, [1e3])
    assert np.max(np.abs(base.samples[0] - scaled.samples[0])) <= 1e-12


def test_gamma_bitwise_stable_across_threads():
    K = projection_symbol(builtin_matrix_symbol("curl2"))
    a = gamma_estimate(K, (0.6, 0.8), 0.05, [1e2, 3e2, 1e3], threads=1)
    b = gamma_estimate(K, (0.6, 0.8), 0.05, [1e2, 3e2, 1e3], threads=3)
    assert all(np.array_equal(x, y) for x, y in zip(a.samples, b.samples))
    assert np.array_equal(a.limit, b.limit)


# --- obstruction -------------------------------------------------------------------------

def test_curl2_is_obstructed():
    rep = obstruction_check(builtin_matrix_symbol("curl2"), sched=(1e3, 2e3, 4e3))
    assert rep.verdict == "obstructed"
    assert rep.feasibility_residual >= 0.9
    assert rep.nullspace_dim == 0
    assert rep.to_dict()["note"] == FINITE_SAMPLE_NOTE


@pytest.mark.parametrize("name", ["gradient_3", "curl3_completed"])
def test_three_dimensional_symbols_are_obstructed(name):
    rep = obstruction_check(builtin_matrix_symbol(name), sched=(1e2, 2e2, 4e2))
    assert rep.verdict == "obstructed"
    assert rep.feasibility_residual >= 0.9


def test_identity_cannot_conclude():
    rep = obstruction_check(builtin_matrix_symbol("identity_2"), sched=(1e3, 2e3, 4e3))
    assert rep.verdict == "cannot-conclude"
    assert rep.feasibility_residual is None
