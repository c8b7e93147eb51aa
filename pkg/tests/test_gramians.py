import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given
from hypothesis import strategies as st

from flmor import gramians
from flmor.systems import FrequencyBand, ReducedModel, generate_random_stable
from conftest import rel, scalar_reduced, scalar_system


# ---------------------------------------------------------------- logarithm


def test_log_of_identity_is_zero():
    assert np.allclose(gramians.matrix_log_principal(np.eye(4)), 0.0, atol=1e-15)


def test_log_of_diagonal():
    L = gramians.matrix_log_principal(np.diag([2.0, 0.5]))
    assert np.allclose(L, np.diag([math.log(2.0), -math.log(2.0)]), atol=1e-14)


def test_log_matches_scipy_on_complex_matrix():
    rng = np.random.default_rng(3)
    m = np.eye(5) + 0.3 * (rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
    assert rel(gramians.matrix_log_principal(m), la.logm(m)) < 1e-12


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_exp_of_log_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) + 3 * np.eye(n)
    assert rel(la.expm(gramians.matrix_log_principal(m)), m) < 1e-10


def test_log_branch_cut_raises():
    with pytest.raises(gramians.BranchError):
        gramians.matrix_log_principal(np.diag([-1.0, 2.0]))


def test_log_of_singular_matrix_raises():
    with pytest.raises(ArithmeticError):
        gramians.matrix_log_principal(np.zeros((2, 2)))


# ---------------------------------------------------------------- weights


def test_scalar_band_weight_value():
    # A = -1, E = 1, band [0, 1]: (i/2pi) ln(1 - i) = 1/8 + i ln(2)/(4 pi)
    W = gramians.band_weights(scalar_system(), FrequencyBand(0.0, 1.0))
    expected = 0.125 + 1j * math.log(2.0) / (4 * math.pi)
    assert abs(W.b_omega[0, 0] - expected) < 1e-14
    assert abs(W.c_omega[0, 0] - expected) < 1e-14


def test_degenerate_band_gives_zero_weights():
    W = gramians.band_weights(scalar_system(), FrequencyBand(2.0, 2.0))
    assert not np.any(W.b_omega) and not np.any(W.c_omega)


def test_unbounded_weights_are_quarter_identity():
    W = gramians.band_weights(generate_random_stable(6, seed=1), FrequencyBand.unbounded())
    assert np.allclose(W.b_omega, 0.25 * np.eye(6))


def test_weight_traces_agree():
    sys = generate_random_stable(10, seed=4)
    W = gramians.band_weights(sys, FrequencyBand(0.5, 3.0))
    assert abs(np.trace(W.b_omega) - np.trace(W.c_omega)) < 1e-12 * abs(np.trace(W.b_omega))


def test_weight_action_matches_dense():
    sys = generate_random_stable(12, p=2, m=2, seed=5)
    band = FrequencyBand(0.3, 2.0)
    W = gramians.band_weights(sys, band)
    B = np.asarray(sys.B)
    assert rel(gramians.band_weight_action(sys, band, B), W.apply_b(B)) < 1e-8
    Ct = np.asarray(sys.C).T
    assert rel(gramians.band_weight_action(sys, band, Ct, transpose=True), W.apply_ct(Ct)) < 1e-8


def test_dense_weights_refuse_above_cap():
    with pytest.raises(ValueError):
        gramians.band_weights(generate_random_stable(12, seed=0), FrequencyBand(0.0, 1.0), cap=10)


# ---------------------------------------------------------------- Gramians


def test_scalar_gramian_low_band():
    # (1/pi) int_0^1 d nu / (1 + nu^2) = 1/4
    P = gramians.fl_gramian(scalar_system(), FrequencyBand(0.0, 1.0))
    assert abs(P[0, 0] - 0.25) < 1e-14


def test_scalar_gramian_wide_band_approaches_unlimited():
    P = gramians.fl_gramian(scalar_system(), FrequencyBand(0.0, 1e6))
    assert abs(P[0, 0] - 0.5) < 1e-6 and P[0, 0] < 0.5


def test_zero_input_gives_zero_gramian():
    P = gramians.fl_gramian(scalar_system(b=0.0), FrequencyBand(0.0, 1.0))
    assert P[0, 0] == 0.0


def test_unbounded_gramian_is_the_lyapunov_solution():
    sys = generate_random_stable(8, seed=2)
    P = gramians.fl_gramian(sys, FrequencyBand.unbounded())
    A, E, B = sys.A.toarray(), sys.E.toarray(), np.asarray(sys.B)
    # A P E^T + E P A^T + B B^T = 0
    R = A @ P @ E.T + E @ P @ A.T + B @ B.T
    assert np.linalg.norm(R) < 1e-10 * np.linalg.norm(B @ B.T)


def test_band_additivity():
    sys = generate_random_stable(8, seed=6)
    P = lambda a, b: gramians.fl_gramian(sys, FrequencyBand(a, b))
    assert rel(P(0.0, 1.0) + P(1.0, 4.0), P(0.0, 4.0)) < 1e-10


def test_high_pass_plus_low_pass_is_unlimited():
    sys = generate_random_stable(8, seed=7)
    low = gramians.fl_gramian(sys, FrequencyBand(0.0, 2.0))
    high = gramians.fl_gramian(sys, FrequencyBand(2.0, math.inf))
    full = gramians.fl_gramian(sys, FrequencyBand.unbounded())
    assert rel(low + high, full) < 1e-10


@given(st.integers(0, 10_000), st.floats(0.0, 2.0), st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_gramian_psd_and_monotone(seed, w1, d1, d2):
    sys = generate_random_stable(6, seed=seed)
    small = gramians.fl_gramian(sys, FrequencyBand(w1, w1 + d1))
    big = gramians.fl_gramian(sys, FrequencyBand(w1, w1 + d1 + d2))
    scale = np.linalg.norm(big)
    assert np.linalg.eigvalsh(small).min() >= -1e-10 * scale
    assert np.linalg.eigvalsh(big - small).min() >= -1e-10 * scale


@given(st.integers(0, 10_000), st.floats(0.0, 3.0), st.floats(0.1, 5.0))
def test_gramian_matches_quadrature(seed, w1, width):
    sys = generate_random_stable(6, p=2, m=2, seed=seed)
    band = FrequencyBand(w1, w1 + width)
    for side in ("controllability", "observability"):
        P = gramians.fl_gramian(sys, band, side)
        assert rel(P, gramians.fl_gramian_quadrature(sys, band, side)) < 1e-7


def test_reduced_model_gramian_matches_quadrature():
    red = ReducedModel(np.array([[-1.0, 2.0], [0.0, -3.0]]), np.array([[1.0], [1.0]]), np.array([[1.0, 0.5]]))
    band = FrequencyBand(0.5, 2.5)
    assert rel(gramians.fl_gramian(red, band), gramians.fl_gramian_quadrature(red, band)) < 1e-9


# ---------------------------------------------------------------- right-hand sides


def test_fl_rhs_scalar_unbounded_full():
    sys = scalar_system()
    W = gramians.band_weights(sys, FrequencyBand.unbounded())
    F = gramians.fl_rhs(sys, None, W, None, "full")
    # Re(Bw) B B^T + B B^T Re(Bw)^T with Re(Bw) = 1/4
    assert F[0, 0] == pytest.approx(0.5)


def test_fl_rhs_full_is_symmetric():
    sys = generate_random_stable(7, p=2, m=3, seed=8)
    W = gramians.band_weights(sys, FrequencyBand(0.2, 1.7))
    F = gramians.fl_rhs(sys, None, W, None, "full")
    assert np.allclose(F, F.T, atol=1e-14)


def test_fl_rhs_band_mismatch_raises():
    sys, red = scalar_system(), scalar_reduced()
    W = gramians.band_weights(sys, FrequencyBand(0.0, 1.0))
    Wr = gramians.band_weights(red, FrequencyBand(0.0, 2.0))
    with pytest.raises(gramians.ConsistencyError):
        gramians.fl_rhs(sys, red, W, Wr, "controllability-cross")


def test_fl_rhs_unknown_kind():
    sys = scalar_system()
    W = gramians.band_weights(sys, FrequencyBand(0.0, 1.0))
    with pytest.raises(ValueError):
        gramians.fl_rhs(sys, None, W, None, "sideways")


def test_implicit_weights_match_dense():
    sys = generate_random_stable(10, p=2, m=2, seed=9)
    band = FrequencyBand(0.4, 1.9)
    dense = gramians.band_weights(sys, band)
    implicit = gramians.implicit_band_weights(sys, band)
    B = np.asarray(sys.B)
    assert rel(implicit.apply_b(B), dense.apply_b(B)) < 1e-8


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_wide_band_gramian_approaches_unlimited(seed):
    sys = generate_random_stable(10, seed=seed)
    omega = 1e4 * abs(max(sys.eigenvalues().real))
    P = gramians.fl_gramian(sys, FrequencyBand(0.0, omega))
    assert rel(P, gramians.fl_gramian(sys, FrequencyBand.unbounded())) <= 1e-3
