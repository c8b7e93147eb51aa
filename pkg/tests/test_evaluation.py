import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flmor import evaluation, tsia
from flmor.systems import FrequencyBand, ReducedModel, generate_random_index1, generate_random_stable, eliminate_algebraic
from conftest import rel, scalar_reduced, scalar_system


def _scalar_band_norm(w1, w2):
    # (1/pi) int |1/(i nu + 1) - 1/(i nu + 2)|^2 = (1/(3 pi)) [atan(nu) - atan(nu/2)/2]
    F = lambda nu: math.atan(nu) - 0.5 * math.atan(nu / 2.0)
    return math.sqrt((F(w2) - F(w1)) / (3 * math.pi))


def test_scalar_h2_error(scalar_pair):
    sys, red = scalar_pair
    assert abs(evaluation.h2_error_norm(sys, red) - math.sqrt(1 / 12)) < 1e-12


def test_scalar_h2_error_by_quadrature(scalar_pair):
    sys, red = scalar_pair
    assert abs(evaluation.h2_error_norm(sys, red, method="quadrature") - math.sqrt(1 / 12)) < 1e-9


def test_flipped_cross_sign_is_wrong(scalar_pair):
    sys, red = scalar_pair
    wrong = evaluation.h2_error_norm(sys, red, method="trace", cross_coefficient=2.0)
    assert abs(wrong - math.sqrt(1 / 12)) > 0.1


@pytest.mark.parametrize("band", [(0.0, 1.0), (0.5, 3.0), (2.0, 10.0)])
def test_scalar_band_norm_closed_form(scalar_pair, band):
    sys, red = scalar_pair
    got = evaluation.h2fl_error_norm(sys, red, FrequencyBand(*band))
    assert abs(got - _scalar_band_norm(*band)) < 1e-12


def test_exact_embedding_has_zero_error():
    sys = scalar_system()
    red = ReducedModel(np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]))
    assert evaluation.h2_error_norm(sys, red, method="quadrature") < 1e-12
    assert evaluation.h2_error_norm(sys, red) < 1e-7


def test_zero_output_gives_zero():
    sys = scalar_system(c=0.0)
    red = scalar_reduced(c=0.0)
    assert evaluation.h2_error_norm(sys, red) == 0.0
    assert evaluation.h2fl_error_norm(sys, red, FrequencyBand(0.0, 1.0)) == 0.0


def test_degenerate_band_gives_zero(scalar_pair):
    sys, red = scalar_pair
    assert evaluation.h2fl_error_norm(sys, red, FrequencyBand(1.0, 1.0)) == 0.0


def test_wide_band_approaches_unlimited_from_below(scalar_pair):
    sys, red = scalar_pair
    wide = evaluation.h2fl_error_norm(sys, red, FrequencyBand(0.0, 1e6))
    full = math.sqrt(1 / 12)
    assert wide < full and full - wide < 1e-6


@given(st.integers(0, 10_000), st.floats(0.0, 3.0), st.floats(0.2, 5.0))
def test_trace_matches_quadrature(seed, w1, width):
    sys = generate_random_stable(12, p=2, m=2, seed=seed)
    red, _, _ = tsia.tsia(sys, 3, tsia.TsiaOptions(max_iter=5))
    band = FrequencyBand(w1, w1 + width)
    trace = evaluation.h2fl_error_norm(sys, red, band, method="trace")
    quad = evaluation.h2fl_error_norm(sys, red, band, method="quadrature")
    assert rel(trace, quad) < 1e-6


def test_band_norm_not_above_full_norm():
    sys = generate_random_stable(20, p=2, m=2, seed=3)
    red, _, _ = tsia.tsia(sys, 4)
    assert evaluation.h2fl_error_norm(sys, red, FrequencyBand(0.5, 2.0)) <= evaluation.h2_error_norm(sys, red)


def test_index1_norm_matches_eliminated():
    sys = generate_random_index1(20, 8, p=2, m=2, seed=4)
    el = eliminate_algebraic(sys)
    red, _, _ = tsia.tsia(el, 3, tsia.TsiaOptions(max_iter=5))
    band = FrequencyBand(0.5, 2.0)
    assert rel(evaluation.h2fl_error_norm(sys, red, band), evaluation.h2fl_error_norm(el, red, band)) < 1e-8


def test_feedthrough_mismatch_raises():
    sys = scalar_system()
    red = ReducedModel(np.array([[-2.0]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[0.5]]))
    with pytest.raises(evaluation.NormError):
        evaluation.h2_error_norm(sys, red)


def test_unstable_reduced_model_raises():
    with pytest.raises(evaluation.NormError):
        evaluation.h2_error_norm(scalar_system(), scalar_reduced(a=1.0))


def test_io_size_mismatch_raises():
    sys = generate_random_stable(10, p=2, m=1, seed=0)
    with pytest.raises(ValueError):
        evaluation.h2_error_norm(sys, scalar_reduced())


def test_unknown_method_raises(scalar_pair):
    with pytest.raises(ValueError):
        evaluation.h2_error_norm(*scalar_pair, method="guess")


# ---------------------------------------------------------------- error system


@pytest.mark.parametrize("band", [None, FrequencyBand(0.3, 2.0)])
def test_error_system_blocks_solve_their_equations(band):
    sys = generate_random_stable(15, p=2, m=2, seed=5)
    red, _, _ = tsia.tsia(sys, 3, tsia.TsiaOptions(max_iter=5))
    blocks = evaluation.error_system_blocks(sys, red, band)
    rc, ro = blocks.residuals()
    assert rc < 1e-10 and ro < 1e-10


# ---------------------------------------------------------------- sigma


def test_sigma_values():
    pts = evaluation.sigma_response(scalar_system(), [0.0, 1.0])
    assert pts[0].sigma == pytest.approx(1.0)
    assert pts[1].sigma == pytest.approx(1 / math.sqrt(2))


def test_sigma_parallel_matches_serial():
    sys = generate_random_stable(20, p=2, m=2, seed=6)
    f = np.geomspace(0.1, 10, 9)
    a = [p.sigma for p in evaluation.sigma_response(sys, f)]
    b = [p.sigma for p in evaluation.sigma_response(sys, f, workers=3)]
    assert a == b


def test_sigma_rejects_negative_frequency():
    with pytest.raises(ValueError):
        evaluation.sigma_response(scalar_system(), [-1.0])


def test_sigma_singular_point_is_recorded():
    # pure imaginary pole at i: the response at nu = 1 is singular
    red = ReducedModel(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([[0.0], [1.0]]), np.array([[1.0, 0.0]]))
    pts = evaluation.sigma_response(red, [1.0])
    assert math.isnan(pts[0].sigma) and pts[0].error


def test_frequency_grid_band_mask():
    f, mask = evaluation.frequency_grid(FrequencyBand(1.0, 10.0), 20, 10)
    assert f.size == 30 and mask.sum() == 20
    assert np.all(np.diff(f) > 0)
    assert f[mask].min() == pytest.approx(1.0) and f[mask].max() == pytest.approx(10.0)


def test_sigma_csv_round_trip(tmp_path):
    rows = evaluation.sigma_table(scalar_system(), scalar_reduced(), [0.1, 1.0, 10.0])
    path = tmp_path / "s.csv"
    evaluation.write_sigma_csv(path, rows)
    assert evaluation.read_sigma_csv(path) == [tuple(r) for r in rows]


# ---------------------------------------------------------------- reports


def test_error_report_round_trip(scalar_pair):
    sys, red = scalar_pair
    rep = evaluation.error_report(sys, red, FrequencyBand(0.0, 1.0), timings={"tsia": 0.5}, model_id="scalar",
                                  n_inside=5, n_outside=4)
    back = evaluation.ErrorReport.from_text(rep.to_text())
    assert back.to_text() == rep.to_text()
    assert back.xi == pytest.approx(math.sqrt(1 / 12)) and len(back.sigma) == 9


def test_error_report_rejects_unknown_key():
    with pytest.raises(ValueError):
        evaluation.ErrorReport.from_text("colour = 1\n")
