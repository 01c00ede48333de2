import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from lsvp.gridfn import (
    GAUSSIAN, ExponentPair, FormatError, GridFunction, GridSpec, ParameterError, UndefinedBarycenter,
    affine_image, barycenter, from_text, gaussian, indicator, integral_report, integrate_log,
    interp_log, load, log_moments, logsumexp, lp_norm_log, lp_norm_report, sample, save, tail_suspect,
    to_text, translate,
)

finite = st.floats(-50, 50, allow_nan=False)


def test_gridspec_rejects_bad_axes():
    with pytest.raises(ParameterError):
        GridSpec(1.0, 0.0, 10)
    with pytest.raises(ParameterError):
        GridSpec(0.0, 1.0, 1)
    with pytest.raises(ParameterError):
        GridSpec((0.0, 0.0), (1.0,), (5, 5))
    with pytest.raises(ParameterError):
        GridSpec(-math.inf, 1.0, 5)


def test_gridspec_step_and_weights():
    g = GridSpec(-1.0, 1.0, 5)
    assert g.h == (0.5,)
    w = np.exp(g.log_weights())
    np.testing.assert_allclose(w, [0.25, 0.5, 0.5, 0.5, 0.25])
    g2 = GridSpec.box(0.0, 1.0, 3, dim=2)
    assert g2.shape == (3, 3)
    assert np.exp(logsumexp(g2.log_weights())) == pytest.approx(1.0)


def test_gridfunction_rejects_nan_and_posinf():
    g = GridSpec(0.0, 1.0, 3)
    with pytest.raises(ParameterError):
        GridFunction(g, [0.0, np.nan, 0.0])
    with pytest.raises(ParameterError):
        GridFunction(g, [0.0, np.inf, 0.0])
    with pytest.raises(ParameterError):
        GridFunction(g, [0.0, 0.0])


def test_exponent_pair():
    pq = ExponentPair.from_p(0.5)
    assert pq.q == -1.0
    assert 1 / pq.p + 1 / pq.q == pytest.approx(1.0)
    assert ExponentPair.from_p(0).is_polar
    for bad in (-0.1, 1.0, 1.5, math.nan):
        with pytest.raises(ParameterError):
            ExponentPair.from_p(bad)


@given(st.lists(finite, min_size=1, max_size=40), finite)
def test_logsumexp_shift(vals, c):
    a = np.array(vals)
    assert logsumexp(a + c) == pytest.approx(logsumexp(a) + c, abs=1e-10)


def test_logsumexp_handles_all_neg_inf():
    assert logsumexp(np.full(4, -np.inf)) == -np.inf
    assert logsumexp(np.array([-np.inf, 0.0])) == 0.0
    assert logsumexp(np.array([1000.0, 1000.0])) == pytest.approx(1000.0 + math.log(2))


def test_gaussian_integral_matches_closed_form():
    for sigma in (0.5, 1.0, 2.0):
        f = gaussian(GridSpec(-20, 20, 4001), sigma)
        assert integrate_log(f) == pytest.approx(0.5 * math.log(2 * math.pi * sigma), abs=1e-12)
    f2 = gaussian(GridSpec.box(-12, 12, 241, dim=2), 1.0)
    assert integrate_log(f2) == pytest.approx(math.log(2 * math.pi), abs=1e-12)


def test_tail_flag():
    spec = GridSpec(-3, 3, 601)
    assert tail_suspect(gaussian(spec, 1.0))
    assert not tail_suspect(gaussian(GridSpec(-12, 12, 601), 1.0))
    rep = integral_report(sample(spec, lambda x: 0.0 * x))
    assert rep.tail_suspect


def test_indicator_half_cell_integral():
    # jumps halfway between nodes integrate exactly
    f = indicator(GridSpec(-1.995, 1.995, 400), -1.0, 1.0)
    assert math.exp(integrate_log(f)) == pytest.approx(2.0, rel=1e-12)


def test_barycenter_and_translation():
    f = gaussian(GridSpec(-10, 10, 2001), 1.0, center=[0.3])
    assert barycenter(f)[0] == pytest.approx(0.3, abs=1e-12)
    g = translate(f, [1.25])
    assert barycenter(g)[0] == pytest.approx(1.55, abs=1e-12)
    assert np.array_equal(g.logv, f.logv)
    with pytest.raises(UndefinedBarycenter):
        barycenter(GridFunction(GridSpec(0, 1, 3), np.full(3, -np.inf)))


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_translation_moves_barycenter_exactly(a, b):
    f = gaussian(GridSpec.box(-6, 6, 41, dim=2), 0.7, center=[0.2, -0.1])
    g = translate(f, [a, b])
    np.testing.assert_allclose(barycenter(g) - barycenter(f), [a, b], atol=1e-12)


def test_log_moments_covariance():
    spec = GridSpec.box(-12, 12, 241, dim=2)
    P = np.array([[1.0, 0.3], [0.3, 0.5]])
    C = np.linalg.inv(P)
    logm = sample(spec, lambda x, y: -0.5 * (P[0, 0] * x * x + 2 * P[0, 1] * x * y + P[1, 1] * y * y)).logv
    total, mean, cov = log_moments(spec, logm, spec.axes())
    assert total == pytest.approx(math.log(2 * math.pi / math.sqrt(np.linalg.det(P))), abs=1e-10)
    np.testing.assert_allclose(mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(cov, C, atol=1e-10)


def test_lp_norm_gaussian_weight_against_quad():
    spec = GridSpec(-1.995, 1.995, 400)
    f = sample(spec, lambda x: np.where(np.abs(x) < 1, 0.5 * x, -np.inf))
    want, _ = integrate.quad(lambda x: math.exp(0.5 * 0.5 * x) * math.exp(-x * x / 2) / math.sqrt(2 * math.pi), -1, 1)
    assert lp_norm_log(f, 0.5, GAUSSIAN) == pytest.approx(math.log(want) / 0.5, abs=2e-5)


def test_lp_norm_negative_exponent_diverges_on_zeros():
    f = indicator(GridSpec(-2, 2, 41), -1, 1)
    rep = lp_norm_report(f, -1.0)
    assert rep.log_norm == -np.inf and rep.diverged
    assert lp_norm_log(sample(GridSpec(-20, 20, 401), lambda x: 0 * x), -1.0, GAUSSIAN) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ParameterError):
        lp_norm_log(f, 0.0)


def test_interp_log_is_exact_on_affine_logs():
    f = sample(GridSpec.box(-2, 2, 21, dim=2), lambda x, y: 0.3 * x - 1.2 * y + 0.5)
    pts = np.array([[0.13, -0.77], [1.99, 1.99], [-2.0, 0.0]])
    np.testing.assert_allclose(interp_log(f, pts), 0.3 * pts[:, 0] - 1.2 * pts[:, 1] + 0.5, atol=1e-12)
    assert interp_log(f, np.array([[3.0, 0.0]]))[0] == -np.inf


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.1, 10.0))
@settings(max_examples=30, deadline=None)
def test_affine_image_scales_integral(a, b, lam):
    f = gaussian(GridSpec.box(-8, 8, 81, dim=2), 1.0)
    g = affine_image(f, lam, [a, b])
    assert integrate_log(g) == pytest.approx(integrate_log(f) + math.log(lam) - math.log(a * b), abs=1e-10)


def test_affine_image_rotation_preserves_gaussian():
    f = gaussian(GridSpec.box(-10, 10, 201, dim=2), 1.0)
    c, s = math.cos(0.4), math.sin(0.4)
    g = affine_image(f, 1.0, [[c, -s], [s, c]])
    inner = (np.abs(f.mesh()[0]) < 5) & (np.abs(f.mesh()[1]) < 5)
    # bilinear error of |x|^2 / 2 is at most 2 * h^2 / 8
    assert np.max(np.abs(g.logv - f.logv)[inner]) <= 2 * 0.1 ** 2 / 8 + 1e-12
    with pytest.raises(ParameterError):
        affine_image(f, 1.0, [[1, 1], [1, 1]])


def test_text_roundtrip(tmp_path):
    f = translate(indicator(GridSpec.box(-1, 1, 7, dim=2), -0.5, 0.5), [0.1, -0.2])
    assert from_text(to_text(f)) == f
    path = tmp_path / "f.txt"
    save(f, path)
    assert load(path) == f


@pytest.mark.parametrize("text", [
    "",
    "gridfn v2 dim=1\n",
    "gridfn v1 dim=1\naxis lo=0 hi=1 n=3\nshift 0.0\n0\n0\n",
    "gridfn v1 dim=1\naxis lo=0 hi=1\nshift 0.0\n0\n0\n0\n",
    "gridfn v1 dim=1\naxis lo=0 hi=1 n=3\n",
    "gridfn v1 dim=1\naxis lo=0 hi=1 n=3\nshift 0.0\n0\nnan\n0\n",
    "gridfn v1 dim=1\naxis lo=0 hi=1 n=3\nshift 0.0\n0\nabc\n0\n",
])
def test_from_text_rejects(text):
    with pytest.raises(FormatError):
        from_text(text)
