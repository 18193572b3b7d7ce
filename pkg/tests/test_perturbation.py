import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlspsd.oracle import LinkConfig, StepConfig, propagate, propagate_spans
from nlspsd.perturbation import (
    CostWarning,
    _warn_cost,
    first_order_discrete,
    first_order_multiscale,
    first_order_multispan,
    perturbation_error_curve,
)
from nlspsd.spectral import Spectrum, TimeGrid, forward_transform, gaussian_pulse, inverse_transform


def _tone(grid, amp, k=0):
    c = np.zeros(grid.n, complex)
    c[grid.index(k)] = amp
    return Spectrum(grid, c)


def _random_band(grid, rng, width, scale):
    c = scale * (rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n))
    c[np.abs(grid.modes) > width] = 0
    return Spectrum(grid, c)


def test_zero_input_and_zero_distance(small_grid):
    zero = Spectrum(small_grid, np.zeros(32))
    np.testing.assert_array_equal(first_order_discrete(zero, 1.0).coeffs, 0)
    tone = _tone(small_grid, 0.3, 2)
    np.testing.assert_array_equal(first_order_discrete(tone, 0.0).coeffs, tone.coeffs)
    with pytest.raises(ValueError):
        first_order_discrete(tone, -1.0)


def test_linear_limit(small_grid, rng):
    q0 = _random_band(small_grid, rng, 8, 0.3)
    out = first_order_discrete(q0, 1.3, coeff=0.0)
    np.testing.assert_allclose(out.coeffs, q0.coeffs * np.exp(1j * small_grid.omega**2 * 1.3), atol=1e-15)


@given(st.floats(0.01, 0.2), st.floats(0.1, 2.0), st.integers(-5, 5))
def test_single_tone_error_is_second_order(amp, z, k):
    # exact solution of a plane wave: q = A exp(j (w^2 - 2 A^2) z)
    grid = TimeGrid(2 * np.pi * 4, 32)
    w = grid.omega[grid.index(k)]
    exact = amp * np.exp(1j * (w**2 - 2 * amp**2) * z)
    approx = first_order_discrete(_tone(grid, amp, k), z).at(k)
    phi = 2 * amp**2 * z
    assert abs(approx - exact) <= 1.01 * amp * phi**2 / 2 + 1e-15


def test_single_tone_is_exact_for_multiscale():
    grid = TimeGrid(2 * np.pi * 4, 32)
    for amp, z in ((0.3, 5.0), (1.0, 3.0)):
        out = first_order_multiscale(_tone(grid, amp, 1), z)
        w = grid.omega[grid.index(1)]
        assert out.at(1) == pytest.approx(amp * np.exp(1j * (w**2 - 2 * amp**2) * z), abs=1e-14)


def test_multiscale_linear_limit(small_grid, rng):
    q0 = _random_band(small_grid, rng, 8, 0.3)
    out = first_order_multiscale(q0, 2.0, eps=0.0)
    np.testing.assert_allclose(out.coeffs, q0.coeffs * np.exp(1j * small_grid.omega**2 * 2.0), atol=1e-15)


def test_norm_exceeds_input_by_correction_norm(small_grid, rng):
    # ||q1||^2 = ||q0||^2 + ||N||^2: the correction is orthogonal to the input
    q0 = _random_band(small_grid, rng, 10, 0.2)
    z = 1.4
    q1 = first_order_discrete(q0, z).coeffs
    p = np.sum(np.abs(q0.coeffs) ** 2)
    a = q1 * np.exp(-1j * small_grid.omega**2 * z)
    corr = a * np.exp(4j * z * p) - q0.coeffs
    lhs = np.sum(np.abs(q1) ** 2)
    assert lhs == pytest.approx(p + np.sum(np.abs(corr) ** 2), rel=1e-12)
    assert lhs > p


def _oracle(q0, z, coeff=1.0):
    link = LinkConfig.dimensionless(coeff=coeff)
    out = propagate(inverse_transform(q0), link, z, StepConfig(min_steps=800))
    return forward_transform(out).coeffs


def test_error_scales_as_coeff_squared(rng):
    grid = TimeGrid(2 * np.pi * 4, 64)
    q0 = _random_band(grid, rng, 10, 0.15)
    errs = [
        np.linalg.norm(first_order_discrete(q0, 1.0, c).coeffs - _oracle(q0, 1.0, c)) for c in (0.2, 0.1)
    ]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_multiscale_beats_discrete_on_long_distance():
    # two detuned tones: the phase rotations dominate and grow secularly
    grid = TimeGrid(2 * np.pi * 4, 64)
    c = np.zeros(64, complex)
    c[grid.index(-3)], c[grid.index(3)] = 0.2, 0.14j
    q0 = Spectrum(grid, c)
    ref = _oracle(q0, 10.0)
    e_ms = np.linalg.norm(first_order_multiscale(q0, 10.0).coeffs - ref)
    e_rp = np.linalg.norm(first_order_discrete(q0, 10.0).coeffs - ref)
    assert e_ms < 0.2 * e_rp
    assert e_ms < 0.05 * np.linalg.norm(ref)


@settings(max_examples=8)
@given(st.floats(0.0, 0.4), st.integers(1, 4), st.integers(0, 1000))
def test_multispan_residual_is_second_order(alpha, nsp, seed):
    grid = TimeGrid(2 * np.pi * 4, 32)
    q0 = _random_band(grid, np.random.default_rng(seed), 5, 0.15)
    errs = []
    for c in (0.08, 0.04):
        link = LinkConfig.dimensionless(coeff=c, alpha=alpha, span_length=0.7, n_spans=nsp)
        ref = forward_transform(propagate_spans(inverse_transform(q0), link, StepConfig(min_steps=400)))
        errs.append(np.linalg.norm(first_order_multispan(q0, link).coeffs - ref.coeffs))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_multispan_single_lossless_span_matches_discrete(small_grid, rng):
    q0 = _random_band(small_grid, rng, 8, 0.2)
    link = LinkConfig.dimensionless(span_length=1.1, n_spans=1)
    np.testing.assert_allclose(
        first_order_multispan(q0, link).coeffs, first_order_discrete(q0, 1.1).coeffs, atol=1e-14
    )
    with pytest.raises(ValueError):
        first_order_multispan(q0, LinkConfig.dimensionless())


def test_multispan_with_uncompensated_gain(rng):
    grid = TimeGrid(2 * np.pi * 4, 32)
    q0 = _random_band(grid, rng, 5, 0.1)
    errs = []
    for c in (0.2, 0.1):
        link = LinkConfig.dimensionless(coeff=c, alpha=0.3, span_length=1.0, n_spans=3, gains=(0.2, 0.4, 0.3))
        ref = forward_transform(propagate_spans(inverse_transform(q0), link, StepConfig(min_steps=400)))
        errs.append(np.linalg.norm(first_order_multispan(q0, link).coeffs - ref.coeffs))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_cost_warning():
    with pytest.warns(CostWarning):
        _warn_cost(2048)


def test_error_curve_grows_with_amplitude():
    rows = perturbation_error_curve([0.25, 0.5, 1.0])
    errors = [r.error for r in rows]
    assert errors == sorted(errors)
    assert rows[1].ratio == pytest.approx(0.21, abs=0.005)
    assert rows[0].error < 0.01
    with pytest.raises(ValueError):
        perturbation_error_curve([1.0], grid=TimeGrid(8.0, 64))


def test_gaussian_pulse_grid_sanity():
    assert gaussian_pulse(TimeGrid(40.0, 256), 1.0).samples.max() == pytest.approx(1.0, abs=1e-3)
