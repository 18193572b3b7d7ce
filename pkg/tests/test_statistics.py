import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlspsd.statistics import (
    MomentSpec,
    balanced_blocks,
    cumulants_to_moments,
    estimate_moment_mc,
    gaussian_block_moments,
    iid_cumulant_densities,
    moments_to_cumulants,
    quasi_gaussian_deviation,
    set_partitions,
    wick_moment,
)

S = {0: 1.0, 1: 0.5, 2: 2.0, 3: 0.25}


def _gaussian_draw(rng, count):
    s = np.array([S[k] for k in range(4)])
    g = rng.standard_normal((count, 4)) + 1j * rng.standard_normal((count, 4))
    return np.sqrt(s / 2) * g


def test_set_partition_counts_are_bell_numbers():
    assert [sum(1 for _ in set_partitions(range(n))) for n in range(7)] == [1, 1, 2, 5, 15, 52, 203]


def test_balanced_blocks():
    assert balanced_blocks(1) == [(0, 1)]
    # C(3,1)^2 + C(3,2)^2 + 1
    assert len(balanced_blocks(3)) == 9 + 9 + 1
    with pytest.raises(ValueError):
        moments_to_cumulants({}, 4)


@given(st.integers(1, 3), st.lists(st.floats(0.01, 5.0), min_size=1, max_size=1))
def test_single_mode_gaussian_moment(n, s):
    # E|q|^(2n) = n! S^n for a circular Gaussian
    spec = MomentSpec((0,) * n, (0,) * n)
    assert wick_moment({0: s[0]}, spec) == pytest.approx(math.factorial(n) * s[0] ** n, rel=1e-14)


def test_wick_zero_cases():
    assert wick_moment(S, MomentSpec((0, 1), (0,))) == 0.0
    assert wick_moment(S, MomentSpec((0, 1), (0, 2))) == 0.0
    with pytest.raises(ValueError):
        wick_moment(S, MomentSpec((0,) * 4, (0,) * 4))


@pytest.mark.parametrize(
    "spec",
    [
        MomentSpec((0,), (0,)),
        MomentSpec((0, 0), (0, 0)),
        MomentSpec((0, 1), (1, 0)),
        MomentSpec((0, 1, 2), (2, 1, 0)),
        MomentSpec((1, 1, 2), (1, 2, 1)),
        MomentSpec((0, 1), (0, 2)),
        MomentSpec((0, 0, 3), (0, 0, 3)),
    ],
)
def test_wick_against_monte_carlo(spec):
    est, err = estimate_moment_mc(_gaussian_draw, lambda k: k, spec, 100_000, seed=11)
    ref = wick_moment(S, spec)
    assert abs(est - ref) < 3.5 * err + 1e-12


def test_mc_stderr_scales_as_inverse_sqrt():
    spec = MomentSpec((0, 1), (0, 1))
    _, e1 = estimate_moment_mc(_gaussian_draw, lambda k: k, spec, 20_000, seed=1)
    _, e4 = estimate_moment_mc(_gaussian_draw, lambda k: k, spec, 80_000, seed=1)
    assert e1 / e4 == pytest.approx(2.0, rel=0.1)


def test_mc_is_seed_deterministic():
    spec = MomentSpec((0,), (0,))
    a = estimate_moment_mc(_gaussian_draw, lambda k: k, spec, 5000, seed=4, chunk=1000)
    b = estimate_moment_mc(_gaussian_draw, lambda k: k, spec, 5000, seed=4, chunk=1000)
    assert a == b
    with pytest.raises(ValueError):
        estimate_moment_mc(_gaussian_draw, lambda k: k, spec, 1, seed=4)


@given(st.integers(1, 3), st.integers(0, 2**31))
def test_cumulant_moment_round_trip(n_plain, seed):
    r = np.random.default_rng(seed)
    kappa = {b: complex(*r.standard_normal(2)) for b in balanced_blocks(n_plain)}
    back = moments_to_cumulants(cumulants_to_moments(kappa, n_plain), n_plain)
    scale = max(1.0, max(abs(v) for v in kappa.values()))
    assert all(abs(back[b] - kappa[b]) <= 1e-12 * scale for b in kappa)


@given(st.lists(st.floats(0.01, 10.0), min_size=3, max_size=3))
def test_higher_cumulants_vanish_on_gaussian_moments(s):
    kappa = moments_to_cumulants(gaussian_block_moments(s), 3)
    scale = max(s) ** 3
    for block, value in kappa.items():
        if len(block) >= 4:
            assert abs(value) <= 1e-12 * scale
        else:
            # second-order cumulant is the covariance E[q_i q_j*]
            i, j = block[0], block[1] - 3
            assert value == pytest.approx(s[i] if i == j else 0.0, abs=1e-12 * scale)


def test_iid_densities_gaussian_and_printed_discrepancy():
    d = iid_cumulant_densities(1.0, 2.0, 6.0)
    assert d.s4 == pytest.approx(0.0, abs=1e-14)
    assert d.s6 == pytest.approx(0.0, abs=1e-13)
    assert d.s6_printed == pytest.approx(12.0)
    assert not d.printed_consistent


@given(st.floats(0.1, 3.0))
def test_iid_densities_constant_modulus(p):
    # |a|^2 = p: m4 - 2 m2^2 = -p^2 and m6 - 9 m2 m4 + 12 m2^3 = 4 p^3
    d = iid_cumulant_densities(p, p**2, p**3)
    assert d.s4 == pytest.approx(-(p**2), rel=1e-12)
    assert d.s6 == pytest.approx(4 * p**3, rel=1e-12)


def test_iid_densities_reject_impossible_moments():
    with pytest.raises(ValueError):
        iid_cumulant_densities(1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        iid_cumulant_densities(1.0, 2.0, 3.0)


def test_quasi_gaussian_deviation(rng):
    w = np.exp(-np.linspace(-2, 2, 16) ** 2)
    g = (rng.standard_normal((20_000, 16)) + 1j * rng.standard_normal((20_000, 16))) * w
    out = quasi_gaussian_deviation(g)
    for order in (4, 6):
        assert out[order].magnitude < 4 * out[order].stderr
    psk = np.exp(2j * np.pi * rng.random((2000, 16))) * w
    c = quasi_gaussian_deviation(psk)
    assert c[4].value == pytest.approx(-1.0, abs=1e-12)
    assert c[6].value == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(ValueError):
        quasi_gaussian_deviation(g[:10])
    with pytest.raises(ValueError):
        quasi_gaussian_deviation(g, max_order=5)
