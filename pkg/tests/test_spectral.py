import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from nlspsd.spectral import (
    Psd,
    Signal,
    Spectrum,
    TimeGrid,
    ZeroSignalError,
    ensemble_hamiltonian,
    forward_transform,
    gaussian_pulse,
    hamiltonian,
    inverse_transform,
    power,
)


def test_grid_rejects_bad_sizes():
    for n in (0, 2, 6, 12):
        with pytest.raises(ValueError):
            TimeGrid(1.0, n)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 8)


def test_grid_derived_quantities():
    g = TimeGrid(10.0, 16)
    assert g.dt * g.n == 10.0
    assert g.modes[0] == -8 and g.modes[-1] == 7
    assert g.index(-8) == 0 and g.index(7) == 15
    with pytest.raises(IndexError):
        g.index(8)


def test_containers_are_read_only(small_grid):
    s = Spectrum(small_grid, np.zeros(32))
    with pytest.raises(ValueError):
        s.coeffs[0] = 1.0
    with pytest.raises(ValueError):
        Signal(small_grid, np.zeros(31))


def test_dc_signal_maps_to_mode_zero(small_grid):
    c = forward_transform(Signal(small_grid, np.full(32, 2.5 - 1j))).coeffs
    expected = np.zeros(32, complex)
    expected[small_grid.index(0)] = 2.5 - 1j
    np.testing.assert_allclose(c, expected, atol=1e-15)


def test_tone_sign_convention(small_grid):
    # q(t) = exp(-j w0 t) is mode +1 under the exp(+j k w0 t) analysis kernel
    q = np.exp(-1j * small_grid.omega0 * small_grid.t)
    c = forward_transform(Signal(small_grid, q))
    assert abs(c.at(1) - 1.0) < 1e-14
    assert np.sum(np.abs(c.coeffs) ** 2) == pytest.approx(1.0, abs=1e-14)


@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_round_trip(log_n, seed):
    g = TimeGrid(3.0, 2**log_n)
    r = np.random.default_rng(seed)
    x = r.standard_normal(g.n) + 1j * r.standard_normal(g.n)
    back = inverse_transform(forward_transform(Signal(g, x))).samples
    assert np.linalg.norm(back - x) <= 1e-12 * np.linalg.norm(x)


def test_power_trivial_cases(small_grid):
    assert power(Spectrum(small_grid, np.zeros(32))) == 0.0
    c = np.zeros(32, complex)
    c[small_grid.index(0)] = 2.0
    assert power(Spectrum(small_grid, c)) == 4.0


def test_power_matches_time_quadrature(rng):
    # independent oracle: adaptive quadrature of the continuous polynomial
    g = TimeGrid(2.0, 8)
    c = rng.standard_normal(8) + 1j * rng.standard_normal(8)

    def q2(t):
        return abs(np.sum(c * np.exp(-1j * g.modes * g.omega0 * t))) ** 2

    mean_power = integrate.quad(q2, -1.0, 1.0, limit=200, epsabs=1e-13)[0] / g.period
    assert power(Spectrum(g, c)) == pytest.approx(mean_power, rel=1e-10)


def test_parseval_against_samples(rng):
    g = TimeGrid(5.0, 64)
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    p = power(forward_transform(Signal(g, x)))
    assert p == pytest.approx(np.mean(np.abs(x) ** 2), rel=1e-12)


def test_hamiltonian_gaussian_closed_form():
    # int |q_t|^2 = A^2 sqrt(pi)/2 and int |q|^4 = A^4 sqrt(pi/2): a = sqrt(2) A^2
    g = TimeGrid(40.0, 512)
    for amp in (0.5, 2.0):
        h = hamiltonian(gaussian_pulse(g, amp))
        assert h.linear == pytest.approx(amp**2 * np.sqrt(np.pi) / 2, rel=1e-10)
        assert h.nonlinear == pytest.approx(amp**4 * np.sqrt(np.pi / 2), rel=1e-10)
    assert hamiltonian(gaussian_pulse(g, 2.0)).ratio == pytest.approx(5.65, abs=0.01)


@given(st.floats(0.05, 5.0), st.integers(0, 1000))
def test_hamiltonian_homogeneity(lam, seed):
    g = TimeGrid(40.0, 256)
    r = np.random.default_rng(seed)
    base = gaussian_pulse(g, 1.0).samples * np.exp(1j * r.standard_normal())
    a1 = hamiltonian(Signal(g, base)).ratio
    a2 = hamiltonian(Signal(g, lam * base)).ratio
    assert a2 == pytest.approx(lam**2 * a1, rel=1e-12)


def test_hamiltonian_zero_signal(small_grid):
    with pytest.raises(ZeroSignalError):
        hamiltonian(Signal(small_grid, np.zeros(32)))
    with pytest.raises(ZeroSignalError):
        ensemble_hamiltonian(small_grid, np.zeros((3, 32)))


def test_ensemble_hamiltonian_single_member_matches():
    g = TimeGrid(40.0, 128)
    sig = gaussian_pulse(g, 0.7)
    one = ensemble_hamiltonian(g, forward_transform(sig).coeffs[None, :])
    assert one.ratio == pytest.approx(hamiltonian(sig).ratio, rel=1e-12)


def test_gaussian_pulse_window_check():
    with pytest.raises(ValueError, match="window too narrow"):
        gaussian_pulse(TimeGrid(8.0, 64), 1.0)


def test_psd_container(small_grid):
    p = Psd(small_grid, np.arange(32.0))
    assert p.total == pytest.approx(np.sum(np.arange(32.0)))
    assert p.at(-16) == 0.0
    with pytest.raises(ValueError):
        Psd(small_grid, np.ones(5))
