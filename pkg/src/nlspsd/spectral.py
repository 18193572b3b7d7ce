"""Periodic time grid and Fourier-series representation of the signal.

Conventions
-----------
The signal is a trigonometric polynomial on ``[-T/2, T/2)``::

    q(t) = sum_k q_k exp(-j k w0 t),      q_k = (1/T) int q(t) exp(+j k w0 t) dt

with ``w0 = 2 pi / T`` and modes ``k = -N/2, ..., N/2 - 1`` stored in natural
(ascending) order.  Samples live on ``t_n = -T/2 + n dt``.  With this
normalisation ``sum_k |q_k|^2`` is the mean power over one period.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "TimeGrid",
    "Signal",
    "Spectrum",
    "Psd",
    "ZeroSignalError",
    "Hamiltonian",
    "forward_transform",
    "inverse_transform",
    "power",
    "hamiltonian",
    "ensemble_hamiltonian",
    "gaussian_pulse",
]


class ZeroSignalError(ValueError):
    """Raised when a quantity normalised by signal energy is undefined."""


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Uniform periodic sampling of one period.

    Parameters
    ----------
    period : float
        Period ``T`` of the signal.
    n : int
        Number of samples ``N``; a power of two, at least 4.
    """

    period: float
    n: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.period) and self.period > 0):
            raise ValueError(f"period must be positive and finite, got {self.period}")
        n = int(self.n)
        if n != self.n or n < 4 or n & (n - 1):
            raise ValueError(f"sample count must be a power of two >= 4, got {self.n}")

    @property
    def dt(self) -> float:
        return self.period / self.n

    @property
    def omega0(self) -> float:
        """Fundamental angular frequency ``2 pi / T``."""
        return 2.0 * np.pi / self.period

    @property
    def t(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dt

    @property
    def modes(self) -> np.ndarray:
        """Integer mode indices in natural order."""
        return np.arange(-(self.n // 2), self.n // 2)

    @property
    def omega(self) -> np.ndarray:
        return self.modes * self.omega0

    def index(self, k: int | np.ndarray) -> int | np.ndarray:
        """Array position of mode ``k``; raises if ``k`` is off-grid."""
        k_arr = np.asarray(k)
        if np.any((k_arr < -(self.n // 2)) | (k_arr >= self.n // 2)):
            raise IndexError(f"mode {k} outside [-{self.n // 2}, {self.n // 2 - 1}]")
        idx = k_arr + self.n // 2
        return int(idx) if idx.ndim == 0 else idx


@dataclass(frozen=True, eq=False)
class Signal:
    """Time samples of one period; the sample array is read-only."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self) -> None:
        s = _frozen(self.samples)
        if s.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {s.shape}")
        object.__setattr__(self, "samples", s)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients in natural mode order; read-only."""

    grid: TimeGrid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = _frozen(self.coeffs)
        if c.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def at(self, k: int) -> complex:
        return complex(self.coeffs[self.grid.index(k)])


@dataclass(frozen=True, eq=False)
class Psd:
    """Per-mode power spectral density ``S_k = E|q_k|^2`` in natural order.

    Values are not required to be non-negative: second-order model outputs
    may dip below zero.  Routines that need a physical input check it.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} PSD values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def at(self, k: int) -> float:
        return float(self.values[self.grid.index(k)])

    @property
    def total(self) -> float:
        """Mean power ``sum_k S_k``."""
        return float(np.sum(self.values))


def _alternating(n: int) -> np.ndarray:
    # (-1)^k in natural order; k = -N/2 is even because N/2 is even for N >= 4
    return 1.0 - 2.0 * (np.arange(n) % 2)


def samples_to_coeffs(samples: np.ndarray) -> np.ndarray:
    """Batched forward transform on the last axis (natural mode order)."""
    n = samples.shape[-1]
    return np.fft.fftshift(np.fft.ifft(samples, axis=-1), axes=-1) * _alternating(n)


def coeffs_to_samples(coeffs: np.ndarray) -> np.ndarray:
    """Batched inverse transform on the last axis."""
    n = coeffs.shape[-1]
    return np.fft.fft(np.fft.ifftshift(coeffs * _alternating(n), axes=-1), axis=-1)


def forward_transform(signal: Signal) -> Spectrum:
    """Fourier coefficients of a sampled signal."""
    return Spectrum(signal.grid, samples_to_coeffs(signal.samples))


def inverse_transform(spectrum: Spectrum) -> Signal:
    """Samples of the trigonometric polynomial with the given coefficients."""
    return Signal(spectrum.grid, coeffs_to_samples(spectrum.coeffs))


def power(spectrum: Spectrum) -> float:
    """Mean power ``P = sum_k |q_k|^2``."""
    return float(np.sum(np.abs(spectrum.coeffs) ** 2))


class Hamiltonian(NamedTuple):
    """Linear and nonlinear Hamiltonian parts and their ratio ``a``."""

    linear: float
    nonlinear: float
    ratio: float


def _hamiltonian_parts(grid: TimeGrid, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    linear = grid.period * np.sum(np.abs(grid.omega * coeffs) ** 2, axis=-1)
    padded = np.zeros(coeffs.shape[:-1] + (2 * grid.n,), dtype=np.complex128)
    padded[..., grid.n // 2 : grid.n // 2 + grid.n] = coeffs
    fine = coeffs_to_samples(padded)
    nonlinear = grid.period * np.mean(np.abs(fine) ** 4, axis=-1)
    return linear, nonlinear


def hamiltonian(signal: Signal) -> Hamiltonian:
    r"""Split the Hamiltonian into ``int |q_t|^2 dt`` and ``int |q|^4 dt``.

    The derivative term is evaluated spectrally.  The quartic term is computed
    on a grid zero-padded to ``2N`` so that the trapezoid sum is exact for a
    trigonometric polynomial of the stored bandwidth.

    Raises
    ------
    ZeroSignalError
        For the zero signal, where the ratio is undefined.
    """
    coeffs = samples_to_coeffs(signal.samples)
    if not np.any(coeffs):
        raise ZeroSignalError("Hamiltonian ratio is undefined for the zero signal")
    linear, nonlinear = _hamiltonian_parts(signal.grid, coeffs)
    linear, nonlinear = float(linear), float(nonlinear)
    return Hamiltonian(linear, nonlinear, nonlinear / linear if linear > 0 else np.inf)


def ensemble_hamiltonian(grid: TimeGrid, coeffs: np.ndarray) -> Hamiltonian:
    """Ensemble-averaged Hamiltonian parts of a batch ``(R, N)`` of spectra.

    The ratio is that of the averages, ``E[nonlinear] / E[linear]``.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if not np.any(coeffs):
        raise ZeroSignalError("Hamiltonian ratio is undefined for the zero ensemble")
    linear, nonlinear = _hamiltonian_parts(grid, coeffs)
    lin, nl = float(np.mean(linear)), float(np.mean(nonlinear))
    return Hamiltonian(lin, nl, nl / lin if lin > 0 else np.inf)


def gaussian_pulse(
    grid: TimeGrid, amplitude: float, width: float = 1.0, tol: float = 1e-12
) -> Signal:
    """Sample ``A exp(-t^2 / (2 width^2))`` on ``grid``.

    Raises
    ------
    ValueError
        If the pulse has not decayed below ``tol`` (relative) at the window edge,
        in which case the periodic extension would not represent it.
    """
    t = grid.t
    edge = np.exp(-(t[0] ** 2) / (2.0 * width**2))
    if edge >= tol:
        raise ValueError(
            f"window too narrow: edge amplitude {edge:.2e} (relative) exceeds {tol:.0e}"
        )
    return Signal(grid, amplitude * np.exp(-(t**2) / (2.0 * width**2)))
