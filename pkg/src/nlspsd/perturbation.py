"""First-order regular perturbation of the NLS in the Fourier-mode basis.

To first order in the nonlinearity every output mode is the linearly
propagated input plus a cubic correction::

    a_k(z) = exp(2 g K(0) P) [ a_k - g K(0) |a_k|^2 a_k + g sum_{nr_k} K(Omega) a_l a_m a_n* ]

Here ``g = gamma s``, ``P`` is the input power and ``nr_k`` is the set of
non-trivial quartets ``l + m = n + k`` with ``l, m != k``.  ``K`` is the
phase-mismatch kernel of the link.  The cross-phase term ``2 g K(0) P``
(``-4jPz`` in normalised units) is kept in exponential form.  The output mode
is ``q_k = exp(-j beta_k z - F(z) / 2) a_k``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _pykernels
from .kernels import fwm_sum
from .oracle import LinkConfig, StepConfig, propagate
from .spectral import (
    Signal,
    Spectrum,
    TimeGrid,
    forward_transform,
    gaussian_pulse,
    hamiltonian,
)

__all__ = [
    "CostWarning",
    "h_kernel",
    "h_kernel_lossy",
    "first_order_discrete",
    "first_order_multiscale",
    "first_order_multispan",
    "ErrorCurveRow",
    "perturbation_error_curve",
]

COST_WARN_N = 1024


class CostWarning(RuntimeWarning):
    """The requested evaluation is O(N^3) at a large N."""


def h_kernel(omega, z: float) -> np.ndarray:
    """Phase-mismatch response ``(1 - exp(j Omega z)) / Omega``; ``-j z`` at ``Omega = 0``.

    Accepts scalars or arrays; a series is used for ``|Omega z| < 1e-4``.
    """
    return _pykernels.span_response(0.0, -np.asarray(omega, dtype=np.float64), z)


def h_kernel_lossy(alpha: float, omega, z: float) -> np.ndarray:
    r"""Lossy span response ``-j \int_0^z exp(-(alpha + j Omega) l) dl``.

    ``Omega`` is the physical mismatch ``beta_l + beta_m - beta_n - beta_k``.
    With ``alpha = 0`` this equals ``h_kernel(-Omega, z)``.  For
    ``beta = -w^2`` that is the normalised kernel at the normalised mismatch.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return _pykernels.span_response(alpha, omega, z)


def _warn_cost(n: int) -> None:
    if n > COST_WARN_N:
        warnings.warn(
            f"quartet sum over N={n} modes is O(N^3) and may be slow", CostWarning, stacklevel=3
        )


def _first_order(
    coeffs: np.ndarray,
    beta: np.ndarray,
    g: float,
    alpha: float,
    span: float,
    nsp: int,
    weights: np.ndarray | None,
    final_attenuation: float,
) -> np.ndarray:
    _warn_cost(coeffs.shape[-1])
    k0 = complex(_pykernels.kernel(0.0, alpha, span, nsp, weights))
    p = np.sum(np.abs(coeffs) ** 2, axis=-1, keepdims=True)
    fwm = fwm_sum(coeffs, beta, alpha, span, nsp, weights)
    a = np.exp(2.0 * g * k0 * p) * (coeffs - g * k0 * np.abs(coeffs) ** 2 * coeffs + g * fwm)
    z = span * nsp
    return np.exp(-1j * beta * z - 0.5 * final_attenuation) * a


def first_order_discrete(spectrum0: Spectrum, z: float, coeff: float = 1.0) -> Spectrum:
    """First-order solution of ``j q_z = q_tt + 2 coeff |q|^2 q`` at distance ``z``.

    Examples
    --------
    >>> from nlspsd.spectral import TimeGrid, Spectrum
    >>> import numpy as np
    >>> grid = TimeGrid(2 * np.pi, 8)
    >>> q0 = Spectrum(grid, np.eye(8)[4] * 0.1)        # a single tone at k = 0
    >>> q1 = first_order_discrete(q0, 1.0)
    >>> round(abs(q1.at(0)), 5)          # first-order SPM term is not unitary
    0.10002
    """
    if z < 0:
        raise ValueError("z must be non-negative")
    grid = spectrum0.grid
    beta = -(grid.omega**2)
    if z == 0:
        return Spectrum(grid, spectrum0.coeffs)
    out = _first_order(np.asarray(spectrum0.coeffs), beta, 2.0 * coeff, 0.0, z, 1, None, 0.0)
    return Spectrum(grid, out)


def first_order_multiscale(spectrum0: Spectrum, z: float, eps: float = 1.0) -> Spectrum:
    """Multiple-scale first-order solution free of the self-phase secular term.

    Each mode rotates at ``w_k^2 - 4 eps P + 2 eps |q_k|^2``.  The four-wave
    mixing correction uses the shifted mismatch::

        Omega_bar = Omega + 2 eps (|q_l|^2 + |q_m|^2 - |q_n|^2 - |q_k|^2)

    Both shifts follow from inserting the phase-rotated zero-order modes in
    the mixing integral.  ``eps = 0`` returns the linear solution.
    """
    if z < 0:
        raise ValueError("z must be non-negative")
    grid = spectrum0.grid
    q = np.asarray(spectrum0.coeffs)
    if z == 0:
        return Spectrum(grid, q)
    _warn_cost(grid.n)
    w2 = grid.omega**2
    a2 = np.abs(q) ** 2
    p = float(np.sum(a2))
    phase = w2 - 4.0 * eps * p + 2.0 * eps * a2
    # Omega_phys = -Omega_bar once the self-phase rate is folded into beta
    beta_shift = -w2 - 2.0 * eps * a2
    fwm = fwm_sum(q, beta_shift, 0.0, z, 1, None) if eps else np.zeros_like(q)
    return Spectrum(grid, np.exp(1j * phase * z) * (q + 2.0 * eps * fwm))


def first_order_multispan(spectrum0: Spectrum, link: LinkConfig) -> Spectrum:
    """First-order output of a multi-span link, after the last amplifier."""
    if link.span_length is None:
        raise ValueError("link needs span_length")
    grid = spectrum0.grid
    out = _first_order(
        np.asarray(spectrum0.coeffs),
        link.beta(grid),
        link.gamma * link.sign,
        link.alpha,
        link.span_length,
        link.n_spans,
        link.span_weights(),
        link.final_attenuation(),
    )
    return Spectrum(grid, out)


@dataclass(frozen=True)
class ErrorCurveRow:
    """One point of the perturbation error curve."""

    amplitude: float
    ratio: float
    error: float


def perturbation_error_curve(
    amplitudes: Sequence[float],
    z: float = 1.0,
    grid: TimeGrid | None = None,
    pulse: Callable[[TimeGrid, float], Signal] = gaussian_pulse,
    step: StepConfig = StepConfig(),
) -> list[ErrorCurveRow]:
    """Relative error of the first-order solution against the oracle.

    For each amplitude ``A`` the pulse is propagated by the split-step oracle
    and by :func:`first_order_discrete`.  Each row reports the oracle's
    Hamiltonian ratio ``a`` at ``z`` and ``e = ||q - q1|| / ||q||``.
    """
    grid = grid or TimeGrid(40.0, 256)
    link = LinkConfig.dimensionless()
    rows = []
    for amp in amplitudes:
        q0 = pulse(grid, float(amp))
        exact = propagate(q0, link, z, step)
        approx = first_order_discrete(forward_transform(q0), z)
        c_exact = forward_transform(exact).coeffs
        err = np.linalg.norm(c_exact - approx.coeffs) / np.linalg.norm(c_exact)
        rows.append(ErrorCurveRow(float(amp), hamiltonian(exact).ratio, float(err)))
    return rows
