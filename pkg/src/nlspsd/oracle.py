"""Split-step Fourier integrator for the cubic NLS; the ground-truth oracle.

The propagated equation, mode by mode, is::

    dq_k/dz = (-alpha/2 - j beta(w_k)) q_k - j gamma s [ |q|^2 q ]_k

with lumped gains ``exp(G_n / 2)`` applied to the amplitude at the end of each
span.  The dimensionless equation ``j q_z = q_tt + 2 s |q|^2 q`` is the case
``beta(w) = -w^2``, ``gamma = 2``, ``alpha = 0``; ``s = +1`` is focusing.

Integration uses symmetric (Strang) splitting.  The linear part is applied
exactly in the Fourier domain.  The nonlinear part, including loss, is solved
exactly at each time sample::

    q -> q exp(-alpha h / 2) exp(-j gamma s |q|^2 L_eff(h))

so the scheme is second order in ``h`` and conserves energy exactly when
``alpha = 0``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .spectral import (
    Psd,
    Signal,
    Spectrum,
    TimeGrid,
    coeffs_to_samples,
    samples_to_coeffs,
)

__all__ = [
    "DispersionSpec",
    "LinkConfig",
    "StepConfig",
    "StepTooCoarseError",
    "NonFiniteError",
    "RealizationError",
    "propagate",
    "propagate_spans",
    "propagate_batch",
    "ModeTrajectory",
    "mode_trajectory",
    "Sampler",
    "GaussianSampler",
    "realization_rng",
    "estimate_psd_mc",
    "worker_count",
]

THREADS_ENV = "NLSPSD_THREADS"
CHUNK_SIZE = 64


class StepTooCoarseError(ValueError):
    """The requested step violates the nonlinear phase bound."""


class NonFiniteError(FloatingPointError):
    """Propagation produced NaN or infinite samples."""

    def __init__(self, message: str, rows: Sequence[int] = ()):
        super().__init__(message)
        self.rows = tuple(int(r) for r in rows)


class RealizationError(RuntimeError):
    """A Monte-Carlo realization failed; ``index`` identifies it."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"realization {index} failed: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class DispersionSpec:
    """Propagation constant as a Taylor series, ``beta(w) = sum_i c_i w^i / i!``.

    ``beta`` enters the linear evolution as ``dq_k/dz = -j beta(w_k) q_k``.
    """

    taylor: tuple[float, ...] = (0.0, 0.0, -2.0)

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.taylor)
        if not coeffs or not all(math.isfinite(c) for c in coeffs):
            raise ValueError("dispersion needs at least one finite Taylor coefficient")
        object.__setattr__(self, "taylor", coeffs)

    @classmethod
    def dimensionless(cls) -> "DispersionSpec":
        """``beta(w) = -w^2``, the normalised NLS."""
        return cls((0.0, 0.0, -2.0))

    @classmethod
    def from_beta(cls, beta2: float, beta3: float = 0.0) -> "DispersionSpec":
        return cls((0.0, 0.0, beta2, beta3) if beta3 else (0.0, 0.0, beta2))

    def beta(self, omega: np.ndarray | float) -> np.ndarray:
        omega = np.asarray(omega, dtype=np.float64)
        out = np.zeros_like(omega)
        for i, c in reversed(list(enumerate(self.taylor))):
            out = out * omega + c / math.factorial(i)
        return out


@dataclass(frozen=True)
class LinkConfig:
    """Fibre link: dispersion, nonlinearity, loss and span structure.

    Parameters
    ----------
    dispersion : DispersionSpec
    gamma : float
        Nonlinear coefficient (2 for the normalised NLS).
    alpha : float
        Power attenuation per unit length.
    sign : int
        ``+1`` focusing, ``-1`` defocusing.
    span_length : float or None
        Length of one span.  ``None`` leaves the length to the caller
        (single-span use through :func:`propagate`).
    n_spans : int
    gains : tuple of float or None
        Lumped power gain (natural-log units) after each span.  ``None`` means
        exact compensation ``G_n = alpha * span_length``.
    """

    dispersion: DispersionSpec = field(default_factory=DispersionSpec.dimensionless)
    gamma: float = 2.0
    alpha: float = 0.0
    sign: int = 1
    span_length: float | None = None
    n_spans: int = 1
    gains: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 (focusing) or -1 (defocusing)")
        if not (math.isfinite(self.gamma) and math.isfinite(self.alpha)) or self.alpha < 0:
            raise ValueError("gamma must be finite and alpha finite and non-negative")
        if self.n_spans < 1:
            raise ValueError("n_spans must be >= 1")
        if self.span_length is not None and not self.span_length > 0:
            raise ValueError("span_length must be positive")
        if self.gains is not None:
            gains = tuple(float(g) for g in self.gains)
            if len(gains) != self.n_spans:
                raise ValueError(f"need {self.n_spans} gains, got {len(gains)}")
            object.__setattr__(self, "gains", gains)

    @classmethod
    def dimensionless(cls, coeff: float = 1.0, sign: int = 1, **kw) -> "LinkConfig":
        """Normalised NLS ``j q_z = q_tt + 2 coeff s |q|^2 q``."""
        return cls(DispersionSpec.dimensionless(), gamma=2.0 * coeff, sign=sign, **kw)

    @property
    def total_length(self) -> float:
        if self.span_length is None:
            raise ValueError("link has no span length")
        return self.span_length * self.n_spans

    def gain_values(self) -> np.ndarray:
        if self.gains is not None:
            return np.asarray(self.gains)
        if self.span_length is None:
            return np.zeros(self.n_spans)
        return np.full(self.n_spans, self.alpha * self.span_length)

    def span_weights(self) -> np.ndarray | None:
        """Weights ``exp(-D_n)`` of each span in the array factor.

        ``D_n`` is the net attenuation at the start of span ``n``.  Returns
        ``None`` for exact compensation, where every weight is 1.
        """
        if self.gains is None:
            return None
        eps = self.span_length
        g = np.concatenate([[0.0], np.cumsum(self.gain_values())[:-1]])
        d = self.alpha * eps * np.arange(self.n_spans) - g
        return np.exp(-d)

    def final_attenuation(self) -> float:
        """``F(z)`` at the link output, after the last amplifier."""
        return float(self.alpha * self.total_length - np.sum(self.gain_values()))

    def beta(self, grid: TimeGrid) -> np.ndarray:
        return self.dispersion.beta(grid.omega)


@dataclass(frozen=True)
class StepConfig:
    """Step-size control.

    ``h=None`` chooses the step from the phase bound, using at least
    ``min_steps`` steps so weak nonlinearity does not leave the splitting
    error of the dispersive part unresolved.  An explicit step violating
    ``gamma max|q|^2 h <= max_phase`` is halved when ``auto_refine`` is set
    and rejected otherwise.
    """

    h: float | None = None
    max_phase: float = 0.05
    auto_refine: bool = True
    headroom: float = 0.8
    min_steps: int = 200
    max_refinements: int = 12

    def __post_init__(self) -> None:
        if self.h is not None and not self.h > 0:
            raise ValueError("step must be positive")
        if not 0 < self.max_phase:
            raise ValueError("max_phase must be positive")
        if self.min_steps < 1:
            raise ValueError("min_steps must be >= 1")


def _check_finite(x: np.ndarray, where: str) -> None:
    bad = ~np.all(np.isfinite(x), axis=-1)
    if np.any(bad):
        rows = np.nonzero(np.atleast_1d(bad))[0]
        raise NonFiniteError(f"non-finite samples {where}", rows)


def _split_step(
    x: np.ndarray, beta_fft: np.ndarray, link: LinkConfig, z: float, h: float, phase_cap: float | None
) -> np.ndarray | None:
    """Advance time samples ``x`` (..., N) by ``z`` with step ``h``.

    Returns ``None`` if the nonlinear phase of some step exceeds ``phase_cap``.
    """
    nsteps = max(1, math.ceil(z / h - 1e-9))
    h = z / nsteps
    g = link.gamma * link.sign
    if link.alpha > 0:
        leff = -math.expm1(-link.alpha * h) / link.alpha
        decay = math.exp(-0.5 * link.alpha * h)
    else:
        leff, decay = h, 1.0
    half = np.exp(-0.5j * beta_fft * h)
    full = half * half
    spec = np.fft.ifft(x, axis=-1) * half
    for i in range(nsteps):
        x = np.fft.fft(spec, axis=-1)
        p = (x.real * x.real) + (x.imag * x.imag)
        if phase_cap is not None and abs(g) * float(np.max(p)) * leff > phase_cap:
            return None
        x = x * (decay * np.exp(-1j * g * leff * p))
        spec = np.fft.ifft(x, axis=-1)
        spec *= full if i < nsteps - 1 else half
    return np.fft.fft(spec, axis=-1)


def _choose_step(x: np.ndarray, link: LinkConfig, z: float, step: StepConfig) -> float:
    peak = float(np.max(np.abs(x) ** 2)) if x.size else 0.0
    rate = abs(link.gamma) * peak
    bound = step.max_phase / rate if rate > 0 else math.inf
    if step.h is None:
        return min(z / step.min_steps, step.headroom * bound)
    if step.h > bound:
        if not step.auto_refine:
            raise StepTooCoarseError(
                f"step {step.h:g} gives nonlinear phase {rate * step.h:.3g} > {step.max_phase}"
            )
        h = step.h
        while h > bound:
            h /= 2.0
        return h
    return step.h


def propagate_batch(
    samples: np.ndarray,
    grid: TimeGrid,
    link: LinkConfig,
    z: float,
    step: StepConfig = StepConfig(),
) -> np.ndarray:
    """Propagate a batch of sampled fields ``(..., N)`` over ``z`` within one span."""
    if z < 0:
        raise ValueError("propagation distance must be non-negative")
    x = np.asarray(samples, dtype=np.complex128)
    _check_finite(x, "at input")
    if z == 0:
        return x.copy()
    beta_fft = np.fft.ifftshift(link.beta(grid))
    h = _choose_step(x, link, z, step)
    for _ in range(step.max_refinements + 1):
        out = _split_step(x, beta_fft, link, z, h, step.max_phase)
        if out is not None:
            _check_finite(out, "after propagation")
            return out
        if not step.auto_refine:
            raise StepTooCoarseError(
                f"nonlinear phase bound {step.max_phase} exceeded during propagation with h={h:g}"
            )
        h /= 2.0
    raise StepTooCoarseError("step refinement limit reached")


def propagate(
    signal: Signal, link: LinkConfig, z: float, step: StepConfig = StepConfig()
) -> Signal:
    """Propagate one signal over distance ``z`` inside a single span (no gain).

    Examples
    --------
    >>> from nlspsd.spectral import TimeGrid, gaussian_pulse
    >>> grid = TimeGrid(40.0, 256)
    >>> out = propagate(gaussian_pulse(grid, 0.5), LinkConfig.dimensionless(), 1.0)
    >>> out.samples.shape
    (256,)
    """
    return Signal(signal.grid, propagate_batch(signal.samples, signal.grid, link, z, step))


def _spans_batch(x: np.ndarray, grid: TimeGrid, link: LinkConfig, step: StepConfig) -> np.ndarray:
    gains = link.gain_values()
    for n in range(link.n_spans):
        x = propagate_batch(x, grid, link, link.span_length, step)
        x = x * math.exp(0.5 * gains[n])
    return x


def propagate_spans(signal: Signal, link: LinkConfig, step: StepConfig = StepConfig()) -> Signal:
    """Propagate through every span of ``link`` with amplification after each."""
    if link.span_length is None:
        raise ValueError("propagate_spans needs link.span_length")
    return Signal(signal.grid, _spans_batch(signal.samples, signal.grid, link, step))


@dataclass(frozen=True, eq=False)
class ModeTrajectory:
    """Mode magnitudes ``|q_k(z)|`` and total energy sampled along ``z``."""

    z: np.ndarray
    modes: np.ndarray
    magnitudes: np.ndarray
    energy: np.ndarray


def mode_trajectory(
    signal: Signal,
    link: LinkConfig,
    z_samples: Sequence[float],
    modes: Sequence[int],
    step: StepConfig = StepConfig(),
) -> ModeTrajectory:
    """Record ``|q_k(z)|`` for the given modes at increasing distances."""
    z = np.asarray(z_samples, dtype=np.float64)
    if z.ndim != 1 or np.any(np.diff(z) < 0) or (z.size and z[0] < 0):
        raise ValueError("z_samples must be non-negative and non-decreasing")
    idx = signal.grid.index(np.asarray(modes))
    x = np.asarray(signal.samples)
    mags = np.empty((z.size, np.size(idx)))
    energy = np.empty(z.size)
    here = 0.0
    for i, zi in enumerate(z):
        x = propagate_batch(x, signal.grid, link, zi - here, step)
        here = zi
        c = samples_to_coeffs(x)
        mags[i] = np.abs(c[idx])
        energy[i] = float(np.sum(np.abs(c) ** 2))
    return ModeTrajectory(z, np.asarray(modes), mags, energy)


class Sampler(Protocol):
    """Draws one input spectrum (natural order) from a random generator."""

    grid: TimeGrid

    def draw(self, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class GaussianSampler:
    """Circular complex Gaussian modes with ``E|q_k|^2 = S_k``, independent across ``k``."""

    psd: Psd

    def __post_init__(self) -> None:
        if np.any(self.psd.values < 0) or not np.all(np.isfinite(self.psd.values)):
            raise ValueError("input PSD must be finite and non-negative")

    @property
    def grid(self) -> TimeGrid:
        return self.psd.grid

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        n = self.grid.n
        g = rng.standard_normal(2 * n)
        return np.sqrt(0.5 * self.psd.values) * (g[:n] + 1j * g[n:])


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for realization ``index`` of a run seeded by ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def worker_count(workers: int | None = None) -> int:
    """Thread count: explicit argument, then ``NLSPSD_THREADS``, else 1."""
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def estimate_psd_mc(
    sampler: Sampler,
    link: LinkConfig,
    z: float | None,
    realizations: int,
    seed: int,
    step: StepConfig = StepConfig(),
    workers: int | None = None,
    return_fields: bool = False,
):
    """Monte-Carlo PSD at distance ``z`` (``None``: through all spans of ``link``).

    Realization ``r`` draws its input from :func:`realization_rng` ``(seed, r)``.
    Realizations are propagated in fixed chunks of ``CHUNK_SIZE``, and the
    per-mode mean is reduced in realization order.  The result is therefore
    identical for any worker count.

    Returns
    -------
    psd : Psd
    stderr : ndarray
        Standard error of each mode's estimate.
    fields : ndarray, optional
        Output spectra ``(R, N)`` when ``return_fields`` is set.
    """
    if realizations < 2:
        raise ValueError("need at least two realizations")
    if z is None and link.span_length is None:
        raise ValueError("z=None requires a multi-span link")
    grid = sampler.grid
    starts = list(range(0, realizations, CHUNK_SIZE))

    def run_chunk(start: int) -> np.ndarray:
        stop = min(start + CHUNK_SIZE, realizations)
        coeffs = np.stack([sampler.draw(realization_rng(seed, r)) for r in range(start, stop)])
        x = coeffs_to_samples(coeffs)
        try:
            x = _spans_batch(x, grid, link, step) if z is None else propagate_batch(x, grid, link, z, step)
        except NonFiniteError as exc:
            raise RealizationError(start + (exc.rows[0] if exc.rows else 0), exc) from exc
        return samples_to_coeffs(x)

    n_workers = min(worker_count(workers), len(starts))
    if n_workers == 1:
        chunks = [run_chunk(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            chunks = list(pool.map(run_chunk, starts))
    fields = np.concatenate(chunks, axis=0)
    power = np.abs(fields) ** 2
    mean = np.mean(power, axis=0)
    stderr = np.std(power, axis=0, ddof=1) / math.sqrt(realizations)
    psd = Psd(grid, mean)
    if return_fields:
        return psd, stderr, fields
    return psd, stderr


def psd_from_function(grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]) -> Psd:
    """Tabulate ``S(k)`` on the grid's modes."""
    return Psd(grid, fn(grid.modes))
