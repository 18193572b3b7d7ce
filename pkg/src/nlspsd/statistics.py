"""Moments and cumulants of complex spectral amplitudes.

A joint moment is specified by ``n`` plain and ``n`` conjugated mode
indices, ``E[q_{a1} ... q_{an} q*_{b1} ... q*_{bn}]``.  Cumulants are
related to moments by the set-partition formulas::

    mu(B)    = sum_{pi} prod_{b in pi} kappa(b)
    kappa(B) = sum_{pi} (-1)^(|pi| - 1) (|pi| - 1)! prod_{b in pi} mu(b)

For zero-mean, phase-symmetric fields only blocks with as many plain as
conjugated positions contribute; every other block is zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .spectral import Psd

__all__ = [
    "MomentSpec",
    "wick_moment",
    "set_partitions",
    "balanced_blocks",
    "cumulants_to_moments",
    "moments_to_cumulants",
    "CumulantDensities",
    "iid_cumulant_densities",
    "circular_symbol_moments",
    "estimate_moment_mc",
    "CumulantSummary",
    "quasi_gaussian_deviation",
]

MAX_ORDER = 6


@dataclass(frozen=True)
class MomentSpec:
    """``E[prod q_plain * prod conj(q_conj)]``; indices are canonically sorted."""

    plain: tuple[int, ...]
    conj: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "plain", tuple(sorted(int(i) for i in self.plain)))
        object.__setattr__(self, "conj", tuple(sorted(int(i) for i in self.conj)))

    @property
    def order(self) -> int:
        return len(self.plain) + len(self.conj)

    @property
    def balanced(self) -> bool:
        return len(self.plain) == len(self.conj)


def _psd_lookup(psd: Psd | Mapping[int, float] | Callable[[int], float]) -> Callable[[int], float]:
    if isinstance(psd, Psd):
        return psd.at
    if callable(psd):
        return psd
    return lambda k: float(psd[k])


def wick_moment(psd, spec: MomentSpec) -> float:
    """Moment of a stationary circular Gaussian field with PSD ``S``.

    It is the sum over perfect matchings of plain to conjugated indices of
    ``prod S_k`` with matched indices equal.  Unbalanced specs are zero.

    Examples
    --------
    >>> wick_moment({0: 2.0, 1: 3.0}, MomentSpec((0, 1), (1, 0)))
    6.0
    >>> wick_moment({0: 2.0}, MomentSpec((0, 0), (0, 0)))
    8.0
    """
    if spec.order > MAX_ORDER:
        raise ValueError(f"moment order {spec.order} exceeds {MAX_ORDER}")
    if not spec.balanced:
        return 0.0
    if sorted(spec.plain) != sorted(spec.conj):
        return 0.0
    s = _psd_lookup(psd)
    total = 0.0
    for perm in itertools.permutations(spec.conj):
        if all(a == b for a, b in zip(spec.plain, perm)):
            total += math.prod(s(a) for a in spec.plain)
    return total


def set_partitions(items: Sequence[int]) -> Iterator[list[tuple[int, ...]]]:
    """All set partitions of ``items`` (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [(first,)] + part
        for i in range(len(part)):
            yield part[:i] + [(first,) + part[i]] + part[i + 1 :]


def balanced_blocks(n_plain: int) -> list[tuple[int, ...]]:
    """Non-empty position subsets with equal plain and conjugated counts.

    Positions ``0 .. n_plain-1`` are plain and ``n_plain .. 2 n_plain - 1``
    are conjugated.
    """
    pos = range(2 * n_plain)
    out = []
    for r in range(2, 2 * n_plain + 1, 2):
        for block in itertools.combinations(pos, r):
            if sum(1 for p in block if p < n_plain) * 2 == r:
                out.append(block)
    return out


def _is_balanced(block: tuple[int, ...], n_plain: int) -> bool:
    return 2 * sum(1 for p in block if p < n_plain) == len(block)


def _check_points(n_plain: int) -> None:
    if not 1 <= n_plain <= MAX_ORDER // 2:
        raise ValueError(f"need 1..{MAX_ORDER // 2} plain positions, got {n_plain}")


def cumulants_to_moments(kappa: Mapping[tuple[int, ...], complex], n_plain: int) -> dict:
    """Moments of every balanced block from its cumulants.

    ``kappa`` maps sorted position tuples to joint cumulants.  Missing
    balanced blocks count as zero cumulants.
    """
    _check_points(n_plain)
    mu = {}
    for block in balanced_blocks(n_plain):
        total = 0j
        for part in set_partitions(block):
            if all(_is_balanced(b, n_plain) for b in part):
                total += math.prod(complex(kappa.get(tuple(sorted(b)), 0.0)) for b in part)
        mu[block] = total
    return mu


def moments_to_cumulants(mu: Mapping[tuple[int, ...], complex], n_plain: int) -> dict:
    """Inverse of :func:`cumulants_to_moments` via the Moebius sign ``(-1)^(|pi|-1)``."""
    _check_points(n_plain)
    kappa = {}
    for block in balanced_blocks(n_plain):
        total = 0j
        for part in set_partitions(block):
            if all(_is_balanced(b, n_plain) for b in part):
                p = len(part)
                coef = (-1) ** (p - 1) * math.factorial(p - 1)
                total += coef * math.prod(complex(mu.get(tuple(sorted(b)), 0.0)) for b in part)
        kappa[block] = total
    return kappa


def circular_symbol_moments(m2: float, m4: float, m6: float) -> dict:
    """Block moments of one circular symbol ``a`` placed at all six positions.

    A balanced block with ``2p`` positions has moment ``E|a|^(2p)``.
    """
    by_size = {2: m2, 4: m4, 6: m6}
    return {b: by_size[len(b)] for b in balanced_blocks(3)}


@dataclass(frozen=True)
class CumulantDensities:
    """Cumulant densities of i.i.d. circular symbols.

    ``s6_printed`` evaluates the alternative closed form
    ``m6 + 9 m2 m4 - 12 m2^3``.  It does not vanish on Gaussian moments, so
    ``printed_consistent`` is normally ``False`` and ``s6`` (from the
    partition formula) is the value to use.
    """

    s2: float
    s4: float
    s6: float
    s6_printed: float
    printed_consistent: bool


def iid_cumulant_densities(m2: float, m4: float, m6: float) -> CumulantDensities:
    """``S2, S4, S6`` for symbols with ``E|a|^2, E|a|^4, E|a|^6 = m2, m4, m6``.

    Raises
    ------
    ValueError
        If the moments violate ``m2 >= 0``, ``m4 >= m2^2`` or ``m2 m6 >= m4^2``,
        which hold for any distribution (Cauchy-Schwarz).
    """
    tol = 1e-12 * max(1.0, abs(m4), abs(m6))
    if m2 < 0 or m4 < m2 * m2 - tol or m2 * m6 < m4 * m4 - tol:
        raise ValueError(f"inconsistent symbol moments m2={m2}, m4={m4}, m6={m6}")
    kappa = moments_to_cumulants(circular_symbol_moments(m2, m4, m6), 3)
    s4 = kappa[(0, 1, 3, 4)].real
    s6 = kappa[(0, 1, 2, 3, 4, 5)].real
    printed = m6 + 9.0 * m2 * m4 - 12.0 * m2**3
    consistent = math.isclose(printed, s6, rel_tol=1e-9, abs_tol=1e-12 * max(1.0, m6))
    return CumulantDensities(float(m2), float(s4), float(s6), float(printed), consistent)


def estimate_moment_mc(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    index_of: Callable[[int], int],
    spec: MomentSpec,
    realizations: int,
    seed: int,
    chunk: int = 4096,
) -> tuple[complex, float]:
    """Monte-Carlo estimate of a joint moment with its standard error.

    ``draw(rng, count)`` returns ``(count, N)`` spectra; ``index_of`` maps a
    mode to its column.  Chunk ``c`` uses the stream ``(seed, c)``, so the
    estimate depends only on ``seed`` and ``realizations``.
    """
    if realizations < 2:
        raise ValueError("need at least two realizations")
    plain = [index_of(k) for k in spec.plain]
    conj = [index_of(k) for k in spec.conj]
    values = []
    for c, start in enumerate(range(0, realizations, chunk)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        q = draw(rng, min(chunk, realizations - start))
        v = np.ones(q.shape[0], dtype=np.complex128)
        for i in plain:
            v = v * q[:, i]
        for i in conj:
            v = v * np.conj(q[:, i])
        values.append(v)
    v = np.concatenate(values)
    err = math.sqrt(float(np.var(v.real, ddof=1) + np.var(v.imag, ddof=1)) / v.size)
    return complex(np.mean(v)), err


@dataclass(frozen=True)
class CumulantSummary:
    """Energy-weighted normalised single-mode cumulant of one order."""

    order: int
    value: float
    stderr: float

    @property
    def magnitude(self) -> float:
        return abs(self.value)


def _normalised_cumulants(q: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    a2 = np.abs(q) ** 2
    m2 = a2.mean(axis=0)
    m4 = (a2 * a2).mean(axis=0)
    m6 = (a2 * a2 * a2).mean(axis=0)
    ok = m2 > 0
    c4 = np.where(ok, (m4 - 2 * m2**2) / np.where(ok, m2, 1) ** 2, 0.0)
    c6 = np.where(ok, (m6 - 9 * m2 * m4 + 12 * m2**3) / np.where(ok, m2, 1) ** 3, 0.0)
    return float(np.sum(weights * c4)), float(np.sum(weights * c6))


def quasi_gaussian_deviation(
    samples: np.ndarray, max_order: int = 6, batches: int = 20
) -> dict[int, CumulantSummary]:
    """Deviation of an ensemble of spectra ``(R, N)`` from Gaussian statistics.

    For every mode the fourth and sixth single-mode cumulants
    ``E|q|^4 - 2 (E|q|^2)^2`` and ``E|q|^6 - 9 E|q|^2 E|q|^4 + 12 (E|q|^2)^3``
    are normalised by ``(E|q|^2)^2`` and ``(E|q|^2)^3``.  Both vanish for a
    circular Gaussian field.  They are averaged with weights proportional to
    mode energy.  The standard error comes from ``batches`` batch means.
    """
    if max_order not in (4, 6):
        raise ValueError("max_order must be 4 or 6")
    q = np.asarray(samples)
    if q.ndim != 2 or q.shape[0] < 2 * batches:
        raise ValueError("need an (R, N) ensemble with R >= 2 * batches")
    energy = np.mean(np.abs(q) ** 2, axis=0)
    weights = energy / np.sum(energy)
    full = _normalised_cumulants(q, weights)
    per_batch = np.array([_normalised_cumulants(b, weights) for b in np.array_split(q, batches)])
    err = per_batch.std(axis=0, ddof=1) / math.sqrt(batches)
    out = {4: CumulantSummary(4, full[0], float(err[0]))}
    if max_order == 6:
        out[6] = CumulantSummary(6, full[1], float(err[1]))
    return out


def gaussian_block_moments(s: Iterable[float]) -> dict:
    """Block moments of independent circular Gaussians ``q_i`` at six positions.

    Plain position ``i`` and conjugated position ``3 + i`` refer to the same
    variable ``q_i`` with ``E|q_i|^2 = s[i]``.
    """
    s = list(s)
    out = {}
    for block in balanced_blocks(3):
        plain = [p for p in block if p < 3]
        conj = [p - 3 for p in block if p >= 3]
        out[block] = wick_moment(dict(enumerate(s)), MomentSpec(tuple(plain), tuple(conj)))
    return out
