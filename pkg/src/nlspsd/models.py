"""GN and KZ interference PSD models.

Both models sum over the non-trivial quartets ``nr_k`` of every output mode::

    S^GN_k = e^{-F} (S0_k + 2 g^2 sum_{nr_k} |K|^2 S_l S_m S_n)
    S^KZ_k = e^{-F} (S0_k + 2 g^2 sum_{nr_k} |K|^2 T_lmnk)

where ``T`` is the collision term and ``K`` the link kernel (span response
times array factor).  The dimensionless lossless case has ``g = 2 coeff``,
giving the familiar ``8 coeff^2`` prefactor.  The modes ``n = l + m - k``
that fall off the grid are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _pykernels
from .kernels import psd_sums
from .oracle import LinkConfig
from .quartets import Quartet
from .spectral import Psd, TimeGrid

__all__ = [
    "Psd",
    "PsdModelOutput",
    "DeltaS",
    "collision_term",
    "gn_psd",
    "kz_psd",
    "delta_s",
    "zero_order_cumulant_correction",
    "g_factor",
    "gn_psd_multispan",
    "kz_psd_multispan",
    "quartet_sums",
    "QuartetSums",
]


@dataclass(frozen=True, eq=False)
class PsdModelOutput:
    """Model PSD kept as the base spectrum plus its nonlinear correction.

    ``total = attenuation * (base + correction)``, where ``attenuation`` is
    ``exp(-F(z))`` at the reporting point (1 after full loss compensation).
    """

    model: str
    base: Psd
    correction: np.ndarray
    params: dict = field(default_factory=dict)
    attenuation: float = 1.0
    components: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        c = np.array(self.correction, dtype=np.float64, copy=True)
        c.setflags(write=False)
        object.__setattr__(self, "correction", c)

    @property
    def grid(self) -> TimeGrid:
        return self.base.grid

    @property
    def total(self) -> Psd:
        return Psd(self.grid, self.attenuation * (self.base.values + self.correction))


class DeltaS(NamedTuple):
    """GN minus KZ: the exact difference and the single-product simplification."""

    exact: np.ndarray
    simplified: np.ndarray


class QuartetSums(NamedTuple):
    """Raw kernel-weighted quartet sums, split by in-band count (see ``psd_sums``)."""

    gn: np.ndarray
    kz: np.ndarray
    ds: np.ndarray
    diag: np.ndarray


def _check_input(psd: Psd) -> np.ndarray:
    s = np.asarray(psd.values)
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("input PSD must be finite and non-negative")
    return s


def collision_term(S: Psd, q: Quartet) -> float:
    """``S_l S_m S_n + S_l S_m S_k - S_l S_n S_k - S_m S_n S_k``.

    Examples
    --------
    >>> grid = TimeGrid(1.0, 8)
    >>> S = Psd(grid, [0, 0, 0, 1, 2, 3, 4, 0])      # S_{-1..2} = 1, 2, 3, 4
    >>> collision_term(S, Quartet(-1, 2, 0, 1))
    -22.0
    """
    sl, sm, sn, sk = (S.at(i) for i in q.astuple())
    return sl * sm * sn + sl * sm * sk - sl * sn * sk - sm * sn * sk


def quartet_sums(
    S0: Psd,
    beta: np.ndarray,
    alpha: float = 0.0,
    span: float = 1.0,
    n_spans: int = 1,
    weights: np.ndarray | None = None,
    labels: np.ndarray | None = None,
    target: int = 0,
) -> QuartetSums:
    """Kernel-weighted sums behind both models, with per-triple attribution.

    ``labels`` assigns an integer class (a user index, say) to every mode.
    Column ``j`` of ``gn`` and ``kz`` holds the triples with exactly
    ``3 - j`` of ``l, m, n`` labelled ``target``.  Without labels every
    triple falls in column 0.
    """
    s = _check_input(S0)
    if labels is None:
        labels = np.zeros(s.size, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != s.shape:
        raise ValueError("labels must have one entry per mode")
    gn, kz, ds, diag = psd_sums(s, beta, alpha, span, n_spans, weights, labels, target)
    return QuartetSums(np.asarray(gn), np.asarray(kz), np.asarray(ds), np.asarray(diag))


def _dimensionless_beta(grid: TimeGrid) -> np.ndarray:
    return -(grid.omega**2)


def _output(model, S0, sums, g, attenuation, params):
    col = sums.gn if model == "GN" else sums.kz
    return PsdModelOutput(model, S0, 2.0 * g * g * col.sum(axis=1), params, attenuation)


def gn_psd(S0: Psd, z: float, coeff: float = 1.0) -> PsdModelOutput:
    """GN PSD of ``j q_z = q_tt + 2 coeff |q|^2 q`` at distance ``z``.

    The correction ``8 coeff^2 sum |H|^2 S_l S_m S_n`` is non-negative.
    """
    sums = quartet_sums(S0, _dimensionless_beta(S0.grid), 0.0, z)
    return _output("GN", S0, sums, 2.0 * coeff, 1.0, {"z": z, "coeff": coeff})


def kz_psd(S0: Psd, z: float, coeff: float = 1.0) -> PsdModelOutput:
    """KZ PSD; the correction sums to zero over the grid (energy preserving)."""
    sums = quartet_sums(S0, _dimensionless_beta(S0.grid), 0.0, z)
    return _output("KZ", S0, sums, 2.0 * coeff, 1.0, {"z": z, "coeff": coeff})


def delta_s(S0: Psd, z: float, coeff: float = 1.0) -> DeltaS:
    """``S^GN - S^KZ`` per mode.

    ``exact`` is ``8 coeff^2 S_k sum |H|^2 (S_l S_n + S_m S_n - S_l S_m)``,
    accumulated separately from either model.  ``simplified`` keeps only
    ``S_l S_n`` in the bracket.  The two agree only in aggregate, not mode
    by mode.
    """
    sums = quartet_sums(S0, _dimensionless_beta(S0.grid), 0.0, z)
    pref = 8.0 * coeff * coeff * np.asarray(S0.values)
    return DeltaS(pref * sums.ds, pref * sums.diag)


def zero_order_cumulant_correction(
    S0: Psd,
    S4_0: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    z: float,
    coeff: float = 1.0,
) -> Psd:
    """Zero-order PSD of a non-Gaussian input, ``S_k + 4 coeff Re sum_{nr_k} H S4(l, m, n, k)``.

    ``S4_0(l, m, n, k)`` takes integer mode arrays and returns the input
    fourth-order cumulant density on those quartets.  ``H`` is the
    dimensionless kernel at the mismatch ``w0^2 (l^2 + m^2 - n^2 - k^2)``.
    """
    grid = S0.grid
    modes = grid.modes
    w2 = grid.omega**2
    out = np.array(S0.values, dtype=np.float64)
    for ik in range(grid.n):
        ll, mm, nn = _pykernels._pairs(grid.n, ik)
        if ll.size == 0:
            continue
        omega = w2[ll] + w2[mm] - w2[nn] - w2[ik]
        h = _pykernels.span_response(0.0, -omega, z)
        kk = np.full(ll.size, modes[ik])
        s4 = np.asarray(S4_0(modes[ll], modes[mm], modes[nn], kk), dtype=np.complex128)
        out[ik] += 4.0 * coeff * float(np.sum(h * s4).real)
    return Psd(grid, out)


def g_factor(omega, span_length: float, n_spans: int) -> np.ndarray:
    """Array factor ``sum_{n < N_sp} exp(-j n eps Omega)`` in closed form.

    The removable singularities at ``eps Omega = 2 pi m`` are evaluated by a
    series, so ``g_factor(0, eps, N) == N``.
    """
    if n_spans < 1:
        raise ValueError("n_spans must be >= 1")
    return _pykernels.array_factor(omega, span_length, n_spans)


def _multispan(model: str, S0: Psd, link: LinkConfig) -> PsdModelOutput:
    if link.span_length is None:
        raise ValueError("multi-span models need link.span_length")
    sums = quartet_sums(
        S0, link.beta(S0.grid), link.alpha, link.span_length, link.n_spans, link.span_weights()
    )
    params = {
        "gamma": link.gamma,
        "alpha": link.alpha,
        "span_length": link.span_length,
        "n_spans": link.n_spans,
    }
    return _output(model, S0, sums, link.gamma, float(np.exp(-link.final_attenuation())), params)


def gn_psd_multispan(S0: Psd, link: LinkConfig) -> PsdModelOutput:
    """GN PSD after the last amplifier of a multi-span link."""
    return _multispan("GN", S0, link)


def kz_psd_multispan(S0: Psd, link: LinkConfig) -> PsdModelOutput:
    """KZ PSD after the last amplifier; same kernel magnitude as the GN model."""
    return _multispan("KZ", S0, link)
