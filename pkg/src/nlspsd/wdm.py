"""WDM inputs, interference attribution and non-Gaussian PSD corrections.

Users ``u = -U .. U`` occupy adjacent bands of ``N0`` modes centred on
``u N0``.  User ``u`` sends ``M`` i.i.d. symbols ``a_u^x`` on an orthonormal
basis ``phi^x`` of its band, so the Fourier coefficients are::

    q_k = sum_{u, x} a_u^x v^{u x}_k,      v^{u x}_k = phi^x_{k - u N0}

Each pair ``(u, x)`` is a *slot*; the slot vectors ``v`` form the rows of
``WdmConfig.slot_matrix()``.  Every moment and cumulant of ``q`` follows from
the slot vectors and the symbol cumulant densities ``S2, S4, S6``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _pykernels
from .models import PsdModelOutput, quartet_sums
from .spectral import Psd, Signal, TimeGrid, coeffs_to_samples
from .statistics import CumulantDensities, iid_cumulant_densities

__all__ = [
    "SymbolMoments",
    "WdmConfig",
    "NonStationaryWarning",
    "tone_basis",
    "pulse_basis",
    "rrc_basis",
    "orthonormality_residual",
    "build_wdm_signal",
    "draw_symbols",
    "input_spectral_moment",
    "InterferenceReport",
    "decompose_interference",
    "interference_report",
    "corrected_psds",
    "gaussian_gn_exact",
    "xpm_energy_decomposition",
]

ORTHO_TOL = 1e-10
MAX_MODES = 512
MAX_SLOTS = 256


class NonStationaryWarning(UserWarning):
    """The input has off-diagonal spectral correlations the base models ignore."""


@dataclass(frozen=True)
class SymbolMoments:
    """Absolute moments ``E|a|^2, E|a|^4, E|a|^6`` of a circular symbol."""

    m2: float
    m4: float
    m6: float
    name: str = "custom"

    @classmethod
    def gaussian(cls, power: float = 1.0) -> "SymbolMoments":
        return cls(power, 2 * power**2, 6 * power**3, "gaussian")

    @classmethod
    def constant_modulus(cls, power: float = 1.0) -> "SymbolMoments":
        """PSK-like symbols with ``|a|^2 = power``."""
        return cls(power, power**2, power**3, "psk")

    @classmethod
    def qam16(cls, power: float = 1.0) -> "SymbolMoments":
        pts = _qam16_points(power)
        a2 = np.abs(pts) ** 2
        return cls(power, float(np.mean(a2**2)), float(np.mean(a2**3)), "qam16")

    @classmethod
    def named(cls, name: str, power: float = 1.0) -> "SymbolMoments":
        table = {"gaussian": cls.gaussian, "psk": cls.constant_modulus, "qam16": cls.qam16}
        if name not in table:
            raise ValueError(f"unknown symbol distribution {name!r}; choose from {sorted(table)}")
        return table[name](power)

    def densities(self) -> CumulantDensities:
        return iid_cumulant_densities(self.m2, self.m4, self.m6)


def _qam16_points(power: float) -> np.ndarray:
    re, im = np.meshgrid([-3, -1, 1, 3], [-3, -1, 1, 3])
    pts = (re + 1j * im).ravel()
    return pts * math.sqrt(power / np.mean(np.abs(pts) ** 2))


def tone_basis(n0: int) -> np.ndarray:
    """One symbol per mode: ``phi^x_k = delta_{k, x}`` (``M = N0``).  Stationary."""
    return np.eye(n0, dtype=np.complex128)


def pulse_basis(m: int) -> np.ndarray:
    """Delayed flat-spectrum pulses, ``phi^x_k = exp(j 2 pi k x / M) / sqrt(M)`` with ``N0 = M``.

    The modes are ``k = -M/2 .. M/2 - 1``.  The input PSD is flat and the
    spectral correlation is diagonal.
    """
    k = np.arange(-(m // 2), m - m // 2)
    x = np.arange(m)
    return np.exp(2j * np.pi * np.outer(x, k) / m) / math.sqrt(m)


def rrc_basis(m: int, rolloff: float = 0.5) -> np.ndarray:
    """Delayed root-raised-cosine pulses on a band of ``N0 = 2M`` modes.

    ``|p_k|^2`` is a raised cosine whose aliases at spacing ``M`` sum to
    ``1/M``, which makes the ``M`` delays orthonormal.  Modes ``k`` and
    ``k +- M`` are correlated, so the input is not stationary when
    ``rolloff > 0``.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError("rolloff must lie in [0, 1]")
    if m % 2:
        raise ValueError("symbols per user must be even for the rrc basis")
    k = np.arange(-m, m).astype(np.float64)
    f = np.abs(k + 0.5) / m  # centred so the spectrum is symmetric on the even grid
    lo, hi = 0.5 * (1 - rolloff), 0.5 * (1 + rolloff)
    rc = np.where(f <= lo, 1.0, 0.0)
    if rolloff > 0:
        mid = (f > lo) & (f < hi)
        rc = np.where(mid, 0.5 * (1 + np.cos(np.pi * (f - lo) / rolloff)), rc)
    p = np.sqrt(rc / m)
    x = np.arange(m)
    return p[None, :] * np.exp(2j * np.pi * np.outer(x, k) / m)


def orthonormality_residual(basis: np.ndarray, n0: int) -> float:
    """Max deviation from ``sum_k phi^x_{k + n N0} conj(phi^y_{k + n' N0}) = delta_xy delta_nn'``.

    ``basis`` has one row per symbol over the ``N0`` band modes; outside the
    band the coefficients vanish, so shifts ``n != n'`` never overlap.
    """
    b = np.asarray(basis)
    if b.ndim != 2 or b.shape[1] != n0:
        raise ValueError(f"basis must be (M, {n0})")
    gram = b @ b.conj().T
    return float(np.max(np.abs(gram - np.eye(b.shape[0]))))


@dataclass(frozen=True, eq=False)
class WdmConfig:
    """A WDM input: ``2 U + 1`` users, each with ``M`` symbols on ``N0`` band modes.

    Parameters
    ----------
    users_per_side : int
        ``U``; users are indexed ``-U .. U``.
    basis : ndarray, shape (M, N0)
        Band coefficients of the orthonormal pulses, band modes in natural order.
    moments : SymbolMoments
    period : float
        Grid period ``T``; the user bandwidth is ``N0 * 2 pi / T``.
    n : int or None
        Grid size.  Defaults to the smallest power of two holding all bands.
    """

    users_per_side: int
    basis: np.ndarray
    moments: SymbolMoments = field(default_factory=SymbolMoments.gaussian)
    period: float | None = None
    n: int | None = None

    def __post_init__(self) -> None:
        b = np.array(self.basis, dtype=np.complex128)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-D (symbols, band modes) array")
        if self.users_per_side < 0:
            raise ValueError("users_per_side must be non-negative")
        res = orthonormality_residual(b, b.shape[1])
        if res > ORTHO_TOL:
            raise ValueError(f"basis is not orthonormal (residual {res:.2e})")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        need = self.n_users * self.n0
        n = self.n if self.n is not None else max(4, 1 << (need - 1).bit_length())
        if n < need:
            raise ValueError(f"grid of {n} modes cannot hold {need} band modes")
        object.__setattr__(self, "n", n)
        if self.period is None:
            object.__setattr__(self, "period", float(n))

    @property
    def n_users(self) -> int:
        return 2 * self.users_per_side + 1

    @property
    def n0(self) -> int:
        return self.basis.shape[1]

    @property
    def symbols_per_user(self) -> int:
        return self.basis.shape[0]

    @property
    def users(self) -> np.ndarray:
        return np.arange(-self.users_per_side, self.users_per_side + 1)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.period, self.n)

    @property
    def user_bandwidth(self) -> float:
        return self.n0 * self.grid.omega0

    def band_modes(self, user: int) -> np.ndarray:
        """Modes ``u N0 + k`` with ``k = -N0/2 .. N0/2 - 1``."""
        if abs(user) > self.users_per_side:
            raise ValueError(f"user {user} outside -{self.users_per_side}..{self.users_per_side}")
        return user * self.n0 + np.arange(-(self.n0 // 2), self.n0 - self.n0 // 2)

    def labels(self) -> np.ndarray:
        """User index of every grid mode; modes outside all bands get ``U + 1``."""
        lab = np.full(self.n, self.users_per_side + 1, dtype=np.int64)
        for u in self.users:
            lab[self.grid.index(self.band_modes(int(u)))] = u
        return lab

    def slot_matrix(self) -> np.ndarray:
        """Rows ``v^{u x}`` over the grid, users outermost; shape ``(U' M, N)``."""
        m = self.symbols_per_user
        v = np.zeros((self.n_users * m, self.n), dtype=np.complex128)
        for i, u in enumerate(self.users):
            v[i * m : (i + 1) * m, self.grid.index(self.band_modes(int(u)))] = self.basis
        return v

    def gram(self) -> np.ndarray:
        """``Gamma_ij = sum_slots v_i conj(v_j)``; the input correlation is ``P0 Gamma``."""
        v = self.slot_matrix()
        return v.T @ v.conj()

    def base_psd(self) -> Psd:
        """Input PSD ``S0_k = mu_kk``."""
        return Psd(self.grid, self.moments.m2 * np.real(np.diag(self.gram())))

    def is_stationary(self, tol: float = 1e-12) -> bool:
        g = self.gram()
        off = g - np.diag(np.diag(g))
        return float(np.max(np.abs(off))) <= tol * max(1.0, float(np.max(np.abs(g))))


def build_wdm_signal(cfg: WdmConfig, symbols: np.ndarray) -> Signal:
    """Time samples of the WDM input for one frame of symbols ``(users, M)``."""
    a = np.asarray(symbols, dtype=np.complex128)
    if a.shape != (cfg.n_users, cfg.symbols_per_user):
        raise ValueError(f"symbols must have shape {(cfg.n_users, cfg.symbols_per_user)}")
    coeffs = a.reshape(-1) @ cfg.slot_matrix()
    return Signal(cfg.grid, coeffs_to_samples(coeffs))


def draw_symbols(cfg: WdmConfig, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    """Draw i.i.d. symbols of the configured distribution, ``([count,] users, M)``."""
    shape = (cfg.n_users, cfg.symbols_per_user) if count is None else (
        count, cfg.n_users, cfg.symbols_per_user)
    mom = cfg.moments
    if mom.name == "gaussian":
        g = rng.standard_normal(shape + (2,))
        return math.sqrt(0.5 * mom.m2) * (g[..., 0] + 1j * g[..., 1])
    if mom.name == "psk":
        return math.sqrt(mom.m2) * np.exp(2j * np.pi * rng.random(shape))
    if mom.name == "qam16":
        return rng.choice(_qam16_points(mom.m2), size=shape)
    raise ValueError(f"no sampler for symbol distribution {mom.name!r}")


def input_spectral_moment(cfg: WdmConfig, k1: int, k2: int) -> complex:
    """``mu_12 = E q_k1 conj(q_k2) = P0 sum_slots v_k1 conj(v_k2)``.

    Modes in different user bands are uncorrelated.
    """
    v = cfg.slot_matrix()
    i1, i2 = cfg.grid.index(k1), cfg.grid.index(k2)
    return complex(cfg.moments.m2 * np.sum(v[:, i1] * np.conj(v[:, i2])))


class InterferenceReport(NamedTuple):
    """Per-mode nonlinear correction in a user's band, split by triple class.

    ``intra``: all of ``l, m, n`` in the band; ``one_wave``: exactly two;
    ``two_wave``: exactly one; ``three_wave``: none.
    """

    user: int
    modes: np.ndarray
    intra: np.ndarray
    one_wave: np.ndarray
    two_wave: np.ndarray
    three_wave: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.intra + self.one_wave + self.two_wave + self.three_wave

    def powers(self) -> dict[str, float]:
        out = {
            name: float(np.sum(getattr(self, name)))
            for name in ("intra", "one_wave", "two_wave", "three_wave")
        }
        out["total"] = float(np.sum(self.total))
        return out


def decompose_interference(
    cfg: WdmConfig, z: float, user: int = 0, model: str = "GN", coeff: float = 1.0
) -> InterferenceReport:
    """Split the base-model correction in ``user``'s band by triple membership."""
    model = _check_model(model)
    grid = cfg.grid
    sums = quartet_sums(cfg.base_psd(), -(grid.omega**2), 0.0, z, labels=cfg.labels(), target=user)
    cols = (sums.gn if model == "GN" else sums.kz) * 8.0 * coeff * coeff
    idx = grid.index(cfg.band_modes(user))
    return InterferenceReport(user, cfg.band_modes(user), *(cols[idx, j] for j in range(4)))


def interference_report(cfg: WdmConfig, z: float, model: str = "GN", coeff: float = 1.0) -> dict:
    """JSON-ready per-user ``{intra, one_wave, two_wave, three_wave, total}`` powers."""
    users = {
        str(int(u)): decompose_interference(cfg, z, int(u), model, coeff).powers() for u in cfg.users
    }
    return {"model": _check_model(model), "z": z, "coeff": coeff, "users": users}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def _check_model(model: str) -> str:
    m = model.upper()
    if m not in ("GN", "KZ"):
        raise ValueError(f"model must be GN or KZ, got {model!r}")
    return m


def _check_cost(cfg: WdmConfig) -> None:
    if cfg.n > MAX_MODES or cfg.n_users * cfg.symbols_per_user > MAX_SLOTS:
        raise ValueError(
            f"corrected PSDs limited to N <= {MAX_MODES} and {MAX_SLOTS} symbol slots"
        )


def _mismatch(w2: np.ndarray, ll, mm, nn, ik) -> np.ndarray:
    # dimensionless Omega = w0^2 (l^2 + m^2 - n^2 - k^2)
    return w2[ll] + w2[mm] - w2[nn] - w2[ik]


def _gn_non_gaussian(cfg: WdmConfig, v: np.ndarray, z: float, dens: CumulantDensities) -> np.ndarray:
    """``E|F_k|^2`` minus its pairing part, divided by nothing (no ``g^2`` yet)."""
    n = cfg.n
    w2 = cfg.grid.omega**2
    p0 = cfg.moments.m2
    out = np.zeros(n)
    for ik in range(n):
        ll, mm, nn = _pykernels._pairs(n, ik)
        if ll.size == 0:
            continue
        kk = _pykernels.span_response(0.0, -_mismatch(w2, ll, mm, nn, ik), z)
        vl, vm, vn = v[:, ll], v[:, mm], np.conj(v[:, nn])
        d1 = (vl * kk) @ (vm * vn).T  # C_{x y y}
        d2 = vn @ (vl * vm * kk).T  # [x, y] -> C_{y y x}
        d3 = (vl * vn * kk) @ vm.T  # C_{x y x}
        c = np.sum(vl * vm * vn * kk, axis=1)  # C_{x x x}
        s4 = 4 * np.sum(np.abs(d1) ** 2) + np.sum(np.abs(d2) ** 2)
        s4 += 4 * float(np.real(np.sum(d3 * np.conj(c)[None, :])))
        out[ik] = p0 * dens.s4 * s4 + dens.s6 * np.sum(np.abs(c) ** 2)
    return out


def gaussian_gn_exact(cfg: WdmConfig, z: float, coeff: float = 1.0) -> np.ndarray:
    """Pairing part of ``8 coeff^2 E|F_k|^2 / 2`` with the full correlation ``P0 Gamma``.

    Equals the base GN correction for stationary inputs.  Intended for small
    grids (it forms the full three-slot tensor per mode).
    """
    _check_cost(cfg)
    v = cfg.slot_matrix()
    w2 = cfg.grid.omega**2
    p0 = cfg.moments.m2
    out = np.zeros(cfg.n)
    for ik in range(cfg.n):
        ll, mm, nn = _pykernels._pairs(cfg.n, ik)
        if ll.size == 0:
            continue
        kk = _pykernels.span_response(0.0, -_mismatch(w2, ll, mm, nn, ik), z)
        c = np.einsum("p,ap,bp,cp->abc", kk, v[:, ll], v[:, mm], np.conj(v[:, nn]), optimize=True)
        d = np.einsum("xyx->y", c)
        out[ik] = p0**3 * (2 * np.sum(np.abs(c) ** 2) + 4 * np.sum(np.abs(d) ** 2))
    return 4.0 * coeff * coeff * out


class _T1Tables(NamedTuple):
    a: np.ndarray  # (N, S)       sum_s psi_A[L, s, r]
    xb: np.ndarray  # (N, N, S)   sum_s psi_B[L, s, r] conj(v_s[j])
    xc: np.ndarray  # (N, N, S)   sum_s psi_C[L, s, r] v_s[j]
    y: np.ndarray  # (N, N)       sum_r psi_0[L, r] conj(v_r[j])
    psi0: np.ndarray  # (N, S)
    gram: np.ndarray  # (N, N)


def _t1_tables(v: np.ndarray) -> _T1Tables:
    """Reductions of ``Psi^L_{xyw} = sum_{l'+m'-n'=L} v^x_l' v^y_m' conj(v^w_n')``."""
    s, n = v.shape
    vc = np.conj(v)
    a = np.zeros((n, s), dtype=np.complex128)
    xb = np.zeros((n, n, s), dtype=np.complex128)
    xc = np.zeros((n, n, s), dtype=np.complex128)
    psi0 = np.zeros((n, s), dtype=np.complex128)
    il = np.arange(n)[:, None]
    im = np.arange(n)[None, :]
    for iL in range(n):
        inn = il + im - iL
        ok = (inn >= 0) & (inn < n)
        lp, mp = np.nonzero(ok)
        np_ = lp + mp - iL
        vl, vm, vn = v[:, lp], v[:, mp], vc[:, np_]
        psi_a = (vl * vn) @ vm.T  # [s, r] = Psi_{s r s}
        psi_b = vl @ (vm * vn).T  # [s, r] = Psi_{s r r}
        psi_c = vn @ (vl * vm).T  # [s, r] = Psi_{r r s}
        psi0[iL] = np.sum(vl * vm * vn, axis=1)
        a[iL] = psi_a.sum(axis=0)
        xb[iL] = vc.T @ psi_b
        xc[iL] = v.T @ psi_c
    y = psi0 @ vc
    return _T1Tables(a, xb, xc, y, psi0, v.T @ vc)


def _t1_non_gaussian(tab: _T1Tables, v, L, M, N, K, p0s4: float, s6: float) -> np.ndarray:
    """Cumulant part of ``E[Phi_L q_M conj(q_N) conj(q_K)]`` for index arrays."""
    vc = np.conj(v)
    vM, vN, vK = v[:, M], vc[:, N], vc[:, K]
    out = 2 * np.sum(tab.a[L].T * vM * vN * vK, axis=0)
    out += 2 * np.sum(vM * (tab.xb[L, N].T * vK + vN * tab.xb[L, K].T), axis=0)
    out += np.sum(tab.xc[L, M].T * vN * vK, axis=0)
    out += tab.gram[M, N] * tab.y[L, K] + tab.gram[M, K] * tab.y[L, N]
    out *= p0s4
    out += s6 * np.sum(tab.psi0[L].T * vM * vN * vK, axis=0)
    return out


def _kz_non_gaussian(cfg: WdmConfig, v: np.ndarray, z: float, dens: CumulantDensities):
    """Collision-term cumulant part per quartet, weighted by the second-order kernel."""
    n = cfg.n
    w2 = cfg.grid.omega**2
    tab = _t1_tables(v)
    p0s4 = cfg.moments.m2 * dens.s4
    out = np.zeros(n)
    imag = 0.0
    for ik in range(n):
        ll, mm, nn = _pykernels._pairs(n, ik)
        if ll.size == 0:
            continue
        kk = np.full(ll.size, ik)
        t1 = _t1_non_gaussian(tab, v, ll, mm, nn, kk, p0s4, dens.s6)
        t2 = _t1_non_gaussian(tab, v, mm, ll, nn, kk, p0s4, dens.s6)
        t3 = np.conj(_t1_non_gaussian(tab, v, nn, kk, ll, mm, p0s4, dens.s6))
        t4 = np.conj(_t1_non_gaussian(tab, v, kk, nn, ll, mm, p0s4, dens.s6))
        t = 0.5 * (t3 + t4 - t1 - t2)
        imag = max(imag, float(np.max(np.abs(t.imag))))
        om = _mismatch(w2, ll, mm, nn, ik)
        out[ik] = 2.0 * float(np.sum(np.real(t * _second_order_kernel(om, z))))
    return out, imag


def _second_order_kernel(omega: np.ndarray, z: float) -> np.ndarray:
    """``int_0^z int_0^z1 exp(j Omega (z1 - z2))``; its real part is ``|H|^2 / 2``."""
    x = omega * z
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, omega)
    full = (1.0 + 1j * x - np.exp(1j * x)) / safe**2
    series = z * z * (0.5 + 1j * x / 6.0 - x * x / 24.0)
    return np.where(small, series, full)


def corrected_psds(
    cfg: WdmConfig, z: float, model: str = "GN", coeff: float = 1.0
) -> PsdModelOutput:
    """Base model PSD of the WDM input plus its non-Gaussian symbol correction.

    The correction holds every term of the input sixth moment that involves
    a symbol cumulant of order four or six.  These are the ``S6`` term and
    the ``S2 S4`` products.  Gaussian symbols give exactly zero.  The base
    model uses the diagonal ``S0_k = mu_kk``.  For a non-stationary basis
    the off-diagonal pairing terms are left out, and a
    :class:`NonStationaryWarning` is issued.

    Components ``"base"`` and ``"non_gaussian"`` of the output hold the two
    parts of the correction.
    """
    model = _check_model(model)
    _check_cost(cfg)
    if not cfg.is_stationary():
        warnings.warn(
            "input spectral correlation is not diagonal; base model uses mu_kk only",
            NonStationaryWarning,
            stacklevel=2,
        )
    s0 = cfg.base_psd()
    dens = cfg.moments.densities()
    grid = cfg.grid
    sums = quartet_sums(s0, -(grid.omega**2), 0.0, z)
    pref = 8.0 * coeff * coeff
    base = pref * (sums.gn if model == "GN" else sums.kz).sum(axis=1)
    v = cfg.slot_matrix()
    params = {"z": z, "coeff": coeff, "s4": dens.s4, "s6": dens.s6, "symbols": cfg.moments.name}
    m2 = cfg.moments.m2
    if abs(dens.s4) <= 1e-12 * m2**2 and abs(dens.s6) <= 1e-12 * m2**3:
        ng = np.zeros(cfg.n)
    elif model == "GN":
        ng = 0.5 * pref * _gn_non_gaussian(cfg, v, z, dens)
    else:
        raw, imag = _kz_non_gaussian(cfg, v, z, dens)
        ng = pref * raw
        params["max_imag_collision"] = imag
    return PsdModelOutput(
        model, s0, base + ng, params, components={"base": base, "non_gaussian": ng}
    )


def xpm_energy_decomposition(cfg: WdmConfig, symbols: np.ndarray, user: int = 0) -> tuple[float, float]:
    """``(self, cross)`` split of the signal energy ``sum |a_u^x|^2`` for ``user``."""
    a = np.asarray(symbols)
    if a.shape != (cfg.n_users, cfg.symbols_per_user):
        raise ValueError(f"symbols must have shape {(cfg.n_users, cfg.symbols_per_user)}")
    e = np.sum(np.abs(a) ** 2, axis=1)
    i = user + cfg.users_per_side
    if not 0 <= i < cfg.n_users:
        raise ValueError(f"user {user} out of range")
    return float(e[i]), float(np.sum(e) - e[i])
