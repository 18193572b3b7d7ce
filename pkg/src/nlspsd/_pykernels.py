"""Pure-numpy reference implementation of the quartet kernels.

Every routine here has a compiled twin in ``_ckernels.pyx`` with the same
signature.  Arrays are in natural mode order, so the index of
``n = l + m - k`` is ``i_l + i_m - i_k``.

The phase mismatch of a quartet is ``Omega = beta_l + beta_m - beta_n - beta_k``
and its kernel is the span response times the array factor,
``K(Omega) = Hspan(alpha, Omega, eps) * sum_n w_n exp(-j n eps Omega)``.
"""

from __future__ import annotations

import numpy as np

SERIES_CUTOFF = 1e-4
ARRAY_CUTOFF = 1e-5


def span_response(alpha: float, omega, z: float) -> np.ndarray:
    """``-j int_0^z exp(-(alpha + j Omega) l) dl``, evaluated without cancellation."""
    omega = np.asarray(omega, dtype=np.float64)
    w = -(alpha + 1j * omega) * z
    a = -alpha * z
    b = -omega * z
    small = np.abs(w) < SERIES_CUTOFF
    safe_w = np.where(small, 1.0, w)
    num = np.expm1(a) * np.cos(b) - 2.0 * np.sin(0.5 * b) ** 2 + 1j * np.exp(a) * np.sin(b)
    ratio = np.where(small, 1.0 + w / 2.0 + w * w / 6.0, num / safe_w)
    return -1j * z * ratio


def span_response_abs2(alpha: float, omega, z: float) -> np.ndarray:
    """Closed form of ``|span_response|^2``."""
    omega = np.asarray(omega, dtype=np.float64)
    den = alpha * alpha + omega * omega
    small = den * z * z < SERIES_CUTOFF**2
    num = np.expm1(-alpha * z) ** 2 + 4.0 * np.exp(-alpha * z) * np.sin(0.5 * omega * z) ** 2
    w = -(alpha + 1j * omega) * z
    series = z * z * np.abs(1.0 + w / 2.0 + w * w / 6.0) ** 2
    return np.where(small, series, num / np.where(small, 1.0, den))


def _uniform_ratio(x: np.ndarray, nsp: int) -> np.ndarray:
    # sin(N x) / sin(x), reduced modulo pi so the removable zeros stay accurate
    m = np.round(x / np.pi)
    d = x - m * np.pi
    sign = np.where((m * (nsp - 1)) % 2 == 0, 1.0, -1.0)
    small = np.abs(d) < ARRAY_CUTOFF
    safe = np.where(small, 1.0, np.sin(d))
    r = np.where(small, nsp * (1.0 - (nsp * nsp - 1.0) * d * d / 6.0), np.sin(nsp * d) / safe)
    return sign * r


def array_factor(omega, span: float, nsp: int, weights=None) -> np.ndarray:
    """``sum_{n<N} w_n exp(-j n eps Omega)``; uniform weights use the closed form."""
    omega = np.asarray(omega, dtype=np.float64)
    if weights is None:
        x = 0.5 * span * omega
        return np.exp(-1j * (nsp - 1) * x) * _uniform_ratio(x, nsp)
    weights = np.asarray(weights, dtype=np.float64)
    out = np.zeros(omega.shape, dtype=np.complex128)
    for n, w in enumerate(weights):
        out += w * np.exp(-1j * n * span * omega)
    return out


def array_factor_abs2(omega, span: float, nsp: int, weights=None) -> np.ndarray:
    if weights is None:
        return _uniform_ratio(0.5 * span * np.asarray(omega, dtype=np.float64), nsp) ** 2
    return np.abs(array_factor(omega, span, nsp, weights)) ** 2


def kernel(omega, alpha, span, nsp, weights=None) -> np.ndarray:
    k = span_response(alpha, omega, span)
    if nsp == 1 and weights is None:
        return k
    return k * array_factor(omega, span, nsp, weights)


def kernel_abs2(omega, alpha, span, nsp, weights=None) -> np.ndarray:
    k2 = span_response_abs2(alpha, omega, span)
    if nsp == 1 and weights is None:
        return k2
    return k2 * array_factor_abs2(omega, span, nsp, weights)


def _pairs(n: int, ik: int):
    il = np.arange(n)[:, None]
    im = np.arange(n)[None, :]
    inn = il + im - ik
    valid = (inn >= 0) & (inn < n) & (il != ik) & (im != ik)
    ll, mm = np.nonzero(valid)
    return ll, mm, ll + mm - ik


def psd_sums(S, beta, alpha, span, nsp, weights, labels, target):
    """Quartet sums behind the GN and KZ models.

    Returns
    -------
    gn : (N, 4) array
        ``sum |K|^2 S_l S_m S_n`` split by how many of ``l, m, n`` carry
        ``labels == target`` (column ``3 - count``).
    kz : (N, 4) array
        Same split of ``sum |K|^2 T`` with the collision term ``T``.
    ds : (N,) array
        ``sum |K|^2 (S_l S_n + S_m S_n - S_l S_m)`` (exact GN minus KZ, before ``S_k``).
    diag : (N,) array
        ``sum |K|^2 S_l S_n``, the simplified difference before ``S_k``.
    """
    S = np.asarray(S, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    labels = np.asarray(labels)
    n = S.size
    gn = np.zeros((n, 4))
    kz = np.zeros((n, 4))
    ds = np.zeros(n)
    diag = np.zeros(n)
    in_band = labels == target
    for ik in range(n):
        ll, mm, nn = _pairs(n, ik)
        if ll.size == 0:
            continue
        k2 = kernel_abs2(beta[ll] + beta[mm] - beta[nn] - beta[ik], alpha, span, nsp, weights)
        sl, sm, sn, sk = S[ll], S[mm], S[nn], S[ik]
        g = k2 * sl * sm * sn
        t = k2 * (sl * sm * sn + sl * sm * sk - sl * sn * sk - sm * sn * sk)
        cls = 3 - (in_band[ll].astype(np.int64) + in_band[mm] + in_band[nn])
        gn[ik] = np.bincount(cls, weights=g, minlength=4)
        kz[ik] = np.bincount(cls, weights=t, minlength=4)
        ds[ik] = np.sum(k2 * (sl * sn + sm * sn - sl * sm))
        diag[ik] = np.sum(k2 * sl * sn)
    return gn, kz, ds, diag


def fwm_sum(q, beta, alpha, span, nsp, weights):
    """``F_k = sum_{nr_k} K(Omega) q_l q_m conj(q_n)`` for every mode ``k``.

    ``q`` may be one spectrum ``(N,)`` or a batch ``(R, N)``.
    """
    q = np.asarray(q, dtype=np.complex128)
    beta = np.asarray(beta, dtype=np.float64)
    n = q.shape[-1]
    out = np.zeros(q.shape, dtype=np.complex128)
    for ik in range(n):
        ll, mm, nn = _pairs(n, ik)
        if ll.size == 0:
            continue
        kk = kernel(beta[ll] + beta[mm] - beta[nn] - beta[ik], alpha, span, nsp, weights)
        out[..., ik] = (q[..., ll] * q[..., mm] * np.conj(q[..., nn])) @ kk
    return out
