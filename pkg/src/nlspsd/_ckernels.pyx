# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled quartet kernels; mirrors ``_pykernels`` routine for routine."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, expm1, fabs, round as cround, M_PI

cnp.import_array()

cdef double SERIES_CUTOFF = 1e-4
cdef double ARRAY_CUTOFF = 1e-5


cdef struct Params:
    double alpha
    double span
    long nsp
    bint uniform
    double ea       # exp(-alpha * span)
    double em       # expm1(-alpha * span)


cdef Params make_params(double alpha, double span, long nsp, bint uniform):
    cdef Params p
    p.alpha = alpha
    p.span = span
    p.nsp = nsp
    p.uniform = uniform
    p.ea = exp(-alpha * span)
    p.em = expm1(-alpha * span)
    return p


cdef inline double complex span_response(double omega, Params* p) nogil:
    cdef double z = p.span
    cdef double complex w = -(p.alpha + 1j * omega) * z
    cdef double b = -omega * z
    cdef double sb
    cdef double complex num
    if p.alpha * p.alpha * z * z + b * b < SERIES_CUTOFF * SERIES_CUTOFF:
        return -1j * z * (1.0 + w / 2.0 + w * w / 6.0)
    sb = sin(0.5 * b)
    num = p.em * cos(b) - 2.0 * sb * sb + 1j * p.ea * sin(b)
    return -1j * z * num / w


cdef inline double span_response_abs2(double omega, Params* p) nogil:
    cdef double z = p.span
    cdef double den = p.alpha * p.alpha + omega * omega
    cdef double complex w
    cdef double complex s
    cdef double sh
    if den * z * z < SERIES_CUTOFF * SERIES_CUTOFF:
        w = -(p.alpha + 1j * omega) * z
        s = 1.0 + w / 2.0 + w * w / 6.0
        return z * z * (s.real * s.real + s.imag * s.imag)
    sh = sin(0.5 * omega * z)
    return (p.em * p.em + 4.0 * p.ea * sh * sh) / den


cdef inline double uniform_ratio(double x, long nsp) nogil:
    cdef double m = cround(x / M_PI)
    cdef double d = x - m * M_PI
    cdef double r
    cdef long mi = <long> m
    if fabs(d) < ARRAY_CUTOFF:
        r = nsp * (1.0 - (nsp * nsp - 1.0) * d * d / 6.0)
    else:
        r = sin(nsp * d) / sin(d)
    if ((mi * (nsp - 1)) % 2) != 0:
        r = -r
    return r


cdef inline double complex array_factor(double omega, Params* p, const double[::1] weights) nogil:
    cdef double x
    cdef double complex acc = 0.0
    cdef long n
    if p.uniform:
        x = 0.5 * p.span * omega
        return (cos((p.nsp - 1) * x) - 1j * sin((p.nsp - 1) * x)) * uniform_ratio(x, p.nsp)
    for n in range(p.nsp):
        acc = acc + weights[n] * (cos(n * p.span * omega) - 1j * sin(n * p.span * omega))
    return acc


cdef inline double kernel_abs2(double omega, Params* p, const double[::1] weights) nogil:
    cdef double k2 = span_response_abs2(omega, p)
    cdef double complex g
    cdef double r
    if p.nsp == 1 and p.uniform:
        return k2
    if p.uniform:
        r = uniform_ratio(0.5 * p.span * omega, p.nsp)
        return k2 * r * r
    g = array_factor(omega, p, weights)
    return k2 * (g.real * g.real + g.imag * g.imag)


cdef inline double complex kernel(double omega, Params* p, const double[::1] weights) nogil:
    cdef double complex k = span_response(omega, p)
    if p.nsp == 1 and p.uniform:
        return k
    return k * array_factor(omega, p, weights)


def _weights(weights, long nsp):
    if weights is None:
        return np.ones(max(nsp, 1), dtype=np.float64), True
    return np.ascontiguousarray(weights, dtype=np.float64), False


def psd_sums(S, beta, double alpha, double span, long nsp, weights, labels, long target):
    cdef const double[::1] s = np.ascontiguousarray(S, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(beta, dtype=np.float64)
    cdef const long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    w_arr, uniform_py = _weights(weights, nsp)
    cdef const double[::1] w = w_arr
    cdef Params prm = make_params(alpha, span, nsp, uniform_py)
    cdef Py_ssize_t n = s.shape[0]
    gn_arr = np.zeros((n, 4))
    kz_arr = np.zeros((n, 4))
    ds_arr = np.zeros(n)
    diag_arr = np.zeros(n)
    cdef double[:, ::1] gn = gn_arr
    cdef double[:, ::1] kz = kz_arr
    cdef double[::1] ds = ds_arr
    cdef double[::1] diag = diag_arr
    cdef Py_ssize_t ik, il, im, inn, m_lo, m_hi
    cdef double k2, sl, sm, sn, sk, bk, bl, g0, g1, g2, g3, t0, t1, t2, t3, acc_ds, acc_dg
    cdef double slsm, slsn, smsn
    cdef int cl, cnt
    with nogil:
        for ik in range(n):
            sk = s[ik]
            bk = b[ik]
            g0 = g1 = g2 = g3 = 0.0
            t0 = t1 = t2 = t3 = 0.0
            acc_ds = acc_dg = 0.0
            for il in range(n):
                if il == ik:
                    continue
                sl = s[il]
                bl = b[il] - bk
                cl = lab[il] == target
                # n = l + m - k must stay on the grid; the summand is symmetric in
                # (l, m) so only m >= l is visited and off-diagonal pairs count twice
                m_lo = ik - il if ik > il else 0
                if m_lo < il:
                    m_lo = il
                m_hi = n + ik - il if ik < il else n
                for im in range(m_lo, m_hi):
                    if im == ik:
                        continue
                    inn = il + im - ik
                    sm = s[im]
                    sn = s[inn]
                    k2 = kernel_abs2(bl + b[im] - b[inn], &prm, w)
                    if im != il:
                        k2 = 2.0 * k2
                    slsm = sl * sm
                    slsn = sl * sn
                    smsn = sm * sn
                    cnt = cl + (lab[im] == target) + (lab[inn] == target)
                    if cnt == 3:
                        g0 += k2 * slsm * sn
                        t0 += k2 * (slsm * sn + (slsm - slsn - smsn) * sk)
                    elif cnt == 2:
                        g1 += k2 * slsm * sn
                        t1 += k2 * (slsm * sn + (slsm - slsn - smsn) * sk)
                    elif cnt == 1:
                        g2 += k2 * slsm * sn
                        t2 += k2 * (slsm * sn + (slsm - slsn - smsn) * sk)
                    else:
                        g3 += k2 * slsm * sn
                        t3 += k2 * (slsm * sn + (slsm - slsn - smsn) * sk)
                    # symmetrised so the m >= l half-sum is exact
                    acc_ds += k2 * (slsn + smsn - slsm)
                    acc_dg += 0.5 * k2 * (slsn + smsn)
            gn[ik, 0] = g0
            gn[ik, 1] = g1
            gn[ik, 2] = g2
            gn[ik, 3] = g3
            kz[ik, 0] = t0
            kz[ik, 1] = t1
            kz[ik, 2] = t2
            kz[ik, 3] = t3
            ds[ik] = acc_ds
            diag[ik] = acc_dg
    return gn_arr, kz_arr, ds_arr, diag_arr


def fwm_sum(q, beta, double alpha, double span, long nsp, weights):
    q_arr = np.asarray(q, dtype=np.complex128)
    shape = q_arr.shape
    cdef const double complex[:, ::1] qq = np.ascontiguousarray(q_arr.reshape(-1, shape[len(shape) - 1]))
    cdef const double[::1] b = np.ascontiguousarray(beta, dtype=np.float64)
    w_arr, uniform_py = _weights(weights, nsp)
    cdef const double[::1] w = w_arr
    cdef Params prm = make_params(alpha, span, nsp, uniform_py)
    cdef Py_ssize_t nr = qq.shape[0]
    cdef Py_ssize_t n = qq.shape[1]
    out_arr = np.zeros((nr, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    kbuf_arr = np.zeros(n * n, dtype=np.complex128)
    cdef double complex[::1] kbuf = kbuf_arr
    cdef Py_ssize_t ik, il, im, inn, r, p
    cdef double complex acc
    cdef Py_ssize_t m_lo, m_hi
    with nogil:
        for ik in range(n):
            # kernel values depend only on (l, m) for fixed k; reuse them over the
            # batch.  Only m >= l is stored; off-diagonal pairs carry a factor 2.
            for il in range(n):
                for im in range(n):
                    inn = il + im - ik
                    if im < il or il == ik or im == ik or inn < 0 or inn >= n:
                        kbuf[il * n + im] = 0.0
                    else:
                        kbuf[il * n + im] = kernel(b[il] + b[im] - b[inn] - b[ik], &prm, w)
                        if im != il:
                            kbuf[il * n + im] = 2.0 * kbuf[il * n + im]
            for r in range(nr):
                acc = 0.0
                for il in range(n):
                    if il == ik:
                        continue
                    m_lo = ik - il if ik > il else 0
                    if m_lo < il:
                        m_lo = il
                    m_hi = n + ik - il if ik < il else n
                    for im in range(m_lo, m_hi):
                        if im == ik:
                            continue
                        p = il * n + im
                        inn = il + im - ik
                        acc = acc + kbuf[p] * qq[r, il] * qq[r, im] * (qq[r, inn].real - 1j * qq[r, inn].imag)
                out[r, ik] = acc
    return out_arr.reshape(shape)
