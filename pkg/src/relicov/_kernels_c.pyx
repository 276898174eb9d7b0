# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pure-Python kernels in ``relicov._kernels_py``.

Operation order and libm usage match the Python fallback exactly, so the
two backends return identical values; see tests/test_kernels.py.
"""

from libc.math cimport exp, fabs, log, log1p, sin

import numpy as np

cdef double _LANCZOS_G = 7.0
cdef double[9] _LANCZOS
_LANCZOS[0] = 0.99999999999980993
_LANCZOS[1] = 676.5203681218851
_LANCZOS[2] = -1259.1392167224028
_LANCZOS[3] = 771.32342877765313
_LANCZOS[4] = -176.61502916214059
_LANCZOS[5] = 12.507343278686905
_LANCZOS[6] = -0.13857109526572012
_LANCZOS[7] = 9.9843695780195716e-6
_LANCZOS[8] = 1.5056327351493116e-7

cdef double _CF_EPS = 1e-12
cdef int _CF_MAX_ITER = 500
cdef double _FPMIN = 1e-300

cdef double _PI = 3.141592653589793
cdef double _LOG_SMOOTH = log(1e-12)
cdef double _LOG_TINY = log(1e-300)
cdef double _NEG_HALF_LOG_2PI = -0.5 * log(2.0 * _PI)


cdef double _lgamma(double z) except? -1e308:
    cdef double s, w, x, t
    cdef int i
    if z < 0.5:
        s = sin(_PI * z)
        if s == 0.0:
            raise ValueError("lgamma pole at non-positive integer")
        return log(_PI / fabs(s)) - _lgamma(1.0 - z)
    w = z - 1.0
    x = _LANCZOS[0]
    for i in range(1, 9):
        x += _LANCZOS[i] / (w + i)
    t = w + _LANCZOS_G + 0.5
    return 0.5 * log(2.0 * _PI) + (w + 0.5) * log(t) - t + log(x)


def lgamma_lanczos(double z):
    """log|Gamma(z)| for real z (poles at non-positive integers excluded)."""
    return _lgamma(z)


cdef double _betacf(double a, double b, double x) except? -1e308:
    cdef double qab = a + b
    cdef double qap = a + 1.0
    cdef double qam = a - 1.0
    cdef double c = 1.0
    cdef double d = 1.0 - qab * x / qap
    cdef double h, aa, delta
    cdef int m, m2
    if fabs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if fabs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if fabs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(double a, double b, double x):
    """Regularized incomplete beta function I_x(a, b)."""
    cdef double ln_bt, bt
    if a <= 0.0 or b <= 0.0:
        raise ValueError("betainc_reg requires a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        _lgamma(a + b) - _lgamma(a) - _lgamma(b) + a * log(x) + b * log1p(-x)
    )
    bt = exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def gammainc_lower(double s, double x):
    """Regularized lower incomplete gamma function P(s, x)."""
    cdef double ap, total, term, b, c, d, h, an, delta, q
    cdef int i
    if s <= 0.0:
        raise ValueError("gammainc_lower requires s > 0")
    if x < 0.0:
        raise ValueError("gammainc_lower requires x >= 0")
    if x == 0.0:
        return 0.0
    if x < s + 1.0:
        ap = s
        total = 1.0 / s
        term = total
        for i in range(_CF_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if fabs(term) < fabs(total) * _CF_EPS:
                return total * exp(-x + s * log(x) - _lgamma(s))
        raise ArithmeticError("incomplete gamma series did not converge")
    b = x + 1.0 - s
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if fabs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if fabs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < _CF_EPS:
            q = exp(-x + s * log(x) - _lgamma(s)) * h
            return 1.0 - q
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


cdef inline double _logaddexp(double a, double b) nogil:
    cdef double t
    if a < b:
        t = a
        a = b
        b = t
    return a + log1p(exp(b - a))


cdef inline double _accept_log_ratio(double log_p_star, double log_p) nogil:
    cdef double r
    if log_p_star >= _LOG_TINY and log_p >= _LOG_TINY:
        r = log_p_star - log_p
    else:
        r = _logaddexp(log_p_star, _LOG_SMOOTH) - _logaddexp(log_p, _LOG_SMOOTH)
    return r if r < 0.0 else 0.0


def accept_log_ratio(double log_p_star, double log_p):
    """Log acceptance probability of a symmetric-proposal Metropolis step.

    Same contract as :func:`relicov._kernels_py.accept_log_ratio`.
    """
    return _accept_log_ratio(log_p_star, log_p)


cdef double _log_joint(double[::1] x, double theta, double phi_scale) nogil:
    cdef Py_ssize_t i, k = x.shape[0]
    cdef double total = 0.0
    cdef double d
    for i in range(k):
        d = x[i] - theta
        total += _NEG_HALF_LOG_2PI - 0.5 * d * d - phi_scale * fabs(d)
    return total


def log_joint(x, double theta, double phi_scale):
    """Log of prod_i N(x_i | theta, 1) * exp(-phi_scale * |theta - x_i|)."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    return _log_joint(xv, theta, phi_scale)


def run_chain(x, z, u, double theta0, double proposal_sd, double phi_scale):
    """Random-walk Metropolis over a scalar parameter.

    Same contract as :func:`relicov._kernels_py.run_chain`.
    """
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double theta = theta0
    cdef double lp, lp_star, theta_star, log_alpha
    cdef Py_ssize_t t
    cdef long accepts = 0
    with nogil:
        lp = _log_joint(xv, theta, phi_scale)
        for t in range(n):
            theta_star = theta + proposal_sd * zv[t]
            lp_star = _log_joint(xv, theta_star, phi_scale)
            log_alpha = _accept_log_ratio(lp_star, lp)
            if log_alpha >= 0.0 or uv[t] < exp(log_alpha):
                theta = theta_star
                lp = lp_star
                accepts += 1
            out[t] = theta
    return out_arr, int(accepts)
