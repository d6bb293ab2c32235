# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Mittag-Leffler evaluation core.

Same API and semantics as _mlpure; see that module for documentation.
"""

import numpy as np

from libc.math cimport tgamma, fabs, floor, exp, INFINITY

SERIES_KMAX = 2000
ASYMP_KMAX = 300

cdef int C_SERIES_KMAX = 2000
cdef int C_ASYMP_KMAX = 300


cdef inline double _rgamma(double x) nogil:
    cdef double g
    if x <= 0.5 and x == floor(x):
        return 0.0
    g = tgamma(x)
    if g != g:
        return 0.0
    return 1.0 / g


cdef inline double _series_one(double alpha, double beta, double z,
                               double* maxt, bint* converged) nogil:
    cdef double s = 0.0, p = 1.0, t, at
    cdef int k, small_run = 0
    maxt[0] = 0.0
    converged[0] = False
    for k in range(C_SERIES_KMAX):
        t = p * _rgamma(alpha * k + beta)
        s += t
        at = fabs(t)
        if at > maxt[0]:
            maxt[0] = at
        if at < 1e-16 * (fabs(s) + 1.0):
            small_run += 1
            if small_run >= 2 and k >= 4:
                converged[0] = True
                break
        else:
            small_run = 0
        p *= z
        if fabs(p) > 1e290:
            maxt[0] = INFINITY
            return s
    return s


def series_eval(double alpha, double beta, double z):
    cdef double maxt
    cdef bint conv
    cdef double s = _series_one(alpha, beta, z, &maxt, &conv)
    return s, maxt, bool(conv)


def series_eval_arr(double alpha, double beta, double[::1] z):
    cdef Py_ssize_t n = z.shape[0], i
    out_s = np.empty(n)
    out_m = np.empty(n)
    cdef double[::1] vs = out_s
    cdef double[::1] vm = out_m
    cdef double maxt
    cdef bint conv
    with nogil:
        for i in range(n):
            vs[i] = _series_one(alpha, beta, z[i], &maxt, &conv)
            vm[i] = maxt
    return out_s, out_m


cdef inline double _asymp_one(double alpha, double beta, double x,
                              double* err) nogil:
    # Gamma arguments within ~1e-6 of a nonpositive integer are treated as
    # poles: argument roundoff makes 1/Gamma spuriously tiny instead of
    # zero, so such fluke terms must neither stop the loop nor pose as
    # genuine term magnitudes (true term bounded by xp * m! * distance).
    cdef double s = 0.0, xp = 1.0, t, at, g, arg, r, bound, slop
    cdef double last_nonzero = INFINITY
    cdef double pole_err = 0.0
    cdef int k, m, small_run = 0
    err[0] = INFINITY
    for k in range(1, C_ASYMP_KMAX + 1):
        xp /= x
        if xp == 0.0:
            break
        arg = beta - alpha * k
        r = floor(arg + 0.5)
        if arg < 0.5 and fabs(arg - r) < 1e-6:
            m = <int>(-r)
            if m > 170:
                break
            slop = (fabs(arg) + 2.0) * 3e-16
            bound = xp * tgamma(m + 1.0) * (fabs(arg - r) + slop) * 4.0
            if bound > pole_err:
                pole_err = bound
            continue
        g = _rgamma(arg)
        t = xp * g if (k % 2 == 1) else -xp * g
        if t != t or t == INFINITY or t == -INFINITY:
            break
        at = fabs(t)
        if at >= last_nonzero:
            err[0] = at
            break
        s += t
        last_nonzero = at
        err[0] = at
        if at < 1e-17 * (fabs(s) + 1e-300):
            small_run += 1
            if small_run >= 2:
                break
        else:
            small_run = 0
    if pole_err > err[0]:
        err[0] = pole_err
    return s


def asymp_eval(double alpha, double beta, double x):
    cdef double err
    cdef double s = _asymp_one(alpha, beta, x, &err)
    return s, err


def asymp_eval_arr(double alpha, double beta, double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out_s = np.empty(n)
    out_e = np.empty(n)
    cdef double[::1] vs = out_s
    cdef double[::1] ve = out_e
    cdef double err
    with nogil:
        for i in range(n):
            vs[i] = _asymp_one(alpha, beta, x[i], &err)
            ve[i] = err
    return out_s, out_e


def asymp_fixed(double alpha, double beta, double x, int n):
    cdef double s = 0.0, xp = 1.0, g
    cdef int k
    for k in range(1, n + 1):
        xp /= x
        g = _rgamma(beta - alpha * k)
        s += xp * g if (k % 2 == 1) else -xp * g
    return s


cdef inline double _kummer_one(double beta, double x) nogil:
    cdef double c = _rgamma(beta)
    cdef double s = c
    cdef int k
    for k in range(C_SERIES_KMAX):
        c *= (beta - 1.0 + k) * x / ((beta + k) * (k + 1.0))
        s += c
        if fabs(c) < 1e-17 * (fabs(s) + 1e-300) and k > 4:
            break
    return exp(-x) * s


def kummer_e1(double beta, double x):
    return _kummer_one(beta, x)


def kummer_e1_arr(double beta, double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] v = out
    with nogil:
        for i in range(n):
            v[i] = _kummer_one(beta, x[i])
    return out


# ----------------------------------------------------------------------
# Shooting kernels for the Sturm-Liouville solver (see _mlpure for docs).

from libc.math cimport sin, cos


cdef inline double _q_lin(double[::1] qs, Py_ssize_t ncell, double u) nogil:
    cdef Py_ssize_t i
    cdef double f
    if u <= 0.0:
        return qs[0]
    if u >= ncell:
        return qs[ncell]
    i = <Py_ssize_t>u
    f = u - i
    return qs[i] * (1.0 - f) + qs[i + 1] * f


def sl_shoot_raw(double[::1] qs, double lam, double phi0, double dphi0,
                 int steps_per_cell):
    cdef Py_ssize_t ncell = qs.shape[0] - 1
    cdef Py_ssize_t nstep = ncell * steps_per_cell
    cdef double h = 1.0 / nstep
    cdef double cn = (<double>ncell) / nstep
    cdef double y0 = phi0, y1 = dphi0, z = 0.0
    cdef double qa, qm, qb, k1y, k1v, k1z, k2y, k2v, k2z
    cdef double k3y, k3v, k3z, k4y, k4v, k4z, ym, vm, ym2, vm2, ye, ve
    cdef double u, s, prev_sign
    cdef Py_ssize_t i
    cdef long osc = 0
    prev_sign = 0.0
    if y0 > 0.0:
        prev_sign = 1.0
    elif y0 < 0.0:
        prev_sign = -1.0
    with nogil:
        for i in range(nstep):
            u = i * cn
            qa = _q_lin(qs, ncell, u)
            qm = _q_lin(qs, ncell, u + 0.5 * cn)
            qb = _q_lin(qs, ncell, u + cn)
            k1y = y1
            k1v = (qa - lam) * y0
            k1z = y0 * y0
            ym = y0 + 0.5 * h * k1y
            vm = y1 + 0.5 * h * k1v
            k2y = vm
            k2v = (qm - lam) * ym
            k2z = ym * ym
            ym2 = y0 + 0.5 * h * k2y
            vm2 = y1 + 0.5 * h * k2v
            k3y = vm2
            k3v = (qm - lam) * ym2
            k3z = ym2 * ym2
            ye = y0 + h * k3y
            ve = y1 + h * k3v
            k4y = ve
            k4v = (qb - lam) * ye
            k4z = ye * ye
            y0 = y0 + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            y1 = y1 + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            z = z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            s = 0.0
            if y0 > 0.0:
                s = 1.0
            elif y0 < 0.0:
                s = -1.0
            if s != 0.0 and prev_sign != 0.0 and s != prev_sign and i < nstep - 1:
                osc += 1
            if s != 0.0:
                prev_sign = s
    return y0, y1, z, osc


def sl_pruefer_raw(double[::1] qs, double lam, double theta0,
                   int steps_per_cell, double omega=1.0):
    cdef Py_ssize_t ncell = qs.shape[0] - 1
    cdef Py_ssize_t nstep = ncell * steps_per_cell
    cdef double h = 1.0 / nstep
    cdef double cn = (<double>ncell) / nstep
    cdef double th = theta0
    cdef double qa, qm, qb, k1, k2, k3, k4, t2, t3, t4, u, s, c
    cdef Py_ssize_t i
    with nogil:
        for i in range(nstep):
            u = i * cn
            qa = _q_lin(qs, ncell, u)
            qm = _q_lin(qs, ncell, u + 0.5 * cn)
            qb = _q_lin(qs, ncell, u + cn)
            s = sin(th); c = cos(th)
            k1 = omega * c * c + ((lam - qa) / omega) * s * s
            t2 = th + 0.5 * h * k1
            s = sin(t2); c = cos(t2)
            k2 = omega * c * c + ((lam - qm) / omega) * s * s
            t3 = th + 0.5 * h * k2
            s = sin(t3); c = cos(t3)
            k3 = omega * c * c + ((lam - qm) / omega) * s * s
            t4 = th + h * k3
            s = sin(t4); c = cos(t4)
            k4 = omega * c * c + ((lam - qb) / omega) * s * s
            th = th + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return th
