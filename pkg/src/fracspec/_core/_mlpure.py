"""Pure numpy implementation of the Mittag-Leffler evaluation core.

Mirrors the API of the compiled extension ``_mlcompiled``; the package
selects one of the two at import time.  Everything here works on plain
floats / 1-D float arrays and knows nothing about dispatch policy: callers
(fracspec.mittag_leffler) decide which path is trustworthy where.
"""

import math

import numpy as np
from scipy.special import rgamma

SERIES_KMAX = 2000
ASYMP_KMAX = 300


def series_eval(alpha, beta, z):
    """Truncated power series sum_k z^k / Gamma(alpha*k + beta).

    Returns (value, max_abs_term, converged).  max_abs_term lets the caller
    bound the floating-point cancellation error (~eps * max term).
    """
    s = 0.0
    p = 1.0
    maxt = 0.0
    small_run = 0
    converged = False
    for k in range(SERIES_KMAX):
        t = p * rgamma(alpha * k + beta)
        s += t
        at = abs(t)
        if at > maxt:
            maxt = at
        if at < 1e-16 * (abs(s) + 1.0):
            small_run += 1
            if small_run >= 2 and k >= 4:
                converged = True
                break
        else:
            small_run = 0
        p *= z
        if abs(p) > 1e290:
            return s, np.inf, False
    return s, maxt, converged


def series_eval_arr(alpha, beta, z):
    """Vectorized series_eval over a 1-D array. Returns (values, max_terms)."""
    z = np.asarray(z, dtype=float)
    s = np.zeros_like(z)
    p = np.ones_like(z)
    maxt = np.zeros_like(z)
    small_run = np.zeros(z.shape, dtype=np.int32)
    active = np.ones(z.shape, dtype=bool)
    for k in range(SERIES_KMAX):
        if not active.any():
            break
        g = rgamma(alpha * k + beta)
        t = np.where(active, p * g, 0.0)
        s += t
        at = np.abs(t)
        np.maximum(maxt, at, out=maxt)
        small = at < 1e-16 * (np.abs(s) + 1.0)
        small_run = np.where(small, small_run + 1, 0)
        if k >= 4:
            active &= ~(small_run >= 2)
        p = np.where(active, p * z, p)
        overflow = np.abs(p) > 1e290
        if overflow.any():
            maxt[overflow & active] = np.inf
            active &= ~overflow
    return s, maxt


def asymp_eval(alpha, beta, x):
    """Adaptive large-argument expansion of E_{alpha,beta}(-x), x > 0.

    Sums (-1)^(k-1) x^(-k) / Gamma(beta - alpha*k) until the terms stop
    decreasing; returns (value, error_estimate) where the estimate is the
    first omitted term plus, near alpha = 1, the exponentially small
    remainder the algebraic terms cannot see.

    Gamma arguments that land within ~1e-6 of a nonpositive integer are
    treated as poles: the rounded argument makes 1/Gamma spuriously tiny
    instead of zero, and such fluke terms must neither stop the loop nor
    enter the error estimate as if they were genuine term magnitudes (the
    true term is bounded by xp * m! * distance, which is accounted for).
    """
    s = 0.0
    xp = 1.0
    last_nonzero = np.inf
    err = np.inf
    pole_err = 0.0
    small_run = 0
    for k in range(1, ASYMP_KMAX + 1):
        xp /= x
        if xp == 0.0:
            break
        arg = beta - alpha * k
        r = round(arg)
        if arg < 0.5 and abs(arg - r) < 1e-6:
            m = -r
            if m > 170:
                break
            slop = (abs(arg) + 2.0) * 3e-16
            bound = xp * math.gamma(m + 1.0) * (abs(arg - r) + slop) * 4.0
            pole_err = max(pole_err, bound)
            continue
        g = rgamma(arg)
        t = xp * g if (k % 2 == 1) else -xp * g
        if not np.isfinite(t):
            break
        at = abs(t)
        if at >= last_nonzero:
            err = at
            break
        s += t
        last_nonzero = at
        err = at
        if at < 1e-17 * (abs(s) + 1e-300):
            small_run += 1
            if small_run >= 2:
                break
        else:
            small_run = 0
    return s, max(err, pole_err)


def asymp_eval_arr(alpha, beta, x):
    """Vectorized asymp_eval over a 1-D positive array."""
    x = np.asarray(x, dtype=float)
    s = np.zeros_like(x)
    xp = np.ones_like(x)
    last_nonzero = np.full(x.shape, np.inf)
    err = np.full(x.shape, np.inf)
    pole_err = np.zeros_like(x)
    small_run = np.zeros(x.shape, dtype=np.int32)
    active = np.ones(x.shape, dtype=bool)
    with np.errstate(invalid="ignore", over="ignore", under="ignore"):
        for k in range(1, ASYMP_KMAX + 1):
            if not active.any():
                break
            xp = xp / x
            active &= xp != 0.0
            arg = beta - alpha * k
            r = round(arg)
            if arg < 0.5 and abs(arg - r) < 1e-6:
                m = -r
                if m > 170:
                    break
                slop = (abs(arg) + 2.0) * 3e-16
                bound = xp * math.gamma(m + 1.0) * (abs(arg - r) + slop) * 4.0
                np.maximum(pole_err, np.where(active, bound, 0.0), out=pole_err)
                continue
            g = rgamma(arg)
            t = (xp if k % 2 == 1 else -xp) * g
            at = np.abs(t)
            active &= np.isfinite(t)
            grow = active & (at >= last_nonzero)
            err[grow] = at[grow]
            active &= ~grow
            s[active] += t[active]
            last_nonzero[active] = at[active]
            err[active] = at[active]
            small = at < 1e-17 * (np.abs(s) + 1e-300)
            small_run = np.where(active & small, small_run + 1, 0)
            active &= ~(small_run >= 2)
    return s, np.maximum(err, pole_err)


def asymp_fixed(alpha, beta, x, n):
    """Exactly n terms of the large-argument expansion (no adaptivity)."""
    s = 0.0
    xp = 1.0
    for k in range(1, n + 1):
        xp /= x
        g = rgamma(beta - alpha * k)
        s += xp * g if (k % 2 == 1) else -xp * g
    return s


def kummer_e1(beta, x):
    """E_{1,beta}(-x) for x >= 0 via the exponentially scaled series
    exp(-x) * 1F1(beta-1; beta; x) / Gamma(beta), whose terms carry at most
    one sign change, so there is no catastrophic cancellation at any x.
    Requires beta > 0.05 (callers shift smaller beta upward first).
    """
    c = rgamma(beta)
    s = c
    for k in range(SERIES_KMAX):
        c *= (beta - 1.0 + k) * x / ((beta + k) * (k + 1.0))
        s += c
        if abs(c) < 1e-17 * (abs(s) + 1e-300) and k > 4:
            break
    return np.exp(-x) * s


def kummer_e1_arr(beta, x):
    """Vectorized kummer_e1 over a 1-D nonnegative array."""
    x = np.asarray(x, dtype=float)
    c = np.full(x.shape, rgamma(beta))
    s = c.copy()
    active = np.ones(x.shape, dtype=bool)
    for k in range(SERIES_KMAX):
        if not active.any():
            break
        c = np.where(active, c * (beta - 1.0 + k) * x / ((beta + k) * (k + 1.0)), c)
        s = np.where(active, s + c, s)
        if k > 4:
            active &= ~(np.abs(c) < 1e-17 * (np.abs(s) + 1e-300))
    return np.exp(-x) * s


# ----------------------------------------------------------------------
# Shooting kernels for the Sturm-Liouville solver: classical RK4 with the
# step grid aligned to the cells of the piecewise-linear potential (the
# right-hand side is smooth inside each cell, so RK4 keeps full order).


def _q_lin(qs, u):
    """Piecewise-linear evaluation of the cell-sampled potential at
    fractional grid coordinate u in [0, ncells]."""
    n = qs.shape[0] - 1
    if u <= 0.0:
        return qs[0]
    if u >= n:
        return qs[n]
    i = int(u)
    f = u - i
    return qs[i] * (1.0 - f) + qs[i + 1] * f


def sl_shoot_raw(qs, lam, phi0, dphi0, steps_per_cell):
    """RK4 integration of phi'' = (q - lam) phi, z' = phi^2 across [0,1].

    Returns (phi(1), phi'(1), z(1), sign_changes).
    """
    qs = np.asarray(qs, dtype=float)
    ncell = qs.shape[0] - 1
    nstep = ncell * steps_per_cell
    h = 1.0 / nstep
    y0, y1, z = float(phi0), float(dphi0), 0.0
    osc = 0
    prev_sign = 0.0 if y0 == 0.0 else np.sign(y0)
    for i in range(nstep):
        u = i * (ncell / nstep)
        qa = _q_lin(qs, u)
        qm = _q_lin(qs, u + 0.5 * (ncell / nstep))
        qb = _q_lin(qs, u + (ncell / nstep))
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
        s = np.sign(y0)
        if s != 0.0 and prev_sign != 0.0 and s != prev_sign and i < nstep - 1:
            osc += 1
        if s != 0.0:
            prev_sign = s
    return y0, y1, z, osc


def sl_pruefer_raw(qs, lam, theta0, steps_per_cell, omega=1.0):
    """RK4 integration of the scaled phase equation
    theta' = omega cos^2 theta + ((lam - q)/omega) sin^2 theta.

    omega ~ sqrt(lam) keeps the rate bounded by ~sqrt(lam) instead of lam,
    so uniform steps stay accurate for large eigenvalues.  Zeros of phi are
    the crossings of multiples of pi for every omega > 0, so eigenvalue
    counting is omega-independent.  Returns theta(1).
    """
    qs = np.asarray(qs, dtype=float)
    ncell = qs.shape[0] - 1
    nstep = ncell * steps_per_cell
    h = 1.0 / nstep
    th = float(theta0)
    cn = ncell / nstep
    for i in range(nstep):
        u = i * cn
        qa = _q_lin(qs, u)
        qm = _q_lin(qs, u + 0.5 * cn)
        qb = _q_lin(qs, u + cn)

        s = math.sin(th); c = math.cos(th)
        k1 = omega * c * c + ((lam - qa) / omega) * s * s
        t2 = th + 0.5 * h * k1
        s = math.sin(t2); c = math.cos(t2)
        k2 = omega * c * c + ((lam - qm) / omega) * s * s
        t3 = th + 0.5 * h * k2
        s = math.sin(t3); c = math.cos(t3)
        k3 = omega * c * c + ((lam - qm) / omega) * s * s
        t4 = th + h * k3
        s = math.sin(t4); c = math.cos(t4)
        k4 = omega * c * c + ((lam - qb) / omega) * s * s
        th = th + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return th
