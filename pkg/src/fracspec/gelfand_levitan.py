"""Potential reconstruction from spectral data via the transformation
kernel K(x,t) on the triangle 0 <= t <= x <= 1.

The kernel maps zero-potential solutions onto solutions for the target
potential q and satisfies

    K_tt - K_xx + (q(x) - q_ref(t)) K = 0,
    K(x, x) = (1/2) int_0^x (q - q_ref),     plus either
    K(x, 0) = 0                (sine machinery, Dirichlet-left data) or
    K_t(x, 0) = 0              (cosine machinery, Neumann-left data).

Spectral data determine the Cauchy pair K(1,.), K_x(1,.) through moment
equations obtained by evaluating the transform and its x-derivative at
x = 1; the kernel is then integrated from x = 1 toward x = 0 with a
unit-Courant leapfrog (exact for the plain wave operator), and the
potential is read off the diagonal, q = q_ref + 2 dK(x,x)/dx.  Since the
interior equation itself involves the unknown q, the triangle solve is
iterated to a fixed point (successive approximation).
"""

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .sturm_liouville import (DIRICHLET_DIRICHLET, NEUMANN_NEUMANN, Potential,
                              asymptotic_model, estimate_q_bar)

_GX200, _GW200 = np.polynomial.legendre.leggauss(200)
_T_NODES = 0.5 * (_GX200 + 1.0)
_T_WEIGHTS = 0.5 * _GW200


class GLVariant(Enum):
    """Left-endpoint machinery: sine kernels (phi(0)=0, phi'(0)=1) or cosine
    kernels (phi(0)=1, phi'(0)=0)."""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


class ReconstructionMode(Enum):
    TWO_SPECTRA = "two_spectra"
    LAMBDA_RHO = "lambda_rho"
    LAMBDA_ENDPOINT = "lambda_endpoint"
    COMBINED_RATIO = "combined_ratio"


@dataclass
class ReconstructionInput:
    """Spectral data for one potential: eigenvalues plus one companion
    sequence selected by `mode` (norming constants, endpoint data, the
    ratio endpoint^2/rho, or a second spectrum)."""

    lambdas: np.ndarray
    data: np.ndarray
    mode: ReconstructionMode
    variant: GLVariant = GLVariant.DIRICHLET
    reference: Potential = None

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        if self.lambdas.size < 3:
            raise ValueError("need at least 3 spectral pairs")
        if self.lambdas.size != self.data.size:
            raise ValueError("eigenvalue and data sequences must match")
        if self.reference is None:
            self.reference = Potential.zero()


@dataclass
class BoundaryExpansion:
    """Truncated expansion of a boundary trace on t in [0,1].

    Sine machinery uses {t, sin(pi t), ..., sin((N-1) pi t)} (vanishing at
    t=0, free at t=1); cosine machinery uses {cos((k-1) pi t)} (flat at
    t=0, unconstrained values)."""

    coeffs: np.ndarray
    variant: GLVariant

    def basis(self, t):
        t = np.asarray(t, dtype=float)
        n = self.coeffs.size
        cols = np.empty((t.size, n))
        if self.variant is GLVariant.DIRICHLET:
            cols[:, 0] = t
            for k in range(1, n):
                cols[:, k] = np.sin(k * math.pi * t)
        else:
            for k in range(n):
                cols[:, k] = np.cos(k * math.pi * t)
        return cols

    def basis_d2(self, t):
        t = np.asarray(t, dtype=float)
        n = self.coeffs.size
        cols = np.zeros((t.size, n))
        if self.variant is GLVariant.DIRICHLET:
            for k in range(1, n):
                cols[:, k] = -(k * math.pi) ** 2 * np.sin(k * math.pi * t)
        else:
            for k in range(n):
                cols[:, k] = -(k * math.pi) ** 2 * np.cos(k * math.pi * t)
        return cols

    def __call__(self, t):
        return self.basis(np.atleast_1d(t)) @ self.coeffs

    def second_derivative(self, t):
        return self.basis_d2(np.atleast_1d(t)) @ self.coeffs

    @property
    def value_at_1(self):
        return float(self(np.array([1.0]))[0])


def _sqrt_lam(lam):
    return np.sqrt(np.maximum(np.asarray(lam, dtype=float), 0.0))


def _cos_rt(lam, t):
    """cos(sqrt(lam) t), smooth through lam = 0."""
    return np.cos(np.outer(_sqrt_lam(lam), t))


def _sinc_rt(lam, t):
    """sin(sqrt(lam) t)/sqrt(lam), smooth through lam = 0 (limit t)."""
    lam = np.asarray(lam, dtype=float)
    b = _sqrt_lam(lam)
    arg = np.outer(b, t)
    small = b < 1e-8
    out = np.empty_like(arg)
    if small.any():
        out[small] = t[None, :] * np.ones((small.sum(), 1))
    if (~small).any():
        out[~small] = np.sin(arg[~small]) / b[~small, None]
    return out


def _moment_matrix(expansion_template, lambdas):
    """Rows: integral of basis_k against the transform kernel at each
    eigenvalue (sin(sqrt(lam) t) for the sine machinery, cos(sqrt(lam) t)
    for the cosine one), by 200-point Gauss quadrature."""
    t = _T_NODES
    w = _T_WEIGHTS
    B = expansion_template.basis(t)
    if expansion_template.variant is GLVariant.DIRICHLET:
        kernels = _sinc_rt(lambdas, t) * _sqrt_lam(lambdas)[:, None]
        # sin(sqrt(lam) t); at lam=0 the kernel vanishes identically
    else:
        kernels = _cos_rt(lambdas, t)
    return (kernels * w[None, :]) @ B


def _lstsq_expansion(template, lambdas, rhs, rcond=1e-10):
    M = _moment_matrix(template, lambdas)
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > sv[0] * rcond)) if sv.size else 0
    if rank < template.coeffs.size:
        warnings.warn(
            f"moment system rank {rank} < expansion size "
            f"{template.coeffs.size}; reducing the expansion", stacklevel=2)
        coeffs, *_ = np.linalg.lstsq(M, rhs, rcond=rcond)
    else:
        coeffs, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return BoundaryExpansion(coeffs, template.variant)


def _weighted_cos_moment(expansion, lambdas):
    """int_0^1 t * Ktrace(t) cos(sqrt(lam) t) dt for each eigenvalue."""
    t = _T_NODES
    vals = expansion(t)
    kernels = _cos_rt(lambdas, t)
    return kernels @ (_T_WEIGHTS * t * vals)


def rho_to_endpoint(lambdas, rhos, trace: BoundaryExpansion):
    """Endpoint derivatives from norming constants (sine machinery):

        phi'_n(1) = 2 lam_n rho_n / [cos sqrt(lam_n)
                                     + int_0^1 t K(1,t) cos(sqrt(lam_n) t) dt]

    Entries with a vanishing denominator are skipped (NaN) and reported in
    the returned index list.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    rhos = np.asarray(rhos, dtype=float)
    den = np.cos(_sqrt_lam(lambdas)) + _weighted_cos_moment(trace, lambdas)
    skipped = [int(i) for i in np.nonzero(np.abs(den) < 1e-10)[0]]
    out = np.full(lambdas.shape, np.nan)
    ok = np.abs(den) >= 1e-10
    out[ok] = 2.0 * lambdas[ok] * rhos[ok] / den[ok]
    return out, skipped


def endpoint_to_rho(lambdas, endpoints, trace: BoundaryExpansion):
    """Inverse conversion: rho_n = phi'_n(1) D_n / (2 lam_n)."""
    lambdas = np.asarray(lambdas, dtype=float)
    endpoints = np.asarray(endpoints, dtype=float)
    den = np.cos(_sqrt_lam(lambdas)) + _weighted_cos_moment(trace, lambdas)
    return endpoints * den / (2.0 * lambdas)


def _phi_x1_lambda_derivative(lambdas, trace, normal):
    """d/dlambda of phi_x(1; lambda) for the cosine machinery, used to
    convert amplitude data gamma_n = phi(1)^2/rho into phi(1) values via
    rho_n = -phid_x(1) phi(1)."""
    lam = np.asarray(lambdas, dtype=float)
    b = _sqrt_lam(lam)
    t = _T_NODES
    # d/dl[-sqrt(l) sin(sqrt l)] = -(sin sqrt(l))/(2 sqrt l) - (cos sqrt l)/2
    ssc = np.where(b < 1e-8, 1.0 - lam / 6.0, np.sin(b) / np.where(b < 1e-8, 1.0, b))
    term = -0.5 * ssc - 0.5 * np.cos(b)
    k11 = trace.value_at_1
    term = term - k11 * 0.5 * ssc
    if normal is not None:
        vals = normal(t)
        # d/dl int Kx(1,t) cos(sqrt l t) dt = -int Kx t sin(sqrt l t)/(2 sqrt l)
        sinc_t = _sinc_rt(lam, t)
        term = term - 0.5 * (sinc_t @ (_T_WEIGHTS * t * vals))
    return term


def boundary_data_from_spectra(inp: ReconstructionInput, n_expansion=None):
    """Cauchy data for the kernel on x = 1 from the spectral sequences.

    Returns (trace, normal) boundary expansions.  The moment equations come
    from the transform and its x-derivative at x = 1 with the reference's
    closed-form solutions; the reference's own contribution (the asymptotic
    main term of the data) is subtracted on the right-hand sides, so the
    solve sees only the small spectral shifts.
    """
    if inp.reference.max_abs() > 1e-12:
        raise NotImplementedError(
            "moment equations are implemented for the zero reference")
    n = inp.lambdas.size
    if n_expansion is None:
        n_expansion = n
    if n_expansion > n:
        raise ValueError("expansion cannot exceed the number of data pairs")
    lam = inp.lambdas
    b = _sqrt_lam(lam)
    template = BoundaryExpansion(np.zeros(n_expansion), inp.variant)

    if inp.variant is GLVariant.DIRICHLET:
        rhs_trace = -np.sin(b)
        trace = _lstsq_expansion(template, lam, rhs_trace)
        k11 = trace.value_at_1
        if inp.mode is ReconstructionMode.LAMBDA_ENDPOINT:
            d = inp.data
        elif inp.mode is ReconstructionMode.LAMBDA_RHO:
            d, skipped = rho_to_endpoint(lam, inp.data, trace)
            if skipped:
                raise ValueError(f"conversion denominator vanished at {skipped}")
        elif inp.mode is ReconstructionMode.COMBINED_RATIO:
            den = np.cos(b) + _weighted_cos_moment(trace, lam)
            d = inp.data * den / (2.0 * lam)
        elif inp.mode is ReconstructionMode.TWO_SPECTRA:
            mu = np.asarray(inp.data, dtype=float)
            bm = _sqrt_lam(mu)
            rhs_normal = -bm * np.cos(bm) - k11 * np.sin(bm)
            normal = _lstsq_expansion(template, mu, rhs_normal)
            return trace, normal
        else:
            raise ValueError(f"unsupported mode {inp.mode}")
        rhs_normal = b * (d - np.cos(b)) - k11 * np.sin(b)
        normal = _lstsq_expansion(template, lam, rhs_normal)
        return trace, normal

    # cosine machinery: data are Neumann-Neumann spectra plus phi(1) info
    mu = lam
    bm = b
    if inp.mode is ReconstructionMode.LAMBDA_ENDPOINT:
        v = inp.data
        trace = _lstsq_expansion(template, mu, v - np.cos(bm))
        k11 = trace.value_at_1
        rhs_normal = bm * np.sin(bm) - k11 * np.cos(bm)
        normal = _lstsq_expansion(template, mu, rhs_normal)
        return trace, normal
    if inp.mode in (ReconstructionMode.COMBINED_RATIO,
                    ReconstructionMode.LAMBDA_RHO):
        trace = BoundaryExpansion(np.zeros(n_expansion), inp.variant)
        normal = None
        v = None
        for _ in range(6):
            phid = _phi_x1_lambda_derivative(mu, trace, normal)
            if inp.mode is ReconstructionMode.COMBINED_RATIO:
                v = -inp.data * phid  # gamma_n = -phi(1)/phid_x(1)
            else:
                v = np.sign(-phid) * np.sqrt(np.abs(-inp.data * phid)) \
                    * np.sign(np.cos(bm) + 0.0)
                # rho_n = -phid * phi(1): phi(1) = -rho/phid, sign from the
                # asymptotic alternation
                v = -inp.data / phid
            trace = _lstsq_expansion(template, mu, v - np.cos(bm))
            k11 = trace.value_at_1
            rhs_normal = bm * np.sin(bm) - k11 * np.cos(bm)
            normal = _lstsq_expansion(template, mu, rhs_normal)
        return trace, normal
    raise ValueError(f"unsupported mode {inp.mode} for the cosine machinery")


@dataclass
class GLKernel:
    """Kernel values on the uniform triangular grid t_i <= x_m, plus the
    boundary expansions that generated them."""

    values: np.ndarray  # (n+1, n+1), entry [m, i] = K(x_m, t_i), i <= m
    h: float
    trace: BoundaryExpansion
    normal: BoundaryExpansion

    def diagonal(self):
        return np.diagonal(self.values).copy()


@dataclass
class SweepDiagnostics:
    diag_changes: list
    sweeps: int
    converged: bool


def solve_kernel_and_potential(trace: BoundaryExpansion,
                               normal: BoundaryExpansion,
                               reference: Potential = None,
                               h=1.0 / 256.0, max_sweeps=40, tol=1e-10):
    """Integrate the kernel from x = 1 to x = 0 and read off the potential.

    Each sweep solves the linear hyperbolic problem with the potential
    frozen at the previous iterate (starting from the reference shifted by
    the mean encoded in K(1,1)), then updates q = q_ref + 2 dK(x,x)/dx.
    Aborts with the best iterate if the diagonal update grows for three
    consecutive sweeps.
    """
    if reference is None:
        reference = Potential.zero()
    n = int(round(1.0 / h))
    h = 1.0 / n
    tgrid = np.linspace(0.0, 1.0, n + 1)
    q_ref = reference(tgrid)
    k1 = trace(tgrid)
    kx1 = normal(tgrid)
    ktt1 = trace.second_derivative(tgrid)
    neumann_base = trace.variant is GLVariant.NEUMANN

    mean_jump = 2.0 * k1[-1]  # 2 K(1,1) = int (q - q_ref)
    q_cur = q_ref + mean_jump
    best = None
    changes = []
    grow_streak = 0
    for sweep in range(max_sweeps):
        K = np.zeros((n + 1, n + 1))
        K[n, :] = k1
        c_top = q_cur[-1] - q_ref
        K[n - 1, :n] = (k1 - h * kx1 + 0.5 * h * h * (ktt1 + c_top * k1))[:n]
        if not neumann_base:
            K[n - 1, 0] = 0.0
        for m in range(n - 1, 0, -1):
            qm = q_cur[m]
            i = np.arange(1, m)
            K[m - 1, 1:m] = (2.0 * K[m, 1:m] - K[m + 1, 1:m]
                             + (K[m, 2:m + 1] - 2.0 * K[m, 1:m] + K[m, 0:m - 1])
                             + h * h * (qm - q_ref[1:m]) * K[m, 1:m])
            if neumann_base:
                K[m - 1, 0] = (2.0 * K[m, 0] - K[m + 1, 0]
                               + 2.0 * (K[m, 1] - K[m, 0])
                               + h * h * (qm - q_ref[0]) * K[m, 0])
            else:
                K[m - 1, 0] = 0.0
        diag = np.diagonal(K).copy()
        dq = np.gradient(diag, h, edge_order=2)
        q_new = q_ref + 2.0 * dq
        change = float(np.max(np.abs(q_new - q_cur)))
        changes.append(change)
        if best is None or change <= min(changes):
            best = (K, q_new)
        if change < tol * (1.0 + np.max(np.abs(q_new))):
            q_cur = q_new
            kern = GLKernel(K, h, trace, normal)
            return kern, Potential(q_new), SweepDiagnostics(changes, sweep + 1, True)
        if len(changes) >= 2 and change > changes[-2]:
            grow_streak += 1
            if grow_streak >= 3:
                warnings.warn("diagonal update diverging; returning the "
                              "best iterate", stacklevel=2)
                K_b, q_b = best
                kern = GLKernel(K_b, h, trace, normal)
                return kern, Potential(q_b), SweepDiagnostics(changes, sweep + 1, False)
        else:
            grow_streak = 0
        q_cur = q_new
    kern = GLKernel(K, h, trace, normal)
    return kern, Potential(q_cur), SweepDiagnostics(changes, max_sweeps, False)


def extend_with_asymptotics(inp: ReconstructionInput, n_total):
    """Append asymptotic spectral pairs beyond the supplied data, using the
    mean level estimated from the last supplied eigenvalue."""
    n = inp.lambdas.size
    if n_total <= n:
        return inp
    bc = DIRICHLET_DIRICHLET if inp.variant is GLVariant.DIRICHLET \
        else NEUMANN_NEUMANN
    q_bar = estimate_q_bar(inp.lambdas[-1], n, bc)
    lam_ext = []
    dat_ext = []
    for k in range(n + 1, n_total + 1):
        lam_k, gamma_k = asymptotic_model(k, q_bar, bc)
        lam_ext.append(lam_k)
        if inp.mode is ReconstructionMode.LAMBDA_ENDPOINT:
            if inp.variant is GLVariant.DIRICHLET:
                dat_ext.append((-1.0) ** k)
            else:
                dat_ext.append((-1.0) ** (k - 1))
        elif inp.mode is ReconstructionMode.COMBINED_RATIO:
            dat_ext.append(gamma_k)
        elif inp.mode is ReconstructionMode.LAMBDA_RHO:
            if inp.variant is GLVariant.DIRICHLET:
                dat_ext.append(1.0 / (2.0 * (lam_k - q_bar)))
            else:
                dat_ext.append(1.0 if k == 1 else 0.5)
        else:
            raise ValueError("cannot extend a second-spectrum input")
    return ReconstructionInput(
        np.concatenate([inp.lambdas, lam_ext]),
        np.concatenate([inp.data, dat_ext]),
        inp.mode, inp.variant, inp.reference)


def reconstruct_potential(inp: ReconstructionInput, n_expansion=None,
                          n_extend=None, h=1.0 / 256.0):
    """Full reconstruction: moment solve for the Cauchy data, triangle
    sweep iteration, potential from the kernel diagonal."""
    if n_extend is not None:
        inp = extend_with_asymptotics(inp, n_extend)
    trace, normal = boundary_data_from_spectra(inp, n_expansion)
    return solve_kernel_and_potential(trace, normal, inp.reference, h=h)
