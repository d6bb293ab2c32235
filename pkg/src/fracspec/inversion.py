"""Recovery of the leading eigenvalue/amplitude pairs from a sampled
boundary trace by damped, regularized Gauss-Newton on the truncated kernel
sum  F(c, gamma)(t) = sum_j gamma_j K_alpha(t, lambda_j).

The eigenvalues are parametrized by their offsets from the known
asymptotic ladder, lambda_j = base_j + q_bar0 + c_j (base_j = j^2 pi^2 by
default), and the amplitudes are scaled internally by their asymptotic
values, so all unknowns are O(1) and the Tikhonov penalty can encode the
expected smoothness decay of the offsets.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .forward import ExcitationKind, ExcitationSignal, ResponseTrace, SampleSchedule
from .mittag_leffler import dlam_ml_e_neg, ml_e_neg

__all__ = [
    "SpectralParams", "TruncatedSVD", "Tikhonov", "FitConfig",
    "FitDiagnostics", "F_eval", "F_jacobian", "fit_gammas_linear",
    "fit_spectra", "dirichlet_series_fit",
]


def _default_base(n):
    return (np.arange(1, n + 1) * math.pi) ** 2


@dataclass
class SpectralParams:
    """Offset parametrization of the fitted spectral pairs."""

    c: np.ndarray
    gammas: np.ndarray
    q_bar0: float = 0.0
    base: np.ndarray = None
    gamma_prior: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.gammas = np.asarray(self.gammas, dtype=float)
        if self.base is None:
            self.base = _default_base(self.c.size)
        else:
            self.base = np.asarray(self.base, dtype=float)
        if self.gamma_prior is None:
            self.gamma_prior = 2.0 * (self.base + self.q_bar0)
            self.gamma_prior = np.where(np.abs(self.gamma_prior) < 1.0, 1.0,
                                        self.gamma_prior)
        else:
            self.gamma_prior = np.asarray(self.gamma_prior, dtype=float)
        if not (self.c.size == self.gammas.size == self.base.size):
            raise ValueError("c, gammas and base must have equal length")

    @property
    def n(self):
        return self.c.size

    @property
    def lambdas(self):
        return self.base + self.q_bar0 + self.c

    def replace(self, c=None, gammas=None):
        return SpectralParams(self.c if c is None else c,
                              self.gammas if gammas is None else gammas,
                              self.q_bar0, self.base, self.gamma_prior)

    @classmethod
    def asymptotic(cls, n, q_bar0=0.0, base=None, gamma_prior=None):
        """All-zero offsets with amplitudes at their asymptotic values."""
        p = cls(np.zeros(n), np.ones(n), q_bar0, base, gamma_prior)
        return p.replace(gammas=p.gamma_prior.copy())


@dataclass(frozen=True)
class TruncatedSVD:
    rank: int


@dataclass(frozen=True)
class Tikhonov:
    mu: float = None          # None -> discrepancy principle
    c_weight: float = 1.0     # scales the j^2 penalty on the offsets
    gamma_weight: float = 1.0  # scales the penalty on gamma/gamma_prior - 1


@dataclass
class FitConfig:
    regularization: object = field(default_factory=lambda: Tikhonov(1e-8))
    max_iters: int = 40
    max_halvings: int = 20
    noise_level: float = 0.0
    tau: float = 1.5           # discrepancy multiplier


@dataclass
class FitDiagnostics:
    residual_norms: list
    singular_values: np.ndarray
    converged: bool
    iterations: int
    message: str
    mu_used: float = None


def _mode_kernels(lambdas, alpha, big_t, times, kind, dlam=False):
    """(M, N) kernel matrix K_alpha(t_i, lambda_j) or its lambda-derivative."""
    lambdas = np.asarray(lambdas, dtype=float)
    times = np.asarray(times, dtype=float)
    if np.any(lambdas < 0):
        raise ValueError("kernel sum requires nonnegative eigenvalues")
    out = np.empty((times.size, lambdas.size))
    if kind is ExcitationKind.STEP:
        ta = times ** alpha
        sa = np.where(times > big_t, times - big_t, 0.0) ** alpha
        for j, lam in enumerate(lambdas):
            if not dlam:
                out[:, j] = ta * ml_e_neg(alpha, alpha + 1.0, lam * ta) \
                    - sa * ml_e_neg(alpha, alpha + 1.0, lam * sa)
            else:
                out[:, j] = ta * dlam_ml_e_neg(alpha, alpha + 1.0, lam, ta) \
                    - sa * dlam_ml_e_neg(alpha, alpha + 1.0, lam, sa)
    elif kind is ExcitationKind.DELTA:
        if np.any(times <= big_t):
            raise ValueError("impulse kernels are defined for t > T only")
        tt = times - big_t
        ta = tt ** alpha
        pre = tt ** (alpha - 1.0)
        for j, lam in enumerate(lambdas):
            if not dlam:
                out[:, j] = pre * ml_e_neg(alpha, alpha, lam * ta)
            else:
                out[:, j] = pre * dlam_ml_e_neg(alpha, alpha, lam, ta)
    else:
        raise ValueError(f"unsupported excitation kind for F: {kind}")
    return out


def F_eval(p: SpectralParams, alpha, big_t, schedule: SampleSchedule,
           kind=ExcitationKind.STEP) -> ResponseTrace:
    """Truncated kernel sum sum_j gamma_j K_alpha(t, lambda_j)."""
    K = _mode_kernels(p.lambdas, alpha, big_t, schedule.times, kind)
    return ResponseTrace(schedule, K @ p.gammas)


def F_jacobian(p: SpectralParams, alpha, big_t, schedule: SampleSchedule,
               kind=ExcitationKind.STEP):
    """M x 2N Jacobian: columns d/d lambda_j (= d/d c_j) then d/d gamma_j."""
    K = _mode_kernels(p.lambdas, alpha, big_t, schedule.times, kind)
    dK = _mode_kernels(p.lambdas, alpha, big_t, schedule.times, kind, dlam=True)
    return np.hstack([dK * p.gammas[None, :], K])


def fit_gammas_linear(trace: ResponseTrace, lambdas, alpha, big_t,
                      kind=ExcitationKind.STEP):
    """Least-squares amplitudes for fixed eigenvalues (linear stage)."""
    K = _mode_kernels(lambdas, alpha, big_t, trace.schedule.times, kind)
    g, *_ = np.linalg.lstsq(K, trace.values, rcond=None)
    return g


def _scaled_jacobian(p, alpha, big_t, schedule, kind):
    """Jacobian in the internal O(1) variables (c_j, gamma_j/prior_j)."""
    J = F_jacobian(p, alpha, big_t, schedule, kind)
    n = p.n
    J[:, n:] *= p.gamma_prior[None, :]
    return J


def _theta_to_params(theta, p0):
    n = p0.n
    return p0.replace(c=theta[:n], gammas=theta[n:] * p0.gamma_prior)


def _params_to_theta(p):
    return np.concatenate([p.c, p.gammas / p.gamma_prior])


def _penalty_matrix(p, reg):
    n = p.n
    j = np.arange(1, n + 1, dtype=float)
    w = np.concatenate([reg.c_weight * j, reg.gamma_weight * np.ones(n)])
    return w


def _solve_step(J, r, reg, theta, theta_prior, p):
    """Regularized Gauss-Newton step in the scaled variables."""
    if isinstance(reg, TruncatedSVD):
        u, s, vt = np.linalg.svd(J, full_matrices=False)
        rank = min(reg.rank, s.size)
        keep = s[:rank] > s[0] * 1e-15 if s.size else []
        coef = (u[:, :rank].T @ (-r))[keep] / s[:rank][keep]
        return vt[:rank][keep].T @ coef
    w = _penalty_matrix(p, reg)
    mu = reg.mu
    A = np.vstack([J, mu * np.diag(w)])
    b = np.concatenate([-r, -mu * w * (theta - theta_prior)])
    step, *_ = np.linalg.lstsq(A, b, rcond=None)
    return step


def _objective(r, reg, theta, theta_prior, p):
    if isinstance(reg, TruncatedSVD):
        return float(r @ r)
    w = _penalty_matrix(p, reg)
    d = w * (theta - theta_prior)
    return float(r @ r + reg.mu ** 2 * (d @ d))


def _gauss_newton(trace, alpha, big_t, cfg, init, kind, reg):
    times_trace = trace.values
    p = init
    theta = _params_to_theta(p)
    theta_prior = _params_to_theta(
        init.replace(c=np.zeros(init.n), gammas=init.gamma_prior))
    r = F_eval(p, alpha, big_t, trace.schedule, kind).values - times_trace
    residual_norms = [float(np.linalg.norm(r))]
    obj = _objective(r, reg, theta, theta_prior, p)
    data_scale = 1.0 + float(np.linalg.norm(times_trace))
    fail_streak = 0
    converged = False
    message = "max iterations reached"
    J = None
    for it in range(cfg.max_iters):
        if residual_norms[-1] < 1e-13 * data_scale:
            converged = True
            message = "residual at roundoff"
            break
        J = _scaled_jacobian(p, alpha, big_t, trace.schedule, kind)
        step = _solve_step(J, r, reg, theta, theta_prior, p)
        if np.linalg.norm(step) < 1e-13 * (1.0 + np.linalg.norm(theta)):
            converged = True
            message = "stationary point"
            break
        beta = 1.0
        accepted = False
        for _ in range(cfg.max_halvings):
            theta_new = theta + beta * step
            p_new = _theta_to_params(theta_new, p)
            if np.any(p_new.lambdas < 0):
                beta *= 0.5
                continue
            r_new = F_eval(p_new, alpha, big_t, trace.schedule, kind).values \
                - times_trace
            obj_new = _objective(r_new, reg, theta_new, theta_prior, p_new)
            if obj_new < obj:
                accepted = True
                break
            beta *= 0.5
        if not accepted:
            fail_streak += 1
            if fail_streak >= 5:
                message = "divergence: 5 consecutive rejected steps"
                break
            continue
        fail_streak = 0
        rel_move = np.linalg.norm(beta * step) / (1.0 + np.linalg.norm(theta))
        theta, p, r, obj = theta_new, p_new, r_new, obj_new
        residual_norms.append(float(np.linalg.norm(r)))
        if rel_move < 1e-13:
            converged = True
            message = "step size below tolerance"
            break
    if J is None:
        J = _scaled_jacobian(p, alpha, big_t, trace.schedule, kind)
    sv = np.linalg.svd(J, compute_uv=False)
    diag = FitDiagnostics(residual_norms, sv, converged, len(residual_norms) - 1,
                          message,
                          mu_used=getattr(reg, "mu", None))
    return p, diag


def fit_spectra(trace: ResponseTrace, alpha, big_t, n_modes, cfg: FitConfig,
                init: SpectralParams, kind=ExcitationKind.STEP):
    """Damped Gauss-Newton fit of n_modes (lambda_j, gamma_j) pairs.

    Returns (params, diagnostics); diagnostics carry the per-iteration
    residual norms and the singular values of the last scaled Jacobian.
    When the Tikhonov weight is left unset, it is chosen by the discrepancy
    principle against cfg.noise_level.
    """
    if init.n != n_modes:
        raise ValueError("init must carry n_modes parameter pairs")
    if trace.schedule.m < 2 * n_modes:
        warnings.warn("fewer than 2*n_modes samples: the fit is "
                      "underdetermined", stacklevel=2)
    reg = cfg.regularization
    if isinstance(reg, Tikhonov) and reg.mu is None:
        return _fit_discrepancy(trace, alpha, big_t, cfg, init, kind, reg)
    return _gauss_newton(trace, alpha, big_t, cfg, init, kind, reg)


def _fit_discrepancy(trace, alpha, big_t, cfg, init, kind, reg):
    """Largest Tikhonov weight whose residual meets tau * noise * sqrt(M)."""
    target = cfg.tau * cfg.noise_level * math.sqrt(trace.schedule.m)
    best = None
    mu = 1.0
    for _ in range(18):
        reg_mu = Tikhonov(mu, reg.c_weight, reg.gamma_weight)
        p, diag = _gauss_newton(trace, alpha, big_t, cfg, init, kind, reg_mu)
        best = (p, diag)
        if diag.residual_norms[-1] <= max(target, 1e-14):
            return best
        mu /= 4.0
    warnings.warn("discrepancy principle did not reach the target residual",
                  stacklevel=2)
    return best


def _coupling_integral(excitation: ExcitationSignal, lam):
    """I(lam) = int_0^T exp(lam (tau - T)) a(tau) dtau, computed without
    forming the exponentially large unscaled coupling."""
    T = excitation.big_t
    if excitation.kind is ExcitationKind.STEP:
        if lam < 1e-12:
            return T
        return -math.expm1(-lam * T) / lam
    # smooth excitation: geometric panels peaked at tau = T
    edges = [T]
    width = min(T, 10.0 / max(lam, 1.0 / T))
    e = T - width
    while e > 1e-12 * T:
        edges.append(e)
        e = T - (T - e) * 3.0
    edges.append(0.0)
    edges = np.array(sorted(set(edges)))
    from .forward import _panel_nodes
    nodes, w = _panel_nodes(edges)
    return float(np.dot(w, np.exp(lam * (nodes - T)) * excitation(nodes)))


def dirichlet_series_fit(trace: ResponseTrace, big_t, n_modes,
                         excitation: ExcitationSignal = None,
                         init: SpectralParams = None,
                         cfg: FitConfig = None):
    """Classical-diffusion special case: fit b(t) = sum_j A_j e^{-lam_j (t-T)}
    and invert the excitation coupling A_j = gamma_j * I(lam_j) for the
    amplitudes.  The shifted form keeps every number in range: the raw
    coupling int_0^T e^{lam tau} a dtau grows like e^{lam T} and would
    overflow near lam_10 T ~ 10^3.

    Modes beyond the numerically identifiable rank of the design matrix are
    frozen at their initialization (with a warning).
    """
    if excitation is None:
        excitation = ExcitationSignal(ExcitationKind.STEP, big_t)
    if init is None:
        init = SpectralParams.asymptotic(n_modes)
    if cfg is None:
        cfg = FitConfig(regularization=Tikhonov(1e-9))
    if np.allclose(trace.values, 0.0):
        return init.replace(gammas=np.zeros(n_modes)), FitDiagnostics(
            [0.0], np.zeros(2 * n_modes), True, 0, "zero trace")

    # exponential-sum stage in the impulse parametrization
    amp0 = fit_gammas_linear(trace, init.lambdas, 1.0, big_t,
                             ExcitationKind.DELTA)
    K = _mode_kernels(init.lambdas, 1.0, big_t, trace.schedule.times,
                      ExcitationKind.DELTA)
    sv = np.linalg.svd(K, compute_uv=False)
    rank = int(np.sum(sv > sv[0] * 1e-12))
    if rank < n_modes:
        warnings.warn(
            f"only {rank} of {n_modes} requested modes are numerically "
            "identifiable; trailing modes stay at initialization",
            stacklevel=2)
    init_delta = init.replace(gammas=amp0)
    p, diag = _gauss_newton(trace, 1.0, big_t, cfg, init_delta,
                            ExcitationKind.DELTA, cfg.regularization)
    couplings = np.array([_coupling_integral(excitation, lam)
                          for lam in p.lambdas])
    gammas = p.gammas / couplings
    return p.replace(gammas=gammas), diag
