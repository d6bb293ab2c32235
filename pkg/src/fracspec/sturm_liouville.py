"""Direct Sturm-Liouville spectral problem -phi'' + q phi = lambda phi on
[0,1] by shooting: eigenvalues under selectable endpoint conditions, norming
constants, endpoint data, and the asymptotic bookkeeping the inverse pathway
needs.

Eigenvalues are located in two stages: a Pruefer phase integration (the
terminal phase theta(1; lambda) is strictly increasing in lambda and counts
oscillations, so no eigenvalue can be missed) brackets the n-th eigenvalue,
and a Brent solve on the terminal boundary residual of the tightly
integrated linear problem polishes it.
"""

import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from ._core import impl


class BCLeft(Enum):
    """Left endpoint condition; doubles as the shooting normalization."""

    DIRICHLET = "dirichlet"  # phi(0)=0, phi'(0)=1
    NEUMANN = "neumann"      # phi(0)=1, phi'(0)=0


class BCRight(Enum):
    DIRICHLET = "dirichlet"  # phi(1)=0
    NEUMANN = "neumann"      # phi'(1)=0


@dataclass(frozen=True)
class BoundaryPair:
    left: BCLeft
    right: BCRight

    @property
    def key(self):
        return f"{self.left.value[0]}{self.right.value[0]}"


DIRICHLET_DIRICHLET = BoundaryPair(BCLeft.DIRICHLET, BCRight.DIRICHLET)
NEUMANN_NEUMANN = BoundaryPair(BCLeft.NEUMANN, BCRight.NEUMANN)


class Potential:
    """Grid-sampled potential q(x) on [0,1] with piecewise-linear evaluation.

    The mean is the trapezoidal integral of the samples, cached on build.
    """

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("need at least 2 samples on [0,1]")
        if not np.all(np.isfinite(samples)):
            raise ValueError("potential samples must be finite")
        self.samples = samples
        self.grid = np.linspace(0.0, 1.0, samples.size)
        self.mean = float(np.trapezoid(samples, self.grid))

    @classmethod
    def zero(cls, n=257):
        return cls(np.zeros(n))

    @classmethod
    def constant(cls, c, n=257):
        return cls(np.full(n, float(c)))

    @classmethod
    def from_callable(cls, f, n=257):
        x = np.linspace(0.0, 1.0, n)
        return cls(np.array([f(xi) for xi in x], dtype=float))

    def __call__(self, x):
        return np.interp(x, self.grid, self.samples)

    def shifted(self, c):
        return Potential(self.samples + c)

    def max_abs(self):
        return float(np.max(np.abs(self.samples)))

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.grid, self.samples]),
                   fmt="%.17e", delimiter=",", header="x,q")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        x, q = data[:, 0], data[:, 1]
        if abs(x[0]) > 1e-12 or abs(x[-1] - 1.0) > 1e-12:
            raise ValueError("potential grid must cover [0,1]")
        dx = np.diff(x)
        if np.max(np.abs(dx - dx[0])) > 1e-9:
            raise ValueError("potential grid must be uniform")
        return cls(q)


class NormConvention(Enum):
    SHOOTING = "shooting"          # left-condition normalization
    ENDPOINT_ONE = "endpoint_one"  # phi(1) = 1


@dataclass
class SpectralData:
    """Spectral sequences of one potential under a boundary pair.

    rhos are the squared L2 norms of the eigenfunctions in the stated
    convention; endpoint_derivs hold phi'_n(1) for a Dirichlet right end and
    phi_n(1) for a Neumann right end; gammas = endpoint^2 / rho are
    normalization-invariant amplitudes.
    """

    lambdas: np.ndarray
    rhos: np.ndarray
    endpoint_derivs: np.ndarray
    gammas: np.ndarray
    bc: BoundaryPair
    convention: NormConvention = NormConvention.SHOOTING

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.rhos = np.asarray(self.rhos, dtype=float)
        self.endpoint_derivs = np.asarray(self.endpoint_derivs, dtype=float)
        self.gammas = np.asarray(self.gammas, dtype=float)
        if np.any(np.diff(self.lambdas) <= 0):
            raise ValueError("eigenvalues must be strictly increasing")

    @property
    def n(self):
        return self.lambdas.size

    def to_endpoint_one(self):
        """Re-express rho under the phi(1)=1 normalization (Neumann right)."""
        if self.convention is NormConvention.ENDPOINT_ONE:
            return self
        if self.bc.right is not BCRight.NEUMANN:
            raise ValueError("phi(1)=1 normalization needs phi(1) != 0, "
                             "i.e. a Neumann right end")
        v = self.endpoint_derivs  # phi_n(1) under shooting normalization
        return SpectralData(self.lambdas, self.rhos / v**2,
                            np.ones_like(v), self.gammas, self.bc,
                            NormConvention.ENDPOINT_ONE)

    def to_csv(self, path):
        header = (f"bc={self.bc.key},convention={self.convention.value}\n"
                  "n,lambda,rho,endpoint,gamma")
        body = np.column_stack([np.arange(1, self.n + 1), self.lambdas,
                                self.rhos, self.endpoint_derivs, self.gammas])
        np.savetxt(path, body, fmt="%.17e", delimiter=",", header=header)

    @classmethod
    def from_csv(cls, path):
        if isinstance(path, (str, bytes)):
            fh = open(path)
        else:
            fh = path
        with fh:
            meta = fh.readline().lstrip("# ").strip()
            fields = dict(kv.split("=") for kv in meta.split(","))
            rest = fh.read()
        data = np.loadtxt(io.StringIO(rest), delimiter=",", ndmin=2)
        bc = BoundaryPair(
            BCLeft.DIRICHLET if fields["bc"][0] == "d" else BCLeft.NEUMANN,
            BCRight.DIRICHLET if fields["bc"][1] == "d" else BCRight.NEUMANN,
        )
        return cls(data[:, 1], data[:, 2], data[:, 3], data[:, 4], bc,
                   NormConvention(fields["convention"]))


# Base RK4 resolution: steps per potential cell, with the step grid aligned
# to the cell boundaries so the piecewise-linear q stays smooth inside every
# step.  The terminal state is Richardson-extrapolated from resolutions
# (spc, 2*spc), which both estimates and removes the h^4 error; resolution
# doubles until the estimate meets _SHOOT_TOL relative to the state scale.
_STEPS_PER_CELL = 8
_MIN_STEPS = 768
_SHOOT_TOL = 1e-11


def _left_ic(left: BCLeft):
    return (0.0, 1.0) if left is BCLeft.DIRICHLET else (1.0, 0.0)


def _shoot_state(q, lam, left, tol=_SHOOT_TOL):
    """Extrapolated terminal state (phi(1), phi'(1), int phi^2, osc, err)."""
    phi0, dphi0 = _left_ic(left)
    cells = q.samples.size - 1
    spc = max(_STEPS_PER_CELL, -(-_MIN_STEPS // cells))
    v1, d1, z1, _ = impl.sl_shoot_raw(q.samples, lam, phi0, dphi0, spc)
    for _ in range(4):
        v2, d2, z2, osc = impl.sl_shoot_raw(q.samples, lam, phi0, dphi0, 2 * spc)
        v = (16.0 * v2 - v1) / 15.0
        d = (16.0 * d2 - d1) / 15.0
        z = (16.0 * z2 - z1) / 15.0
        scale = math.hypot(v, d) + 1e-30
        err = max(abs(v2 - v1), abs(d2 - d1)) / 15.0
        if err <= tol * scale:
            break
        spc *= 2
        v1, d1, z1 = v2, d2, z2
    return v, d, z, int(osc), err / scale


def shoot(q: Potential, lam, left: BCLeft):
    """Shooting solve of the initial value problem across [0,1].

    Returns (phi(1), phi'(1), oscillation_count) where the count is the
    number of interior zeros of phi.
    """
    lam = float(lam)
    if not math.isfinite(lam):
        raise ValueError(f"lambda must be finite, got {lam}")
    v, d, _, osc, _ = _shoot_state(q, lam, left)
    return v, d, osc


def _pruefer_theta1(q, lam, left: BCLeft, omega=1.0):
    """Terminal scaled-Pruefer phase theta(1; lambda); strictly increasing
    in lambda for fixed omega, crossing k*pi exactly at the zeros of phi."""
    theta0 = 0.0 if left is BCLeft.DIRICHLET else 0.5 * math.pi
    cells = q.samples.size - 1
    spc = max(4, -(-_MIN_STEPS // (2 * cells)),
              -(-int(6.0 * omega) // cells))
    return impl.sl_pruefer_raw(q.samples, lam, theta0, spc, omega)


def _pruefer_target(n, right: BCRight):
    if right is BCRight.DIRICHLET:
        return n * math.pi
    return (n - 0.5) * math.pi


def _residual(q, lam, bc: BoundaryPair):
    v, d, _, _, _ = _shoot_state(q, lam, bc.left)
    return v if bc.right is BCRight.DIRICHLET else d


def _bracket_eigenvalue(q, n, bc, q_bar, span0):
    """Bracket the n-th eigenvalue using the monotone Pruefer phase.

    The bracket is shrunk until it spans less than pi in terminal phase, so
    it contains exactly one zero of the boundary residual, and until it is
    narrow enough in lambda for the residual solve to start close.
    """
    lam_est, _ = asymptotic_model(n, q_bar, bc)
    target = _pruefer_target(n, bc.right)
    lo_lim = float(np.min(q.samples)) - 1.0
    hi_lim = 4.0 * max(n, 1) ** 2 * math.pi ** 2 + float(np.max(q.samples)) + 1.0
    omega = math.sqrt(max(lam_est, 1.0) + 2.0 * q.max_abs() + 10.0)
    span = span0
    lo, hi = lam_est - span, lam_est + span
    th_lo = th_hi = None
    for _ in range(60):
        lo = max(lo, lo_lim)
        th_lo = _pruefer_theta1(q, lo, bc.left, omega)
        th_hi = _pruefer_theta1(q, hi, bc.left, omega)
        if th_lo < target <= th_hi:
            break
        if th_lo >= target and lo <= lo_lim:
            raise RuntimeError(
                f"failed to bracket eigenvalue {n}: window floor {lo_lim}"
            )
        if th_lo >= target:
            lo -= span
        if th_hi < target:
            hi += span
        span *= 2.0
        if hi > hi_lim:
            raise RuntimeError(
                f"failed to bracket eigenvalue {n} within the lambda window "
                f"[{lo_lim}, {hi_lim}]"
            )
    else:
        raise RuntimeError(f"failed to bracket eigenvalue {n}")

    width_cap = max(0.5, 2e-4 * max(abs(lo), abs(hi)))
    for _ in range(80):
        if th_hi - th_lo <= 0.92 * math.pi and hi - lo <= width_cap:
            break
        mid = 0.5 * (lo + hi)
        th_m = _pruefer_theta1(q, mid, bc.left, omega)
        if th_m >= target:
            hi, th_hi = mid, th_m
        else:
            lo, th_lo = mid, th_m
    return lo, hi


def _refine_eigenvalue(q, n, bc, lo, hi):
    """Brent solve of the terminal boundary residual on a single-root bracket."""
    ra, rb = _residual(q, lo, bc), _residual(q, hi, bc)
    nudge = max(hi - lo, 1e-6)
    tries = 0
    while ra * rb > 0 and tries < 8:
        # terminal-phase error at the bracket ends can only misplace the
        # root by a sliver; push the ends outward symmetrically
        lo -= 0.5 * nudge
        hi += 0.5 * nudge
        ra, rb = _residual(q, lo, bc), _residual(q, hi, bc)
        tries += 1
    if ra * rb > 0:
        raise RuntimeError(f"no residual sign change around eigenvalue {n}")
    return brentq(lambda l: _residual(q, l, bc), lo, hi,
                  xtol=1e-12 * max(1.0, abs(hi)), rtol=1e-15)


def norming_and_endpoint(q: Potential, lam, left: BCLeft, right=None):
    """Norming constant rho = int phi^2 and endpoint datum for an eigenvalue.

    The endpoint datum is phi'(1) unless right=BCRight.NEUMANN, in which
    case it is phi(1).  When `right` is given the terminal residual is
    checked and a non-eigenvalue lambda raises ValueError.
    """
    v, d, rho, _, _ = _shoot_state(q, lam, left)
    scale = math.hypot(v, d)
    if right is not None:
        resid = v if right is BCRight.DIRICHLET else d
        if abs(resid) > 1e-6 * max(1.0, scale):
            raise ValueError(
                f"lambda={lam} is not an eigenvalue for this boundary pair "
                f"(terminal residual {resid:.2e})"
            )
        datum = d if right is BCRight.DIRICHLET else v
    else:
        datum = d
    return float(rho), float(datum)


def eigenvalues(q: Potential, bc: BoundaryPair, n_eigs: int) -> SpectralData:
    """The n_eigs smallest eigenvalues with norming data, by shooting."""
    if n_eigs < 1:
        raise ValueError("need n_eigs >= 1")
    q_bar = q.mean
    span0 = 2.0 * (q.max_abs() + abs(q_bar)) + 10.0
    lams = np.empty(n_eigs)
    rhos = np.empty(n_eigs)
    endpoints = np.empty(n_eigs)
    for n in range(1, n_eigs + 1):
        lo, hi = _bracket_eigenvalue(q, n, bc, q_bar, span0)
        lam = _refine_eigenvalue(q, n, bc, lo, hi)
        rho, datum = norming_and_endpoint(q, lam, bc.left, bc.right)
        lams[n - 1] = lam
        rhos[n - 1] = rho
        endpoints[n - 1] = datum
    gammas = endpoints**2 / rhos
    return SpectralData(lams, rhos, endpoints, gammas, bc,
                        NormConvention.SHOOTING)


def asymptotic_model(n, q_bar, bc: BoundaryPair):
    """Leading-order eigenvalue and amplitude for index n at mean level q_bar.

    Exact for constant potentials; used to initialize inversions and to
    extend recovered sequences beyond the fitted range.
    """
    if n < 1:
        raise ValueError("index must be >= 1")
    if bc.left is BCLeft.DIRICHLET and bc.right is BCRight.DIRICHLET:
        idx = float(n)
        gamma = 2.0 * (idx * math.pi) ** 2
    elif bc.left is BCLeft.NEUMANN and bc.right is BCRight.NEUMANN:
        idx = float(n - 1)
        gamma = 1.0 if n == 1 else 2.0
    elif bc.left is BCLeft.DIRICHLET and bc.right is BCRight.NEUMANN:
        idx = n - 0.5
        gamma = 2.0
    else:  # Neumann left, Dirichlet right
        idx = n - 0.5
        gamma = 2.0 * (idx * math.pi) ** 2
    lam = (idx * math.pi) ** 2 + q_bar
    return lam, gamma


def estimate_q_bar(lam_n, n, bc: BoundaryPair):
    """Mean-level estimate from the n-th eigenvalue, q_bar ~ lam_n - idx^2 pi^2."""
    lam0, _ = asymptotic_model(n, 0.0, bc)
    return float(lam_n) - lam0


def norming_identity_defect(q: Potential, lam, bc: BoundaryPair, h=None):
    """Relative defect of the eigenvalue-derivative norming identity.

    Dirichlet right end:  rho_n = dphi/dlambda(1) * phi'(1);
    Neumann right end:    rho_n = -d(phi')/dlambda(1) * phi(1).
    The lambda-derivative is taken by central differences, so this is an
    independent consistency check on (rho, endpoint) pairs.
    """
    if h is None:
        h = max(1e-5, 1e-7 * abs(lam))
    rho, datum = norming_and_endpoint(q, lam, bc.left, bc.right)
    vp, dp, _, _, _ = _shoot_state(q, lam + h, bc.left)
    vm, dm, _, _, _ = _shoot_state(q, lam - h, bc.left)
    if bc.right is BCRight.DIRICHLET:
        dot = (vp - vm) / (2.0 * h)
        pred = dot * datum
    else:
        dot = (dp - dm) / (2.0 * h)
        pred = -dot * datum
    return abs(pred - rho) / abs(rho)
