"""Continuous-side diagnostics: heat kernel, normalizing sequences, and the
optimal convergence-rate exponents.

The normalizing sequences are defined through the space-time window
integral of the heat kernel,

    A(z, r) = int_{I(h,r)} int_{x0-eps}^{x0+eps} p_{s+h^2-r}(y - z) dy ds,

with time windows I(t0) = [t0, t0+eps+h^2] and
I(h,r) = [max(r-h^2, t0), min(r, t0+eps)]. The white-noise normalizer is

    m_hat^2(h) = h^-4 int_{I(t0)} int_R A(z, r)^2 dz dr,

and the Riesz-kernel normalizer replaces the plain z-integral by the
double integral against |z1 - z2|^-beta. Both reduce through Plancherel
to a 2-D quadrature over (xi, r): the spatial transform of A factors into
2 sin(eps*xi)/xi times a closed-form time integral of the Gaussian
symbol, and the Riesz kernel contributes the spectral weight
c(beta) |xi|^(beta-1) with c(beta) = 2 Gamma(1-beta) sin(pi beta / 2).
Slow real-space quadratures of the same quantities are kept as oracles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erf, gamma as gamma_fn

from .errors import QuadratureError, ValidationError

__all__ = [
    "HeatKernelParams",
    "NormalizerQuery",
    "RateExponents",
    "heat_kernel",
    "m_hat_sq",
    "m_sq_riesz",
    "m_hat_sq_realspace",
    "m_sq_riesz_realspace",
    "riesz_constant",
    "rate_exponents",
    "loglog_slope",
]

_SQRT2 = math.sqrt(2.0)

# Adaptive quadrature tolerances: relative 1e-7 overall is the target; the
# inner xi-integral runs tighter so the outer r-integral sees smooth data.
_INNER_EPSREL = 1e-9
_OUTER_EPSREL = 1e-8
_QUAD_LIMIT = 800


@dataclass(frozen=True)
class HeatKernelParams:
    """diffusivity is the coefficient of the Laplacian in the generator;
    the default 1/2 gives the N(0, t) density."""

    diffusivity: float = 0.5

    def __post_init__(self):
        if not self.diffusivity > 0:
            raise ValidationError("diffusivity must be positive")


DEFAULT_HEAT_KERNEL = HeatKernelParams()


def heat_kernel(x: float, t: float, params: HeatKernelParams = DEFAULT_HEAT_KERNEL):
    """Gaussian kernel (2 pi c t)^(-1/2) exp(-x^2 / (2 c t)) with
    c = 2 * diffusivity; for diffusivity 1/2 this is the N(0, t) density."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValidationError("heat kernel requires t > 0")
    c = 2.0 * params.diffusivity
    x = np.asarray(x, dtype=float)
    val = np.exp(-x * x / (2.0 * c * t)) / np.sqrt(2.0 * math.pi * c * t)
    if val.ndim == 0:
        return float(val)
    return val


@dataclass(frozen=True)
class NormalizerQuery:
    """Parameters of a normalizer evaluation.

    eps must equal h**rho; beta is None for space-time white noise and in
    (0, 1) for the Riesz-kernel spatial covariance. Only d = 1 is
    supported. The integrals are invariant under shifting t0 (the kernel
    is time homogeneous), so t0 only matters for bookkeeping.
    """

    h: float
    rho: float
    eps: float
    t0: float = 0.0
    beta: float | None = None
    d: int = 1

    def __post_init__(self):
        if not self.h > 0:
            raise ValidationError("h must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValidationError("rho must lie in (0, 1)")
        expected = self.h ** self.rho
        if abs(self.eps - expected) > 1e-9 * expected:
            raise ValidationError(
                f"eps = {self.eps:g} does not equal h^rho = {expected:g}")
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise ValidationError("beta must lie in (0, 1)")
        if self.t0 < 0:
            raise ValidationError("t0 must be non-negative")
        if self.d != 1:
            raise ValidationError("only d = 1 is supported")

    @classmethod
    def white(cls, h: float, rho: float = 8.0 / 9.0, t0: float = 0.0) -> "NormalizerQuery":
        return cls(h=h, rho=rho, eps=h ** rho, t0=t0, beta=None)

    @classmethod
    def riesz(cls, h: float, beta: float, rho: float | None = None,
              t0: float = 0.0) -> "NormalizerQuery":
        if rho is None:
            rho = 8.0 / (12.0 - beta)
        return cls(h=h, rho=rho, eps=h ** rho, t0=t0, beta=beta)


def riesz_constant(beta: float) -> float:
    """Spectral constant of |x|^-beta on the line:
    c(beta) = 2 Gamma(1-beta) sin(pi beta / 2)."""
    if not 0.0 < beta < 1.0:
        raise ValidationError("beta must lie in (0, 1)")
    return 2.0 * float(gamma_fn(1.0 - beta)) * math.sin(math.pi * beta / 2.0)


def _tau_bounds(r: float, h: float, eps: float) -> tuple[float, float]:
    """Range of the heat-kernel time argument s + h^2 - r for s in I(h,r),
    with t0 shifted to zero."""
    return max(0.0, h * h - r), min(h * h, eps + h * h - r)


def _time_symbol(xi: float, tau_lo: float, tau_hi: float) -> float:
    """Closed-form int_{tau_lo}^{tau_hi} exp(-tau xi^2 / 2) dtau."""
    if tau_hi <= tau_lo:
        return 0.0
    half_xi2 = 0.5 * xi * xi
    if half_xi2 * tau_hi < 1e-12:
        return tau_hi - tau_lo
    return math.exp(-tau_lo * half_xi2) * (-math.expm1(-(tau_hi - tau_lo) * half_xi2)) / half_xi2


def _quad(fn, lo, hi, epsrel, tag):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(fn, lo, hi, limit=_QUAD_LIMIT,
                                    epsabs=0.0, epsrel=epsrel)
            return val
        except integrate.IntegrationWarning as exc:
            cause = exc
    # Re-run unfiltered to recover the value and achieved error estimate.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, lo, hi, limit=_QUAD_LIMIT,
                                  epsabs=0.0, epsrel=epsrel)
    raise QuadratureError(
        f"{tag} quadrature did not converge: {cause} "
        f"(value {val:.6e}, error estimate {err:.2e})",
        error_estimate=err) from cause


def _xi_cutoff(h: float, eps: float) -> float:
    # Beyond ~1/h the symbol decays like xi^-6 (and sharper wherever the
    # Gaussian factor exp(-tau_lo xi^2) is active); this cutoff keeps the
    # truncated tail below ~1e-9 of the total.
    return 60.0 / h + 20.0 / eps


def _inner_xi_integral(r: float, h: float, eps: float, beta: float | None) -> float:
    tau_lo, tau_hi = _tau_bounds(r, h, eps)
    if tau_hi <= tau_lo:
        return 0.0
    xi_max = _xi_cutoff(h, eps)

    if beta is None:
        def integrand(xi):
            if xi == 0.0:
                base = 2.0 * eps * (tau_hi - tau_lo)
                return base * base
            s = 2.0 * math.sin(eps * xi) / xi
            g = s * _time_symbol(xi, tau_lo, tau_hi)
            return g * g
    else:
        def integrand(xi):
            s = 2.0 * math.sin(eps * xi) / xi if xi > 0.0 else 2.0 * eps
            g = s * _time_symbol(xi, tau_lo, tau_hi)
            return g * g * xi ** (beta - 1.0)

    return _quad(integrand, 0.0, xi_max, _INNER_EPSREL, "inner xi")


def _outer_r_integral(h: float, eps: float, beta: float | None) -> float:
    # Kinks of the tau bounds sit at r = h^2 and r = eps; split there.
    pieces = sorted({0.0, h * h, eps, eps + h * h})
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        if b <= a:
            continue
        total += _quad(lambda r: _inner_xi_integral(r, h, eps, beta),
                       a, b, _OUTER_EPSREL, "outer r")
    return total


def m_hat_sq(q: NormalizerQuery) -> float:
    """Squared white-noise normalizer via the Plancherel reduction."""
    if q.beta is not None:
        raise ValidationError("m_hat_sq is the white-noise normalizer; beta must be None")
    # (1/2pi) * int_R = (1/pi) * int_0^inf by symmetry in xi.
    return _outer_r_integral(q.h, q.eps, None) / (math.pi * q.h ** 4)


def m_sq_riesz(q: NormalizerQuery) -> float:
    """Squared Riesz-kernel normalizer via the Plancherel reduction with
    spectral weight c(beta) |xi|^(beta-1)."""
    if q.beta is None:
        raise ValidationError("m_sq_riesz requires beta in (0, 1)")
    c = riesz_constant(q.beta)
    return c * _outer_r_integral(q.h, q.eps, q.beta) / (math.pi * q.h ** 4)


def _window_kernel_integral(z: np.ndarray, r: float, h: float, eps: float,
                            n_tau: int = 160) -> np.ndarray:
    """A(z, r) by Gauss-Legendre in the time variable; the spatial integral
    of the heat kernel over the eps-ball is a difference of normal CDFs."""
    tau_lo, tau_hi = _tau_bounds(r, h, eps)
    if tau_hi <= tau_lo:
        return np.zeros_like(z)
    nodes, weights = np.polynomial.legendre.leggauss(n_tau)
    tau = 0.5 * (tau_hi - tau_lo) * nodes + 0.5 * (tau_hi + tau_lo)
    wts = 0.5 * (tau_hi - tau_lo) * weights
    zz = z[:, None]
    st = np.sqrt(tau)[None, :]
    cdf_diff = 0.5 * (erf((eps - zz) / (_SQRT2 * st)) - erf((-eps - zz) / (_SQRT2 * st)))
    return cdf_diff @ wts


def _r_panels(h: float, eps: float, n_r: int):
    pieces = sorted({0.0, h * h, eps, eps + h * h})
    nodes, weights = np.polynomial.legendre.leggauss(n_r)
    for a, b in zip(pieces[:-1], pieces[1:]):
        if b <= a:
            continue
        rr = 0.5 * (b - a) * nodes + 0.5 * (b + a)
        ww = 0.5 * (b - a) * weights
        yield from zip(rr, ww)


def m_hat_sq_realspace(q: NormalizerQuery, n_z: int = 3000, n_r: int = 80,
                       n_tau: int = 120) -> float:
    """Slow real-space oracle for the white-noise normalizer."""
    if q.beta is not None:
        raise ValidationError("white-noise oracle; beta must be None")
    h, eps = q.h, q.eps
    half_width = eps + 14.0 * math.sqrt(eps + h * h)
    z = np.linspace(-half_width, half_width, n_z)
    total = 0.0
    for r, wgt in _r_panels(h, eps, n_r):
        a_vals = _window_kernel_integral(z, r, h, eps, n_tau)
        total += wgt * float(np.trapezoid(a_vals * a_vals, z))
    return total / h ** 4


def m_sq_riesz_realspace(q: NormalizerQuery, n_z: int = 4000, n_r: int = 40,
                         n_v: int = 500, n_tau: int = 160) -> float:
    """Slow real-space oracle for the Riesz-kernel normalizer.

    Writes the double z-integral as int F(w) |w|^-beta dw with F the
    autocorrelation of A(., r), computed by direct products on a fine
    grid; the substitution w = v^(1/(1-beta)) removes the singularity so
    plain Gauss-Legendre applies. No spectral constant enters, which makes
    this an independent check of the Plancherel route.
    """
    if q.beta is None:
        raise ValidationError("Riesz oracle requires beta in (0, 1)")
    from scipy.interpolate import CubicSpline

    beta, h, eps = q.beta, q.h, q.eps
    half_width = eps + 12.0 * math.sqrt(eps + h * h)
    z = np.linspace(-half_width, half_width, n_z)
    power = 1.0 / (1.0 - beta)
    v_max = (2.0 * half_width) ** (1.0 - beta)
    nodes, weights = np.polynomial.legendre.leggauss(n_v)
    v = 0.5 * v_max * (nodes + 1.0)
    vw = 0.5 * v_max * weights
    w_nodes = v ** power
    total = 0.0
    for r, wgt in _r_panels(h, eps, n_r):
        a_vals = _window_kernel_integral(z, r, h, eps, n_tau)
        spline = CubicSpline(z, a_vals)
        corr = np.empty_like(w_nodes)
        for k, wn in enumerate(w_nodes):
            shifted = z - wn
            mask = shifted > z[0]
            prod = np.zeros_like(z)
            prod[mask] = a_vals[mask] * spline(shifted[mask])
            corr[k] = np.trapezoid(prod, z)
        # F is even in w: int F |w|^-beta dw = 2 * power * int F(v^power) dv.
        total += wgt * 2.0 * power * float(np.dot(corr, vw))
    return total / h ** 4


@dataclass(frozen=True)
class RateExponents:
    """Optimal window exponent rho* (eps = h^rho*) and the supremum of the
    attainable convergence exponents kappa."""

    rho_star: float
    kappa_sup: float

    def __post_init__(self):
        if not (0.0 < self.rho_star < 1.0 and 0.0 < self.kappa_sup < 1.0):
            raise ValidationError("rate exponents must lie in (0, 1)")


def rate_exponents(beta: float | None = None) -> RateExponents:
    """White noise: (8/9, 2/9). Riesz kernel with beta in (0, 1):
    (8/(12-beta), 2(2-beta)/(12-beta))."""
    if beta is None:
        return RateExponents(rho_star=8.0 / 9.0, kappa_sup=2.0 / 9.0)
    if not 0.0 < beta < 1.0:
        raise ValidationError("beta must lie in (0, 1)")
    return RateExponents(rho_star=8.0 / (12.0 - beta),
                         kappa_sup=2.0 * (2.0 - beta) / (12.0 - beta))


def loglog_slope(x_values, y_values) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(x_values, dtype=float))
    ly = np.log(np.asarray(y_values, dtype=float))
    if lx.shape != ly.shape or lx.size < 2:
        raise ValidationError("need at least two matching points for a slope")
    return float(np.polyfit(lx, ly, 1)[0])
