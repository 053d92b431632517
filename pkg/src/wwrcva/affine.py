"""Closed-form bond coefficients for OU, CIR and JCIR intensities.

For a homogeneous affine process ``y`` the survival bond reads
``P(s, t) = A(s, t) exp(-B(s, t) y_s)``.  Every coefficient function here
returns ``A``, ``B`` and their partial derivatives in ``t``; all are
vectorised over ``s`` and ``t``.

The CIR formulas are written in terms of ``q = 2 sigma^2 / (kappa + h)^2``
and ``exp(-h tau)`` so that neither ``tau -> 0`` nor ``sigma -> 0`` causes
cancellation or overflow.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .termstructure import AnalyticSurvivalCurve, ShiftFunction

JCIR_D_ZERO = 1e-12


@dataclass(frozen=True)
class OUParams:
    kappa: float
    theta_ltm: float
    sigma: float
    y0: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class CIRParams:
    kappa: float
    theta_ltm: float
    sigma: float
    y0: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.theta_ltm < 0:
            raise ValueError("theta_ltm must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.y0 < 0:
            raise ValueError("y0 must be non-negative")

    @property
    def feller_margin(self) -> float:
        """``2 kappa theta - sigma^2``; negative when Feller is violated."""
        return 2.0 * self.kappa * self.theta_ltm - self.sigma**2

    @property
    def h(self) -> float:
        return float(np.sqrt(self.kappa**2 + 2.0 * self.sigma**2))


@dataclass(frozen=True)
class JCIRParams:
    cir: CIRParams
    jump_rate: float
    jump_mean: float

    def __post_init__(self):
        if self.jump_rate < 0:
            raise ValueError("jump_rate must be non-negative")
        if self.jump_mean <= 0:
            raise ValueError("jump_mean must be positive")

    # convenience pass-throughs so simulation code can treat CIR/JCIR alike
    kappa = property(lambda self: self.cir.kappa)
    theta_ltm = property(lambda self: self.cir.theta_ltm)
    sigma = property(lambda self: self.cir.sigma)
    y0 = property(lambda self: self.cir.y0)
    feller_margin = property(lambda self: self.cir.feller_margin)

    @property
    def d(self) -> float:
        c = self.cir
        return c.sigma**2 - 2.0 * c.kappa * self.jump_mean - 2.0 * self.jump_mean**2


Params = Union[OUParams, CIRParams, JCIRParams]


@dataclass(frozen=True)
class AffineCoeffs:
    A: np.ndarray
    B: np.ndarray
    A_t: np.ndarray
    B_t: np.ndarray

    def bond(self, x):
        return self.A * np.exp(-self.B * x)

    def log_bond_slope(self, x):
        """``d/dt ln P(s, t)`` at state ``x``."""
        return self.A_t / self.A - self.B_t * x


def _tau(s, t):
    tau = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    if np.any(tau < -1e-14):
        raise ValueError("coefficients require s <= t")
    return np.maximum(tau, 0.0)


def _pack(A, B, A_t, B_t, like):
    if np.ndim(like) == 0:
        return AffineCoeffs(float(A), float(B), float(A_t), float(B_t))
    return AffineCoeffs(A, B, A_t, B_t)


def ou_coeffs(p: OUParams, s, t) -> AffineCoeffs:
    tau = _tau(s, t)
    k, th, sg = p.kappa, p.theta_ltm, p.sigma
    B = -np.expm1(-k * tau) / k
    B_t = np.exp(-k * tau)
    level = th - sg**2 / (2.0 * k**2)
    lnA = level * (B - tau) - sg**2 * B**2 / (4.0 * k)
    A = np.exp(lnA)
    A_t = A * ((B_t - 1.0) * level - sg**2 * B * B_t / (2.0 * k))
    return _pack(A, B, A_t, B_t, tau)


def _cir_parts(k, th, sg, tau):
    h = np.sqrt(k * k + 2.0 * sg * sg)
    q = 2.0 * sg * sg / (k + h) ** 2
    e = np.exp(-h * tau)
    den = (k + h) * (1.0 + q * e)
    B = -2.0 * np.expm1(-h * tau) / den
    B_t = 4.0 * h * h * e / den**2
    c = 2.0 * k * th / sg**2
    lnA = c * (np.log1p(q) - np.log1p(q * e)) - 2.0 * k * th * tau / (k + h)
    dlnA = -2.0 * k * th / (k + h) + 4.0 * k * th * h / (k + h) ** 2 * e / (1.0 + q * e)
    return h, lnA, dlnA, B, B_t


def cir_coeffs(p: CIRParams, s, t) -> AffineCoeffs:
    tau = _tau(s, t)
    _, lnA, dlnA, B, B_t = _cir_parts(p.kappa, p.theta_ltm, p.sigma, tau)
    A = np.exp(lnA)
    return _pack(A, B, A * dlnA, B_t, tau)


def _jump_factor(p: JCIRParams, h, tau):
    """Log of the compound-Poisson bond factor and its tau-derivative."""
    k, g, a = p.cir.kappa, p.jump_mean, p.jump_rate
    if a == 0.0:
        z = np.zeros_like(tau)
        return z, z
    d = p.d
    e = np.exp(-h * tau)
    if abs(d) < JCIR_D_ZERO:
        xi = h
        ln_f = -(a * g / xi) * (tau + np.expm1(-h * tau) / h)
        dln_f = (a * g / xi) * (e - 1.0)
        return ln_f, dln_f
    # nu * (xi - h) = -2 a g / (k + 2 g + h), finite as d -> 0
    xi = (h + k + 2.0 * g) / 2.0
    eps = -d / (k + 2.0 * g + h)
    scale = -2.0 * a * g / (k + 2.0 * g + h)
    x = eps * (-np.expm1(-h * tau)) / h
    with np.errstate(invalid="ignore", divide="ignore"):
        log1p_ratio = np.where(x == 0.0, 1.0, np.log1p(x) / np.where(x == 0.0, 1.0, x))
    ln_f = scale * (tau - (-np.expm1(-h * tau)) / h * log1p_ratio)
    dln_f = scale * xi * (-np.expm1(-h * tau)) / (xi - eps * e)
    return ln_f, dln_f


def jcir_coeffs(p: JCIRParams, s, t) -> AffineCoeffs:
    tau = _tau(s, t)
    c = p.cir
    h, lnA, dlnA, B, B_t = _cir_parts(c.kappa, c.theta_ltm, c.sigma, tau)
    ln_f, dln_f = _jump_factor(p, h, tau)
    A = np.exp(lnA + ln_f)
    return _pack(A, B, A * (dlnA + dln_f), B_t, tau)


def coeffs(p: Params, s, t) -> AffineCoeffs:
    if isinstance(p, JCIRParams):
        return jcir_coeffs(p, s, t)
    if isinstance(p, CIRParams):
        return cir_coeffs(p, s, t)
    if isinstance(p, OUParams):
        return ou_coeffs(p, s, t)
    raise TypeError(f"unsupported parameter type {type(p).__name__}")


def bond_price(p: Params, s, t, x=None):
    """``P^y(s, t)`` at state ``x`` (defaults to ``y0``)."""
    x = p.y0 if x is None else x
    return coeffs(p, s, t).bond(x)


def diffusion(p: Params, x):
    """Diffusion coefficient of the intensity, ``sigma sqrt(x+)`` or ``sigma``."""
    if isinstance(p, OUParams):
        return p.sigma + 0.0 * np.asarray(x, dtype=float)
    return p.sigma * np.sqrt(np.maximum(x, 0.0))


@dataclass(frozen=True)
class ShiftedAffineModel:
    """``lambda_t = y_t + psi(t)`` with ``y`` one of OU/CIR/JCIR."""

    base: Params
    shift: ShiftFunction = ShiftFunction.zero()

    @property
    def lambda0(self) -> float:
        return self.base.y0 + float(self.shift.psi(0.0))

    def coeffs(self, s, t) -> AffineCoeffs:
        return shifted_coeffs(self, s, t)

    def bond(self, t):
        """Model survival curve ``P^lambda(0, t)``."""
        return coeffs(self.base, 0.0, t).bond(self.base.y0) * np.exp(-self.shift.Psi(t))

    def hazard(self, t):
        """``-d/dt ln P^lambda(0, t)``."""
        return -self.coeffs(0.0, t).log_bond_slope(self.lambda0)

    def curve(self, t_max: float = np.inf) -> AnalyticSurvivalCurve:
        base, shift = self.base, self.shift

        def log_g(t):
            return np.log(coeffs(base, 0.0, t).bond(base.y0)) - shift.Psi(t)

        return AnalyticSurvivalCurve(log_g, self.hazard, t_max)


def shifted_coeffs(m: ShiftedAffineModel, s, t) -> AffineCoeffs:
    base = coeffs(m.base, s, t)
    if m.shift.is_zero:
        return base
    psi_s = m.shift.psi(s)
    psi_t = m.shift.psi(t)
    A = base.A * np.exp(base.B * psi_s - m.shift.Psi_between(s, t))
    A_t = A * (base.A_t / base.A + base.B_t * psi_s - psi_t)
    return _pack(A, base.B, A_t, base.B_t, np.asarray(t) - np.asarray(s))


def mean_intensity(p: Params, shift: ShiftFunction, s):
    """``E[lambda_s]``; JCIR adds the compensated jump drift ``a g``."""
    s = np.asarray(s, dtype=float)
    decay = -np.expm1(-p.kappa * s)
    mean = shift.psi(s) + p.y0 * np.exp(-p.kappa * s) + p.theta_ltm * decay
    if isinstance(p, JCIRParams):
        mean = mean + p.jump_rate * p.jump_mean / p.kappa * decay
    return float(mean) if mean.ndim == 0 else mean


# Table of CIR parameter sets (y0 and theta stored as decimals).
PARAMETER_SETS: dict[int, CIRParams] = {
    1: CIRParams(kappa=0.02, theta_ltm=0.161, sigma=0.08, y0=0.03),
    2: CIRParams(kappa=0.35, theta_ltm=0.045, sigma=0.15, y0=0.035),
    3: CIRParams(kappa=0.80, theta_ltm=0.02, sigma=0.20, y0=0.01),
    4: CIRParams(kappa=0.50, theta_ltm=0.05, sigma=0.50, y0=0.03),
}


def parameter_set(name) -> CIRParams:
    """Look up ``"set1"``..``"set4"`` (or ``1``..``4``)."""
    key = str(name).lower().removeprefix("set")
    try:
        return PARAMETER_SETS[int(key)]
    except (KeyError, ValueError):
        raise KeyError(f"unknown parameter set {name!r}; expected set1..set4") from None
