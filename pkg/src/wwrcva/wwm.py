"""Drift adjustment of the exposure under the wrong-way measure.

Under the measure with numeraire ``C^{F,t}`` (price of protection over
``(t, t+dt]``) the exposure keeps its diffusion coefficient and picks up
the drift

    theta(s, t) = rho beta_s sigma(lam) * (A B_t / (A B_t lam - A_t) - B)

with ``A, B, A_t, B_t`` the shifted intensity coefficients on ``(s, t)``.
The intensity ``lam`` is frozen to a deterministic proxy: the curve's
hazard rate or the model's expected intensity.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.integrate import simpson

from .affine import ShiftedAffineModel, diffusion, mean_intensity
from .exposure import (
    ExposureSpec,
    GaussianLaw,
    UnsupportedExposure,
    lognormal_epe,
    positive_part_mean,
    q_moments,
)

PROXIES = ("hazard", "mean_intensity")
QUAD_POINTS = 201
MIN_PROXY = 1e-8
SINGULAR_DENOMINATOR = 1e-14


class DriftSingularityError(ArithmeticError):
    pass


class ProxyClippedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DriftProxy:
    kind: str = "hazard"

    def __post_init__(self):
        if self.kind not in PROXIES:
            raise ValueError(f"proxy must be one of {PROXIES}, got {self.kind!r}")


@dataclass(frozen=True)
class CorrelationSpec:
    rho: float

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("correlation must lie in [-1, 1]")


def _as_beta(beta) -> Callable:
    if callable(beta):
        return beta
    value = float(beta)
    return lambda s: value + 0.0 * np.asarray(s, dtype=float)


def proxy_intensity(model: ShiftedAffineModel, proxy: DriftProxy, curve, s):
    if proxy.kind == "hazard":
        return np.asarray(curve.hazard_rate(s), dtype=float)
    return np.asarray(mean_intensity(model.base, model.shift, s), dtype=float)


def drift_adjustment(model: ShiftedAffineModel, proxy: DriftProxy, beta, rho, s, t, curve=None):
    """Deterministic drift adjustment ``theta(s, t)`` (vectorised in ``s``).

    ``curve`` supplies ``h(s)`` for the hazard proxy and defaults to the
    model's own survival curve.
    """
    rho = rho.rho if isinstance(rho, CorrelationSpec) else float(rho)
    s = np.asarray(s, dtype=float)
    if np.any(s > np.asarray(t) + 1e-14) or np.any(s < 0):
        raise ValueError("drift adjustment needs 0 <= s <= t")
    if rho == 0.0:
        out = np.zeros(np.broadcast(s, np.asarray(t)).shape)
        return float(out) if out.ndim == 0 else out
    if curve is None:
        curve = model.curve()
    lam = proxy_intensity(model, proxy, curve, s)
    if np.any(lam < MIN_PROXY):
        warnings.warn(
            f"intensity proxy below {MIN_PROXY:g}; clipped (min {lam.min():.3g})",
            ProxyClippedWarning,
            stacklevel=2,
        )
        lam = np.maximum(lam, MIN_PROXY)
    c = model.coeffs(s, t)
    den = c.A * c.B_t * lam - c.A_t
    if np.any(np.abs(den) < SINGULAR_DENOMINATOR):
        bad = np.argmin(np.abs(den))
        raise DriftSingularityError(
            f"vanishing denominator at s={np.ravel(s * np.ones_like(den))[bad]}, t={t}, "
            f"lambda={np.ravel(lam * np.ones_like(den))[bad]}"
        )
    out = rho * _as_beta(beta)(s) * diffusion(model.base, lam) * (c.A * c.B_t / den - c.B)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DriftAdjustment:
    """Deterministic drift adjustment bound to a model, proxy, beta and rho."""

    model: ShiftedAffineModel
    proxy: DriftProxy
    beta: Union[float, Callable]
    rho: float
    curve: object = None
    n_quad: int = field(default=QUAD_POINTS)

    def __post_init__(self):
        if isinstance(self.rho, CorrelationSpec):
            object.__setattr__(self, "rho", self.rho.rho)
        CorrelationSpec(self.rho)
        if self.curve is None:
            object.__setattr__(self, "curve", self.model.curve())
        if self.n_quad < 3 or self.n_quad % 2 == 0:
            raise ValueError("n_quad must be odd and >= 3")

    def theta(self, s, t):
        return drift_adjustment(self.model, self.proxy, self.beta, self.rho, s, t, self.curve)

    def _nodes(self, t, maturity=None):
        """Simpson nodes on ``[0, t]``: uniform in ``u`` (flat) or in ``ln(T / (T - u))`` (bridge)."""
        x = np.linspace(0.0, 1.0, self.n_quad)
        if maturity is None:
            return t * x, None
        # u = T (1 - e^{-w}) turns du / (u - T) into -dw and clusters nodes near T
        w = np.log(maturity / (maturity - t)) * x
        return maturity * -np.expm1(-w), w

    def Theta(self, t: float) -> float:
        """``int_0^t theta(u, t) du``."""
        return float(self.Theta_grid([t])[0])

    def Theta_bridge(self, t: float, maturity: float) -> float:
        """``(t - T) int_0^t theta(u, t) / (u - T) du`` for ``t < T``."""
        t = float(t)
        if t >= maturity:
            raise ValueError(f"bridge weighting needs t < T (t={t}, T={maturity})")
        return float(self.Theta_grid([t], maturity)[0])

    def Theta_grid(self, ts, maturity: float | None = None) -> np.ndarray:
        """``Theta`` (or ``Theta_bridge`` when ``maturity`` is given) on a whole grid.

        Bridge values at ``t >= maturity`` are returned as 0.
        """
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros(ts.shape)
        live = ts > 0.0
        if maturity is not None:
            live &= ts < maturity
        if self.rho == 0.0 or not live.any():
            return out
        t = ts[live][:, None]
        u, w = self._nodes(t, maturity)
        f = self.theta(np.minimum(u, t), t)
        if maturity is None:
            out[live] = simpson(f, x=u, axis=1)
        else:
            out[live] = (maturity - t[:, 0]) * simpson(f, x=w, axis=1)
        return out


def integrated_adjustment(adj: DriftAdjustment, t: float, weighting="flat") -> float:
    """Quadrature of ``theta(., t)``; ``weighting`` is ``"flat"`` or ``("bridge", T)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if weighting == "flat":
        return adj.Theta(t)
    kind, maturity = weighting
    if kind != "bridge":
        raise ValueError(f"unknown weighting {weighting!r}")
    return adj.Theta_bridge(t, maturity)


def wwm_gaussian_law(exposure: ExposureSpec, adj: DriftAdjustment, t: float) -> GaussianLaw:
    """Law of ``V_t`` under the wrong-way measure (drift shifted, same stdev)."""
    if not exposure.is_gaussian:
        raise UnsupportedExposure("wrong-way Gaussian law needs a forward or swap exposure")
    if exposure.kind == "swap" and not 0 < t <= exposure.maturity:
        raise ValueError(f"swap exposure law needs 0 < t <= T, got {t}")
    if t <= 0:
        raise ValueError("t must be positive")
    q_mean, sd = q_moments(exposure, t)
    if exposure.kind == "forward":
        shift = adj.Theta(t)
    elif t >= exposure.maturity:
        shift = 0.0
    else:
        shift = adj.Theta_bridge(t, exposure.maturity)
    return GaussianLaw(float(q_mean) + shift, float(sd))


def wwm_epe(exposure: ExposureSpec, adj: DriftAdjustment, t: float) -> float:
    """Wrong-way EPE at ``t``; 0 at ``t = 0`` and at a swap's maturity."""
    if exposure.kind == "lognormal":
        return lognormal_epe(exposure, adj.Theta(t), t)
    if t <= 0 or (exposure.kind == "swap" and t >= exposure.maturity):
        return 0.0
    law = wwm_gaussian_law(exposure, adj, t)
    return float(positive_part_mean(law.mean, law.stdev))


def wwm_epe_grid(exposure: ExposureSpec, adj: DriftAdjustment, ts) -> np.ndarray:
    """``wwm_epe`` evaluated on an array of times in one pass."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(ts < 0):
        raise ValueError("t must be non-negative")
    if exposure.kind == "lognormal":
        return np.array([lognormal_epe(exposure, th, t) for th, t in zip(adj.Theta_grid(ts), ts)])
    if exposure.kind == "swap" and np.any(ts > exposure.maturity):
        raise ValueError("swap exposure grid must lie within [0, T]")
    live = ts > 0.0
    if exposure.kind == "swap":
        live &= ts < exposure.maturity
        shift = adj.Theta_grid(ts, exposure.maturity)
    else:
        shift = adj.Theta_grid(ts)
    out = np.zeros(ts.shape)
    mean, sd = q_moments(exposure, ts[live])
    out[live] = positive_part_mean(mean + shift[live], sd)
    return out
