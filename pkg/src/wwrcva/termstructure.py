"""Survival curves, hazard rates and deterministic intensity shifts.

Two curve flavours share one interface (``survival``, ``log_survival``,
``hazard_rate``, ``t_max``):

* :class:`SurvivalCurve` -- market curve on a knot grid, piecewise-linear in
  ``ln G`` (piecewise-constant hazard between knots).
* :class:`AnalyticSurvivalCurve` -- curve implied by an affine intensity
  model, with the exact hazard rate from the bond coefficients.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

_KNOT_TOL = 1e-12


class CurveRangeError(ValueError):
    """Raised when a curve is evaluated outside its covered span."""


def _check_range(t, t_max: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < -_KNOT_TOL) or np.any(t > t_max + _KNOT_TOL):
        raise CurveRangeError(f"time outside curve span [0, {t_max}]: {t}")
    return np.clip(t, 0.0, t_max)


def _scalar_or_array(x: np.ndarray, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True)
class SurvivalCurve:
    """Market survival curve on a knot grid.

    Parameters
    ----------
    grid : array_like
        Strictly ascending times in years, starting at 0.
    logG : array_like
        ``ln G`` at the knots; ``logG[0]`` must be 0 and the sequence
        non-increasing.
    """

    grid: np.ndarray
    logG: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        logG = np.asarray(self.logG, dtype=float)
        if grid.ndim != 1 or grid.shape != logG.shape or grid.size < 2:
            raise ValueError("grid and logG must be 1-d arrays of equal length >= 2")
        if grid[0] != 0.0:
            raise ValueError("curve grid must start at t = 0")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("curve grid must be strictly ascending")
        if logG[0] != 0.0:
            raise ValueError("G(0) must equal 1")
        if np.any(np.diff(logG) > 0):
            raise ValueError("ln G must be non-increasing")
        grid.setflags(write=False)
        logG.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "logG", logG)

    @classmethod
    def flat(cls, hazard: float, t_max: float, n_knots: int = 2) -> "SurvivalCurve":
        """Constant-hazard curve ``G(t) = exp(-hazard * t)``."""
        if hazard < 0:
            raise ValueError("hazard must be non-negative")
        grid = np.linspace(0.0, t_max, n_knots)
        return cls(grid, -hazard * grid)

    @classmethod
    def from_function(cls, survival_fn: Callable[[float], float], grid) -> "SurvivalCurve":
        """Sample ``survival_fn`` at ``grid`` (which must start at 0)."""
        grid = np.asarray(grid, dtype=float)
        values = np.array([survival_fn(float(t)) for t in grid])
        logG = np.log(values)
        logG[0] = 0.0
        return cls(grid, logG)

    @classmethod
    def from_csv(cls, path) -> "SurvivalCurve":
        """Read a ``t,G`` CSV file with a header row and first row ``0,1``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != ["t", "G"]:
                raise ValueError(f"expected header 't,G', got {','.join(header)}")
            rows = [(float(r[0]), float(r[1])) for r in reader if r and r[0].strip()]
        t, g = np.array(rows).T
        if t[0] != 0.0 or g[0] != 1.0:
            raise ValueError("first curve row must be 0,1")
        if np.any(g <= 0):
            raise ValueError("survival probabilities must be positive")
        return cls(t, np.log(g))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "G"])
            for t, lg in zip(self.grid, self.logG):
                w.writerow([f"{t:.10g}", f"{np.exp(lg):.10g}"])

    @property
    def t_max(self) -> float:
        return float(self.grid[-1])

    def log_survival(self, t):
        tc = _check_range(t, self.t_max)
        return _scalar_or_array(np.interp(tc, self.grid, self.logG), t)

    def survival(self, t):
        return _scalar_or_array(np.exp(self.log_survival(t)), t)

    def hazard_rate(self, t):
        """Right-limit of ``-d/dt ln G``; the last knot takes the left limit."""
        tc = _check_range(t, self.t_max)
        idx = np.searchsorted(self.grid, tc, side="right") - 1
        idx = np.clip(idx, 0, self.grid.size - 2)
        slopes = -np.diff(self.logG) / np.diff(self.grid)
        return _scalar_or_array(slopes[idx], t)


@dataclass(frozen=True)
class AnalyticSurvivalCurve:
    """Curve given by closed-form ``ln G`` and hazard functions."""

    log_survival_fn: Callable[[np.ndarray], np.ndarray]
    hazard_fn: Callable[[np.ndarray], np.ndarray]
    t_max: float = np.inf

    def log_survival(self, t):
        tc = _check_range(t, self.t_max)
        return _scalar_or_array(np.asarray(self.log_survival_fn(tc), dtype=float), t)

    def survival(self, t):
        return _scalar_or_array(np.exp(self.log_survival(t)), t)

    def hazard_rate(self, t):
        tc = _check_range(t, self.t_max)
        return _scalar_or_array(np.asarray(self.hazard_fn(tc), dtype=float), t)


def survival(curve, t):
    """Survival probability ``G(t)``."""
    return curve.survival(t)


def hazard_rate(curve, t):
    """Hazard rate ``h(t) = -d/dt ln G(t)`` (right limit at knots)."""
    return curve.hazard_rate(t)


@dataclass(frozen=True)
class ShiftFunction:
    """Deterministic intensity shift ``psi`` and its integral ``Psi``.

    ``Psi`` is piecewise linear on ``grid`` (so ``psi`` is piecewise
    constant, right-continuous) and is extrapolated with the last slope.
    """

    grid: np.ndarray
    Psi_knots: np.ndarray
    negative: bool = field(default=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        Psi = np.asarray(self.Psi_knots, dtype=float)
        if grid.shape != Psi.shape or grid.size < 2 or grid[0] != 0.0:
            raise ValueError("shift grid must start at 0 and match Psi_knots")
        if Psi[0] != 0.0:
            raise ValueError("Psi(0) must be 0")
        slopes = np.diff(Psi) / np.diff(grid)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "Psi_knots", Psi)
        object.__setattr__(self, "_slopes", slopes)
        object.__setattr__(self, "negative", bool(np.any(slopes < 0)))

    @classmethod
    def zero(cls) -> "ShiftFunction":
        return cls(np.array([0.0, 1.0]), np.array([0.0, 0.0]))

    @classmethod
    def constant(cls, c: float) -> "ShiftFunction":
        return cls(np.array([0.0, 1.0]), np.array([0.0, c]))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.Psi_knots)

    def psi(self, t):
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.grid, t_arr, side="right") - 1
        idx = np.clip(idx, 0, self.grid.size - 2)
        return _scalar_or_array(self._slopes[idx], t)

    def Psi(self, t):
        t_arr = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.grid, t_arr, side="right") - 1, 0, self.grid.size - 2)
        out = self.Psi_knots[idx] + self._slopes[idx] * (t_arr - self.grid[idx])
        return _scalar_or_array(out, t)

    def Psi_between(self, s, t):
        """``Psi(s, t) = Psi(t) - Psi(s)``."""
        return self.Psi(t) - self.Psi(s)


def calibrate_shift(model_bond: Callable[[float], float], market: SurvivalCurve) -> ShiftFunction:
    """Shift making ``P^y(0,t) exp(-Psi(t))`` equal ``G(t)`` at every market knot.

    ``model_bond`` maps ``t`` to the un-shifted model survival bond price
    ``P^y(0, t)``.  The returned ``psi`` lives on the market grid; its
    ``negative`` attribute flags segments where the shift pulls the
    intensity down.
    """
    grid = market.grid
    log_model = np.log([model_bond(float(t)) for t in grid])
    Psi = log_model - market.logG
    Psi[0] = 0.0
    return ShiftFunction(grid, Psi)


def read_curve(path: str | Path) -> SurvivalCurve:
    return SurvivalCurve.from_csv(path)
