"""Full bivariate Monte Carlo: correlated exposure and CIR/JCIR intensity.

The hot loop lives in a compiled kernel (``_kernel``) when it was built;
otherwise the numpy kernel in ``_pykernel`` is used.  Set
``WWRCVA_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..affine import CIRParams, JCIRParams, ShiftedAffineModel
from ..exposure import (
    ExposureSpec,
    GaussianLaw,
    UnsupportedExposure,
    norm_cdf,
    positive_part_mean,
    q_moments,
)
from . import _pykernel

try:
    from . import _kernel as _ckernel
except ImportError:  # extension not built
    _ckernel = None

SCHEMES = {"reflected": _pykernel.REFLECTED, "full_truncation": _pykernel.FULL_TRUNCATION}
KINDS = {"forward": _pykernel.FORWARD, "swap": _pykernel.SWAP, "lognormal": _pykernel.LOGNORMAL}
GRID_TOL = 1e-12


def available_backends() -> list[str]:
    return (["cython"] if _ckernel is not None else []) + ["python"]


def default_backend() -> str:
    if os.environ.get("WWRCVA_PURE_PYTHON") or _ckernel is None:
        return "python"
    return "cython"


def _kernel(backend: str | None):
    """Kernel module exposing ``simulate_block`` and ``simulate_stats``."""
    backend = backend or default_backend()
    if backend == "cython":
        if _ckernel is None:
            raise RuntimeError("compiled kernel not available; reinstall with Cython present")
        return _ckernel
    if backend == "python":
        return _pykernel
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class SimulationPlan:
    """Monte Carlo configuration.

    ``grid`` holds the output times (multiples of ``dt``); the simulation
    runs up to ``grid[-1]``.  Paths are processed in fixed ``chunk_size``
    blocks so results do not depend on ``workers``.
    """

    n_paths: int
    dt: float
    grid: np.ndarray
    scheme: str = "full_truncation"
    seed: int = 42
    rho: float = 0.0
    n_batches: int = 1
    workers: int = 1
    chunk_size: int = 8192

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if self.n_paths < 1 or self.n_batches < 1:
            raise ValueError("n_paths and n_batches must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {tuple(SCHEMES)}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if grid.ndim != 1 or grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be non-empty, non-negative and strictly ascending")
        steps = grid / self.dt
        if np.any(np.abs(steps - np.round(steps)) * self.dt > GRID_TOL):
            raise ValueError("grid times must be multiples of dt")
        object.__setattr__(self, "grid", grid)

    @classmethod
    def uniform(cls, horizon: float, dt: float, every: int = 1, **kw) -> "SimulationPlan":
        """Plan whose output grid is every ``every``-th step on ``[0, horizon]``."""
        n = int(round(horizon / dt))
        return cls(grid=np.arange(0, n + 1, every) * dt, dt=dt, **kw)

    @property
    def n_steps(self) -> int:
        return int(round(self.grid[-1] / self.dt))

    def out_index(self) -> np.ndarray:
        idx = np.full(self.n_steps + 1, -1, dtype=np.int64)
        idx[np.round(self.grid / self.dt).astype(np.int64)] = np.arange(self.grid.size)
        return idx

    def replace(self, **kw) -> "SimulationPlan":
        fields = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields.update(kw)
        return SimulationPlan(**fields)


# -- scalar building blocks ---------------------------------------------------

def step_cir(y, z, p, dt: float, scheme: str):
    """One Euler step of the square-root diffusion (no jumps)."""
    y = np.asarray(y, dtype=float)
    k, th, sg = p.kappa, p.theta_ltm, p.sigma
    if scheme == "reflected":
        out = np.abs(y + k * (th - y) * dt + sg * np.sqrt(dt * np.maximum(y, 0.0)) * z)
    elif scheme == "full_truncation":
        yp = np.maximum(y, 0.0)
        out = y + k * (th - yp) * dt + sg * np.sqrt(dt * yp) * z
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return float(out) if out.ndim == 0 else out


def simulate_jcir_increment(p: JCIRParams, dt: float, rng: np.random.Generator, size=None):
    """Compound-Poisson jump total over one step (exponential sizes)."""
    counts = rng.poisson(p.jump_rate * dt, size=size)
    if size is None:
        return float(rng.exponential(p.jump_mean, size=counts).sum()) if counts else 0.0
    counts = np.asarray(counts)
    out = np.zeros(counts.shape)
    hit = np.nonzero(counts)
    # sum of n iid exponentials is Gamma(n, mean)
    out[hit] = rng.gamma(counts[hit], p.jump_mean)
    return out


# -- path generation ------------------------------------------------------------

def _kernel_args(plan: SimulationPlan, model: ShiftedAffineModel, spec: ExposureSpec):
    base = model.base
    if not isinstance(base, (CIRParams, JCIRParams)):
        raise TypeError("Monte Carlo supports CIR and JCIR intensities only")
    if spec.kind == "swap" and plan.grid[-1] > spec.maturity + GRID_TOL:
        raise ValueError(f"swap exposure cannot be stepped past its maturity {spec.maturity}")
    jump_rate, jump_mean = (base.jump_rate, base.jump_mean) if isinstance(base, JCIRParams) else (0.0, 1.0)
    steps = np.arange(plan.n_steps) * plan.dt
    drift = np.ascontiguousarray(spec.alpha(steps) if spec.kind == "lognormal" else np.zeros(plan.n_steps))
    return dict(
        n_steps=plan.n_steps, dt=plan.dt, scheme=SCHEMES[plan.scheme],
        kappa=base.kappa, theta=base.theta_ltm, sigma=base.sigma, y0=base.y0,
        jump_rate=float(jump_rate), jump_mean=float(jump_mean), rho=float(plan.rho),
        kind=KINDS[spec.kind], nu=spec.nu, gamma_v=spec.gamma_v, maturity=spec.maturity,
        v0=spec.v0, drift_steps=drift, out_index=plan.out_index(),
    )


@dataclass
class PathBatch:
    """Per-grid-time path arrays, shape ``(len(times), n_paths)``."""

    times: np.ndarray
    V: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    Lam: np.ndarray

    @property
    def S(self) -> np.ndarray:
        return np.exp(-self.Lam)


def _raw_block(plan, args, batch, start, n, backend):
    n_out = plan.grid.size
    out = [np.empty((n_out, n)) for _ in range(3)]
    _kernel(backend).simulate_block(
        plan.seed, batch, start, n, out_v=out[0], out_y=out[1], out_iy=out[2], **args
    )
    return out


def simulate_paths(plan: SimulationPlan, model: ShiftedAffineModel, spec: ExposureSpec,
                   batch: int = 0, start: int = 0, n_paths: int | None = None,
                   backend: str | None = None) -> PathBatch:
    """Simulate paths ``start .. start + n_paths`` of ``batch``.

    ``lam = max(y, 0) + psi`` and ``Lam`` is the trapezoid integral of
    ``max(y, 0)`` plus the exact ``Psi``.
    """
    n = plan.n_paths if n_paths is None else n_paths
    args = _kernel_args(plan, model, spec)
    v, y, iy = _raw_block(plan, args, batch, start, n, backend)
    g = plan.grid[:, None]
    lam = np.maximum(y, 0.0) + model.shift.psi(g)
    Lam = iy + model.shift.Psi(g)
    return PathBatch(plan.grid, v, y, lam, Lam)


# -- estimation -------------------------------------------------------------------

STATS = ("vpos_w", "w", "S", "lam", "V", "vpos")


@dataclass(frozen=True)
class EstimateWithCI:
    """Estimate with the across-batch ``half_width`` (2 x batch std) and path-level SE."""

    value: float
    half_width: float
    std_error: float

    def contains(self, x: float, n_se: float | None = None) -> bool:
        width = self.half_width if n_se is None else n_se * self.std_error
        return abs(x - self.value) <= width


@dataclass
class MCResult:
    plan: SimulationPlan
    sums: dict = field(default_factory=dict)
    sqsums: dict = field(default_factory=dict)

    @property
    def grid(self) -> np.ndarray:
        return self.plan.grid

    def batch_means(self, name: str) -> np.ndarray:
        """Shape ``(n_batches, len(grid))``."""
        return self.sums[name] / self.plan.n_paths

    def mean(self, name: str) -> np.ndarray:
        return self.batch_means(name).mean(axis=0)

    def std_error(self, name: str) -> np.ndarray:
        n = self.plan.n_paths * self.plan.n_batches
        m = self.sums[name].sum(axis=0) / n
        var = np.maximum(self.sqsums[name].sum(axis=0) / n - m * m, 0.0) * n / max(n - 1, 1)
        return np.sqrt(var / n)

    def grid_index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[i] - t) > GRID_TOL:
            raise ValueError(f"t={t} is not on the simulation grid")
        return i

    def estimate(self, name: str, t: float | None = None, scale=1.0) -> EstimateWithCI:
        """Estimate of ``E[name] * scale`` at grid time ``t`` (or the whole grid)."""
        sl = slice(None) if t is None else self.grid_index(t)
        per_batch = self.batch_means(name)[:, sl] * scale
        return _combine(per_batch, self.std_error(name)[sl] * np.abs(scale), self.plan)

    def integrate(self, name: str, scale=1.0) -> EstimateWithCI:
        """Trapezoid integral of ``E[name]`` over the grid, batch by batch."""
        per_batch = np.trapezoid(self.batch_means(name), self.grid, axis=1) * scale
        # path-level SE is not additive in t; use the batch spread only
        return _combine(per_batch, np.nan, self.plan)


def _combine(per_batch: np.ndarray, se, plan: SimulationPlan) -> EstimateWithCI:
    value = per_batch.mean(axis=0)
    if plan.n_batches > 1:
        half = 2.0 * per_batch.std(axis=0, ddof=1)
        if np.all(np.isnan(se)):
            se = half / 2.0 / np.sqrt(plan.n_batches)
    else:
        half = 2.0 * np.sqrt(plan.n_batches) * se
    if np.ndim(value) == 0:
        return EstimateWithCI(float(value), float(half), float(se))
    return EstimateWithCI(value, half, se)


def _chunk_stats(plan, shift_rows, args, batch, start, n, backend):
    sums = np.zeros((len(STATS), plan.grid.size))
    sq = np.zeros_like(sums)
    _kernel(backend).simulate_stats(
        plan.seed, batch, start, n,
        psi_rows=shift_rows[0], Psi_rows=shift_rows[1], sums=sums, sq=sq, **args,
    )
    return sums, sq


def run(plan: SimulationPlan, model: ShiftedAffineModel, spec: ExposureSpec,
        backend: str | None = None) -> MCResult:
    """Simulate every batch and reduce to per-batch grid statistics.

    Chunks are reduced in a fixed order, so the result is bit-identical for
    any ``plan.workers``.
    """
    args = _kernel_args(plan, model, spec)
    shift_rows = (
        np.ascontiguousarray(model.shift.psi(plan.grid), dtype=float),
        np.ascontiguousarray(model.shift.Psi(plan.grid), dtype=float),
    )
    tasks = [
        (b, start, min(plan.chunk_size, plan.n_paths - start))
        for b in range(plan.n_batches)
        for start in range(0, plan.n_paths, plan.chunk_size)
    ]

    def work(task):
        return _chunk_stats(plan, shift_rows, args, *task, backend)

    if plan.workers > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            outputs = list(pool.map(work, tasks))
    else:
        outputs = [work(t) for t in tasks]

    n_out = plan.grid.size
    result = MCResult(plan)
    for name in STATS:
        result.sums[name] = np.zeros((plan.n_batches, n_out))
        result.sqsums[name] = np.zeros((plan.n_batches, n_out))
    for (b, _, _), (s1, s2) in zip(tasks, outputs):
        for k, name in enumerate(STATS):
            result.sums[name][b] += s1[k]
            result.sqsums[name][b] += s2[k]
    return result


def _hG(curve, t) -> float:
    hg = float(curve.hazard_rate(t)) * float(curve.survival(t))
    if hg == 0.0:
        raise ZeroDivisionError(f"h(t)G(t) vanishes at t={t}; zeta weighting undefined")
    return hg


def epe_wwr_mc(result: MCResult, curve, t: float) -> EstimateWithCI:
    """``E[V_t^+ zeta_t]`` with ``zeta_t = lam_t S_t / (h(t) G(t))``."""
    return result.estimate("vpos_w", t, scale=1.0 / _hG(curve, t))


def zeta_mc(result: MCResult, curve, t: float) -> EstimateWithCI:
    """Sample mean of ``zeta_t``; 1 in expectation when the curve is the model's own."""
    return result.estimate("w", t, scale=1.0 / _hG(curve, t))


def cva_mc(result: MCResult, recovery: float = 0.0) -> EstimateWithCI:
    """``(1 - R) int E[V^+ lam S] dt`` by the trapezoid rule on the grid."""
    return result.integrate("vpos_w", scale=1.0 - recovery)


def export_epe_csv(result: MCResult, curve, path) -> None:
    """Write ``t,epe,ci_half_width`` rows (``t = 0`` carries EPE 0)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "epe", "ci_half_width"])
        for t in result.grid:
            if t == 0.0:
                w.writerow(["0", "0", "0"])
                continue
            est = epe_wwr_mc(result, curve, t)
            w.writerow([f"{t:.10g}", f"{est.value:.10g}", f"{est.half_width:.10g}"])


# -- static Gaussian-copula baseline ---------------------------------------------

def copula_law(spec: ExposureSpec, curve, rho: float, t: float) -> GaussianLaw:
    from scipy.special import ndtri

    if not spec.is_gaussian:
        raise UnsupportedExposure("Gaussian copula baseline needs a Gaussian exposure")
    g = float(curve.survival(t))
    if not 0.0 < g < 1.0:
        raise ValueError(f"copula needs 0 < G(t) < 1, got {g} at t={t}")
    mean, sd = q_moments(spec, t)
    return GaussianLaw(float(mean + rho * sd * ndtri(g)), float(sd * np.sqrt(max(1.0 - rho * rho, 0.0))))


def copula_epe(spec: ExposureSpec, curve, rho: float, t: float) -> float:
    """EPE of ``V_t`` conditional on default at ``t`` under a Gaussian copula."""
    if t == 0.0:
        return 0.0
    law = copula_law(spec, curve, rho, t)
    return float(positive_part_mean(law.mean, law.stdev))


__all__ = [
    "SimulationPlan", "PathBatch", "MCResult", "EstimateWithCI",
    "step_cir", "simulate_jcir_increment", "simulate_paths", "run",
    "epe_wwr_mc", "zeta_mc", "cva_mc", "copula_epe", "copula_law", "export_epe_csv",
    "available_backends", "default_backend",
]
