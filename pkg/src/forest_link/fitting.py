"""Least-squares regression of path-loss models and residual statistics.

The engine is a damped least-squares solver (scipy's trust-region
reflective variant, which follows the Levenberg-Marquardt contract of
gradient steps with adaptive damping) run from a deterministic
Latin-hypercube multi-start over the parameter bounds.  Starts are ranked
by (cost, start index) so the winner is independent of evaluation order.

Stopping rules: relative step < 1e-9, relative cost change < 1e-12, or
the iteration cap.  A fit that hits the cap is returned with
converged=False, never silently presented as converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import qmc

from .errors import ArityError, DegenerateDataError, DomainError, NotConvergedError
from .pathloss import MODEL_FAMILIES

MAX_ITERATIONS = 500
DEFAULT_N_STARTS = 16


@dataclass(frozen=True)
class PathLossSample:
    """One measured point: 3-D T-R distance and path loss in dB."""

    dist_m: float
    pl_db: float
    elev_deg: float | None = None
    env: str = "other"   # larch | birch | other
    link: str = "G2G"    # G2G | A2G

    def __post_init__(self):
        if not self.dist_m > 0:
            raise DomainError(f"sample distance must be > 0 m, got {self.dist_m}")
        if not math.isfinite(self.pl_db):
            raise DomainError("sample path loss must be finite")
        if self.env not in ("larch", "birch", "other"):
            raise DomainError(f"unknown environment tag {self.env!r}")
        if self.link not in ("G2G", "A2G"):
            raise DomainError(f"unknown link tag {self.link!r}")


@dataclass(frozen=True)
class FitContext:
    """Geometry shared by every sample in a fit."""

    freq_ghz: float = 1.4
    rx_height_m: float = 1.8
    elev_deg: float | None = None   # overrides per-sample elevations
    veg_depth_m: float = 20.0
    fe2r_reading: str = "literal"


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus which parameters are free and which are pinned."""

    name: str
    fixed: dict = field(default_factory=dict)
    free: tuple[str, ...] | None = None   # None -> family default
    context: FitContext = FitContext()

    def family(self):
        if self.name not in MODEL_FAMILIES:
            raise DomainError(f"unknown model family {self.name!r}")
        return MODEL_FAMILIES[self.name]

    def free_names(self) -> tuple[str, ...]:
        fam = self.family()
        free = fam.default_free if self.free is None else tuple(self.free)
        for name in free:
            if name not in fam.param_names:
                raise DomainError(f"{self.name} has no parameter {name!r}")
        return free

    def base_params(self) -> dict:
        params = dict(self.family().defaults)
        params.update(self.fixed)
        return params


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    params: dict
    rmse_db: float
    n_samples: int
    converged: bool
    iterations: int
    cost: float
    start_index: int

    def __post_init__(self):
        if self.rmse_db < 0:
            raise DomainError("rmse must be >= 0")


@dataclass(frozen=True)
class NormalFit:
    """Sample-moment normal fit plus a histogram goodness figure.

    fit_err_pct is the RMSE between the Freedman-Diaconis density histogram
    and the fitted pdf, in percent; None when undefined (zero variance).
    """

    mu: float
    sigma: float
    fit_err_pct: float | None
    n: int

    def __post_init__(self):
        if self.sigma < 0:
            raise DomainError("sigma must be >= 0")


# ---------------------------------------------------------------------------
# evaluation helpers


def _sample_arrays(samples):
    dists = np.array([s.dist_m for s in samples], dtype=float)
    elevs = np.array([90.0 if s.elev_deg is None else s.elev_deg for s in samples],
                     dtype=float)
    pl = np.array([s.pl_db for s in samples], dtype=float)
    return dists, elevs, pl


def evaluate_model(spec: ModelSpec, params: dict, dists, elevs=None):
    """Vectorized model curve; groups by elevation when samples mix angles."""
    fam = spec.family()
    ctx = spec.context
    dists = np.asarray(dists, dtype=float)
    if ctx.elev_deg is not None or elevs is None:
        elev = 90.0 if ctx.elev_deg is None else ctx.elev_deg
        return np.asarray(fam.evaluate(dists, elev, ctx, params), dtype=float)
    elevs = np.asarray(elevs, dtype=float)
    uniq = np.unique(elevs)
    if uniq.size == 1:
        return np.asarray(fam.evaluate(dists, float(uniq[0]), ctx, params), dtype=float)
    first_mask = elevs == uniq[0]
    first = np.asarray(fam.evaluate(dists[first_mask], float(uniq[0]), ctx, params), dtype=float)
    out = np.empty(first.shape[:-1] + dists.shape, dtype=float)
    out[..., first_mask] = first
    for elev in uniq[1:]:
        mask = elevs == elev
        out[..., mask] = fam.evaluate(dists[mask], float(elev), ctx, params)
    return out


def rmse(params: dict, spec: ModelSpec, samples) -> float:
    """Root-mean-square residual of the model against the samples."""
    if len(samples) == 0:
        raise ArityError("rmse needs at least one sample")
    dists, elevs, pl = _sample_arrays(samples)
    resid = evaluate_model(spec, params, dists, elevs) - pl
    return float(np.sqrt(np.mean(resid ** 2)))


def _two_ray_scan_starts(spec, free, base, merged, dists, elevs, pl_db, k_top=3):
    """Extra warm starts for the modified two-ray model.

    The model is periodic in the path bias l with period lambda (~0.21 m at
    1.4 GHz), so a Latin hypercube alone lands in arbitrary phase basins.
    Because the model is linear in (n, m) once l is fixed, a 1-D scan of l
    at lambda/8 steps with a closed-form linear solve locates the global
    basin; the top candidates are handed to the damped solver as starts.
    """
    from .pathloss import C_LIGHT
    lam = C_LIGHT / (spec.context.freq_ghz * 1e9)
    lo_l, hi_l = merged["l"]
    grid = np.arange(lo_l, hi_l + lam / 8.0, lam / 8.0)
    probe = dict(base)
    probe["n"], probe["m"] = 1.0, 0.0
    # one broadcast evaluation: the bias enters the reflected-path length
    # additively, so a column of grid values yields a (len(grid), len(d))
    # curve matrix in a single call
    probe["l"] = grid[:, None]
    g = evaluate_model(spec, probe, dists, elevs)
    g_bar = g.mean(axis=1)
    y_bar = float(np.mean(pl_db))
    dg = g - g_bar[:, None]
    dy = pl_db - y_bar
    s_gy = dg @ dy
    s_gg = np.sum(dg * dg, axis=1)
    s_yy = float(np.sum(dy * dy))
    with np.errstate(divide="ignore", invalid="ignore"):
        n_hat = np.where(s_gg > 0, s_gy / s_gg, 0.0)
    m_hat = y_bar - n_hat * g_bar
    costs = s_yy - n_hat * s_gy
    coefs = np.column_stack([n_hat, m_hat])
    order = np.argsort(costs, kind="stable")[:k_top]
    starts = []
    for i in order:
        theta = []
        for name in free:
            if name == "n":
                val = coefs[i, 0]
            elif name == "m":
                val = coefs[i, 1]
            elif name == "l":
                val = grid[i]
            else:
                val = base[name]
            lo, hi = merged[name]
            theta.append(float(np.clip(val, lo, hi)))
        starts.append(np.array(theta))
    return starts


def merge_bounds(spec: ModelSpec, bounds: dict | None) -> dict:
    fam = spec.family()
    merged = dict(fam.default_bounds)
    if bounds:
        merged.update(bounds)
    for name in spec.free_names():
        if name not in merged:
            raise DomainError(f"no bounds available for free parameter {name!r}")
        lo, hi = merged[name]
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"bounds for {name!r} must be finite with lo < hi")
    return merged


def fit_model(samples, spec: ModelSpec, bounds: dict | None = None,
              init: dict | None = None, *, seed: int = 0,
              n_starts: int = DEFAULT_N_STARTS) -> FittedModel:
    """Least-squares fit of the free parameters against the samples.

    bounds maps parameter name -> (lo, hi), overriding the family defaults;
    init optionally adds a warm start evaluated alongside the Latin
    hypercube.  Deterministic for a given (seed, n_starts).
    """
    free = spec.free_names()
    k = len(free)
    if len(samples) < k + 1:
        raise ArityError(
            f"fit of {k} free parameters needs >= {k + 1} samples, got {len(samples)}")
    dists, elevs, pl = _sample_arrays(samples)
    if k > 0 and np.ptp(dists) == 0 and np.ptp(elevs) == 0:
        raise DegenerateDataError(
            "all samples share one geometry; model parameters are unidentifiable")

    base = spec.base_params()
    if k == 0:
        err = rmse(base, spec, samples)
        return FittedModel(spec=spec, params=base, rmse_db=err,
                           n_samples=len(samples), converged=True,
                           iterations=0, cost=0.5 * err ** 2 * len(samples),
                           start_index=-1)

    merged = merge_bounds(spec, bounds)
    lo = np.array([merged[name][0] for name in free])
    hi = np.array([merged[name][1] for name in free])

    def residual(theta):
        params = dict(base)
        params.update(zip(free, theta))
        return evaluate_model(spec, params, dists, elevs) - pl

    sampler = qmc.LatinHypercube(d=k, seed=seed)
    starts = [lo + row * (hi - lo) for row in sampler.random(n=n_starts)]
    if spec.name == "fe2r_m" and {"n", "m", "l"} <= set(free):
        starts.extend(_two_ray_scan_starts(spec, free, base, merged, dists, elevs, pl))
    if init is not None:
        theta0 = np.array([init.get(name, base.get(name)) for name in free], dtype=float)
        if np.any(theta0 < lo) or np.any(theta0 > hi):
            raise DomainError("init lies outside the bounds")
        starts.append(theta0)

    best = None
    for idx, x0 in enumerate(starts):
        res = least_squares(residual, x0, bounds=(lo, hi), method="trf",
                            xtol=1e-9, ftol=1e-12, gtol=1e-14,
                            max_nfev=MAX_ITERATIONS * (k + 1))
        key = (res.cost, idx)
        if best is None or key < best[0]:
            best = (key, res, idx)

    _, res, idx = best
    params = dict(base)
    params.update(zip(free, res.x))
    err = float(np.sqrt(np.mean(res.fun ** 2)))
    return FittedModel(spec=spec, params=params, rmse_db=err,
                       n_samples=len(samples), converged=res.status > 0,
                       iterations=int(res.njev if res.njev is not None else res.nfev),
                       cost=float(res.cost), start_index=idx)


def refit(fitted: FittedModel, samples, bounds: dict | None = None) -> FittedModel:
    """Re-run the solver warm-started at the fitted parameters (no multi-start)."""
    return fit_model(samples, fitted.spec, bounds=bounds, init=fitted.params,
                     n_starts=0)


def shadow_residuals(fitted: FittedModel, samples) -> np.ndarray:
    """Per-sample shadow fading: measured loss minus the fitted mean curve."""
    if not fitted.converged:
        raise NotConvergedError("shadow residuals require a converged fit")
    dists, elevs, pl = _sample_arrays(samples)
    return pl - evaluate_model(fitted.spec, fitted.params, dists, elevs)


def fit_normal(series) -> NormalFit:
    """Normal fit by sample moments with a Freedman-Diaconis histogram check."""
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        raise ArityError(f"normal fit needs >= 2 points, got {x.size}")
    mu = float(np.mean(x))
    sigma = float(np.std(x, ddof=1))
    if sigma == 0.0:
        return NormalFit(mu=mu, sigma=0.0, fit_err_pct=None, n=x.size)
    hist, edges = np.histogram(x, bins="fd", density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    pdf = np.exp(-0.5 * ((centers - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    err = float(np.sqrt(np.mean((hist - pdf) ** 2))) * 100.0
    return NormalFit(mu=mu, sigma=sigma, fit_err_pct=err, n=x.size)


def spec_for(name: str, context: FitContext | None = None, fixed: dict | None = None,
             free: tuple[str, ...] | None = None) -> ModelSpec:
    """Convenience constructor used by the CLI."""
    return ModelSpec(name=name, fixed=fixed or {}, free=free,
                     context=context or FitContext())
