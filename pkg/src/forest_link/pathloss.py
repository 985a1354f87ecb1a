"""Closed-form large-scale path-loss models for forest links.

Ground-to-ground models
    pl_fspl       free-space loss, 20*log10(4*pi*f*d/c)
    pl_ci         close-in reference model anchored at d0 = 1 m
    pl_itu_h_excess / pl_fspl_h
                  horizontal-forest excess Am*(1 - exp(-d*mu/Am)) and its
                  sum with free-space loss
    pl_sui        Stanford University Interim terrain model (d0 = 100 m,
                  free-space below the reference distance)
    pl_bhf        log-distance + tanh-saturating vegetation term
    pl_bhf_m      piecewise variant of pl_bhf with a 30 m breakpoint,
                  continuous at the breakpoint by construction

Air-to-ground models
    pl_itu_s_excess / pl_fspl_s
                  slant-forest excess A*f^B*dv^C*(theta+E)^G (f in MHz) and
                  its sum with free-space loss evaluated with d in km
    pl_fe2r       flat-earth two-ray interference model
    pl_fe2r_m     two-ray with exponent scale n, offset m and a path-length
                  bias l added to the reflected ray
    pl_hata       Okumura-Hata (open area) / Cost-231 Hata baselines

All functions are pure: scalars in -> float out, numpy arrays in -> array
out.  Internal units are Hz/m/radians; each model converts at its boundary
(GHz for the log-frequency terms, MHz for the slant excess, km for the
slant free-space term) so the unit conversions live in exactly one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Exact by definition (SI).
C_LIGHT = 299_792_458.0

# Two-ray perfect nulls are reported as this sentinel instead of infinity
# so least-squares fits stay finite.
NULL_LOSS_DB = 300.0

_REFLECTION_READINGS = ("literal", "ratio")


@dataclass(frozen=True)
class LinkGeometry:
    """One link geometry: carrier, 3-D T-R separation and A2G extras.

    elev_deg is the elevation angle of the air terminal seen from the
    ground (90 = overhead); rx_height_m is the ground antenna height used
    by the two-ray models; veg_depth_m is the vegetation depth entering
    the slant-forest excess term.
    """

    freq_ghz: float
    dist_m: float | np.ndarray
    elev_deg: float = 90.0
    rx_height_m: float = 1.8
    veg_depth_m: float = 0.0

    def __post_init__(self):
        if self.freq_ghz <= 0:
            raise DomainError(f"carrier frequency must be > 0 GHz, got {self.freq_ghz}")
        if not np.all(np.asarray(self.dist_m) > 0):
            raise DomainError("T-R distance must be > 0 m")
        if not 0.0 <= self.elev_deg <= 90.0:
            raise DomainError(f"elevation angle must be in [0, 90] deg, got {self.elev_deg}")
        if self.rx_height_m < 0:
            raise DomainError(f"receiver height must be >= 0 m, got {self.rx_height_m}")


# ---------------------------------------------------------------------------
# parameter bundles


@dataclass(frozen=True)
class ItuHParams:
    a_max_db: float   # saturation attenuation Am (dB)
    mu_db_per_m: float  # specific attenuation for very short paths (dB/m)

    def __post_init__(self):
        if not math.isfinite(self.a_max_db) or self.a_max_db <= 0:
            raise DomainError(f"Am must be finite and > 0, got {self.a_max_db}")
        if not math.isfinite(self.mu_db_per_m) or self.mu_db_per_m < 0:
            raise DomainError(f"mu must be finite and >= 0, got {self.mu_db_per_m}")


@dataclass(frozen=True)
class SuiParams:
    a: float
    b: float
    c: float
    bs_height_m: float = 40.0
    d0_m: float = 100.0

    def __post_init__(self):
        if self.bs_height_m <= 0:
            raise DomainError(f"base-station height must be > 0 m, got {self.bs_height_m}")
        if self.d0_m <= 0:
            raise DomainError(f"SUI reference distance must be > 0 m, got {self.d0_m}")


# Terrain constants for the three published SUI categories.
SUI_TERRAIN = {
    "A": SuiParams(a=4.6, b=0.0075, c=12.6),
    "B": SuiParams(a=4.0, b=0.0065, c=17.1),
    "C": SuiParams(a=3.6, b=0.005, c=20.0),
}


@dataclass(frozen=True)
class BhfParams:
    alpha: float
    beta: float
    zeta: float


@dataclass(frozen=True)
class BhfMParams:
    """Piecewise model parameters; d0_m is the breakpoint distance.

    The short-range branch uses (n, m), the long-range branch (alpha,
    zeta).  The curve is anchored so both branches meet at d0; the beta
    field is carried for parameter-table compatibility but does not shift
    the curve (a nonzero beta would re-introduce a jump at d0).
    """

    n: float
    m: float
    alpha: float
    zeta: float
    beta: float = 0.0
    d0_m: float = 30.0

    def __post_init__(self):
        if self.d0_m <= 0:
            raise DomainError(f"breakpoint must be > 0 m, got {self.d0_m}")


@dataclass(frozen=True)
class ItuSParams:
    a: float
    b: float
    c: float
    e: float = 0.0
    g: float = 0.0


@dataclass(frozen=True)
class Fe2rParams:
    xi_r: float = 15.0  # ground relative permittivity

    def __post_init__(self):
        if not self.xi_r > 1.0:
            raise DomainError(f"ground permittivity must be > 1, got {self.xi_r}")


@dataclass(frozen=True)
class Fe2rMParams:
    n: float = 1.0      # exponent scale on the two-ray log term
    m: float = 0.0      # dB offset for in-cluster energy
    l: float = 0.0      # path-length bias on the reflected ray (m)
    xi_r: float = 15.0

    def __post_init__(self):
        if not self.xi_r > 1.0:
            raise DomainError(f"ground permittivity must be > 1, got {self.xi_r}")


@dataclass(frozen=True)
class HataParams:
    bs_height_m: float = 40.0
    ms_height_m: float = 1.8
    variant: str = "okumura_open"  # okumura_open | cost231

    def __post_init__(self):
        if self.bs_height_m <= 0 or self.ms_height_m <= 0:
            raise DomainError("antenna heights must be > 0 m")
        if self.variant not in ("okumura_open", "cost231"):
            raise DomainError(f"unknown Hata variant {self.variant!r}")


# ---------------------------------------------------------------------------
# models


def _maybe_scalar(x, template):
    if np.ndim(template) == 0:
        return float(x)
    return np.asarray(x, dtype=float)


def pl_fspl(geom: LinkGeometry):
    """Free-space path loss in dB, d in meters."""
    d = np.asarray(geom.dist_m, dtype=float)
    out = 20.0 * np.log10(4.0 * np.pi * geom.freq_ghz * 1e9 * d / C_LIGHT)
    return _maybe_scalar(out, geom.dist_m)


def pl_ci(geom: LinkGeometry, n: float):
    """Close-in model: 10*n*log10(d/1m) + FSPL(f, 1m).  n=2 is free space."""
    d = np.asarray(geom.dist_m, dtype=float)
    fspl_1m = 20.0 * math.log10(4.0 * math.pi * geom.freq_ghz * 1e9 / C_LIGHT)
    out = 10.0 * n * np.log10(d) + fspl_1m
    return _maybe_scalar(out, geom.dist_m)


def pl_itu_h_excess(geom: LinkGeometry, p: ItuHParams):
    """Horizontal-forest excess attenuation, saturating at Am."""
    d = np.asarray(geom.dist_m, dtype=float)
    out = p.a_max_db * (1.0 - np.exp(-d * p.mu_db_per_m / p.a_max_db))
    return _maybe_scalar(out, geom.dist_m)


def pl_fspl_h(geom: LinkGeometry, p: ItuHParams):
    """Free-space loss plus the horizontal-forest excess."""
    return pl_fspl(geom) + pl_itu_h_excess(geom, p)


def pl_sui(geom: LinkGeometry, p: SuiParams):
    """SUI terrain model; free-space loss below the 100 m reference.

    A = 20*log10(4*pi*d0/lambda) equals FSPL at d0, so the two branches
    are continuous at the reference distance.
    """
    d = np.asarray(geom.dist_m, dtype=float)
    lam = C_LIGHT / (geom.freq_ghz * 1e9)
    a_ref = 20.0 * math.log10(4.0 * math.pi * p.d0_m / lam)
    gamma = p.a - p.b * p.bs_height_m + p.c / p.bs_height_m
    beyond = a_ref + 10.0 * gamma * np.log10(np.maximum(d, p.d0_m) / p.d0_m)
    out = np.where(d > p.d0_m, beyond, pl_fspl(LinkGeometry(geom.freq_ghz, d)))
    return _maybe_scalar(out, geom.dist_m)


def pl_bhf(geom: LinkGeometry, p: BhfParams):
    """Horizontal-forest model: log-distance slope plus tanh vegetation term.

    The tanh argument d/20 is dimensionless with d in meters; the term
    saturates at zeta for d >> 20 m.  f enters in GHz.
    """
    d = np.asarray(geom.dist_m, dtype=float)
    out = (10.0 * p.alpha * np.log10(d) + p.beta + p.zeta * np.tanh(d / 20.0)
           + 20.0 * math.log10(geom.freq_ghz))
    return _maybe_scalar(out, geom.dist_m)


def pl_bhf_m(geom: LinkGeometry, p: BhfMParams):
    """Piecewise horizontal-forest model with a breakpoint at d0 (30 m).

    Below d0 the loss follows a plain log-distance law 10*n*log10(d/10)
    + 20*log10(f) + m.  Above d0 the shifted-distance vegetation branch
    10*alpha*log10((d-d0)/10 + 1) + zeta*tanh((d-d0)/20) is anchored to the
    short-range branch value at d0, which makes the curve continuous at
    the breakpoint for every parameter vector.
    """
    d = np.asarray(geom.dist_m, dtype=float)
    f_term = 20.0 * math.log10(geom.freq_ghz)
    near = 10.0 * p.n * np.log10(d / 10.0) + f_term + p.m
    at_d0 = 10.0 * p.n * math.log10(p.d0_m / 10.0) + f_term + p.m
    shifted = np.maximum(d - p.d0_m, 0.0)
    far = (10.0 * p.alpha * np.log10(shifted / 10.0 + 1.0)
           + p.zeta * np.tanh(shifted / 20.0) + at_d0)
    out = np.where(d <= p.d0_m, near, far)
    return _maybe_scalar(out, geom.dist_m)


def pl_itu_s_excess(geom: LinkGeometry, p: ItuSParams):
    """Slant-forest excess A*f^B*dv^C*(theta+E)^G with f in MHz."""
    f_mhz = geom.freq_ghz * 1000.0
    theta_term = geom.elev_deg + p.e
    if theta_term <= 0 and p.g != int(p.g):
        raise DomainError(
            f"(theta + E) = {theta_term} is not positive; non-integer exponent G undefined")
    if geom.veg_depth_m < 0:
        raise DomainError(f"vegetation depth must be >= 0 m, got {geom.veg_depth_m}")
    if geom.veg_depth_m == 0 and p.c < 0:
        raise DomainError("zero vegetation depth with negative exponent C")
    dv_term = geom.veg_depth_m ** p.c if geom.veg_depth_m > 0 else (1.0 if p.c == 0 else 0.0)
    return float(p.a * f_mhz ** p.b * dv_term * theta_term ** p.g)


def pl_fspl_s(geom: LinkGeometry, p: ItuSParams):
    """Free-space term with d in kilometers plus the slant-forest excess.

    The km convention makes this free-space term exactly 60 dB below the
    meter-based pl_fspl at the same geometry.
    """
    d_km = np.asarray(geom.dist_m, dtype=float) / 1000.0
    fspl_km = 20.0 * np.log10(4.0 * np.pi * geom.freq_ghz * 1e9 * d_km / C_LIGHT)
    out = fspl_km + pl_itu_s_excess(geom, p)
    return _maybe_scalar(out, geom.dist_m)


def reflection_coefficient(elev_deg: float, xi_r: float, reading: str = "literal") -> float:
    """Ground reflection coefficient R = (sin(t) - z)/(sin(t) + z).

    The two supported readings of z differ in how the permittivity divides
    the cos^2 term:

        literal  z = sqrt(xi_r - cos^2(t)/xi_r)     (division binds to cos^2)
        ratio    z = sqrt((xi_r - cos^2(t))/xi_r)

    'literal' is the default; 'ratio' is selectable through RunConfig.
    """
    if reading not in _REFLECTION_READINGS:
        raise DomainError(f"unknown reflection reading {reading!r}")
    t = math.radians(elev_deg)
    cos2 = math.cos(t) ** 2
    if reading == "literal":
        z = math.sqrt(xi_r - cos2 / xi_r)
    else:
        z = math.sqrt((xi_r - cos2) / xi_r)
    return (math.sin(t) - z) / (math.sin(t) + z)


def _two_ray_field(geom: LinkGeometry, xi_r: float, path_bias_m: float, reading: str):
    """|lambda/(4*pi) * (1/d + R*exp(-j*dphi)/d')| for the two-ray family."""
    d = np.asarray(geom.dist_m, dtype=float)
    lam = C_LIGHT / (geom.freq_ghz * 1e9)
    t = math.radians(geom.elev_deg)
    r_coef = reflection_coefficient(geom.elev_deg, xi_r, reading)
    d_prime = np.hypot(d * math.cos(t), d * math.sin(t) + 2.0 * geom.rx_height_m) + path_bias_m
    if np.any(d_prime == 0):
        raise DomainError("reflected-path length is zero")
    dphi = 2.0 * np.pi * (d_prime - d) / lam
    return np.abs(lam / (4.0 * np.pi) * (1.0 / d + r_coef * np.exp(-1j * dphi) / d_prime))


def _null_safe_loss(loss, mag):
    loss = np.where(mag == 0.0, NULL_LOSS_DB, loss)
    return np.minimum(loss, NULL_LOSS_DB)


def pl_fe2r(geom: LinkGeometry, p: Fe2rParams = Fe2rParams(), *, reading: str = "literal"):
    """Flat-earth two-ray loss.  At 90 deg elevation d'-d = 2*h_r for every
    d, so the interference term is constant and the curve shows no ripples;
    shallower elevations oscillate as the phase difference sweeps.
    Perfect nulls saturate at NULL_LOSS_DB."""
    mag = _two_ray_field(geom, p.xi_r, 0.0, reading)
    with np.errstate(divide="ignore"):
        loss = -20.0 * np.log10(mag)
    return _maybe_scalar(_null_safe_loss(loss, mag), geom.dist_m)


def pl_fe2r_m(geom: LinkGeometry, p: Fe2rMParams, *, reading: str = "literal"):
    """Modified two-ray loss: -20*n*log10|field| + m with the reflected path
    lengthened by l meters (the bias feeds both the 1/d' magnitude and the
    phase difference).  n=1, m=0, l=0 reduces to pl_fe2r exactly."""
    mag = _two_ray_field(geom, p.xi_r, p.l, reading)
    with np.errstate(divide="ignore"):
        loss = -20.0 * p.n * np.log10(mag) + p.m
    return _maybe_scalar(_null_safe_loss(loss, mag), geom.dist_m)


def pl_hata(geom: LinkGeometry, p: HataParams):
    """Okumura-Hata (open-area correction) or Cost-231 Hata baseline.

    Published forms; validity ranges (f, d, heights) are relaxed with log
    extrapolation -- see hata_validity_notes for the flags the tool layer
    attaches to its reports.
    """
    d_km = np.asarray(geom.dist_m, dtype=float) / 1000.0
    f = geom.freq_ghz * 1000.0  # MHz
    lf = math.log10(f)
    a_hm = (1.1 * lf - 0.7) * p.ms_height_m - (1.56 * lf - 0.8)
    slope = 44.9 - 6.55 * math.log10(p.bs_height_m)
    if p.variant == "okumura_open":
        base = (69.55 + 26.16 * lf - 13.82 * math.log10(p.bs_height_m) - a_hm
                - 4.78 * lf ** 2 + 18.33 * lf - 40.94)
    else:
        base = 46.3 + 33.9 * lf - 13.82 * math.log10(p.bs_height_m) - a_hm
    out = base + slope * np.log10(d_km)
    return _maybe_scalar(out, geom.dist_m)


def hata_validity_notes(geom: LinkGeometry, p: HataParams) -> list[str]:
    """Out-of-range flags for the published Hata validity envelopes."""
    notes = []
    f = geom.freq_ghz * 1000.0
    lo, hi = (150.0, 1500.0) if p.variant == "okumura_open" else (1500.0, 2000.0)
    if not lo <= f <= hi:
        notes.append(f"frequency {f:.0f} MHz outside published range [{lo:.0f}, {hi:.0f}] MHz")
    d = np.atleast_1d(np.asarray(geom.dist_m, dtype=float))
    if d.min() < 1000.0 or d.max() > 20_000.0:
        notes.append("distance outside published range [1, 20] km (log extrapolation)")
    if not 30.0 <= p.bs_height_m <= 200.0:
        notes.append(f"base height {p.bs_height_m} m outside published range [30, 200] m")
    return notes


# ---------------------------------------------------------------------------
# model registry used by the fitting engine and the CLI


@dataclass(frozen=True)
class ModelFamily:
    """Descriptor binding a model name to its parameters and evaluator.

    evaluate(dists, elevs, ctx, params) is vectorized over distance;
    ``ctx`` is a fitting.FitContext carrying the shared geometry.
    """

    name: str
    param_names: tuple[str, ...]
    defaults: dict
    default_bounds: dict
    default_free: tuple[str, ...]
    evaluate: callable = field(repr=False, compare=False, default=None)


def _geom(dists, elev, ctx):
    return LinkGeometry(freq_ghz=ctx.freq_ghz, dist_m=dists, elev_deg=elev,
                        rx_height_m=ctx.rx_height_m, veg_depth_m=ctx.veg_depth_m)


def _build_registry() -> dict:
    fams = [
        ModelFamily(
            "fspl", (), {}, {}, (),
            lambda d, e, ctx, p: pl_fspl(_geom(d, e, ctx))),
        ModelFamily(
            "ci", ("n",), {"n": 2.0}, {"n": (0.5, 8.0)}, ("n",),
            lambda d, e, ctx, p: pl_ci(_geom(d, e, ctx), p["n"])),
        ModelFamily(
            "fspl_h", ("a_max_db", "mu_db_per_m"),
            {"a_max_db": 30.0, "mu_db_per_m": 0.1},
            {"a_max_db": (1.0, 2000.0), "mu_db_per_m": (1e-4, 10.0)},
            ("a_max_db", "mu_db_per_m"),
            lambda d, e, ctx, p: pl_fspl_h(
                _geom(d, e, ctx), ItuHParams(p["a_max_db"], p["mu_db_per_m"]))),
        ModelFamily(
            "itu_h", ("a_max_db", "mu_db_per_m"),
            {"a_max_db": 30.0, "mu_db_per_m": 0.1},
            {"a_max_db": (1.0, 2000.0), "mu_db_per_m": (1e-4, 10.0)},
            ("a_max_db", "mu_db_per_m"),
            lambda d, e, ctx, p: pl_itu_h_excess(
                _geom(d, e, ctx), ItuHParams(p["a_max_db"], p["mu_db_per_m"]))),
        ModelFamily(
            "sui_a", ("a", "b", "c", "bs_height_m"),
            {"a": 4.6, "b": 0.0075, "c": 12.6, "bs_height_m": 40.0}, {}, (),
            lambda d, e, ctx, p: pl_sui(
                _geom(d, e, ctx), SuiParams(p["a"], p["b"], p["c"], p["bs_height_m"]))),
        ModelFamily(
            "sui_b", ("a", "b", "c", "bs_height_m"),
            {"a": 4.0, "b": 0.0065, "c": 17.1, "bs_height_m": 40.0}, {}, (),
            lambda d, e, ctx, p: pl_sui(
                _geom(d, e, ctx), SuiParams(p["a"], p["b"], p["c"], p["bs_height_m"]))),
        ModelFamily(
            "sui_c", ("a", "b", "c", "bs_height_m"),
            {"a": 3.6, "b": 0.005, "c": 20.0, "bs_height_m": 40.0}, {}, (),
            lambda d, e, ctx, p: pl_sui(
                _geom(d, e, ctx), SuiParams(p["a"], p["b"], p["c"], p["bs_height_m"]))),
        ModelFamily(
            "bhf", ("alpha", "beta", "zeta"),
            {"alpha": 4.3, "beta": 89.0, "zeta": -42.0},
            {"alpha": (0.1, 10.0), "beta": (-100.0, 200.0), "zeta": (-150.0, 150.0)},
            ("alpha", "beta", "zeta"),
            lambda d, e, ctx, p: pl_bhf(
                _geom(d, e, ctx), BhfParams(p["alpha"], p["beta"], p["zeta"]))),
        ModelFamily(
            "bhf_m", ("n", "m", "alpha", "zeta"),
            {"n": 4.3, "m": 1.0, "alpha": 1.1, "zeta": -11.7},
            {"n": (0.1, 8.0), "m": (-100.0, 200.0),
             "alpha": (0.1, 10.0), "zeta": (-150.0, 150.0)},
            ("n", "m", "alpha", "zeta"),
            lambda d, e, ctx, p: pl_bhf_m(
                _geom(d, e, ctx), BhfMParams(p["n"], p["m"], p["alpha"], p["zeta"]))),
        ModelFamily(
            "itu_s", ("a", "b", "c", "e", "g"),
            {"a": 0.2, "b": 0.4, "c": 0.2, "e": 0.0, "g": 0.1},
            {"a": (1e-4, 10.0), "b": (-2.0, 2.0), "c": (-2.0, 2.0),
             "e": (0.0, 90.0), "g": (-2.0, 2.0)},
            ("a", "b", "c", "g"),
            lambda d, e, ctx, p: np.full_like(
                np.asarray(d, dtype=float),
                pl_itu_s_excess(_geom(d, e, ctx),
                                ItuSParams(p["a"], p["b"], p["c"], p["e"], p["g"])))),
        ModelFamily(
            "fspl_s", ("a", "b", "c", "e", "g"),
            {"a": 0.2, "b": 0.4, "c": 0.2, "e": 0.0, "g": 0.1},
            {"a": (1e-4, 10.0), "b": (-2.0, 2.0), "c": (-2.0, 2.0),
             "e": (0.0, 90.0), "g": (-2.0, 2.0)},
            ("a", "b", "c", "g"),
            lambda d, e, ctx, p: pl_fspl_s(
                _geom(d, e, ctx), ItuSParams(p["a"], p["b"], p["c"], p["e"], p["g"]))),
        ModelFamily(
            "fe2r", ("xi_r",), {"xi_r": 15.0}, {}, (),
            lambda d, e, ctx, p: pl_fe2r(
                _geom(d, e, ctx), Fe2rParams(p["xi_r"]), reading=ctx.fe2r_reading)),
        ModelFamily(
            "fe2r_m", ("n", "m", "l", "xi_r"),
            {"n": 1.0, "m": 0.0, "l": 0.0, "xi_r": 15.0},
            {"n": (0.1, 3.0), "m": (-30.0, 30.0), "l": (-100.0, 100.0)},
            ("n", "m", "l"),
            lambda d, e, ctx, p: pl_fe2r_m(
                _geom(d, e, ctx), Fe2rMParams(p["n"], p["m"], p["l"], p["xi_r"]),
                reading=ctx.fe2r_reading)),
        ModelFamily(
            "okumura_hata", ("bs_height_m", "ms_height_m"),
            {"bs_height_m": 40.0, "ms_height_m": 1.8}, {}, (),
            lambda d, e, ctx, p: pl_hata(
                _geom(d, e, ctx),
                HataParams(p["bs_height_m"], p["ms_height_m"], "okumura_open"))),
        ModelFamily(
            "cost231_hata", ("bs_height_m", "ms_height_m"),
            {"bs_height_m": 40.0, "ms_height_m": 1.8}, {}, (),
            lambda d, e, ctx, p: pl_hata(
                _geom(d, e, ctx),
                HataParams(p["bs_height_m"], p["ms_height_m"], "cost231"))),
    ]
    return {f.name: f for f in fams}


MODEL_FAMILIES = _build_registry()
