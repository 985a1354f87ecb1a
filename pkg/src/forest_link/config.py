"""Run configuration: flat key=value files plus built-in parameter presets.

Config files are plain text, one `key=value` per line, `#` comments.
The environment variable FOREST_LINK_CONFIG may point at a default file.
Unknown keys are rejected so typos fail loudly; every override is
validated by constructing the target objects at load time.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .fitting import FitContext
from .pathloss import MODEL_FAMILIES
from .pipeline import ExtractionConfig
from .synth import NormalSpec, StatTargets

ENV_VAR = "FOREST_LINK_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    carrier_ghz: float = 1.4
    rx_height_m: float = 1.8
    veg_depth_m: float = 20.0
    seed: int = 1
    out_dir: str = "out"
    snr_db: float = math.inf
    fe2r_reading: str = "literal"         # literal | ratio (two-ray coefficient)
    bhf_m_columns: str = "header"         # header | flipped (published pair order)
    peak_min_spacing: int = 1
    peak_rel_threshold_db: float = -20.0
    peak_noise_floor_margin_db: float = 6.0
    extract_rel_threshold_db: float = -80.0
    extract_scatter_gate_ns: float = 3125.0
    extract_wrap_guard: int = 64
    extract_max_taps: int = 128
    bounds: dict = field(default_factory=dict)   # family -> {param: (lo, hi)}

    def __post_init__(self):
        if self.carrier_ghz <= 0:
            raise ConfigError("carrier_ghz must be > 0")
        if self.fe2r_reading not in ("literal", "ratio"):
            raise ConfigError(f"fe2r_reading must be literal|ratio, got {self.fe2r_reading!r}")
        if self.bhf_m_columns not in ("header", "flipped"):
            raise ConfigError(f"bhf_m_columns must be header|flipped, got {self.bhf_m_columns!r}")
        for fam, params in self.bounds.items():
            if fam not in MODEL_FAMILIES:
                raise ConfigError(f"bounds for unknown model family {fam!r}")
            for name in params:
                if name not in MODEL_FAMILIES[fam].param_names:
                    raise ConfigError(f"model {fam!r} has no parameter {name!r}")

    def fit_context(self, elev_deg: float | None = None) -> FitContext:
        return FitContext(freq_ghz=self.carrier_ghz, rx_height_m=self.rx_height_m,
                          elev_deg=elev_deg, veg_depth_m=self.veg_depth_m,
                          fe2r_reading=self.fe2r_reading)

    def extraction(self) -> ExtractionConfig:
        return ExtractionConfig(
            rel_threshold_db=self.extract_rel_threshold_db,
            min_spacing_samples=self.peak_min_spacing,
            noise_floor_margin_db=self.peak_noise_floor_margin_db,
            scatter_gate_ns=self.extract_scatter_gate_ns,
            wrap_guard_bins=self.extract_wrap_guard,
            max_taps=self.extract_max_taps)


_SCALARS = {
    "carrier_ghz": float,
    "rx_height_m": float,
    "veg_depth_m": float,
    "seed": int,
    "out_dir": str,
    "snr_db": lambda s: math.inf if s in ("inf", "INF") else float(s),
    "fe2r_reading": str,
    "bhf_m_columns": str,
    "peak_min_spacing": int,
    "peak_rel_threshold_db": float,
    "peak_noise_floor_margin_db": float,
    "extract_rel_threshold_db": float,
    "extract_scatter_gate_ns": float,
    "extract_wrap_guard": int,
    "extract_max_taps": int,
}


def parse_config_text(text: str, path: str = "<config>") -> RunConfig:
    fields = {}
    bounds: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", path=path, line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("bounds."):
            parts = key.split(".")
            if len(parts) != 3:
                raise ConfigError(f"bounds key must be bounds.<model>.<param>, got {key!r}",
                                  path=path, line=lineno)
            try:
                lo, hi = (float(v) for v in value.split(","))
            except ValueError as exc:
                raise ConfigError(f"bounds value must be 'lo,hi', got {value!r}",
                                  path=path, line=lineno) from exc
            bounds.setdefault(parts[1], {})[parts[2]] = (lo, hi)
        elif key in _SCALARS:
            try:
                fields[key] = _SCALARS[key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {value!r}",
                                  path=path, line=lineno) from exc
        else:
            raise ConfigError(f"unknown config key {key!r}", path=path, line=lineno)
    try:
        return RunConfig(bounds=bounds, **fields)
    except ConfigError as exc:
        exc.path = path
        raise


def load_config(path: str | None = None) -> RunConfig:
    """Load from an explicit path, else $FOREST_LINK_CONFIG, else defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from exc
    return parse_config_text(text, path=path)


def config_text(cfg: RunConfig) -> str:
    """Canonical key=value rendering (used for the report hash)."""
    lines = [f"{key}={getattr(cfg, key)}" for key in sorted(_SCALARS)]
    for fam in sorted(cfg.bounds):
        for name in sorted(cfg.bounds[fam]):
            lo, hi = cfg.bounds[fam][name]
            lines.append(f"bounds.{fam}.{name}={lo},{hi}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# published reference parameter sets (fitted values for the two forests)

# ground-to-ground model fits; BHF-M pairs follow the published column
# order alpha\n and beta\m -- set bhf_m_columns=flipped to swap each pair
G2G_MODEL_PRESETS = {
    "larch": {
        "ci": {"n": 2.6},
        "fspl_h": {"a_max_db": 30.0, "mu_db_per_m": 0.1},
        "bhf": {"alpha": 4.3, "beta": 89.0, "zeta": -42.0},
        "bhf_m": {"alpha": 1.1, "n": 4.3, "beta": 33.8, "m": 1.0, "zeta": -11.7},
    },
    "birch": {
        "ci": {"n": 2.6},
        "fspl_h": {"a_max_db": 1335.0, "mu_db_per_m": 0.1},
        "bhf": {"alpha": 5.2, "beta": 98.9, "zeta": -58.5},
        "bhf_m": {"alpha": 0.6, "n": 5.2, "beta": 33.5, "m": 1.0, "zeta": -14.3},
    },
}

# air-to-ground modified two-ray fits per elevation angle
A2G_FE2R_M_PRESETS = {
    ("larch", 30): {"n": 1.0, "m": 0.6, "l": 45.6},
    ("larch", 60): {"n": 0.9, "m": 0.7, "l": 37.9},
    ("larch", 90): {"n": 1.1, "m": 0.9, "l": 11.6},
    ("birch", 30): {"n": 1.0, "m": 0.8, "l": 29.7},
    ("birch", 60): {"n": 0.9, "m": 0.9, "l": 25.2},
    ("birch", 90): {"n": 1.1, "m": 1.4, "l": -14.9},
}

# air-to-ground slant-forest fits (A, B, C, G; E pinned at 0)
A2G_FSPL_S_PRESETS = {
    ("larch", 30): {"a": 0.2, "b": 0.4, "c": 0.2, "g": 0.1},
    ("larch", 60): {"a": 0.4, "b": 0.3, "c": 0.4, "g": 0.0},
    ("larch", 90): {"a": 0.4, "b": 0.1, "c": 0.4, "g": 0.3},
    ("birch", 30): {"a": 0.3, "b": 0.3, "c": 0.3, "g": 0.3},
    ("birch", 60): {"a": 0.6, "b": 0.3, "c": 0.0, "g": 0.4},
    ("birch", 90): {"a": 0.7, "b": 0.1, "c": 1.3, "g": -0.4},
}

# close-in exponents fitted per elevation angle
A2G_CI_PRESETS = {
    ("larch", 30): 2.8, ("larch", 60): 3.3, ("larch", 90): 3.0,
    ("birch", 30): 3.5, ("birch", 60): 3.5, ("birch", 90): 3.2,
}

# statistical targets: (shadow sigma dB, RMS-DS mu/sigma ns, K mu/sigma dB)
STAT_PRESETS = {
    "larch_g2g": {"shadow_db": 3.8, "rmsds": (49.5, 28.6), "k_db": (19.8, 11.3),
                  "env": "larch", "link": "G2G", "elev_deg": None},
    "larch_a2g_30": {"shadow_db": 4.9, "rmsds": (59.4, 30.9), "k_db": (14.2, 10.6),
                     "env": "larch", "link": "A2G", "elev_deg": 30.0},
    "larch_a2g_60": {"shadow_db": 2.9, "rmsds": (51.5, 16.5), "k_db": (15.1, 7.2),
                     "env": "larch", "link": "A2G", "elev_deg": 60.0},
    "larch_a2g_90": {"shadow_db": 3.5, "rmsds": (42.6, 21.0), "k_db": (23.1, 11.1),
                     "env": "larch", "link": "A2G", "elev_deg": 90.0},
    "birch_g2g": {"shadow_db": 2.6, "rmsds": (80.1, 34.0), "k_db": (10.2, 9.8),
                  "env": "birch", "link": "G2G", "elev_deg": None},
    "birch_a2g_30": {"shadow_db": 2.8, "rmsds": (107.6, 31.4), "k_db": (3.4, 5.8),
                     "env": "birch", "link": "A2G", "elev_deg": 30.0},
    "birch_a2g_60": {"shadow_db": 2.6, "rmsds": (73.5, 27.1), "k_db": (13.1, 10.1),
                     "env": "birch", "link": "A2G", "elev_deg": 60.0},
    "birch_a2g_90": {"shadow_db": 3.1, "rmsds": (73.1, 25.4), "k_db": (7.9, 8.7),
                     "env": "birch", "link": "A2G", "elev_deg": 90.0},
}


def stat_targets(preset: str) -> StatTargets:
    if preset not in STAT_PRESETS:
        raise ConfigError(f"unknown statistics preset {preset!r}; "
                          f"choose from {sorted(STAT_PRESETS)}")
    p = STAT_PRESETS[preset]
    return StatTargets(k_db=NormalSpec(*p["k_db"]), rmsds_ns=NormalSpec(*p["rmsds"]),
                       env=p["env"], link=p["link"], elev_deg=p["elev_deg"])


def bhf_m_preset(env: str, columns: str = "header") -> dict:
    """BHF-M parameters with the published pair order or its swap."""
    base = dict(G2G_MODEL_PRESETS[env]["bhf_m"])
    if columns == "flipped":
        base["alpha"], base["n"] = base["n"], base["alpha"]
        base["beta"], base["m"] = base["m"], base["beta"]
    return base
