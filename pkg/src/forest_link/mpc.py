"""Multipath peak search and delay-domain statistics.

detect_peaks applies the three acceptance rules for a multipath component:

1. adjacent peaks are at least min_spacing_samples apart (the sounding
   grid step, 32.55 ns, by default);
2. peak amplitude above the estimated noise floor;
3. peak amplitude within rel_threshold_db (default -20 dB) of the
   strongest peak.

Two input flavors are supported.  A plain stream (constructed CIRs,
correlator output) is searched for local maxima directly.  When the
stream is a band-limited CIR from the sounding chain, cfg.band carries
the transform size and active bins and detection runs as an iterative
subtract-and-search (CLEAN) loop with a joint least-squares amplitude
re-fit each round: the guard band's interpolation kernel leaks roughly
half of a tap's amplitude into its grid neighbours, so raw bin readings
would be useless for tap powers.  With on-grid taps and no noise the
loop recovers delays and amplitudes exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, DomainError, NoSignalError, UndefinedStatisticError
from .ofdm import SampleStream


@dataclass(frozen=True)
class BandShape:
    """Active-band layout of the CIR's originating transform."""

    n_fft: int
    active_bins: tuple[int, ...]


@dataclass(frozen=True)
class PeakSearchConfig:
    min_spacing_samples: int = 1
    noise_floor_method: str = "trailing_window"   # trailing_window | percentile
    rel_threshold_db: float = -20.0
    noise_floor_margin_db: float = 6.0
    trailing_frac: float = 0.25
    percentile: float = 25.0
    max_taps: int = 64
    band: BandShape | None = None
    # band-aware search digs far below the reporting window: candidate bins
    # whose refit amplitude lands under the window are pruned afterwards,
    # and a deep search lets the joint fit drive phantom bins to zero
    search_depth_db: float = -140.0

    def __post_init__(self):
        if self.min_spacing_samples < 1:
            raise DomainError("min_spacing must be >= 1 sample")
        if self.rel_threshold_db >= 0:
            raise DomainError("relative threshold must be negative dB")
        if self.noise_floor_method not in ("trailing_window", "percentile"):
            raise DomainError(f"unknown noise floor method {self.noise_floor_method!r}")


@dataclass(frozen=True)
class TapSet:
    """Detected taps: delays (s, nondecreasing) and linear powers E(a^2)."""

    delays_s: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delays_s", np.asarray(self.delays_s, dtype=float))
        object.__setattr__(self, "powers", np.asarray(self.powers, dtype=float))
        if self.delays_s.shape != self.powers.shape:
            raise DomainError("delays and powers must have matching shape")
        if np.any(self.powers <= 0):
            raise DomainError("tap powers must be > 0")
        if np.any(np.diff(self.delays_s) < 0):
            raise DomainError("delays must be nondecreasing")

    def __len__(self):
        return self.delays_s.size


def noise_floor(mag: np.ndarray, cfg: PeakSearchConfig) -> float:
    """Amplitude noise floor: window statistic times the safety margin."""
    margin = 10.0 ** (cfg.noise_floor_margin_db / 20.0)
    if cfg.noise_floor_method == "trailing_window":
        tail = mag[int(round((1.0 - cfg.trailing_frac) * mag.size)):]
        return float(np.median(tail)) * margin
    return float(np.percentile(mag, cfg.percentile)) * margin


def _local_maxima(mag: np.ndarray) -> np.ndarray:
    idx = np.arange(1, mag.size - 1)
    keep = (mag[idx] >= mag[idx - 1]) & (mag[idx] > mag[idx + 1])
    out = list(idx[keep])
    if mag.size >= 2 and mag[0] > mag[1]:
        out.insert(0, 0)
    if mag.size >= 2 and mag[-1] > mag[-2]:
        out.append(mag.size - 1)
    return np.array(out, dtype=int)


def _detect_raw(mag: np.ndarray, cfg: PeakSearchConfig, floor: float) -> np.ndarray:
    cands = _local_maxima(mag)
    if cands.size == 0:
        raise NoSignalError("no local maxima in the stream")
    order = cands[np.argsort(-mag[cands], kind="stable")]
    accepted: list[int] = []
    for idx in order:
        if all(abs(idx - a) >= cfg.min_spacing_samples for a in accepted):
            accepted.append(int(idx))
        if len(accepted) >= cfg.max_taps:
            break
    amps = mag[accepted]
    window = amps.max() * 10.0 ** (cfg.rel_threshold_db / 20.0)
    bins = [b for b, a in zip(accepted, amps) if a > floor and a >= window]
    return np.sort(np.array(bins, dtype=int))


def _solve_amps(kern: np.ndarray, x: np.ndarray, bins) -> np.ndarray:
    """Joint LS amplitudes at the given bins, via Gram lookups.

    For columns e(-j*2*pi*k*b/N) restricted to the active band, the Gram
    matrix is N*kern[(b_i - b_j) mod N] and the projection of the CIR onto
    the columns is N*x[b_i], so no large system is ever formed.
    """
    b = np.asarray(bins, dtype=int)
    n = kern.size
    gram = kern[(b[:, None] - b[None, :]) % n]
    rhs = x[b]
    amps, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    return amps


def _refit(kern: np.ndarray, x: np.ndarray, bins):
    amps = _solve_amps(kern, x, bins)
    residual = x.copy()
    for bb, aa in zip(np.asarray(bins, dtype=int), amps):
        residual -= aa * np.roll(kern, bb)
    return amps, residual


def _resid_tap_eps(kern: np.ndarray, x: np.ndarray, bins, amps,
                   energy: float, n_active: int) -> float:
    """Fit residual expressed as an equivalent single-tap amplitude.

    At the LS optimum ||h - A a||^2 = ||h||^2 - Re(a^H A^H h), and a lone
    unmodeled tap of amplitude eps has spectrum norm eps*sqrt(n_active).
    """
    b = np.asarray(bins, dtype=int)
    n = kern.size
    proj = float(np.real(np.vdot(amps, n * x[b])))
    resid_sq = max(energy - proj, 0.0)
    return math.sqrt(resid_sq / n_active)


def _detect_clean(x: np.ndarray, cfg: PeakSearchConfig, floor: float):
    """Matching-pursuit search with joint re-fit; exact for on-grid taps.

    Each round adds the strongest residual bin, re-solves all amplitudes
    jointly and rebuilds the residual; a final prune-and-refit pass drops
    bins whose refit amplitude falls below the acceptance rules.
    """
    band = cfg.band
    n = band.n_fft
    if x.size != n:
        raise ArityError(f"band-aware search expects a {n}-sample CIR, got {x.size}")
    k = np.asarray(band.active_bins, dtype=int)
    grid = np.zeros(n, dtype=complex)
    grid[k % n] = 1.0
    kern = np.fft.ifft(grid)
    kern0 = kern[0].real
    bins: list[int] = []
    amps = np.zeros(0, dtype=complex)
    residual = x.copy()
    blocked = np.zeros(n, dtype=bool)
    search_floor = floor
    while len(bins) < cfg.max_taps:
        mag = np.abs(residual)
        mag[blocked] = 0.0
        idx = int(np.argmax(mag))
        est = mag[idx] / kern0
        if not bins:
            search_floor = max(floor, est * 10.0 ** (cfg.search_depth_db / 20.0))
        if est <= search_floor:
            break
        bins.append(idx)
        offs = (np.arange(-(cfg.min_spacing_samples - 1), cfg.min_spacing_samples)
                + idx) % n
        blocked[offs] = True
        amps, residual = _refit(kern, x, bins)
    if not bins:
        raise NoSignalError("no sample exceeds the noise floor")
    # backward elimination: a phantom bin that slipped into the support can
    # make neighbouring columns near-dependent, letting the least-squares
    # fit smear real tap power onto it.  A bin whose removal leaves the fit
    # residual at its converged level is redundant and is dropped.
    k_cnt = len(band.active_bins)
    energy = float(np.sum(np.abs(np.fft.fft(x)[np.asarray(band.active_bins) % n]) ** 2))
    base = _resid_tap_eps(kern, x, bins, _solve_amps(kern, x, bins), energy, k_cnt)
    tol = max(2.0 * base, floor, np.abs(amps).max() * 1e-10)
    for _ in range(6):
        changed = False
        for b in [bb for _, bb in sorted(zip(np.abs(amps), bins))]:
            if len(bins) <= 1:
                break
            trial = [bb for bb in bins if bb != b]
            t_amps = _solve_amps(kern, x, trial)
            if _resid_tap_eps(kern, x, trial, t_amps, energy, k_cnt) <= tol:
                bins, amps = trial, t_amps
                changed = True
        if not changed:
            break
    # prune bins whose joint-refit amplitude fails the reporting rules
    for _ in range(8):
        mags = np.abs(amps)
        window = mags.max() * 10.0 ** (cfg.rel_threshold_db / 20.0)
        keep = (mags > floor) & (mags >= window)
        if keep.all():
            break
        bins = [b for b, k_ in zip(bins, keep) if k_]
        amps, _ = _refit(kern, x, bins)
    mags = np.abs(amps)
    out_bins = np.asarray(bins, dtype=int)
    order = np.argsort(out_bins)
    return out_bins[order], mags[order]


def detect_peaks(cir: SampleStream, cfg: PeakSearchConfig) -> TapSet:
    """Multipath taps satisfying the three search criteria, sorted by delay."""
    x = np.asarray(cir.samples)
    mag = np.abs(x)
    floor = noise_floor(mag, cfg)
    if mag.max() <= floor:
        raise NoSignalError("no sample exceeds the noise floor")
    if cfg.band is not None:
        bins, amps = _detect_clean(x, cfg, floor)
    else:
        bins = _detect_raw(mag, cfg, floor)
        amps = mag[bins]
    return TapSet(delays_s=bins / cir.fs_hz, powers=amps ** 2)


def mean_excess_delay(taps: TapSet) -> float:
    """Power-weighted mean delay, seconds."""
    if len(taps) == 0:
        raise ArityError("mean excess delay needs at least one tap")
    return float(np.sum(taps.powers * taps.delays_s) / np.sum(taps.powers))


def rms_ds(taps: TapSet) -> float:
    """Power-weighted RMS delay spread, seconds."""
    if len(taps) == 0:
        raise ArityError("RMS delay spread needs at least one tap")
    mean = mean_excess_delay(taps)
    return float(math.sqrt(np.sum(taps.powers * (taps.delays_s - mean) ** 2)
                           / np.sum(taps.powers)))


def rician_k(taps: TapSet, los: str = "first") -> float:
    """LoS power over the summed power of the other taps, dB.

    los='first' treats the earliest tap as the LoS component (default);
    los='strongest' uses the highest-power tap instead.
    """
    if los not in ("first", "strongest"):
        raise DomainError(f"unknown LoS selection mode {los!r}")
    if len(taps) < 2:
        raise UndefinedStatisticError(
            "Rician K undefined with fewer than two taps (zero denominator)")
    i = 0 if los == "first" else int(np.argmax(taps.powers))
    num = taps.powers[i]
    den = float(np.sum(taps.powers)) - num
    return float(10.0 * math.log10(num / den))
