"""OFDM sounding chain: frame build, channel, sync, CFR/CIR estimation.

Numerology (LTE 20 MHz): 2048-point transforms, 1200 active subcarriers at
15 kHz (DC unused), 14 symbols per frame with cyclic prefixes 160 (symbols
0 and 7) and 144 (others), sampling rate 30.72 MHz.  One frame is exactly
30720 samples; captures are zero-padded to 40000 samples.

Synchronization uses a Zadoff-Chu preamble: the length-1201 root-25
sequence mapped across the active band (incl. DC) of a dedicated symbol
prepended to the frame.  Channel estimation divides the received pilot
subcarriers (symbols 3 and 10) by the known pilot values and averages the
two estimates; the CIR is the inverse transform of the active-band CFR
with guard bins zero-filled.

Transform normalization: forward unscaled, inverse scaled by 1/N (numpy
convention), so sum|cir|^2 = (1/N) sum|CFR|^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import ArityError, DomainError, SyncError
from .synth import MultipathProfile


@dataclass(frozen=True)
class FrameConfig:
    n_fft: int = 2048
    n_subcarriers: int = 1200
    scs_hz: float = 15_000.0
    n_symbols: int = 14
    cp_long: int = 160
    cp_short: int = 144
    fs_hz: float = 30_720_000.0
    pilot_symbols: tuple[int, ...] = (3, 10)
    center_freq_ghz: float = 1.4
    capture_len: int = 40_000
    pilot_seed: int = 2024
    data_seed: int = 4096
    zc_root: int = 25
    zc_length: int = 1201

    def __post_init__(self):
        if self.n_subcarriers >= self.n_fft:
            raise DomainError("active subcarriers must fit inside the FFT grid")
        if self.n_subcarriers % 2:
            raise DomainError("active subcarrier count must be even (DC unused)")
        if abs(self.fs_hz - self.n_fft * self.scs_hz) > 1e-6:
            raise DomainError("sampling rate must equal n_fft * subcarrier spacing")
        if any(not 0 <= s < self.n_symbols for s in self.pilot_symbols):
            raise DomainError("pilot symbol index out of range")
        if self.capture_len < self.frame_len + self.preamble_len:
            raise DomainError("capture length too short for preamble + frame")

    @property
    def cp_schedule(self) -> tuple[int, ...]:
        return tuple(self.cp_long if s % 7 == 0 else self.cp_short
                     for s in range(self.n_symbols))

    @property
    def frame_len(self) -> int:
        return self.n_symbols * self.n_fft + sum(self.cp_schedule)

    @property
    def sample_interval_s(self) -> float:
        return 1.0 / self.fs_hz

    @property
    def preamble_len(self) -> int:
        return self.cp_long + self.n_fft

    def active_bins(self) -> np.ndarray:
        """Signed subcarrier indices, ascending, DC excluded."""
        half = self.n_subcarriers // 2
        return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)])

    def symbol_starts(self) -> list[int]:
        starts, pos = [], 0
        for cp in self.cp_schedule:
            starts.append(pos)
            pos += cp + self.n_fft
        return starts


@dataclass(frozen=True)
class SampleStream:
    """Complex baseband samples with their rate and provenance tag."""

    samples: np.ndarray
    fs_hz: float
    origin: str = "tx"   # tx | rx | cir | cfr | corr

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if not np.all(np.isfinite(self.samples.real) & np.isfinite(self.samples.imag)):
            raise DomainError("sample stream contains non-finite values")

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class ZcConfig:
    root: int
    length: int

    def __post_init__(self):
        if self.length < 1 or self.length % 2 == 0:
            raise DomainError(f"ZC length must be odd and positive, got {self.length}")
        if gcd(self.root, self.length) != 1:
            raise DomainError(
                f"ZC root {self.root} must be coprime with length {self.length}")


def zc_sequence(cfg: ZcConfig) -> np.ndarray:
    """Root Zadoff-Chu sequence exp(-j*pi*u*n*(n+1)/L) for odd L."""
    n = np.arange(cfg.length)
    return np.exp(-1j * np.pi * cfg.root * n * (n + 1) / cfg.length)


def default_pilot_sequence(cfg: FrameConfig) -> np.ndarray:
    """Unit-modulus pseudo-random pilot values, fixed by cfg.pilot_seed."""
    rng = np.random.default_rng(cfg.pilot_seed)
    return np.exp(2j * np.pi * rng.random(cfg.n_subcarriers))


def qpsk_payload(cfg: FrameConfig, seed: int | None = None) -> np.ndarray:
    """Seeded QPSK grid for the non-pilot symbols, shape (12, 1200)."""
    rng = np.random.default_rng(cfg.data_seed if seed is None else seed)
    n_data = cfg.n_symbols - len(cfg.pilot_symbols)
    bits = rng.integers(0, 4, size=(n_data, cfg.n_subcarriers))
    return np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * bits))


def _symbol_time(cfg: FrameConfig, spectrum_active: np.ndarray, cp: int) -> np.ndarray:
    grid = np.zeros(cfg.n_fft, dtype=complex)
    grid[cfg.active_bins() % cfg.n_fft] = spectrum_active
    body = np.fft.ifft(grid)
    return np.concatenate([body[-cp:], body])


def build_frame(cfg: FrameConfig, data_symbols: np.ndarray,
                pilot_sequence: np.ndarray) -> SampleStream:
    """Assemble one frame: map -> IFFT(2048) -> CP prepend, per symbol.

    data_symbols holds the 12 non-pilot rows, (n_symbols - n_pilots, 1200);
    the pilot sequence is placed on the pilot symbols.
    """
    data_symbols = np.asarray(data_symbols, dtype=complex)
    pilot_sequence = np.asarray(pilot_sequence, dtype=complex)
    n_data = cfg.n_symbols - len(cfg.pilot_symbols)
    if data_symbols.shape != (n_data, cfg.n_subcarriers):
        raise ArityError(
            f"data grid must be {(n_data, cfg.n_subcarriers)}, got {data_symbols.shape}")
    if pilot_sequence.shape != (cfg.n_subcarriers,):
        raise ArityError(
            f"pilot sequence must have {cfg.n_subcarriers} entries, got {pilot_sequence.shape}")
    pieces = []
    data_iter = iter(data_symbols)
    for s, cp in enumerate(cfg.cp_schedule):
        row = pilot_sequence if s in cfg.pilot_symbols else next(data_iter)
        pieces.append(_symbol_time(cfg, row, cp))
    return SampleStream(np.concatenate(pieces), cfg.fs_hz, "tx")


def preamble_template(cfg: FrameConfig) -> np.ndarray:
    """Time-domain body (no CP) of the ZC preamble symbol.

    The length-1201 sequence spans the 1200 active subcarriers plus DC.
    """
    zc = zc_sequence(ZcConfig(cfg.zc_root, cfg.zc_length))
    half = (cfg.zc_length - 1) // 2
    bins = np.arange(-half, half + 1) % cfg.n_fft
    grid = np.zeros(cfg.n_fft, dtype=complex)
    grid[bins] = zc
    return np.fft.ifft(grid)


def build_capture(cfg: FrameConfig, data_symbols: np.ndarray | None = None,
                  pilot_sequence: np.ndarray | None = None,
                  data_seed: int | None = None) -> SampleStream:
    """Preamble symbol + frame, zero-padded to capture_len samples."""
    if pilot_sequence is None:
        pilot_sequence = default_pilot_sequence(cfg)
    if data_symbols is None:
        data_symbols = qpsk_payload(cfg, data_seed)
    body = preamble_template(cfg)
    preamble = np.concatenate([body[-cfg.cp_long:], body])
    frame = build_frame(cfg, data_symbols, pilot_sequence).samples
    out = np.zeros(cfg.capture_len, dtype=complex)
    out[:len(preamble) + len(frame)] = np.concatenate([preamble, frame])
    return SampleStream(out, cfg.fs_hz, "tx")


def apply_channel(tx: SampleStream, profile: MultipathProfile, snr_db: float,
                  rng_seed: int = 0) -> SampleStream:
    """Tapped-delay channel plus AWGN at the requested SNR.

    Tap delays are snapped to the nearest sample (with a warning when the
    snap moves a tap by more than 1e-6 of a sample); SNR is measured
    against the mean clean-signal power over its support.
    """
    x = tx.samples
    out = np.zeros_like(x)
    for tap in profile.taps():
        shift_f = tap.delay_s * tx.fs_hz
        shift = int(round(shift_f))
        if abs(shift_f - shift) > 1e-6:
            warnings.warn(
                f"tap delay {tap.delay_s * 1e9:.3f} ns is off-grid; snapped to "
                f"sample {shift}", stacklevel=2)
        if shift >= len(x):
            continue
        if shift == 0:
            out += tap.amp * x
        else:
            out[shift:] += tap.amp * x[:-shift]
    if math.isfinite(snr_db):
        nz = np.nonzero(np.abs(out))[0]
        if nz.size:
            support = out[nz[0]:nz[-1] + 1]
            p_sig = float(np.mean(np.abs(support) ** 2))
            sigma = math.sqrt(p_sig * 10.0 ** (-snr_db / 10.0) / 2.0)
            rng = np.random.default_rng(rng_seed)
            out = out + sigma * (rng.standard_normal(len(out))
                                 + 1j * rng.standard_normal(len(out)))
    return SampleStream(out, tx.fs_hz, "rx")


def correlate(rx: SampleStream, template: np.ndarray) -> np.ndarray:
    """Cross-correlation c[k] = sum_n rx[n+k] * conj(template[n]), k >= 0."""
    n, m = len(rx.samples), len(template)
    if m > n:
        raise ArityError("template longer than the capture")
    size = 1 << (n + m - 1).bit_length()
    fr = np.fft.fft(rx.samples, size)
    ft = np.fft.fft(template, size)
    full = np.fft.ifft(fr * np.conj(ft))
    return full[:n - m + 1]


def synchronize(rx: SampleStream, template: np.ndarray, *, margin: float = 4.0,
                exclusion: int = 160, first_window: int = 64,
                strong_rel_db: float = 4.0, first_rel_db: float = 15.0) -> int:
    """Integer timing offset of the preamble body within the capture.

    A peak-to-secondary ratio below ``margin`` outside the +-exclusion
    multipath window raises SyncError.  The returned offset is the first
    arrival, not necessarily the strongest correlation sample: the
    earliest sample within strong_rel_db of the global peak (two
    near-equal taps straddling a sample can push the in-between sample
    above either) or, if earlier, the earliest local maximum within
    first_rel_db of the peak (a LoS tap under a dominant reflection).
    strong_rel_db must stay below the 5.6 dB shoulder of the band-limited
    correlation kernel one sample off a peak.
    """
    mag = np.abs(correlate(rx, template))
    peak = int(np.argmax(mag))
    lo = max(peak - exclusion, 0)
    hi = min(peak + exclusion + 1, mag.size)
    rest = np.concatenate([mag[:lo], mag[hi:]])
    secondary = float(rest.max()) if rest.size else 0.0
    if mag[peak] == 0:
        raise SyncError("no correlation energy found")
    if secondary > 0 and mag[peak] / secondary < margin:
        raise SyncError(
            f"correlation peak-to-secondary ratio {mag[peak] / secondary:.2f} "
            f"below margin {margin}")
    start = max(peak - first_window, 1)
    best = peak
    strong = mag[peak] * 10.0 ** (-strong_rel_db / 20.0)
    for i in range(start, peak):
        if mag[i] >= strong:
            best = i
            break
    floor = mag[peak] * 10.0 ** (-first_rel_db / 20.0)
    for i in range(start, best):
        if mag[i] >= floor and mag[i] >= mag[i - 1] and mag[i] > mag[i + 1]:
            return i
    return best


def estimate_cfr(rx_frame: SampleStream | np.ndarray, cfg: FrameConfig,
                 pilot_sequence: np.ndarray) -> np.ndarray:
    """Per-subcarrier LS channel estimate averaged over the pilot symbols.

    Input must be frame-aligned (post-synchronize), frame_len samples.
    Output is ordered like cfg.active_bins().
    """
    x = rx_frame.samples if isinstance(rx_frame, SampleStream) else np.asarray(rx_frame)
    if len(x) < cfg.frame_len:
        raise ArityError(f"frame-aligned input needs {cfg.frame_len} samples, got {len(x)}")
    pilot_sequence = np.asarray(pilot_sequence, dtype=complex)
    if np.any(pilot_sequence == 0):
        raise DomainError("pilot sequence contains zero-valued entries")
    bins = cfg.active_bins() % cfg.n_fft
    starts = cfg.symbol_starts()
    acc = np.zeros(cfg.n_subcarriers, dtype=complex)
    for s in cfg.pilot_symbols:
        body = x[starts[s] + cfg.cp_schedule[s]: starts[s] + cfg.cp_schedule[s] + cfg.n_fft]
        spectrum = np.fft.fft(body)
        acc += spectrum[bins] / pilot_sequence
    return acc / len(cfg.pilot_symbols)


def cfr_to_cir(cfr: np.ndarray, cfg: FrameConfig) -> SampleStream:
    """Inverse transform of the active-band CFR, guard bins zero-filled."""
    cfr = np.asarray(cfr, dtype=complex)
    if cfr.shape != (cfg.n_subcarriers,):
        raise ArityError(f"CFR must have {cfg.n_subcarriers} entries, got {cfr.shape}")
    grid = np.zeros(cfg.n_fft, dtype=complex)
    grid[cfg.active_bins() % cfg.n_fft] = cfr
    return SampleStream(np.fft.ifft(grid), cfg.fs_hz, "cir")
