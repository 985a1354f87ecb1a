"""Angular power spectrum and azimuth spread from 12-sector sweeps.

A sweep rotates a 30-degree half-power-beamwidth antenna through twelve
azimuth sectors (centers 0, 30, ..., 330).  Sector powers are treated as
point masses at the sector centers; no beam-pattern deconvolution.

The RMS azimuth spread is the power-weighted standard deviation computed
in a wrap-aware way: the circle is cut between two adjacent sectors, the
angles unwrapped from the cut, and the cut chosen to minimize the spread.
This makes the statistic invariant under rotation of the whole spectrum
and keeps the 0/360 seam from splitting a compact lobe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, DomainError, UndefinedStatisticError

N_SECTORS = 12
SECTOR_STEP_DEG = 30.0


@dataclass(frozen=True)
class SectorSweep:
    """One directional measurement: 12 sector centers and their RSSI."""

    azimuth_deg: np.ndarray
    rssi_dbm: np.ndarray
    hpbw_deg: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "azimuth_deg", np.asarray(self.azimuth_deg, dtype=float))
        object.__setattr__(self, "rssi_dbm", np.asarray(self.rssi_dbm, dtype=float))
        if self.azimuth_deg.shape != (N_SECTORS,) or self.rssi_dbm.shape != (N_SECTORS,):
            raise ArityError(f"a sweep needs exactly {N_SECTORS} sectors")
        want = set(range(0, 360, int(SECTOR_STEP_DEG)))
        if set(int(round(a)) % 360 for a in self.azimuth_deg) != want:
            raise DomainError("sector centers must cover 0,30,...,330 once each")
        if not np.all(np.isfinite(self.rssi_dbm)):
            raise DomainError("sector RSSI must be finite")


@dataclass(frozen=True)
class AngularPowerSpectrum:
    """Per-sector linear power, normalized to unit sum, ascending azimuth."""

    azimuth_deg: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "azimuth_deg", np.asarray(self.azimuth_deg, dtype=float))
        object.__setattr__(self, "power", np.asarray(self.power, dtype=float))
        if self.azimuth_deg.shape != self.power.shape:
            raise ArityError("azimuth and power must have matching shape")
        if np.any(self.power < 0):
            raise DomainError("APS powers must be >= 0")
        if abs(float(np.sum(self.power)) - 1.0) > 1e-9:
            raise DomainError("APS powers must sum to 1")


def aps_from_sweep(sweep: SectorSweep) -> AngularPowerSpectrum:
    """dBm to linear, canonical sector order, normalized to unit sum."""
    order = np.argsort(np.mod(sweep.azimuth_deg, 360.0))
    az = np.mod(sweep.azimuth_deg[order], 360.0)
    lin = 10.0 ** (sweep.rssi_dbm[order] / 10.0)
    return AngularPowerSpectrum(azimuth_deg=az, power=lin / np.sum(lin))


def rms_asa(aps: AngularPowerSpectrum) -> float:
    """Circular power-weighted RMS azimuth spread, degrees, in [0, 180].

    Minimized over the twelve possible cut positions between sectors.
    """
    best = math.inf
    az = aps.azimuth_deg
    p = aps.power
    for cut in az + SECTOR_STEP_DEG / 2.0:
        theta = np.mod(az - cut, 360.0)
        mean = float(np.sum(p * theta))
        spread = math.sqrt(float(np.sum(p * (theta - mean) ** 2)))
        best = min(best, spread)
    return best


def avg_asa(aps: AngularPowerSpectrum) -> float:
    """Power-weighted circular mean arrival angle, degrees in [0, 360).

    A (near-)uniform spectrum has no mean direction: the resultant vector
    vanishes and the statistic is undefined.
    """
    rad = np.radians(aps.azimuth_deg)
    resultant = complex(np.sum(aps.power * np.exp(1j * rad)))
    if abs(resultant) < 1e-12:
        raise UndefinedStatisticError(
            "mean arrival angle undefined: angular power spectrum has no "
            "resultant direction")
    return float(np.degrees(np.angle(resultant)) % 360.0)
