"""File formats: path-loss CSVs, I/Q hex captures, sweep CSVs.

Capture format: ASCII, one sample per line, two 4-hex-digit two's
complement 16-bit integers ``IIII QQQQ``, full scale 32767, LF line
endings.  Values map to [-1, 1) through division by 32768.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from .angular import SectorSweep
from .errors import ArityError, DomainError, ParseError
from .fitting import PathLossSample

FULL_SCALE = 32768  # divisor; +32767 encodes 0.99997


def read_pathloss_csv(path: str) -> list[PathLossSample]:
    """Parse `dist_m,pl_db[,elev_deg,env,link]` rows into samples."""
    samples = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ArityError("empty path-loss file", path=path)
        fields = [f.strip() for f in reader.fieldnames]
        if "dist_m" not in fields or "pl_db" not in fields:
            raise ParseError("header must contain dist_m and pl_db", path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            try:
                dist = float(row["dist_m"])
                pl = float(row["pl_db"])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"malformed numeric field: {exc}",
                                 path=path, line=lineno) from exc
            elev = row.get("elev_deg")
            elev_f = float(elev) if elev not in (None, "") else None
            env = (row.get("env") or "other").strip() or "other"
            link = (row.get("link") or "G2G").strip() or "G2G"
            try:
                samples.append(PathLossSample(dist_m=dist, pl_db=pl, elev_deg=elev_f,
                                              env=env, link=link))
            except DomainError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from exc
    if not samples:
        raise ArityError("no data rows in path-loss file", path=path)
    return samples


def pathloss_csv_text(samples) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dist_m", "pl_db", "elev_deg", "env", "link"])
    for s in samples:
        writer.writerow([repr(s.dist_m), repr(s.pl_db),
                         "" if s.elev_deg is None else repr(s.elev_deg),
                         s.env, s.link])
    return buf.getvalue()


def read_iq_hex(path: str) -> np.ndarray:
    """Hex capture lines -> complex samples in [-1, 1)."""
    out = []
    offset = 0
    with open(path, "rb") as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                tokens = line.split()
                if len(tokens) != 2:
                    raise ParseError(
                        f"expected two hex tokens per line, got {len(tokens)}",
                        path=path, byte=offset)
                pair = []
                search_from = 0
                for tok in tokens:
                    pos = raw.find(tok, search_from)
                    search_from = pos + len(tok)
                    tok_off = offset + pos
                    if len(tok) != 4:
                        raise ParseError(f"token {tok.decode(errors='replace')!r} is not "
                                         "4 hex digits", path=path, byte=tok_off)
                    try:
                        val = int(tok, 16)
                    except ValueError as exc:
                        raise ParseError(f"non-hex token {tok.decode(errors='replace')!r}",
                                         path=path, byte=tok_off) from exc
                    if val >= 0x8000:
                        val -= 0x10000
                    pair.append(val / FULL_SCALE)
                out.append(complex(pair[0], pair[1]))
            offset += len(raw)
    if not out:
        raise ArityError("empty capture file", path=path)
    return np.asarray(out, dtype=complex)


def iq_hex_text(samples: np.ndarray) -> str:
    """Encode complex samples; values outside [-1, 1) are clipped to full scale."""
    samples = np.asarray(samples)
    i = np.clip(np.round(samples.real * FULL_SCALE), -32768, 32767).astype(int)
    q = np.clip(np.round(samples.imag * FULL_SCALE), -32768, 32767).astype(int)
    lines = [f"{iv & 0xFFFF:04X} {qv & 0xFFFF:04X}" for iv, qv in zip(i, q)]
    return "\n".join(lines) + "\n"


def read_sweep_csv(path: str) -> SectorSweep:
    """Parse `azimuth_deg,rssi_dbm` (12 rows) into a sweep."""
    az, rssi = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ArityError("empty sweep file", path=path)
        fields = [f.strip() for f in reader.fieldnames]
        if "azimuth_deg" not in fields or "rssi_dbm" not in fields:
            raise ParseError("header must contain azimuth_deg and rssi_dbm",
                             path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            try:
                az.append(float(row["azimuth_deg"]))
                rssi.append(float(row["rssi_dbm"]))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"malformed numeric field: {exc}",
                                 path=path, line=lineno) from exc
    try:
        return SectorSweep(azimuth_deg=np.array(az), rssi_dbm=np.array(rssi))
    except (ArityError, DomainError) as exc:
        exc.path = path
        raise


EARTH_RADIUS_M = 6_371_000.0


def gps_distance_m(lat1: float, lon1: float, alt1: float,
                   lat2: float, lon2: float, alt2: float) -> float:
    """Approximate 3-D T-R distance: spherical-earth great circle plus an
    altitude hypotenuse.  Good to well under a percent at sounding ranges."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2) ** 2
    ground = 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))
    return math.hypot(ground, alt2 - alt1)
