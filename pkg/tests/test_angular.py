"""Angular power spectrum and azimuth spread."""

import numpy as np
import pytest

from forest_link.angular import AngularPowerSpectrum, SectorSweep, aps_from_sweep, avg_asa, rms_asa
from forest_link.errors import ArityError, DomainError, UndefinedStatisticError

AZ = np.arange(0.0, 360.0, 30.0)


def aps_from_linear(power):
    power = np.asarray(power, dtype=float)
    return AngularPowerSpectrum(azimuth_deg=AZ, power=power / power.sum())


def delta_aps(sector_idx):
    p = np.zeros(12)
    p[sector_idx] = 1.0
    return aps_from_linear(p)


def rotate(aps, k):
    return AngularPowerSpectrum(azimuth_deg=AZ, power=np.roll(aps.power, k))


# ---------------------------------------------------------------------------
# aps_from_sweep


def test_uniform_sweep_gives_uniform_aps():
    sweep = SectorSweep(azimuth_deg=AZ, rssi_dbm=np.full(12, -60.0))
    aps = aps_from_sweep(sweep)
    np.testing.assert_allclose(aps.power, 1.0 / 12.0, atol=1e-12)


def test_single_hot_sector_gives_delta():
    rssi = np.full(12, -120.0)
    rssi[7] = -30.0
    aps = aps_from_sweep(SectorSweep(azimuth_deg=AZ, rssi_dbm=rssi))
    assert aps.power[7] == pytest.approx(1.0, abs=1e-7)


def test_sweep_canonicalizes_sector_order():
    perm = np.random.default_rng(1).permutation(12)
    rssi = np.linspace(-80, -50, 12)
    aps_a = aps_from_sweep(SectorSweep(azimuth_deg=AZ, rssi_dbm=rssi))
    aps_b = aps_from_sweep(SectorSweep(azimuth_deg=AZ[perm], rssi_dbm=rssi[perm]))
    np.testing.assert_allclose(aps_a.power, aps_b.power, atol=1e-15)


def test_sweep_missing_sector_rejected():
    with pytest.raises(ArityError):
        SectorSweep(azimuth_deg=AZ[:11], rssi_dbm=np.zeros(11))
    bad = AZ.copy()
    bad[3] = 95.0
    with pytest.raises(DomainError):
        SectorSweep(azimuth_deg=bad, rssi_dbm=np.zeros(12))


def test_fig15_shape_fixture():
    # strongest sector at 210 deg, secondary lobe at 270, ~20 dB decay over
    # the 90..330 back range
    rssi = np.array([-75.0, -78.0, -80.0, -88.0, -90.0, -86.0,
                     -72.0, -60.0, -66.0, -64.0, -81.0, -84.0])
    aps = aps_from_sweep(SectorSweep(azimuth_deg=AZ, rssi_dbm=rssi))
    assert AZ[int(np.argmax(aps.power))] == 210.0
    assert avg_asa(aps) == pytest.approx(210.0, abs=30.0)


# ---------------------------------------------------------------------------
# rms_asa


def test_rms_asa_single_sector_zero():
    for k in range(12):
        assert rms_asa(delta_aps(k)) == pytest.approx(0.0, abs=1e-12)


def test_rms_asa_rotation_invariance():
    rng = np.random.default_rng(2)
    aps = aps_from_linear(rng.uniform(0.01, 1.0, 12))
    base = rms_asa(aps)
    for k in range(12):
        assert rms_asa(rotate(aps, k)) == pytest.approx(base, abs=1e-9)


def test_rms_asa_uniform_is_maximal():
    uniform = aps_from_linear(np.ones(12))
    top = rms_asa(uniform)
    assert top == pytest.approx(103.56, abs=0.05)
    rng = np.random.default_rng(3)
    for _ in range(300):
        aps = aps_from_linear(rng.uniform(0.0, 1.0, 12) + 1e-9)
        assert rms_asa(aps) <= top + 1e-9


def test_rms_asa_two_opposite_sectors():
    p = np.zeros(12)
    p[0] = p[6] = 0.5
    assert rms_asa(aps_from_linear(p)) == pytest.approx(90.0, abs=1e-9)


def test_rms_asa_range():
    rng = np.random.default_rng(4)
    for _ in range(200):
        aps = aps_from_linear(rng.uniform(0.0, 1.0, 12) + 1e-9)
        assert 0.0 <= rms_asa(aps) <= 180.0


# ---------------------------------------------------------------------------
# avg_asa


def test_avg_asa_single_sector():
    assert avg_asa(delta_aps(5)) == pytest.approx(150.0, abs=1e-9)


def test_avg_asa_two_equal_sectors_symmetry():
    p = np.zeros(12)
    p[4] = p[6] = 0.5  # 120 and 180 degrees
    assert avg_asa(aps_from_linear(p)) == pytest.approx(150.0, abs=1e-9)


def test_avg_asa_uniform_undefined():
    with pytest.raises(UndefinedStatisticError):
        avg_asa(aps_from_linear(np.ones(12)))


def test_avg_asa_rotation_equivariance():
    rng = np.random.default_rng(5)
    aps = aps_from_linear(rng.uniform(0.01, 1.0, 12))
    base = avg_asa(aps)
    for k in range(1, 12):
        got = avg_asa(rotate(aps, k))
        assert got == pytest.approx((base + 30.0 * k) % 360.0, abs=1e-9)


def test_avg_asa_wraps_to_0_360():
    p = np.zeros(12)
    p[0] = p[11] = 0.5  # 0 and 330: mean at 345
    assert avg_asa(aps_from_linear(p)) == pytest.approx(345.0, abs=1e-9)
