"""Multipath synthesis: SV draws, forest profiles, shadowing."""

import math

import numpy as np
import pytest

from forest_link.errors import DomainError, InfeasibleTargetsError, UndefinedStatisticError
from forest_link.synth import (
    MultipathProfile, NormalSpec, StatTargets, SvParams, Tap, TAP_GRID_S,
    draw_shadowing, ensemble_seeds, synth_forest_profile, synth_sv,
)


# ---------------------------------------------------------------------------
# Saleh-Valenzuela


def test_sv_degenerate_single_tap():
    p = synth_sv(SvParams(1, 1, 1e7, 1e8, 100e-9, 30e-9), rng_seed=1)
    assert len(p.cluster) == 0 and len(p.scatter) == 0
    assert p.los.delay_s == 0.0


def test_sv_determinism():
    params = SvParams(3, 5, 5e6, 5e7, 200e-9, 60e-9)
    a = synth_sv(params, rng_seed=99)
    b = synth_sv(params, rng_seed=99)
    assert [(t.delay_s, t.amp) for t in a.taps()] == [(t.delay_s, t.amp) for t in b.taps()]


def test_sv_mean_power_envelope():
    # single cluster: ensemble mean ray power must follow exp(-tau/gamma)
    gamma = 50e-9
    params = SvParams(1, 8, 1e7, 4e7, 200e-9, gamma)
    taus, powers = [], []
    for seed in range(10_000):
        prof = synth_sv(params, rng_seed=seed)
        for t in prof.taps():
            taus.append(t.delay_s)
            powers.append(t.power)
    taus = np.array(taus)
    powers = np.array(powers)
    edges = np.array([0.0, 20e-9, 40e-9, 60e-9, 80e-9, 120e-9])
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (taus >= lo) & (taus < hi)
        assert mask.sum() > 500
        expected = np.mean(np.exp(-taus[mask] / gamma))
        got = powers[mask].mean()
        assert abs(got - expected) / expected < 0.05


def test_sv_rejects_bad_params():
    with pytest.raises(DomainError):
        SvParams(0, 1, 1e7, 1e7, 1e-9, 1e-9)
    with pytest.raises(DomainError):
        SvParams(1, 1, -1e7, 1e7, 1e-9, 1e-9)


# ---------------------------------------------------------------------------
# forest profile


TABLE_V_POINTS = [
    (19.8, 49.5),    # larch G2G
    (3.4, 107.6),    # birch A2G 30 deg
    (23.1, 42.6),    # larch A2G 90 deg
    (10.2, 80.1),    # birch G2G
]


@pytest.mark.parametrize("k_mu,ds_mu", TABLE_V_POINTS)
def test_profile_closed_loop_exact_targets(k_mu, ds_mu):
    t = StatTargets(k_db=NormalSpec(k_mu, 0.0), rmsds_ns=NormalSpec(ds_mu, 0.0))
    p = synth_forest_profile(t, rng_seed=7)
    assert abs(p.k_db() - k_mu) / abs(k_mu) <= 0.02
    assert abs(p.rms_ds_s() * 1e9 - ds_mu) / ds_mu <= 0.02


def test_profile_tap_ordering_and_grid():
    t = StatTargets(k_db=NormalSpec(19.8, 0.0), rmsds_ns=NormalSpec(49.5, 0.0))
    p = synth_forest_profile(t, rng_seed=3)
    taps = p.taps()
    assert taps[0] is p.los
    delays = [tp.delay_s for tp in taps]
    assert delays == sorted(delays)
    for tp in taps:
        bins = tp.delay_s / TAP_GRID_S
        assert abs(bins - round(bins)) < 1e-9


def test_profile_scatter_fraction_window():
    t = StatTargets(k_db=NormalSpec(10.0, 5.0), rmsds_ns=NormalSpec(60.0, 20.0))
    for seed in range(50):
        p = synth_forest_profile(t, rng_seed=seed)
        assert 0.014 <= p.scatter_fraction() <= 0.020
        assert len(p.scatter) == 16


def test_profile_determinism():
    t = StatTargets(k_db=NormalSpec(19.8, 11.3), rmsds_ns=NormalSpec(49.5, 28.6))
    a = synth_forest_profile(t, rng_seed=11)
    b = synth_forest_profile(t, rng_seed=11)
    assert [(tp.delay_s, tp.amp) for tp in a.taps()] == \
           [(tp.delay_s, tp.amp) for tp in b.taps()]


def test_profile_infeasible_exact_pair_raises():
    # K = 40 dB pushes 99.99 % of the power into the LoS tap; a 500 ns
    # spread cannot be reached inside the cyclic-prefix-safe window
    t = StatTargets(k_db=NormalSpec(40.0, 0.0), rmsds_ns=NormalSpec(500.0, 0.0))
    with pytest.raises(InfeasibleTargetsError):
        synth_forest_profile(t, rng_seed=0)


def test_profile_infeasible_low_exact_pair_raises():
    t = StatTargets(k_db=NormalSpec(0.0, 0.0), rmsds_ns=NormalSpec(1.0, 0.0))
    with pytest.raises(InfeasibleTargetsError):
        synth_forest_profile(t, rng_seed=0)


def test_profile_clamps_infeasible_draws():
    t = StatTargets(k_db=NormalSpec(19.8, 11.3), rmsds_ns=NormalSpec(49.5, 28.6))
    for seed in range(300):
        p = synth_forest_profile(t, rng_seed=seed)   # must never raise
        assert p.rms_ds_s() >= 0.0


def test_profile_negative_k_draws_supported():
    t = StatTargets(k_db=NormalSpec(-8.0, 0.0), rmsds_ns=NormalSpec(90.0, 0.0))
    p = synth_forest_profile(t, rng_seed=5)
    assert p.k_db() == pytest.approx(-8.0, abs=0.1)


def test_profile_cluster_suppressed_single_tap():
    t = StatTargets(k_db=NormalSpec(19.8, 0.0), rmsds_ns=NormalSpec(0.0, 0.0),
                    cluster_enabled=False, scatter_enabled=False)
    p = synth_forest_profile(t, rng_seed=1)
    assert len(p.taps()) == 1
    with pytest.raises(UndefinedStatisticError):
        p.k_db()


def test_profile_guards_scatter_share():
    los = Tap(0.0, 1.0 + 0j)
    bad = tuple(Tap(1e-6 + i * 1e-7, 0.5 + 0j) for i in range(4))
    with pytest.raises(DomainError):
        MultipathProfile(los=los, scatter=bad)


def test_ensemble_marginals_with_correlation():
    t = StatTargets(k_db=NormalSpec(19.8, 11.3), rmsds_ns=NormalSpec(49.5, 28.6))
    ks, dss = [], []
    for ss in ensemble_seeds(42, 800):
        p = synth_forest_profile(t, rng_seed=ss.generate_state(1)[0])
        ks.append(p.k_db())
        dss.append(p.rms_ds_s() * 1e9)
    ks, dss = np.array(ks), np.array(dss)
    assert abs(ks.mean() - 19.8) / 19.8 < 0.05
    assert abs(dss.mean() - 49.5) / 49.5 < 0.05
    assert np.corrcoef(dss, ks)[0, 1] < 0.0


# ---------------------------------------------------------------------------
# shadowing


def test_shadowing_zero_sigma():
    assert draw_shadowing(0.0, rng_seed=1) == 0.0


def test_shadowing_monte_carlo_std():
    # birch G2G shadowing sigma = 2.6 dB
    draws = draw_shadowing(2.6, rng_seed=2, n=100_000)
    assert abs(np.std(draws) - 2.6) / 2.6 <= 0.02
    assert abs(np.mean(draws)) <= 0.05


def test_shadowing_determinism_and_domain():
    assert draw_shadowing(3.8, rng_seed=5) == draw_shadowing(3.8, rng_seed=5)
    with pytest.raises(DomainError):
        draw_shadowing(-1.0, rng_seed=0)
