"""forest-link command line: fit, simulate, sound, extract, angular, report.

Every verb writes JSON results and CSV curves into --out; `report`
renders SVG figures next to them.  Exit codes: 0 success, 2 validation
error, 3 computation error; errors print one JSON record to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import plots
from .angular import aps_from_sweep, avg_asa, rms_asa
from .config import (A2G_FE2R_M_PRESETS, A2G_FSPL_S_PRESETS, A2G_CI_PRESETS,
                     G2G_MODEL_PRESETS, STAT_PRESETS, RunConfig, bhf_m_preset,
                     config_text, load_config, stat_targets)
from .errors import ArityError, ConfigError, ToolkitError
from .fitting import ModelSpec, fit_model, fit_normal, shadow_residuals, spec_for
from .ioformats import (iq_hex_text, pathloss_csv_text, read_iq_hex, read_pathloss_csv,
                        read_sweep_csv)
from .mpc import rician_k, rms_ds
from .ofdm import FrameConfig, SampleStream, cfr_to_cir, estimate_cfr, preamble_template, synchronize, default_pilot_sequence
from .pipeline import ExtractionConfig, run_ensemble, run_sounding
from .report import (Report, atomic_write, config_hash, fitted_table_row,
                     normal_fit_entry, write_csv, write_json)
from .synth import MultipathProfile, Tap, draw_shadowing, synth_forest_profile


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _report(args, cfg: RunConfig, command: str) -> Report:
    return Report(command=command, seed=args.seed if hasattr(args, "seed") else cfg.seed,
                  cfg_hash=config_hash(config_text(cfg)))


def _model_preset_params(name: str, env: str | None, elev: float | None) -> dict:
    if env is None:
        return {}
    if name in ("ci",) and elev is not None:
        n = A2G_CI_PRESETS.get((env, int(elev)))
        return {"n": n} if n is not None else {}
    if name == "fe2r_m" and elev is not None:
        return dict(A2G_FE2R_M_PRESETS.get((env, int(elev)), {}))
    if name == "fspl_s" and elev is not None:
        preset = A2G_FSPL_S_PRESETS.get((env, int(elev)))
        return dict(preset) if preset else {}
    return dict(G2G_MODEL_PRESETS.get(env, {}).get(name, {}))


def _parse_kv_params(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"--params expects k=v pairs, got {part!r}")
        key, value = part.split("=", 1)
        out[key.strip()] = float(value)
    return out


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args, cfg: RunConfig) -> Report:
    samples = read_pathloss_csv(args.input)
    ctx = cfg.fit_context(elev_deg=args.elev)
    rows = []
    fits = {}
    for name in args.models.split(","):
        name = name.strip()
        spec = spec_for(name, context=ctx)
        fitted = fit_model(samples, spec, bounds=cfg.bounds.get(name),
                           seed=args.seed)
        fits[name] = fitted
        rows.append(fitted_table_row(fitted))

    converged = {n: f for n, f in fits.items() if f.converged}
    best_name = min(converged, key=lambda n: converged[n].rmse_db) if converged else None
    tables = {"models": rows, "best_model": best_name}
    report = _report(args, cfg, "fit")

    if best_name is not None:
        resid = shadow_residuals(converged[best_name], samples)
        nf = fit_normal(resid)
        tables["shadowing_db"] = normal_fit_entry(nf)
        resid_path = _out(args, "shadow_residuals.csv")
        write_csv(resid_path, ["dist_m", "residual_db"],
                  zip([s.dist_m for s in samples], (float(r) for r in resid)))
        report.artifacts.append(resid_path)

    d_grid = np.logspace(math.log10(min(s.dist_m for s in samples)),
                         math.log10(max(s.dist_m for s in samples)), 200)
    header = ["dist_m"] + list(fits)
    columns = [d_grid]
    from .fitting import evaluate_model
    for name, fitted in fits.items():
        columns.append(evaluate_model(fitted.spec, fitted.params, d_grid))
    curves_path = _out(args, "fit_curves.csv")
    write_csv(curves_path, header, zip(*columns))
    report.artifacts.append(curves_path)

    results_path = _out(args, "fit_results.json")
    report.tables = tables
    write_json(results_path, report.payload())
    report.artifacts.append(results_path)
    return report


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args, cfg: RunConfig) -> Report:
    names = [n.strip() for n in args.models.split(",")]
    ctx = cfg.fit_context(elev_deg=args.elev)
    d = np.logspace(math.log10(args.d_min), math.log10(args.d_max), args.n_points)
    curves = {}
    for name in names:
        params = _model_preset_params(name, args.env, args.elev)
        if name == "bhf_m" and args.env:
            params = bhf_m_preset(args.env, cfg.bhf_m_columns)
        params.update(_parse_kv_params(args.params))
        spec = spec_for(name, context=ctx, fixed=params)
        from .fitting import evaluate_model
        curves[name] = evaluate_model(spec, spec.base_params(), d)

    report = _report(args, cfg, "simulate")
    curves_path = _out(args, "curves.csv")
    write_csv(curves_path, ["dist_m"] + names, zip(d, *[curves[n] for n in names]))
    report.artifacts.append(curves_path)

    sample_model = names[0]
    shadow = draw_shadowing(args.shadow_sigma, rng_seed=args.seed, n=d.size)
    pl = curves[sample_model] + shadow
    from .fitting import PathLossSample
    samples = [PathLossSample(float(a), float(b), elev_deg=args.elev,
                              env=args.env or "other",
                              link="A2G" if args.elev is not None else "G2G")
               for a, b in zip(d, pl)]
    samples_path = _out(args, "samples.csv")
    atomic_write(samples_path, pathloss_csv_text(samples))
    report.artifacts.append(samples_path)

    report.tables = {"models": names, "sample_model": sample_model,
                     "shadow_sigma_db": args.shadow_sigma,
                     "d_range_m": [args.d_min, args.d_max], "n_points": args.n_points}
    results_path = _out(args, "simulate_results.json")
    write_json(results_path, report.payload())
    report.artifacts.append(results_path)
    return report


# ---------------------------------------------------------------------------
# sound


def _parse_taps(text: str) -> MultipathProfile:
    taps = []
    grid = 1.0 / FrameConfig().fs_hz
    for part in text.split(","):
        if ":" not in part:
            raise ConfigError(f"--taps expects bin:amp pairs, got {part!r}")
        b, amp = part.split(":", 1)
        taps.append(Tap(int(b) * grid, complex(amp)))
    taps.sort(key=lambda t: t.delay_s)
    return MultipathProfile(los=taps[0], cluster=tuple(taps[1:]))


def cmd_sound(args, cfg: RunConfig) -> Report:
    frame_cfg = FrameConfig(center_freq_ghz=cfg.carrier_ghz)
    if args.taps:
        profile = _parse_taps(args.taps)
    else:
        profile = synth_forest_profile(stat_targets(args.stats_preset), rng_seed=args.seed)
    res = run_sounding(profile, frame_cfg, args.snr, seed=args.seed,
                       ext=cfg.extraction(), with_zc_consistency=True)

    report = _report(args, cfg, "sound")
    from .ofdm import apply_channel, build_capture
    root = np.random.SeedSequence(args.seed)
    data_ss, noise_ss = root.spawn(2)
    tx = build_capture(frame_cfg, data_seed=int(data_ss.generate_state(1)[0]))
    rx = apply_channel(tx, profile, args.snr, rng_seed=int(noise_ss.generate_state(1)[0]))
    for name, stream in (("tx.hex", tx), ("rx.hex", rx)):
        path = _out(args, name)
        atomic_write(path, iq_hex_text(stream.samples))
        report.artifacts.append(path)

    cir_path = _out(args, "cir.csv")
    write_csv(cir_path, ["bin", "delay_ns", "re", "im"],
              ((i, i * frame_cfg.sample_interval_s * 1e9,
                float(v.real), float(v.imag)) for i, v in enumerate(res.cir.samples)))
    report.artifacts.append(cir_path)
    cfr_path = _out(args, "cfr.csv")
    write_csv(cfr_path, ["subcarrier", "re", "im"],
              ((int(k), float(v.real), float(v.imag))
               for k, v in zip(frame_cfg.active_bins(), res.cfr)))
    report.artifacts.append(cfr_path)

    report.tables = {
        "sync_offset": res.sync_offset,
        "taps": [{"bin": int(b), "delay_ns": float(d * 1e9), "power": float(p)}
                 for b, d, p in zip(np.round(res.taps.delays_s * frame_cfg.fs_hz),
                                    res.taps.delays_s, res.taps.powers)],
        "rms_ds_ns": res.rms_ds_s * 1e9,
        "k_db": res.k_db,
        "zc_peak_bins": [int(b) for b in res.zc_bins],
        "cfr_peak_bins": [int(b) for b in res.cfr_raw_bins],
        "snr_db": None if math.isinf(args.snr) else args.snr,
    }
    results_path = _out(args, "sounding.json")
    write_json(results_path, report.payload())
    report.artifacts.append(results_path)
    return report


# ---------------------------------------------------------------------------
# extract


def _extract_capture(path: str, frame_cfg: FrameConfig, ext: ExtractionConfig):
    samples = read_iq_hex(path)
    rx = SampleStream(samples, frame_cfg.fs_hz, "rx")
    template = preamble_template(frame_cfg)
    offset = synchronize(rx, template)
    start = offset + frame_cfg.n_fft - ext.sync_backoff_bins
    frame = SampleStream(rx.samples[start:start + frame_cfg.frame_len],
                         frame_cfg.fs_hz, "rx")
    cfr = estimate_cfr(frame, frame_cfg, default_pilot_sequence(frame_cfg))
    cir = cfr_to_cir(cfr, frame_cfg)
    from .mpc import detect_peaks
    from .ofdm import SampleStream as _SS
    guard = ext.wrap_guard_bins
    rotated = _SS(np.roll(cir.samples, guard), frame_cfg.fs_hz, "cir")
    found = detect_peaks(rotated, ext.peak_config(frame_cfg))
    delays = found.delays_s - (guard + ext.sync_backoff_bins) / frame_cfg.fs_hz
    rel = delays - delays[0]
    keep = (rel <= ext.scatter_gate_ns * 1e-9 if ext.scatter_gate_ns is not None
            else np.ones(rel.size, bool))
    from .mpc import TapSet
    taps = TapSet(delays_s=delays[keep], powers=found.powers[keep])
    k_db = rician_k(taps) if len(taps) >= 2 else None
    return rms_ds(taps) * 1e9, k_db


def cmd_extract(args, cfg: RunConfig) -> Report:
    frame_cfg = FrameConfig(center_freq_ghz=cfg.carrier_ghz)
    ext = cfg.extraction()
    report = _report(args, cfg, "extract")
    if args.captures:
        rows = []
        for path in args.captures:
            ds_ns, k_db = _extract_capture(path, frame_cfg, ext)
            rows.append((os.path.basename(path), ds_ns,
                         float("nan") if k_db is None else k_db))
        ds = np.array([r[1] for r in rows])
        ks = np.array([r[2] for r in rows])
        real_path = _out(args, "realizations.csv")
        write_csv(real_path, ["capture", "rmsds_ns", "k_db"], rows)
        tables = {"n": len(rows), "source": "captures"}
    else:
        targets = stat_targets(args.stats_preset)
        res = run_ensemble(targets, args.n, frame_cfg, snr_db=args.snr,
                           seed=args.seed, ext=ext)
        ds, ks = res.rmsds_ns, res.k_db
        real_path = _out(args, "realizations.csv")
        write_csv(real_path, ["realization", "rmsds_ns", "k_db"],
                  ((i, float(d), float(k)) for i, (d, k) in enumerate(zip(ds, ks))))
        tables = {"n": res.n_requested, "source": args.stats_preset,
                  "undefined_k": res.n_undefined_k}
    report.artifacts.append(real_path)

    if ds.size >= 2:
        tables["rmsds_ns"] = normal_fit_entry(fit_normal(ds))
        valid = ks[np.isfinite(ks)]
        if valid.size >= 2:
            tables["k_db"] = normal_fit_entry(fit_normal(valid))
        ok = np.isfinite(ks)
        if ok.sum() >= 2:
            tables["pearson_r_ds_k"] = float(np.corrcoef(ds[ok], ks[ok])[0, 1])
    report.tables = tables
    results_path = _out(args, "extract_results.json")
    write_json(results_path, report.payload())
    report.artifacts.append(results_path)
    return report


# ---------------------------------------------------------------------------
# angular


def cmd_angular(args, cfg: RunConfig) -> Report:
    sweep = read_sweep_csv(args.input)
    aps = aps_from_sweep(sweep)
    report = _report(args, cfg, "angular")
    aps_path = _out(args, "aps.csv")
    write_csv(aps_path, ["azimuth_deg", "power"],
              zip((float(a) for a in aps.azimuth_deg), (float(p) for p in aps.power)))
    report.artifacts.append(aps_path)
    report.tables = {
        "rms_asa_deg": rms_asa(aps),
        "avg_asa_deg": avg_asa(aps),
    }
    results_path = _out(args, "angular_results.json")
    write_json(results_path, report.payload())
    report.artifacts.append(results_path)
    return report


# ---------------------------------------------------------------------------
# report


def cmd_report(args, cfg: RunConfig) -> Report:
    directory = args.dir
    report = _report(args, cfg, "report")
    rendered = []

    curves_csv = os.path.join(directory, "fit_curves.csv")
    if not os.path.exists(curves_csv):
        curves_csv = os.path.join(directory, "curves.csv")
    if os.path.exists(curves_csv):
        rows = np.genfromtxt(curves_csv, delimiter=",", names=True)
        names = [n for n in rows.dtype.names if n != "dist_m"]
        curves = {n: (rows["dist_m"], rows[n]) for n in names}
        samples = None
        samples_csv = os.path.join(directory, "samples.csv")
        if os.path.exists(samples_csv):
            samples = read_pathloss_csv(samples_csv)
        fig = os.path.join(directory, "pathloss.svg")
        plots.pathloss_figure(fig, curves, samples)
        rendered.append(fig)

    resid_csv = os.path.join(directory, "shadow_residuals.csv")
    if os.path.exists(resid_csv):
        rows = np.genfromtxt(resid_csv, delimiter=",", names=True)
        series = np.atleast_1d(rows["residual_db"])
        nf = fit_normal(series)
        fig = os.path.join(directory, "shadowing_pdf.svg")
        plots.pdf_figure(fig, series, nf.mu, nf.sigma, "shadow fading (dB)",
                         "Shadowing distribution")
        rendered.append(fig)

    real_csv = os.path.join(directory, "realizations.csv")
    if os.path.exists(real_csv):
        rows = np.genfromtxt(real_csv, delimiter=",", names=True)
        ds = np.atleast_1d(rows["rmsds_ns"])
        ks = np.atleast_1d(rows["k_db"])
        nf = fit_normal(ds)
        fig = os.path.join(directory, "rmsds_pdf.svg")
        plots.pdf_figure(fig, ds, nf.mu, nf.sigma, "RMS delay spread (ns)",
                         "RMS-DS distribution")
        rendered.append(fig)
        ks = ks[np.isfinite(ks)]
        if ks.size >= 2:
            nf = fit_normal(ks)
            fig = os.path.join(directory, "rician_k_pdf.svg")
            plots.pdf_figure(fig, ks, nf.mu, nf.sigma, "Rician K (dB)",
                             "Rician K distribution")
            rendered.append(fig)

    cir_csv = os.path.join(directory, "cir.csv")
    if os.path.exists(cir_csv):
        rows = np.genfromtxt(cir_csv, delimiter=",", names=True)
        power = rows["re"] ** 2 + rows["im"] ** 2
        top = np.argsort(power)[-64:]
        keep = np.sort(top)
        fig = os.path.join(directory, "cir.svg")
        plots.cir_figure(fig, rows["delay_ns"][keep], power[keep])
        rendered.append(fig)

    aps_csv = os.path.join(directory, "aps.csv")
    if os.path.exists(aps_csv):
        rows = np.genfromtxt(aps_csv, delimiter=",", names=True)
        fig = os.path.join(directory, "aps.svg")
        plots.aps_figure(fig, rows["azimuth_deg"], rows["power"])
        rendered.append(fig)

    if not rendered:
        raise ArityError(f"no renderable artifacts found in {directory!r}")
    report.tables = {"figures": sorted(os.path.basename(r) for r in rendered)}
    report.artifacts.extend(rendered)
    write_json(os.path.join(directory, "report.json"), report.payload())
    return report


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forest-link",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value config file "
                                         "(default: $FOREST_LINK_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", default="out", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("fit", help="least-squares model fits against a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--models", default="ci,fspl_h,bhf,bhf_m")
    p.add_argument("--elev", type=float, default=None,
                   help="elevation angle override for A2G models")
    common(p)

    p = sub.add_parser("simulate", help="model sweeps and synthetic sample sets")
    p.add_argument("--models", default="ci,bhf_m")
    p.add_argument("--env", choices=["larch", "birch"], default=None)
    p.add_argument("--elev", type=float, default=None)
    p.add_argument("--params", default=None, help="override k=v,... for a single model")
    p.add_argument("--d-min", type=float, default=10.0)
    p.add_argument("--d-max", type=float, default=300.0)
    p.add_argument("--n-points", type=int, default=200)
    p.add_argument("--shadow-sigma", type=float, default=0.0)
    common(p)

    p = sub.add_parser("sound", help="loopback sounding run")
    p.add_argument("--taps", default=None, help="explicit channel, e.g. '0:1,10:1'")
    p.add_argument("--stats-preset", default="larch_g2g",
                   choices=sorted(STAT_PRESETS))
    p.add_argument("--snr", type=lambda s: math.inf if s == "inf" else float(s),
                   default=math.inf)
    common(p)

    p = sub.add_parser("extract", help="delay statistics over captures or ensembles")
    p.add_argument("--captures", nargs="*", default=None, help="I/Q hex capture files")
    p.add_argument("--stats-preset", default="larch_g2g", choices=sorted(STAT_PRESETS))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--snr", type=lambda s: math.inf if s == "inf" else float(s),
                   default=math.inf)
    common(p)

    p = sub.add_parser("angular", help="angular power spectrum from a sweep CSV")
    p.add_argument("--input", required=True)
    common(p)

    p = sub.add_parser("report", help="render SVG figures for prior outputs")
    p.add_argument("--dir", default="out")
    common(p, seed=False)
    return parser


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "sound": cmd_sound,
    "extract": cmd_extract,
    "angular": cmd_angular,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if not hasattr(args, "seed"):
            args.seed = cfg.seed
        COMMANDS[args.command](args, cfg)
    except ToolkitError as exc:
        sys.stderr.write(json.dumps(exc.record()) + "\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
