"""Command-line front end: ``v2lab <group> <command> [flags]``.

Every command accepts ``--config FILE`` (JSON with the same keys as the
long flags, dashes or underscores) and embeds its fully resolved
configuration in what it writes, so ``--config`` on an earlier output
re-runs it. CSV outputs get a ``<file>.meta.json`` sidecar for that purpose.
The only non-deterministic content is the ``metadata.created_utc``
timestamp.

Exit codes: 0 success, 1 invalid input or usage, 2 a fit did not converge
(results are still written with ``converged: false``).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .optim import FitError, FitResult, _jsonable
from .photophysics import (
    EmitterModel,
    FrequencyPrior,
    InsufficientDataError,
    checkprobe_spectrum,
    fit_checkprobe_linewidth,
    fit_spectral_diffusion,
    g2_zero,
    no_recapture_model,
    postselect_probe_spectrum,
    read_records_csv,
    saturation_curve,
    saturation_fit,
    simulate_check_probe,
    simulate_diffusion_records,
    simulate_g2,
    write_records_csv,
    write_timestamps,
)
from .spin import (
    MwSequence,
    SpinModel,
    desr_fit,
    desr_lines,
    dump_sequence,
    load_sequence,
    normalize_readout,
    power_law,
    rabi_chevron,
    rabi_fit,
    ramsey_fit,
    ramsey_model,
    read_sweep_csv,
    run_spin_sequence,
    standard_sequence,
    stretched_decay,
    stretched_decay_fit,
    t2_power_law_fit,
    write_sweep_csv,
)
from .survey import (
    PlMap,
    amorphization_fit,
    detect_ple_peaks,
    exceedance_curve,
    inhomogeneous_fit,
    occurrence_stats,
    read_damage_csv,
    read_peaks_dir,
    read_ple_csv,
    read_plmap_csv,
    rescale_pl_maps,
    simulate_cohort,
    write_plmap_csv,
    write_ple_csv,
)

log = logging.getLogger("v2lab")

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2
_INTERNAL = {"func", "config", "group", "command", "spin_command", "log_level", "_leaf"}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# --- helpers -----------------------------------------------------------------

def _range_list(text: str) -> list[int]:
    """``"1:17"`` (inclusive) or ``"1,3,5"``."""
    text = str(text)
    if ":" in text:
        a, b = text.split(":")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _pair(text: str) -> tuple[float, float]:
    a, b = str(text).split(":")
    return float(a), float(b)


def _sweep(text: str) -> np.ndarray:
    """``start:stop:num`` (inclusive linspace) or a comma list."""
    text = str(text)
    if ":" in text:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.array([float(v) for v in text.split(",")])


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) in (None, ""):
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _resolved(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _INTERNAL}
    cfg["command"] = args._leaf
    return _jsonable(cfg)


def _metadata() -> dict:
    now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0)
    return {"created_utc": now.isoformat(), "version": __version__}


def _dump(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _write_json(path, doc) -> None:
    text = _dump(doc)
    if path in (None, "", "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _write_sidecar(path, args, **extra) -> None:
    doc = {"config": _resolved(args), "metadata": _metadata(), **extra}
    Path(str(path) + ".meta.json").write_text(_dump(doc))


def _fit_doc(args, res: FitResult, plot: dict | None = None, **extra) -> dict:
    doc = {"config": _resolved(args), "fit": res.to_dict(), "metadata": _metadata(), **extra}
    if plot is not None:
        doc["plot"] = plot
    return doc


def _finish_fit(args, res: FitResult, plot=None, **extra) -> int:
    _write_json(args.output, _fit_doc(args, res, plot, **extra))
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _read_columns(path, required: list[str]) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [r for r in reader if r]
    missing = [c for c in required if c not in header]
    if missing:
        raise UsageError(f"{path}: missing column(s) {', '.join(missing)}")
    cols = {h: np.array([float(r[i]) for r in rows]) for i, h in enumerate(header)}
    return cols


# --- sim -----------------------------------------------------------------------

def cmd_sim_check_probe(args) -> int:
    _require(args, "output")
    if args.mode == "spectrum":
        emitter = EmitterModel(gamma=args.gamma_mhz, c0=args.c0)
        prior = FrequencyPrior("uniform", args.f1_mhz, args.prior_halfwidth_mhz)
        probes = np.linspace(-args.probe_span_mhz, args.probe_span_mhz, args.probe_steps) + args.f1_mhz
        records = simulate_check_probe(emitter, args.f1_mhz, args.reps, prior, args.seed, probes)
    elif args.mode == "diffusion":
        d = np.logspace(-2, math.log10(args.max_delay_ms), args.delay_steps)
        delays = np.concatenate([-d[::-1], [0.0], d])
        records = simulate_diffusion_records(delays, args.reps_per_delay, ratio=args.ratio_per_ms,
                                             gamma_i=args.gamma_i_per_ms, c0=args.c0,
                                             herald_mean=args.herald_mean, seed=args.seed)
    else:
        raise UsageError(f"unknown mode {args.mode!r}")
    write_records_csv(args.output, records)
    _write_sidecar(args.output, args, n_records=len(records))
    return EXIT_OK


def _spin_model(args) -> SpinModel:
    return SpinModel(rabi_mhz=args.rabi_mhz, f0_mhz=args.f0_mhz, f_hf_mhz=args.f_hf_mhz,
                     t2star_us=args.t2star_us, t2_ms=args.t2_ms, decay_exponent=args.decay_exponent,
                     t2_beta_ms=args.t2_beta_ms, t2_alpha=args.t2_alpha, contrast=args.contrast,
                     p_resonant=args.p_resonant, background=args.background)


_SPIN_KINDS = {"rabi": "rabi_burst", "desr": "pi_pulse", "ramsey": "ramsey", "hahn": "hahn",
               "xy4": "xy4", "xy8": "xy8_n"}


def cmd_sim_spin(args) -> int:
    _require(args, "output")
    if args.sequence:
        blocks = load_sequence(Path(args.sequence).read_text())
    else:
        _require(args, "sweep")
        mw = MwSequence(_SPIN_KINDS[args.kind], args.mw_freq_mhz, args.rabi_mhz,
                        _sweep(args.sweep).tolist(), repeats=args.repeats)
        blocks = standard_sequence(mw)
    spin = _spin_model(args)
    emitter = EmitterModel(gamma=args.gamma_mhz, c0=args.c0)
    records = run_spin_sequence(blocks, spin, emitter, args.reps, args.seed)
    write_sweep_csv(args.output, records)
    _write_sidecar(args.output, args, sequence=json.loads(dump_sequence(blocks)))
    return EXIT_OK


def cmd_sim_ple(args) -> int:
    _require(args, "output")
    spectra, truths = simulate_cohort(args.pillars, args.seed, args.mean_emitters, label=args.cohort,
                                      center_fwhm_ghz=args.center_fwhm_ghz or None,
                                      noise_khz=args.noise_khz)
    write_ple_csv(args.output, spectra)
    truth = {s.pillar_id: [{"center_ghz": c, "amplitude_khz": a, "sigma_g_ghz": sg, "gamma_l_ghz": gl}
                           for c, a, sg, gl in t] for s, t in zip(spectra, truths)}
    _write_sidecar(args.output, args, truth=truth)
    return EXIT_OK


def cmd_sim_g2(args) -> int:
    _require(args, "output")
    ch, t = simulate_g2(args.signal_fraction, args.rate_per_ns, args.duration_ns, args.seed)
    write_timestamps(args.output, ch, t)
    g, s = g2_zero(ch, t, args.bin_ns, args.duration_ns)
    _write_sidecar(args.output, args, g2_zero=g, g2_zero_sigma=s,
                   g2_zero_expected=1.0 - args.signal_fraction ** 2)
    return EXIT_OK


# --- fit -------------------------------------------------------------------------

def cmd_fit_cp_ple(args) -> int:
    _require(args, "input")
    records = read_records_csv(args.input)
    spectra = {}
    for t in _range_list(args.thresholds):
        grid, mean, n = postselect_probe_spectrum(records, t)
        spectra[t] = (grid, mean, n)
    support = (args.f1_mhz - args.support_mhz, args.f1_mhz + args.support_mhz)
    res = fit_checkprobe_linewidth(spectra, args.gamma_lifetime_mhz, args.f1_mhz, support)
    g, c0 = res.value("gamma"), res.value("c0")
    plot = {"threshold": [], "x": [], "y": [], "n": [], "fit": []}
    for t in res.extras["thresholds"]:
        grid, mean, n = spectra[t]
        ok = np.isfinite(mean)
        model = checkprobe_spectrum(grid[ok], t, g, c0, args.f1_mhz, support)
        plot["threshold"] += [t] * int(ok.sum())
        plot["x"] += grid[ok].tolist()
        plot["y"] += mean[ok].tolist()
        plot["n"] += n[ok].tolist()
        plot["fit"] += model.tolist()
    return _finish_fit(args, res, plot)


def cmd_fit_diffusion(args) -> int:
    _require(args, "input")
    records = read_records_csv(args.input)
    res = fit_spectral_diffusion(records, args.threshold, args.model, args.gamma_assumed_mhz,
                                 _pair(args.ratio_band), args.gamma_lifetime_mhz)
    t = np.asarray(res.extras["delays_ms"])
    if args.model == "no_recapture":
        fit = no_recapture_model(t, res.value("ratio"), res.value("gamma_i"), 1.0, res.value("c0"))
    else:
        fit = res.value("c0") / (1.0 + res.value("ratio") * np.abs(t))
    plot = {"x": t.tolist(), "y": res.extras["mean_counts"], "n": res.extras["n_heralded"],
            "fit": fit.tolist()}
    return _finish_fit(args, res, plot)


def cmd_fit_saturation(args) -> int:
    _require(args, "input")
    cols = _read_columns(args.input, ["power", "counts"])
    sigma = cols.get("sigma")
    res = saturation_fit(cols["power"], cols["counts"], sigma)
    fit = saturation_curve(cols["power"], res.value("A"), res.value("B"), res.value("p_sat"))
    plot = {"x": cols["power"].tolist(), "y": cols["counts"].tolist(), "fit": fit.tolist()}
    if sigma is not None:
        plot["sigma"] = sigma.tolist()
    return _finish_fit(args, res, plot)


def _normalized_input(args):
    """(x, R, sigma_R) from a raw sweep CSV or a ``sweep_value,r,sigma_r`` table."""
    with open(args.input, newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    if header[:2] == ["sweep_value", "rep"]:
        nr = normalize_readout(read_sweep_csv(args.input), args.check_threshold, strict=False)
        if nr.skipped:
            log.warning("skipped sweep values: %s", nr.skipped)
        sigma = nr.sigma if np.all(nr.sigma > 0) else None
        return nr.sweep, nr.r, sigma
    cols = _read_columns(args.input, ["sweep_value", "r"])
    return cols["sweep_value"], cols["r"], cols.get("sigma_r")


def _plot(x, y, sigma, fit):
    doc = {"x": np.asarray(x).tolist(), "y": np.asarray(y).tolist(), "fit": np.asarray(fit).tolist()}
    if sigma is not None:
        doc["sigma"] = np.asarray(sigma).tolist()
    return doc


def cmd_fit_spin(args) -> int:
    _require(args, "input")
    kind = args.spin_command
    if kind == "scaling":
        cols = _read_columns(args.input, ["n_pulses", "t2_ms"])
        res = t2_power_law_fit(cols["n_pulses"], cols["t2_ms"], cols.get("t2_sigma_ms"), args.space)
        fit = power_law(cols["n_pulses"], res.value("beta"), res.value("alpha"))
        return _finish_fit(args, res, _plot(cols["n_pulses"], cols["t2_ms"], cols.get("t2_sigma_ms"), fit))
    x, r, s = _normalized_input(args)
    if kind == "rabi":
        res = rabi_fit(x, r, s, args.f_hf_mhz)
        v = res.values
        fit = v[0] + v[1] * rabi_chevron(x, v[3], v[2], args.f_hf_mhz)
    elif kind == "desr":
        res = desr_fit(x, r, s)
        fit = desr_lines(x, *res.values)
    elif kind == "ramsey":
        res = ramsey_fit(x, r, s, args.components)
        fit = ramsey_model(x, *res.values)
    elif kind == "decay":
        x = 2.0 * args.n_pulses * np.asarray(x) * 1e-3  # tau (us) -> total time (ms)
        res = stretched_decay_fit(x, r, s)
        res.extras["n_pulses"] = args.n_pulses
        fit = stretched_decay(x, *res.values)
    else:
        raise UsageError(f"unknown spin fit {kind!r}")
    return _finish_fit(args, res, _plot(x, r, s, fit))


# --- survey -----------------------------------------------------------------------

def _safe_name(pid: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in pid)


def cmd_survey_peaks(args) -> int:
    _require(args, "input", "output")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _resolved(args)
    summary = {}
    for spec in read_ple_csv(args.input):
        peaks = detect_ple_peaks(spec)
        doc = {"pillar_id": spec.pillar_id, "peaks": [p.to_dict() for p in peaks], "config": cfg}
        (out / f"{_safe_name(spec.pillar_id)}.json").write_text(_dump(doc))
        summary[spec.pillar_id] = len(peaks)
    _write_json(out / "summary.meta.json", {"config": cfg, "n_peaks": summary, "metadata": _metadata()})
    return EXIT_OK


def _peaks_from_dir(path):
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{path} is not a directory of peak files")
    return read_peaks_dir(p)


def cmd_survey_occurrence(args) -> int:
    _require(args, "input")
    peaks = _peaks_from_dir(args.input)
    stats = occurrence_stats(peaks, args.threshold_khz)
    grid = np.linspace(0.0, args.exceedance_max_khz, args.exceedance_points)
    doc = {"config": _resolved(args), "cohort": args.cohort, "occurrence": stats.to_dict(),
           "exceedance": {"threshold_khz": grid.tolist(),
                          "peaks_per_pillar": exceedance_curve(peaks, grid).tolist()},
           "metadata": _metadata()}
    _write_json(args.output, doc)
    return EXIT_OK


def cmd_survey_inhomogeneous(args) -> int:
    _require(args, "input")
    src = Path(args.input)
    if src.is_dir():
        centers = [p.center_ghz for peaks in read_peaks_dir(src).values() for p in peaks
                   if p.amplitude_khz >= args.min_amplitude_khz]
    else:
        centers = _read_columns(src, ["center_ghz"])["center_ghz"].tolist()
    res = inhomogeneous_fit(centers, args.bin_ghz)
    mids = np.asarray(res.extras["bin_centers"])
    v = res.values
    fit = v[0] * np.exp(-0.5 * ((mids - v[1]) / v[2]) ** 2)
    return _finish_fit(args, res, {"x": mids.tolist(), "y": res.extras["counts"], "fit": fit.tolist()})


def cmd_survey_plmap(args) -> int:
    _require(args, "before", "after", "output", "baseline_rows")
    a, b = (int(v) for v in args.baseline_rows.split(":"))
    rows = list(range(a, b))
    before = read_plmap_csv(args.before, rows)
    after = read_plmap_csv(args.after, rows)
    sb, sa, beta_b, beta_a = rescale_pl_maps(before, after)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_plmap_csv(out / "before_scaled.csv", sb)
    write_plmap_csv(out / "after_scaled.csv", sa)
    _write_json(out / "plmap.json", {
        "config": _resolved(args), "beta_before": beta_b, "beta_after": beta_a,
        "baseline_before": before.baseline_mean(), "baseline_after": after.baseline_mean(),
        "metadata": _metadata()})
    return EXIT_OK


def cmd_survey_damage(args) -> int:
    _require(args, "input")
    table = read_damage_csv(args.input)
    res = amorphization_fit(table)
    plot = {"x": table.energy_uj.tolist(), "y": (table.damaged / table.exposed).tolist(),
            "fit": res.extras["predicted"]}
    code = _finish_fit(args, res, plot)
    # separable data is a legitimate outcome, reported by its flag
    return EXIT_OK if res.extras.get("separable") else code


# --- report -----------------------------------------------------------------------

def cmd_report(args) -> int:
    _require(args, "output")
    files = []
    for item in args.inputs:
        p = Path(item)
        files += sorted(p.glob("*.json")) if p.is_dir() else [p]
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    bundle = {}
    for f in files:
        if f.name.endswith(".meta.json"):
            continue
        doc = json.loads(f.read_text())
        name = f.stem
        if name in bundle:
            raise UsageError(f"duplicate report entry {name!r}")
        doc.pop("metadata", None)
        plot = doc.pop("plot", None)
        bundle[name] = doc
        if plot:
            cols = list(plot)
            with open(out / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(cols)
                for row in zip(*(plot[c] for c in cols)):
                    w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    _write_json(out / "report.json", {"config": _resolved(args), "entries": bundle,
                                      "metadata": _metadata()})
    return EXIT_OK


# --- parser -------------------------------------------------------------------------

def _leaf(sub, name, func, leaf_name, help_text, registry):
    p = sub.add_parser(name, help=help_text)
    p.set_defaults(func=func, _leaf=leaf_name)
    p.add_argument("--config", help="JSON file with the same keys as the long flags")
    registry[leaf_name] = p
    return p


def _spin_args(p):
    p.add_argument("--rabi-mhz", type=float, default=1.0)
    p.add_argument("--f0-mhz", type=float, default=181.8)
    p.add_argument("--f-hf-mhz", type=float, default=0.0)
    p.add_argument("--t2star-us", type=float, default=0.9)
    p.add_argument("--t2-ms", type=float, default=0.49)
    p.add_argument("--decay-exponent", type=float, default=2.0)
    p.add_argument("--t2-beta-ms", type=float, default=None)
    p.add_argument("--t2-alpha", type=float, default=None)
    p.add_argument("--contrast", type=float, default=0.8)
    p.add_argument("--p-resonant", type=float, default=0.8)
    p.add_argument("--background", type=float, default=0.05)


def build_parser():
    registry: dict[str, argparse.ArgumentParser] = {}
    root = _Parser(prog="v2lab", description="V2-center spectroscopy and spin-coherence toolkit")
    root.add_argument("--log-level", default="WARNING")
    root.add_argument("--version", action="version", version=f"v2lab {__version__}")
    groups = root.add_subparsers(dest="group", required=True, parser_class=_Parser)

    sim = groups.add_parser("sim", help="forward simulators").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = _leaf(sim, "check-probe", cmd_sim_check_probe, "sim check-probe", "check/probe records", registry)
    p.add_argument("--mode", choices=["spectrum", "diffusion"], default="spectrum")
    p.add_argument("--gamma-mhz", type=float, default=39.0)
    p.add_argument("--c0", type=float, default=7.42)
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--f1-mhz", type=float, default=0.0)
    p.add_argument("--prior-halfwidth-mhz", type=float, default=200.0)
    p.add_argument("--probe-span-mhz", type=float, default=150.0)
    p.add_argument("--probe-steps", type=int, default=41)
    p.add_argument("--ratio-per-ms", type=float, default=1.0, help="gamma_d / gamma (diffusion mode)")
    p.add_argument("--gamma-i-per-ms", type=float, default=0.2)
    p.add_argument("--reps-per-delay", type=int, default=5000)
    p.add_argument("--max-delay-ms", type=float, default=50.0)
    p.add_argument("--delay-steps", type=int, default=15)
    p.add_argument("--herald-mean", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")

    p = _leaf(sim, "spin", cmd_sim_spin, "sim spin", "spin sweep records", registry)
    p.add_argument("--kind", choices=sorted(_SPIN_KINDS), default="ramsey")
    p.add_argument("--sequence", help="sequence descriptor JSON (overrides --kind/--sweep)")
    p.add_argument("--sweep", help="start:stop:num or comma list (us or MHz)")
    p.add_argument("--mw-freq-mhz", type=float, default=181.8)
    p.add_argument("--repeats", type=int, default=1, help="XY4/XY8 block repetitions")
    _spin_args(p)
    p.add_argument("--gamma-mhz", type=float, default=39.0)
    p.add_argument("--c0", type=float, default=10.0)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")

    p = _leaf(sim, "ple", cmd_sim_ple, "sim ple", "synthetic PLE cohort", registry)
    p.add_argument("--pillars", type=int, default=100)
    p.add_argument("--mean-emitters", type=float, default=0.8)
    p.add_argument("--center-fwhm-ghz", type=float, default=22.0, help="0 for uniform centers")
    p.add_argument("--noise-khz", type=float, default=0.02)
    p.add_argument("--cohort", default="pillar")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")

    p = _leaf(sim, "g2", cmd_sim_g2, "sim g2", "HBT photon time tags", registry)
    p.add_argument("--signal-fraction", type=float, default=0.908)
    p.add_argument("--rate-per-ns", type=float, default=0.01)
    p.add_argument("--duration-ns", type=float, default=1e8)
    p.add_argument("--bin-ns", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")

    fit = groups.add_parser("fit", help="model fits").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = _leaf(fit, "diffusion", cmd_fit_diffusion, "fit diffusion", "spectral diffusion", registry)
    p.add_argument("-i", "--input")
    p.add_argument("--threshold", type=int, default=1)
    p.add_argument("--model", choices=["no_recapture", "diffusion_only"], default="no_recapture")
    p.add_argument("--gamma-assumed-mhz", type=float, default=36.0)
    p.add_argument("--gamma-lifetime-mhz", type=float, default=26.0)
    p.add_argument("--ratio-band", default="1:3")
    p.add_argument("-o", "--output")

    p = _leaf(fit, "cp-ple", cmd_fit_cp_ple, "fit cp-ple", "check-probe linewidth", registry)
    p.add_argument("-i", "--input")
    p.add_argument("--thresholds", default="1:17")
    p.add_argument("--gamma-lifetime-mhz", type=float, default=26.0)
    p.add_argument("--f1-mhz", type=float, default=0.0)
    p.add_argument("--support-mhz", type=float, default=200.0, help="half-width of the frequency prior")
    p.add_argument("-o", "--output")

    p = _leaf(fit, "saturation", cmd_fit_saturation, "fit saturation", "power saturation", registry)
    p.add_argument("-i", "--input", help="CSV with power,counts[,sigma]")
    p.add_argument("-o", "--output")

    spin = fit.add_parser("spin", help="spin-coherence fits").add_subparsers(
        dest="spin_command", required=True, parser_class=_Parser)
    for kind in ("rabi", "desr", "ramsey", "decay", "scaling"):
        p = _leaf(spin, kind, cmd_fit_spin, f"fit spin {kind}", f"{kind} fit", registry)
        p.add_argument("-i", "--input")
        p.add_argument("-o", "--output")
        if kind != "scaling":
            p.add_argument("--check-threshold", type=int, default=1)
        if kind == "rabi":
            p.add_argument("--f-hf-mhz", type=float, default=0.0)
        if kind == "ramsey":
            p.add_argument("--components", type=int, choices=[1, 2], default=2)
        if kind == "decay":
            p.add_argument("--n-pulses", type=int, default=1)
        if kind == "scaling":
            p.add_argument("--space", choices=["log", "linear"], default="log")

    survey = groups.add_parser("survey", help="PLE surveys and cohort statistics").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = _leaf(survey, "peaks", cmd_survey_peaks, "survey peaks", "detect PLE peaks", registry)
    p.add_argument("-i", "--input")
    p.add_argument("-o", "--output", help="output directory")
    p = _leaf(survey, "occurrence", cmd_survey_occurrence, "survey occurrence", "occurrence", registry)
    p.add_argument("-i", "--input", help="directory of peak files")
    p.add_argument("--threshold-khz", type=float, default=0.3)
    p.add_argument("--cohort", default="")
    p.add_argument("--exceedance-max-khz", type=float, default=2.0)
    p.add_argument("--exceedance-points", type=int, default=101)
    p.add_argument("-o", "--output")
    p = _leaf(survey, "inhomogeneous", cmd_survey_inhomogeneous, "survey inhomogeneous",
              "inhomogeneous distribution", registry)
    p.add_argument("-i", "--input", help="peak directory or CSV with center_ghz")
    p.add_argument("--bin-ghz", type=float, default=2.0)
    p.add_argument("--min-amplitude-khz", type=float, default=0.0)
    p.add_argument("-o", "--output")
    p = _leaf(survey, "plmap", cmd_survey_plmap, "survey plmap", "rescale PL maps", registry)
    p.add_argument("--before")
    p.add_argument("--after")
    p.add_argument("--baseline-rows", help="row slice start:stop of the bulk reference")
    p.add_argument("-o", "--output", help="output directory")
    p = _leaf(survey, "damage", cmd_survey_damage, "survey damage", "amorphization threshold", registry)
    p.add_argument("-i", "--input")
    p.add_argument("-o", "--output")

    p = _leaf(groups, "report", cmd_report, "report", "bundle outputs", registry)
    p.add_argument("-i", "--inputs", nargs="+", default=[])
    p.add_argument("-o", "--output", help="output directory")
    return root, registry


def _load_config(path, leaf: str, parser) -> dict:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc.get("config"), dict):
        doc = doc["config"]
    doc = {str(k).replace("-", "_"): v for k, v in doc.items()}
    command = doc.pop("command", leaf)
    if command != leaf:
        raise UsageError(f"config is for {command!r}, not {leaf!r}")
    known = {a.dest for a in parser._actions}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    return doc


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    root, registry = build_parser()
    args = root.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            leaf = registry[args._leaf]
            leaf.set_defaults(**_load_config(args.config, args._leaf, leaf))
            args = root.parse_args(argv)
        return args.func(args)
    except (UsageError, InsufficientDataError, FitError, ValueError, OSError, KeyError) as exc:
        print(f"v2lab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
