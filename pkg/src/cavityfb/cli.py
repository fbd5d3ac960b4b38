"""Command-line interface: tables, run, batch, analyze.

Every command is reproducible from (config file, master seed); the
resolved configuration is embedded in all outputs.  Exit codes: 0 ok,
1 usage or config error, 2 solver failure, 3 missing artifacts,
4 bad or inconsistent data.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .calibrate import CalibrationError, calibrate_all
from .detection import NoiseModel
from .experiment import (CampaignSpec, read_jsonl, run_campaign,
                         summarize_campaign, welch_comparison, write_jsonl)
from .jc import SteadyStateError
from .maps import MapBuildError, RadialMaps, build_maps
from .params import KB
from .trajectory import run_trajectory

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_MISSING = 3
EXIT_BADDATA = 4

TABLES_STEM = "maps"
CALIBRATION_FILE = "calibration.json"
# config sections that must match between table build and consumers
SYSTEM_SECTIONS = ("system", "hilbert", "grid", "calibration")


def _parse_set(values) -> dict:
    tree: dict = {}
    for item in values or []:
        if "=" not in item:
            raise cfgmod.ConfigError(f"--set needs KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = val
    return tree


def _resolve_config(args) -> dict:
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.default_config()
    if getattr(args, "mode", None) == "axial_pinned":
        cfg = cfgmod.apply_axial_pinned(cfg)
    overrides = _parse_set(getattr(args, "set", None))
    if overrides:
        cfg = cfgmod.merge_overrides(cfg, overrides)
    return cfg


def _jobs(args, cfg) -> int:
    jobs = args.jobs if args.jobs is not None else cfg["campaign"]["jobs"]
    return jobs if jobs and jobs > 0 else (os.cpu_count() or 1)


def _master_seed(args, cfg) -> int:
    env = os.environ.get("SIM_SEED")
    if env is not None:
        return int(env)
    if getattr(args, "seed", None) is not None:
        return args.seed
    return cfg["campaign"]["master_seed"]


def _load_tables(tables_dir: str):
    stem = Path(tables_dir) / TABLES_STEM
    calib_path = Path(tables_dir) / CALIBRATION_FILE
    maps = RadialMaps.load(stem)
    with open(calib_path) as f:
        calib = json.load(f)
    noise = NoiseModel(
        noise_gain=calib["report"]["noise"]["noise_gain"],
        floor=calib["report"]["noise"]["floor"],
        mode=calib["report"]["noise"]["mode"])
    return maps, noise, calib


def _check_tables_config(cfg, calib) -> None:
    stored = calib.get("config", {})
    for section in SYSTEM_SECTIONS:
        if stored.get(section) != cfg.get(section):
            raise ValueError(
                f"tables were built with a different {section!r} config; "
                f"rebuild with `cavityfb tables` or use the matching config file")


def cmd_tables(args) -> int:
    cfg = _resolve_config(args)
    params = cfgmod.make_params(cfg)
    grid = cfgmod.make_grid(cfg)
    jobs = _jobs(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cal_cfg = cfg["calibration"]
    maps = build_maps(params, grid=grid, n_fock=cfg["hilbert"]["n_fock"],
                      jobs=jobs)
    cal, noise, report = calibrate_all(
        maps, level=cal_cfg["level"],
        sensitivity_target=cal_cfg["sensitivity_nm_per_sqrthz"] * 1e-9,
        heating_fraction=cal_cfg["heating_fraction_per_orbit"],
        master_seed=cal_cfg["master_seed"],
        amplitude_w0=cal_cfg["reference_amplitude_w0"],
        n_runs=cal_cfg["n_runs"], n_periods=cal_cfg["n_periods"])
    report["noise"]["floor"] = cal_cfg["noise_floor"]
    report["noise"]["mode"] = cal_cfg["noise_mode"]
    paths = maps.save(out / TABLES_STEM)
    payload = {
        "config": cfg,
        "config_digest": cfgmod.config_digest(cfg),
        "report": report,
        "depths_mK": {lv: maps.depth(lv) / KB * 1e3 for lv in maps.levels},
        "fitted_waists_um": {lv: maps.fitted_waist(lv) * 1e6
                             for lv in maps.levels},
    }
    with open(out / CALIBRATION_FILE, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    if args.figures:
        from .reports import save_map_profiles
        save_map_profiles(maps, out / "maps_profiles.svg")
    for lv in maps.levels:
        print(f"{lv}: U0/kB = {maps.depth(lv) / KB * 1e3:.3f} mK, "
              f"w = {maps.fitted_waist(lv) * 1e6:.2f} um")
    print(f"diffusion gain = {cal.model.calibration_gain:.4f} "
          f"(heating {cal.measured_per_period / KB * 1e6:.1f} uK/orbit, "
          f"tau_r = {cal.orbit_period * 1e6:.1f} us)")
    print(f"noise gain = {noise.noise_gain:.4f} "
          f"(resolvable amplitude "
          f"{report['noise']['resolvable_amplitude_m'] * 1e6:.3f} um)")
    print(f"wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    maps, noise, calib = _load_tables(args.tables)
    _check_tables_config(cfg, calib)
    sim = cfgmod.make_sim(cfg)
    ctrl = cfgmod.make_controller(cfg, policy=args.policy)
    est = cfgmod.make_estimator(cfg)
    seed = _master_seed(args, cfg)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(args.index,)))
    rec = run_trajectory(maps, sim, ctrl, noise, rng, estimator=est)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "trajectory.csv"
    rec.to_csv(csv_path)
    sidecar = rec.sidecar()
    sidecar["config"] = cfg
    sidecar["config_digest"] = cfgmod.config_digest(cfg)
    sidecar["seed"] = seed
    sidecar["index"] = args.index
    with open(out / "trajectory_events.json", "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
    if args.plot:
        from .reports import save_trajectory_figure
        save_trajectory_figure(rec, out / "trajectory.svg")
    dwell = rec.dwell_time
    print(f"termination: {rec.termination}; triggered: {rec.triggered}; "
          f"dwell: {dwell * 1e6:.0f} us" if dwell is not None else
          f"termination: {rec.termination}; triggered: {rec.triggered}")
    print(f"wrote {csv_path}")
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _resolve_config(args)
    maps, noise, calib = _load_tables(args.tables)
    _check_tables_config(cfg, calib)
    sim = cfgmod.make_sim(cfg)
    ctrl = cfgmod.make_controller(cfg, policy=args.policy)
    est = cfgmod.make_estimator(cfg)
    n_drops = args.drops if args.drops is not None else cfg["campaign"]["n_drops"]
    seed = _master_seed(args, cfg)
    label = args.label or ctrl.policy
    spec = CampaignSpec(n_drops=n_drops, master_seed=seed, sim=sim,
                        controller=ctrl, noise=noise, estimator=est,
                        label=label)
    result = run_campaign(maps, spec, jobs=_jobs(args, cfg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jsonl_path = out / f"{label}.jsonl"
    write_jsonl(result["rows"], jsonl_path)
    summary = {
        "label": label,
        "policy": ctrl.policy,
        "n_drops": n_drops,
        "master_seed": seed,
        "config": cfg,
        "config_digest": cfgmod.config_digest(cfg),
        "summary": result["summary"],
    }
    with open(out / f"{label}_summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    s = result["summary"]
    life = s["lifetime_fit"]["lifetime"] if s["lifetime_fit"] else None
    print(f"{label}: {s['n_triggered']}/{s['n_drops']} triggered, "
          f"{s['n_merit']} merit-eligible, mean M = "
          f"{s['mean_merit'] if s['mean_merit'] is not None else float('nan'):.3g}, "
          f"lifetime = {life * 1e3 if life else float('nan'):.3g} ms")
    print(f"wrote {jsonl_path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels, summaries = [], {}
    merits, merits_p, dwells, fits = {}, {}, {}, {}
    for path in args.inputs:
        label = Path(path).stem
        rows = read_jsonl(path)
        summary = summarize_campaign(rows)
        labels.append(label)
        summaries[label] = summary
        merits[label] = [r["merit"] for r in rows
                         if r.get("merit") is not None]
        merits_p[label] = [r["merit_prime"] for r in rows
                           if r.get("merit_prime") is not None]
        dwells[label] = [r["dwell_time"] for r in rows
                         if r.get("dwell_time") is not None]
        fits[label] = summary["lifetime_fit"]
    comparisons = {}
    if len(labels) >= 2:
        ref = labels[0]
        for other in labels[1:]:
            if merits[ref] and merits[other]:
                comparisons[f"{ref}_vs_{other}"] = \
                    welch_comparison(merits[ref], merits[other])
            if merits_p[ref] and merits_p[other]:
                comparisons[f"{ref}_vs_{other}_prime"] = \
                    welch_comparison(merits_p[ref], merits_p[other])
    payload = {"summaries": summaries, "comparisons": comparisons}
    with open(out / "analysis_summary.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    from .reports import save_dwell_histograms, save_merit_histograms
    if any(merits.values()):
        save_merit_histograms({k: v for k, v in merits.items() if v},
                              out / "merit_hist.svg")
    if any(merits_p.values()):
        save_merit_histograms({k: v for k, v in merits_p.items() if v},
                              out / "merit_prime_hist.svg", prime=True)
    if any(dwells.values()):
        save_dwell_histograms({k: v for k, v in dwells.items() if v},
                              fits, out / "dwell_hist.svg")
    for label in labels:
        s = summaries[label]
        print(f"{label}: {s['n_triggered']}/{s['n_drops']} triggered, "
              f"mean M = {s['mean_merit']}, mean M' = {s['mean_merit_prime']}")
    for name, comp in comparisons.items():
        print(f"{name}: mean {comp['mean_a']:.3g} vs {comp['mean_b']:.3g}, "
              f"t = {comp['t']:.2f}, p = {comp['p_one_sided']:.2e}")
    print(f"wrote {out / 'analysis_summary.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cavityfb",
        description="Cavity QED single-atom trapping and radial feedback "
                    "cooling simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, tables=False):
        p.add_argument("--config", help="JSON config file (defaults built in)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override any config key (repeatable)")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker processes (0 or unset: all cores)")
        if tables:
            p.add_argument("--tables", required=True,
                           help="directory holding the field-map tables")

    p = sub.add_parser("tables", help="solve the steady-state scans, "
                                      "calibrate, and write the map tables")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--figures", action="store_true",
                   help="also render the map profile figure")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("run", help="simulate one trajectory")
    common(p, tables=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", default=None,
                   choices=["hysteresis_direct", "cycle_delay", "open_loop",
                            "constant"])
    p.add_argument("--mode", default=None, choices=["full3d", "axial_pinned"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--index", type=int, default=0,
                   help="trajectory index within the seed stream")
    p.add_argument("--plot", action="store_true", help="write trajectory.svg")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run a Monte Carlo campaign")
    common(p, tables=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", default=None,
                   choices=["hysteresis_direct", "cycle_delay", "open_loop",
                            "constant"])
    p.add_argument("--mode", default=None, choices=["full3d", "axial_pinned"])
    p.add_argument("--drops", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--label", default=None)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("analyze", help="summarize campaign outputs and "
                                       "render histograms")
    p.add_argument("inputs", nargs="+", help="campaign JSONL files "
                   "(first one is the comparison reference)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SteadyStateError, MapBuildError, CalibrationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"bad data: {exc}", file=sys.stderr)
        return EXIT_BADDATA


if __name__ == "__main__":
    sys.exit(main())
