"""Command-line interface.

Subcommands cover the main numerical experiments: the two stabilization
curves, nested-feedback heralding, the post-selection threshold sweep, the
hardware-prospect scenarios and the measurement calibration surface.
Results are written as UTF-8 CSV files plus a manifest echoing the fully
resolved configuration, and are byte-identical for a fixed seed.

Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import cqed, dd, mb, nfp, outcomes, prospects
from .cqed import SystemParams
from .lindblad import IntegratorConfig


class ConfigError(ValueError):
    pass


# YAML keys carry their units as suffixes; frequencies are linear (MHz) and
# are converted to angular rad/us here.
_SYSTEM_KEYS = {
    "chi_a_mhz": ("chi_a", 2.0 * math.pi),
    "chi_b_mhz": ("chi_b", 2.0 * math.pi),
    "kappa_mhz": ("kappa", 2.0 * math.pi),
    "t1_a_us": ("t1_a", 1.0),
    "t1_b_us": ("t1_b", 1.0),
    "t2_a_us": ("t2_a", 1.0),
    "t2_b_us": ("t2_b", 1.0),
    "thermal_pop_a": ("thermal_pop_a", 1.0),
    "thermal_pop_b": ("thermal_pop_b", 1.0),
    "eta": ("eta", 1.0),
    "fock_dim": ("fock_dim", 1),
}

_MB_KEYS = {
    "measurement_us": ("duration", 1.0),
    "n_bar_meas": ("n_bar_meas", 1.0),
    "eps_even_given_odd": ("eps_eo", 1.0),
    "eps_odd_given_even": ("eps_oe", 1.0),
}

_TIMING_KEYS = {
    "pulse_decay_us": ("pulse_decay", 1.0),
    "measurement_us": ("measurement", 1.0),
    "latency_us": ("latency", 1.0),
}

_DD_KEYS = {
    "n_bar": ("n_bar", 1.0),
    "omega_0_mhz": ("omega_0", 2.0 * math.pi),
    "omega_n_mhz": ("omega_n", 2.0 * math.pi),
    "phase_pair_0_rad": ("phase_pair_0", 1.0),
    "phase_pair_n_rad": ("phase_pair_n", 1.0),
    "stabilize_us": ("stabilize_duration", 1.0),
    "wait_us": ("wait_duration", 1.0),
}


def _apply_section(section: dict, mapping: dict, label: str) -> dict:
    out = {}
    for key, value in section.items():
        if key not in mapping:
            raise ConfigError(f"unknown key {label}.{key!r}")
        field, scale = mapping[key]
        out[field] = value * scale if scale != 1 else value
    return out


def load_config(path: str | None):
    """(SystemParams, ParityModel, StepTiming, DDDriveConfig) from YAML."""
    raw = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    for section in raw:
        if section not in ("system", "mb", "timing", "dd"):
            raise ConfigError(f"unknown config section {section!r}")
    try:
        params = SystemParams(**_apply_section(raw.get("system", {}), _SYSTEM_KEYS, "system"))
        parity = mb.ParityModel(**_apply_section(raw.get("mb", {}), _MB_KEYS, "mb"))
        timing_kwargs = _apply_section(raw.get("timing", {}), _TIMING_KEYS, "timing")
        if "measurement" not in timing_kwargs:
            timing_kwargs["measurement"] = parity.duration
        timing = mb.StepTiming(**timing_kwargs)
        dd_config = dd.DDDriveConfig(**_apply_section(raw.get("dd", {}), _DD_KEYS, "dd"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if abs(timing.measurement - parity.duration) > 1e-12:
        raise ConfigError("timing.measurement_us must equal mb.measurement_us")
    return params, parity, timing, dd_config


def _fmt(x) -> str:
    if isinstance(x, (bool, int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_manifest(out_dir: Path, command: str, args, params: SystemParams,
                   extra: dict, outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "seed": args.seed,
        "dt_ns": args.dt_ns,
        "system": {k: (v if isinstance(v, int) else float(v))
                   for k, v in params.to_dict().items()},
        "settings": extra,
        "outputs": sorted(outputs),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _maybe_plot(enabled: bool, out_path: Path, x, ys: dict, xlabel: str, ylabel: str):
    if not enabled:
        return None
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots()
    for label, y in ys.items():
        ax.plot(x, y, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(ys) > 1:
        ax.legend()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path.name


def cmd_dd_curve(args, params, parity, timing, dd_config, cfg):
    grid = np.linspace(0.0, dd_config.stabilize_duration,
                       args.points) if args.points else None
    result = dd.simulate_dd(params, dd_config, grid, cfg)
    out = Path(args.out)
    rows = zip(result.times, result.fidelities, result.fidelities_after_wait)
    write_csv(out / "dd_curve.csv",
              ["t_us", "fidelity", "fidelity_after_wait"], rows)
    outputs = ["dd_curve.csv"]
    plot = _maybe_plot(args.plot, out / "dd_curve.png", result.times,
                       {"drives on": result.fidelities,
                        "after wait": result.fidelities_after_wait},
                       "stabilization time (us)", "singlet fidelity")
    if plot:
        outputs.append(plot)
    extra = {"dd": dataclasses.asdict(dd_config),
             "fit": {"f_ss": result.f_ss, "tau_us": result.tau,
                     "ok": result.fit_ok}}
    write_manifest(out, "dd-curve", args, params, extra, outputs)
    print(f"dd-curve: f_ss={result.f_ss:.4f} tau={result.tau:.4f} us")
    return 0


def cmd_mb_curve(args, params, parity, timing, dd_config, cfg):
    curve = mb.simulate_mb_curve(params, args.steps, parity, timing, cfg)
    out = Path(args.out)
    write_csv(out / "mb_curve.csv", ["step", "t_us", "fidelity"],
              zip(curve.steps, curve.times, curve.fidelities))
    write_csv(out / "mb_transition.csv",
              ["from_phi_minus", "from_phi_plus", "from_gg", "from_ee"],
              curve.transition_matrix)
    outputs = ["mb_curve.csv", "mb_transition.csv"]
    plot = _maybe_plot(args.plot, out / "mb_curve.png", curve.times,
                       {"fidelity": curve.fidelities},
                       "time (us)", "singlet fidelity")
    if plot:
        outputs.append(plot)
    extra = {"parity": dataclasses.asdict(parity),
             "timing": dataclasses.asdict(timing),
             "steady": [float(v) for v in curve.steady],
             "fit": {"f_ss": curve.f_ss, "tau_us": curve.tau, "ok": curve.fit_ok}}
    write_manifest(out, "mb-curve", args, params, extra, outputs)
    print(f"mb-curve: steady fidelity={curve.steady[0]:.4f} tau={curve.tau:.4f} us")
    return 0


def _transition_for_scheme(scheme, params, parity, timing, dd_config, cfg):
    if scheme == "mb":
        return mb.build_transition_matrix(params, parity, timing, cfg)
    return dd.dd_transition_matrix(params, dd_config, cfg=cfg)


def cmd_nfp(args, params, parity, timing, dd_config, cfg):
    transition = _transition_for_scheme(args.scheme, params, parity, timing,
                                        dd_config, cfg)
    herald = nfp.HERALD_MB if args.scheme == "mb" else nfp.HERALD_DD
    result = nfp.nfp_recursion(transition, herald, k_max=args.attempts)
    out = Path(args.out)
    name = f"nfp_{args.scheme}.csv"
    write_csv(out / name,
              ["attempt", "differential_success", "cumulative_success", "fidelity"],
              zip(result.attempts, result.differential_success,
                  result.cumulative_success, result.fidelities))
    outputs = [name]
    if args.mc_trajectories:
        rng = np.random.default_rng(args.seed)
        records = nfp.sample_trajectories(transition, herald,
                                          args.mc_trajectories, rng,
                                          k_max=args.attempts)
        ok = [r for r in records if r.heralded]
        mc_rate = len(ok) / len(records)
        mc_fid = (sum(1 for r in ok if r.state_index == 0) / len(ok)
                  if ok else math.nan)
    else:
        mc_rate = mc_fid = None
    plot = _maybe_plot(args.plot, out / f"nfp_{args.scheme}.png", result.attempts,
                       {"cumulative success": result.cumulative_success,
                        "heralded fidelity": result.fidelities},
                       "attempt", "probability")
    if plot:
        outputs.append(plot)
    extra = {"scheme": args.scheme,
             "herald": [float(v) for v in herald],
             "cumulative_success": float(result.cumulative_success[-1]),
             "average_fidelity": result.average_fidelity,
             "mc": {"trajectories": args.mc_trajectories,
                    "success_rate": mc_rate, "fidelity": mc_fid}}
    write_manifest(out, "nfp", args, params, extra, outputs)
    print(f"nfp[{args.scheme}]: cumulative={result.cumulative_success[-1]:.4f} "
          f"avg fidelity={result.average_fidelity:.4f}")
    return 0


def cmd_threshold_sweep(args, params, parity, timing, dd_config, cfg):
    transition = _transition_for_scheme(args.scheme, params, parity, timing,
                                        dd_config, cfg)
    populations = mb.steady_state(transition)
    dist, _ = outcomes.calibrate_distribution(parity)
    if args.scheme == "dd":
        dist, _ = outcomes.fit_separation_and_thresholds(dist.sigma, nfp.HERALD_DD)
    t_values = np.linspace(args.t_min, args.t_max, args.points or 41)
    table = outcomes.sweep_thresholds(populations, dist, t_values)
    out = Path(args.out)
    name = f"threshold_sweep_{args.scheme}.csv"
    write_csv(out / name, ["threshold", "success_prob", "fidelity"],
              np.column_stack([t_values, table[:, 0], table[:, 1]]))
    outputs = [name]
    plot = _maybe_plot(args.plot, out / f"threshold_sweep_{args.scheme}.png",
                       table[:, 0], {"fidelity": table[:, 1]},
                       "success probability", "conditioned fidelity")
    if plot:
        outputs.append(plot)
    extra = {"scheme": args.scheme,
             "populations": [float(v) for v in populations],
             "sigma": dist.sigma,
             "separation_scale": dist.separation_scale}
    write_manifest(out, "threshold-sweep", args, params, extra, outputs)
    print(f"threshold-sweep[{args.scheme}]: {len(t_values)} points")
    return 0


def cmd_prospects(args, params, parity, timing, dd_config, cfg):
    rows = prospects.run_prospects(cfg=cfg)
    out = Path(args.out)
    write_csv(out / "prospects.csv",
              ["scenario", "mb_fidelity", "dd_fidelity", "mb_tau_us", "dd_tau_us"],
              [(r.scenario, r.mb_fidelity, r.dd_fidelity, r.mb_tau, r.dd_tau)
               for r in rows])
    write_manifest(out, "prospects", args, params, {}, ["prospects.csv"])
    for r in rows:
        print(f"prospects[{r.scenario}]: MB={r.mb_fidelity:.4f} DD={r.dd_fidelity:.4f}")
    return 0


def _calibrate_row(job):
    params_dict, duration, n_bars, parity_kwargs, dt = job
    params = SystemParams.from_dict(params_dict)
    parity = mb.ParityModel(**parity_kwargs)
    cfg = IntegratorConfig(dt=dt)
    return mb.calibrate_measurement(params, [duration], n_bars, parity, cfg)[0]


def cmd_calibrate(args, params, parity, timing, dd_config, cfg):
    durations = np.linspace(args.d_min, args.d_max, args.points or 7)
    n_bars = np.asarray([float(v) for v in args.n_bars.split(",")])
    jobs = [(params.to_dict(), float(d), tuple(n_bars),
             dataclasses.asdict(parity), cfg.dt) for d in durations]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_calibrate_row, jobs))
    else:
        rows = [_calibrate_row(j) for j in jobs]
    surface = np.vstack(rows)
    out = Path(args.out)
    header = ["duration_us"] + [f"n_bar_{_fmt(nb)}" for nb in n_bars]
    write_csv(out / "calibration.csv", header,
              [(d, *row) for d, row in zip(durations, surface)])
    i, k = np.unravel_index(int(np.argmax(surface)), surface.shape)
    outputs = ["calibration.csv"]
    plot = _maybe_plot(args.plot, out / "calibration.png", durations,
                       {f"n_bar={nb:g}": surface[:, j] for j, nb in enumerate(n_bars)},
                       "measurement duration (us)", "heralded Bell fidelity")
    if plot:
        outputs.append(plot)
    extra = {"max_fidelity": float(surface[i, k]),
             "best_duration_us": float(durations[i]),
             "best_n_bar": float(n_bars[k])}
    write_manifest(out, "calibrate", args, params, extra, outputs)
    print(f"calibrate: max fidelity={surface[i, k]:.4f} at "
          f"d={durations[i]:.3f} us, n_bar={n_bars[k]:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellstab",
        description="Two-qubit Bell-state stabilization simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML configuration file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--fock-dim", type=int, default=None,
                        help="override the cavity truncation")
    common.add_argument("--dt-ns", type=float, default=1.0,
                        help="integrator step in nanoseconds")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--plot", action="store_true",
                        help="also write PNG plots (requires matplotlib)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dd-curve", parents=[common],
                       help="driven-dissipative fidelity versus time")
    p.add_argument("--points", type=int, default=17)
    p.set_defaults(func=cmd_dd_curve)

    p = sub.add_parser("mb-curve", parents=[common],
                       help="measurement-based fidelity versus step")
    p.add_argument("--steps", type=int, default=12)
    p.set_defaults(func=cmd_mb_curve)

    p = sub.add_parser("nfp", parents=[common],
                       help="nested feedback heralding recursion")
    p.add_argument("--scheme", choices=("mb", "dd"), default="mb")
    p.add_argument("--attempts", type=int, default=11)
    p.add_argument("--mc-trajectories", type=int, default=0)
    p.set_defaults(func=cmd_nfp)

    p = sub.add_parser("threshold-sweep", parents=[common],
                       help="post-selection threshold trade-off")
    p.add_argument("--scheme", choices=("mb", "dd"), default="mb")
    p.add_argument("--t-min", type=float, default=-0.5)
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=41)
    p.set_defaults(func=cmd_threshold_sweep)

    p = sub.add_parser("prospects", parents=[common],
                       help="projected fidelities for improved hardware")
    p.set_defaults(func=cmd_prospects)

    p = sub.add_parser("calibrate", parents=[common],
                       help="measurement calibration fidelity surface")
    p.add_argument("--d-min", type=float, default=0.11)
    p.add_argument("--d-max", type=float, default=1.1)
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--n-bars", default="3.5,4.5,5.5")
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params, parity, timing, dd_config = load_config(args.config)
        if args.fock_dim is not None:
            params = dataclasses.replace(params, fock_dim=args.fock_dim)
        if args.dt_ns <= 0:
            raise ConfigError("--dt-ns must be positive")
        cfg = IntegratorConfig(dt=args.dt_ns * 1e-3)
        Path(args.out).mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, params, parity, timing, dd_config, cfg)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
