"""Command-line entry point: ``vanet-losim run`` and ``vanet-losim figures``.

Exit status: 0 success, 2 configuration error, 3 collision fault, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import outputs as io
from .channel import curve_sweep, load_channel_config, max_spread
from .figures import write_figures
from .mobility import CollisionError
from .scenario import ConfigError, ScenarioConfig, flow_rates, load_config, parse_override
from .simulation import simulate

log = logging.getLogger("vanet_losim")

EXIT_OK, EXIT_CONFIG, EXIT_COLLISION, EXIT_IO = 0, 2, 3, 4


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run(scenario_path, models_path, out_dir, overrides=(), seed=None) -> dict:
    """Simulate, write all tables and the manifest; returns the manifest."""
    items = list(overrides)
    if seed is not None:
        items.append(f"rng_seed={seed}")
    cfg: ScenarioConfig = load_config(scenario_path, items)
    channel = load_channel_config(models_path) if models_path else None

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    t0 = time.perf_counter()
    with io.RunRecorder(out, cfg.tx_id, cfg.write_trace) as rec:
        rec.set_tau(cfg.tau)
        result = simulate(cfg, recorder=rec)
    files = [p.name for p in io.write_statistics(out, result)]
    files += [io.LINK_STATES, io.LANE_CHANGES]
    if cfg.write_trace:
        files.append(io.TRACE)

    channel_info = None
    if channel is not None:
        table = curve_sweep(
            channel.models, result.histogram.profile(), channel.budget, channel.grid(), channel.joints
        )
        files.append(io.write_channel(out, table).name)
        spread = max_spread(table, channel.spread_d_max)
        channel_info = {
            "models": table.names,
            "pw_tx_dbm": channel.budget.pw_tx,
            "csth_dbm": channel.budget.csth,
            "max_prp_spread_below_d": {"d_m": channel.spread_d_max, "spread": spread},
        }

    manifest = {
        "software": {"name": "vanet_losim", "version": __version__},
        "config_sha256": cfg.digest(),
        "seed": cfg.rng_seed,
        "scenario": cfg.to_flat(),
        "flow_rates_veh_per_h": flow_rates(cfg),
        "start_tick_s": cfg.warmup_steps,
        "end_tick_s": cfg.sim_steps,
        "metrics": io.headline_metrics(result),
        "channel": channel_info,
        "files": [],
        "started_utc": started,
        "finished_utc": None,
        "runtime_s": None,
    }
    io.write_manifest(out, manifest)
    files += [p.name for p in write_figures(out)]
    manifest["files"] = io.file_inventory(out, sorted(set(files)))
    manifest["finished_utc"] = _now()
    manifest["runtime_s"] = round(time.perf_counter() - t0, 3)
    io.write_manifest(out, manifest)
    return manifest


def parse_seed_range(text: str) -> list[int]:
    """``a..b`` inclusive, or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError as exc:
        raise ConfigError(f"--seeds expects a..b, got {text!r}") from exc
    if hi < lo:
        raise ConfigError(f"--seeds range is empty: {text!r}")
    return list(range(lo, hi + 1))


def fan_out_workers(n_jobs: int) -> int:
    cap = os.environ.get("VANET_LOSIM_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError as exc:
            raise ConfigError(f"VANET_LOSIM_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(limit, n_jobs))


def _run_seed(args):
    scenario, models, out, overrides, seed = args
    return run(scenario, models, out, overrides, seed)["metrics"]


def _split_positionals(items: list[str]):
    paths, overrides = [], []
    for item in items:
        (overrides if "=" in item else paths).append(item)
    if len(paths) > 3:
        raise ConfigError(f"too many positional paths: {paths}")
    paths += [None] * (3 - len(paths))
    return paths, overrides


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vanet-losim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write all outputs")
    r.add_argument("args", nargs="*", help="[scenario.cfg [models.cfg [out_dir]]] [key=value ...]")
    r.add_argument("--scenario", help="scenario config (JSON); built-in defaults if omitted")
    r.add_argument("--models", help="channel model config (JSON)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--seed", type=int, help="overrides rng_seed")
    r.add_argument("--seeds", help="seed range a..b, one output subdirectory per seed")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--figures-only", action="store_true", help="rebuild figure tables only")

    f = sub.add_parser("figures", help="rebuild figure tables from a run directory")
    f.add_argument("out", help="run output directory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # argparse stops filling nargs="*" after the first option; keep later items
    bad = [e for e in extra if e.startswith("-") or args.command != "run"]
    if bad:
        parser.error(f"unrecognized arguments: {' '.join(bad)}")
    if extra:
        args.args = list(args.args) + extra
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "figures":
            for path in write_figures(args.out):
                print(path)
            return EXIT_OK

        (s_pos, m_pos, o_pos), pos_overrides = _split_positionals(args.args)
        scenario = args.scenario or s_pos
        models = args.models or m_pos
        out = args.out or o_pos
        if out is None:
            raise ConfigError("an output directory is required (positional or --out)")
        overrides = pos_overrides + args.set
        for item in overrides:
            parse_override(item)

        if args.figures_only:
            for path in write_figures(out):
                print(path)
            return EXIT_OK

        if args.seeds:
            seeds = parse_seed_range(args.seeds)
            jobs = [(scenario, models, Path(out) / f"seed_{s}", overrides, s) for s in seeds]
            workers = fan_out_workers(len(jobs))
            if workers == 1:
                results = [_run_seed(j) for j in jobs]
            else:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_run_seed, jobs))
            for s, m in zip(seeds, results):
                print(f"seed {s}: mu_P={m['mu_P_per_m']:.6g} mu_p={m['mu_p_per_m']:.6g}")
            return EXIT_OK

        manifest = run(scenario, models, out, overrides, args.seed)
        m = manifest["metrics"]
        print(
            f"mu_P={m['mu_P_per_m']:.6g} 1/m  mu_p={m['mu_p_per_m']:.6g} 1/m  "
            f"mean in range={m['mean_in_range']:.3f}  -> {out}"
        )
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CollisionError as exc:
        print(f"collision fault: {exc}", file=sys.stderr)
        return EXIT_COLLISION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
