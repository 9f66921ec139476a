"""Command line front-end: ``gen`` (stats caches), ``run`` (episodes), ``eval`` (metrics).

All outputs are UTF-8 CSV with deterministic formatting, so identical
(config, seed, model files) produce byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import driver, estimation, gnn
from .driver import _log_utility
from .config import load_scenario

_FMT = "{:.17g}"


def _write_trace(result: driver.EpisodeResult, config, periods: int, path: str) -> None:
    """Long-format per-slot trace; '#' lines carry run-level scalars."""
    T, K = result.rates_trace.shape
    upsilon = T // periods
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# pilot_overhead = {result.pilot_overhead}\n")
        fh.write(f"# log_utility = {_FMT.format(result.log_utility)}\n")
        fh.write(f"# K = {K}\n")
        fh.write("period,slot,user,scheduled,rate\n")
        for t in range(T):
            for k in range(K):
                fh.write(f"{t // upsilon},{t % upsilon},{k},"
                         f"{int(result.schedule_trace[t, k])},"
                         f"{_FMT.format(result.rates_trace[t, k])}\n")


def _read_trace(path: str) -> driver.EpisodeResult:
    overhead = 0
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if "pilot_overhead" in line:
                    overhead = int(line.split("=", 1)[1])
                continue
            if not line or line.startswith("period,"):
                continue
            period, slot, user, scheduled, rate = line.split(",")
            rows.append((int(period), int(slot), int(user), int(scheduled), float(rate)))
    if not rows:
        raise ValueError(f"no trace rows in {path}")
    K = 1 + max(r[2] for r in rows)
    slots = sorted({(r[0], r[1]) for r in rows})
    index = {key: i for i, key in enumerate(slots)}
    rates = np.zeros((len(slots), K))
    scheds = np.zeros((len(slots), K), dtype=np.int8)
    for period, slot, user, scheduled, rate in rows:
        t = index[(period, slot)]
        rates[t, user] = rate
        scheds[t, user] = scheduled
    per_user = rates.mean(axis=0)
    return driver.EpisodeResult(
        per_user_avg_rates=per_user,
        log_utility=_log_utility(per_user),
        sum_rate=float(per_user.sum()),
        scheduling_fractions=scheds.mean(axis=0),
        pilot_overhead=overhead,
        rates_trace=rates,
        schedule_trace=scheds,
    )


def _cmd_gen(args) -> int:
    scenario = load_scenario(args.config)
    cfg, opt = scenario.system, scenario.optim
    os.makedirs(args.out_dir, exist_ok=True)
    for target in args.targets.split(","):
        target = target.strip()
        stats = estimation.calibrate_stats(cfg, target, min_factor=args.ensemble_factor)
        key = estimation.stats_cache_key(cfg, target, stats.ensemble_size)
        path = os.path.join(args.out_dir, f"stats_{target}_{key}.npz")
        estimation.save_stats(stats, path)
        print(f"{target}: {stats.ensemble_size} samples -> {path}")
    if args.dump_pilots:
        from .channel import derive_rng, generate_channels
        from .pilots import pilot_block_to_csv, transmit_pilot_phase
        real = generate_channels(cfg, derive_rng(cfg.seed, 0xD0))
        block = transmit_pilot_phase(real, cfg, cfg.D_theta,
                                     derive_rng(cfg.seed, 0xD1))
        pilot_block_to_csv(block, args.dump_pilots)
        print(f"pilot dump -> {args.dump_pilots}")
    return 0


def _load_stats_dir(cfg, out_dir):
    """Pick up cached stats whose key matches the scenario, if present."""
    stats = {}
    if not out_dir or not os.path.isdir(out_dir):
        return stats
    for target in ("high_dim", "combined"):
        for name in sorted(os.listdir(out_dir)):
            if name.startswith(f"stats_{target}_") and name.endswith(".npz"):
                loaded = estimation.load_stats(os.path.join(out_dir, name))
                key = estimation.stats_cache_key(cfg, target, loaded.ensemble_size)
                if name == f"stats_{target}_{key}.npz":
                    stats[target] = loaded
    return stats


def _cmd_run(args) -> int:
    scenario = load_scenario(args.config)
    cfg, opt = scenario.system, scenario.optim
    if args.seed is not None:
        cfg.seed = args.seed
    stats = _load_stats_dir(cfg, args.stats_dir)

    if args.scheduler == "gnn3stage":
        if not args.model_sched or not args.model_ris:
            raise ValueError("gnn3stage needs --model-sched and --model-ris")
        sched_model = gnn.load_model(args.model_sched)
        ris_model = gnn.load_model(args.model_ris)
        result = driver.run_three_stage_episode(cfg, sched_model, ris_model,
                                                mode=args.mode, periods=args.periods,
                                                params=opt, stats=stats)
    else:
        result = driver.run_baseline_episode(cfg, scheduler=args.scheduler, csi=args.csi,
                                             periods=args.periods, params=opt,
                                             stats=stats)

    if args.out:
        _write_trace(result, cfg, args.periods, args.out)
    print(f"sum_rate = {_FMT.format(result.sum_rate)}")
    print(f"log_utility = {_FMT.format(result.log_utility)}")
    print(f"pilot_overhead = {result.pilot_overhead}")
    return 0


def _cmd_eval(args) -> int:
    results = [_read_trace(path) for path in args.traces]
    agg, cdf = driver.compute_metrics(results)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("rate,cdf\n")
        for rate, frac in cdf:
            fh.write(f"{_FMT.format(rate)},{_FMT.format(frac)}\n")
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# sum_rate = {_FMT.format(agg.sum_rate)}\n")
            fh.write(f"# log_utility = {_FMT.format(agg.log_utility)}\n")
            fh.write(f"# pilot_overhead = {agg.pilot_overhead}\n")
            fh.write("user,avg_rate,sched_fraction\n")
            for k in range(agg.per_user_avg_rates.size):
                fh.write(f"{k},{_FMT.format(agg.per_user_avg_rates[k])},"
                         f"{_FMT.format(agg.scheduling_fractions[k])}\n")
    print(f"sum_rate = {_FMT.format(agg.sum_rate)}")
    print(f"log_utility = {_FMT.format(agg.log_utility)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risched",
                                     description="RIS-assisted downlink scheduling simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="build LMMSE calibration caches")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out-dir", required=True)
    p_gen.add_argument("--targets", default="high_dim,combined")
    p_gen.add_argument("--ensemble-factor", type=int, default=10)
    p_gen.add_argument("--dump-pilots", help="also write one period's decorrelated "
                                             "pilot block as CSV")
    p_gen.set_defaults(func=_cmd_gen)

    p_run = sub.add_parser("run", help="run one episode")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--scheduler", default="gnn3stage", choices=driver.SCHEDULERS)
    p_run.add_argument("--csi", default="perfect", choices=driver.CSI_MODES)
    p_run.add_argument("--mode", default="reuse_pilots", choices=driver.PILOT_MODES)
    p_run.add_argument("--model-sched")
    p_run.add_argument("--model-ris")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--periods", type=int, default=1)
    p_run.add_argument("--stats-dir")
    p_run.add_argument("--out")
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("eval", help="metrics and CDF table from traces")
    p_eval.add_argument("--traces", nargs="+", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--summary")
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
