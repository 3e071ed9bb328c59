"""``debunkd`` command line."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import harness
from .approximator import load_mlp
from .env import write_rewards, write_traces
from .netgen import write_graph
from .propagation import new_state, run_until, seed_fake_spreaders, write_event_log
from .trainer import ABLATIONS, evaluate


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seeds", help="comma-separated seeds, e.g. 1,2,3")
    p.add_argument("--out", default="results", help="output directory")


def _load(args) -> dict:
    sets = list(args.set)
    if args.seeds:
        sets.append(f"seeds={args.seeds}")
    return harness.load_config(args.config, sets)


def cmd_generate_net(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graph = harness.build_graph(cfg)
    write_graph(graph, out / "graph.txt")
    print(f"wrote {out / 'graph.txt'}: n={graph.n} edges={graph.n_edges}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graph = harness.build_graph(cfg)
    params = harness.prop_params(cfg)
    with (out / "simulation.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "susceptible", "exposed", "infected", "recovered"])
        for seed in cfg["seeds"]:
            state = new_state(graph, seed, harness.xi_sampler(cfg))
            seed_fake_spreaders(state, cfg["initial_spreaders"])
            events = []
            run_until(state, cfg["sim_time"], params, log=events)
            write_event_log(events, out / f"events_seed{seed}.csv")
            w.writerow([seed, *state.counts().values()])
    print(f"wrote {out / 'simulation.csv'}")
    return 0


def cmd_train(args) -> int:
    cfg = _load(args)
    records = harness.run(cfg, args.out)
    for r in records:
        print(f"{r.policy} seed={r.seed} metric={r.metric:.6f}")
    mean, std = harness.summarize([r.metric for r in records])
    print(f"summary: mean={mean:.6f} std={std:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    theta = load_mlp(args.checkpoint)
    graph = harness.build_graph(cfg)
    if theta.dims[-1] != graph.n:
        print(f"checkpoint expects {theta.dims[-1]} users, graph has {graph.n}", file=sys.stderr)
        return 2
    use_aug = ABLATIONS.get(cfg["policy"], (True, True))[0]
    for seed in cfg["seeds"]:
        traces = evaluate(graph, harness.env_config(cfg), theta, args.episodes, seed, use_aug,
                          harness.prop_params(cfg), harness.xi_sampler(cfg), greedy=args.greedy)
        write_rewards([t.reward for t in traces], out / f"eval_rewards_seed{seed}.csv")
        write_traces(traces, out / f"eval_traces_seed{seed}.csv")
        mean = sum(t.reward for t in traces) / len(traces)
        print(f"seed={seed} mean_reward={mean:.6f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    policies = [p.strip() for p in args.policies.split(",")] if args.policies else None
    out = Path(args.out)
    rows = harness.sweep(cfg, args.param, values, policies, out / f"sweep_{args.param}.csv")
    failed = sum(1 for r in rows if r["error"])
    print(f"wrote {out / f'sweep_{args.param}.csv'}: {len(rows)} rows, {failed} failed")
    return 0


def cmd_plot_data(args) -> int:
    paths = harness.emit_plot_data(args.input, args.out)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="debunkd", description="Debunker selection experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-net", help="write a synthetic or loaded network")
    _common(p)
    p.set_defaults(func=cmd_generate_net)

    p = sub.add_parser("simulate", help="propagation only, no mitigation")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train (or play a heuristic) for each seed")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="roll out a frozen policy checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--greedy", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid over one parameter")
    _common(p)
    p.add_argument("--param", required=True, choices=harness.SWEEPABLE)
    p.add_argument("--values", required=True)
    p.add_argument("--policies")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot-data", help="per-series x/mean/std files from a sweep CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default="plots")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
