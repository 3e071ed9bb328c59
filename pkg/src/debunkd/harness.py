"""Experiment driver: flat key=value configs, seed runs, parameter sweeps, plot data."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import POLICIES, run_heuristic
from .env import MitigationConfig, write_rewards, write_traces
from .netgen import SocialGraph, ego_subgraph, generate_scale_free, load_edge_list
from .propagation import PropagationParams, empirical_intensity
from .trainer import ABLATIONS, TrainConfig, save_checkpoint, train

log = logging.getLogger(__name__)

DEFAULTS: dict[str, object] = {
    # network
    "n": 1250,
    "alpha": 0.05,
    "beta": 0.8,
    "gamma": 0.15,
    "net_seed": 1,
    "graph_file": "",
    "undirected": True,
    "ego_center": -1,
    "ego_radius": 2,
    # propagation
    "delta": 1.0,
    "omega": 1.0,
    "dt": 0.1,
    "intensity_file": "",
    "sim_time": 10.0,
    # campaign
    "initial_spreaders": 20,
    "t_start": 5.0,
    "stage_length": 1.0,
    "budget": 20.0,
    "t_tail": 5.0,
    "psi": 0.9,
    "reuse_debunkers": False,
    "sampled_reward": False,
    # learning
    "policy": "nagasil",
    "iterations": 1000,
    "expert_batch": 64,
    "bad_batch": 64,
    "disc_steps": 1,
    "policy_steps": 1,
    "neg_steps": 1,
    "gamma_r": 0.99,
    "lam": 0.01,
    "lam1": 0.1,
    "good_capacity": 20,
    "bad_fraction": 0.10,
    "bad_cap": 100,
    "hidden": (64, 64),
    "policy_lr": 1e-3,
    "disc_lr": 1e-3,
    "neg_lr": 1e-3,
    "baseline_rate": 0.1,
    "checkpoint_every": 0,
    # evaluation / output
    "metric_window": 100,
    "seeds": (1, 2, 3, 4, 5),
    "dump_traces": False,
}

SWEEPABLE = ("budget", "stage_length", "beta", "n", "policy")
_NOT_HASHED = ("seeds",)


class ConfigError(ValueError):
    pass


def _parse_value(key: str, raw, default):
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            if isinstance(raw, (tuple, list)):
                return tuple(int(v) for v in raw)
            return tuple(int(v) for v in str(raw).split(",") if v.strip())
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None


def make_config(overrides: dict | None = None) -> dict:
    """Defaults updated with ``overrides``; unknown keys and bad values raise ConfigError."""
    cfg = dict(DEFAULTS)
    for key, raw in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key}")
        cfg[key] = _parse_value(key, raw, DEFAULTS[key])
    if abs(cfg["alpha"] + cfg["beta"] + cfg["gamma"] - 1) > 1e-9:
        raise ConfigError("invalid value for alpha/beta/gamma: must sum to 1")
    if cfg["policy"] not in POLICIES:
        raise ConfigError(f"invalid value for policy: {cfg['policy']!r}")
    if not cfg["seeds"]:
        raise ConfigError("invalid value for seeds: empty")
    return cfg


def parse_config_text(text: str) -> dict:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def load_config(path=None, sets: list[str] | None = None) -> dict:
    pairs = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    for item in sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    return make_config(pairs)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_hash(cfg: dict) -> str:
    """Hash of the canonical sorted key=value text; key order does not matter."""
    canon = "\n".join(f"{k}={_fmt(cfg[k])}" for k in sorted(cfg) if k not in _NOT_HASHED)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def dump_config(cfg: dict, path) -> None:
    Path(path).write_text("".join(f"{k}={_fmt(cfg[k])}\n" for k in sorted(cfg)), encoding="utf-8")


# ---------------------------------------------------------------- builders

def build_graph(cfg: dict) -> SocialGraph:
    if cfg["graph_file"]:
        g = load_edge_list(cfg["graph_file"], undirected=cfg["undirected"])
        if cfg["ego_center"] >= 0:
            g = ego_subgraph(g, cfg["ego_center"], cfg["ego_radius"])
        return g
    return generate_scale_free(cfg["n"], cfg["alpha"], cfg["beta"], cfg["gamma"], cfg["net_seed"])


def env_config(cfg: dict) -> MitigationConfig:
    return MitigationConfig(
        budget=cfg["budget"], stage_length=cfg["stage_length"], t_start=cfg["t_start"],
        t_tail=cfg["t_tail"], psi=cfg["psi"], initial_spreaders=cfg["initial_spreaders"],
        reuse_debunkers=cfg["reuse_debunkers"], sampled_reward=cfg["sampled_reward"],
    )


def prop_params(cfg: dict) -> PropagationParams:
    return PropagationParams(delta=cfg["delta"], omega=cfg["omega"], dt=cfg["dt"])


def xi_sampler(cfg: dict):
    return empirical_intensity(cfg["intensity_file"]) if cfg["intensity_file"] else None


def train_config(cfg: dict, variant: str | None = None) -> TrainConfig:
    variant = variant or cfg["policy"]
    aug, neg = ABLATIONS[variant]
    return TrainConfig(
        iterations=cfg["iterations"], expert_batch=cfg["expert_batch"], bad_batch=cfg["bad_batch"],
        disc_steps=cfg["disc_steps"], policy_steps=cfg["policy_steps"], neg_steps=cfg["neg_steps"],
        gamma_r=cfg["gamma_r"], lam=cfg["lam"], lam1=cfg["lam1"], good_capacity=cfg["good_capacity"],
        bad_fraction=cfg["bad_fraction"], bad_cap=cfg["bad_cap"], hidden=tuple(cfg["hidden"]),
        policy_lr=cfg["policy_lr"], disc_lr=cfg["disc_lr"], neg_lr=cfg["neg_lr"],
        baseline_rate=cfg["baseline_rate"], use_augmented_state=aug, use_negative_samples=neg,
        checkpoint_every=cfg["checkpoint_every"],
    )


# ---------------------------------------------------------------- runs

@dataclass
class RunRecord:
    config_hash: str
    policy: str
    seed: int
    rewards: list[float]
    metric: float
    wall_seconds: float


def tail_metric(rewards, window: int = 100) -> float:
    """Mean reward of the final ``window`` episodes (all of them when window is 0)."""
    if not rewards:
        return float("nan")
    tail = rewards[-window:] if window > 0 else rewards
    return float(np.mean(tail))


def run_cell(cfg: dict, seed: int, out_dir=None) -> RunRecord:
    """One (config, seed) run, writing its own files under ``out_dir``."""
    start = time.perf_counter()
    graph = build_graph(cfg)
    policy = cfg["policy"]
    ec, params, sampler = env_config(cfg), prop_params(cfg), xi_sampler(cfg)
    ckpt_dir = Path(out_dir) / f"checkpoints_{policy}_seed{seed}" if out_dir else None
    if policy in ABLATIONS:
        traces = []
        ts, rewards = train(graph, ec, train_config(cfg), seed, params, sampler,
                            on_iteration=(lambda _ts, tr: traces.append(tr)) if cfg["dump_traces"] else None,
                            checkpoint_dir=ckpt_dir)
        if ckpt_dir:
            save_checkpoint(ts, ckpt_dir)
    else:
        traces = run_heuristic(graph, ec, policy, cfg["iterations"], seed, params, sampler)
        rewards = [tr.reward for tr in traces]
    wall = time.perf_counter() - start
    if out_dir:
        write_rewards(rewards, Path(out_dir) / f"rewards_{policy}_seed{seed}.csv")
        if cfg["dump_traces"]:
            write_traces(traces, Path(out_dir) / f"traces_{policy}_seed{seed}.csv")
    return RunRecord(config_hash(cfg), policy, seed, rewards, tail_metric(rewards, cfg["metric_window"]), wall)


def worker_slots() -> int:
    env = os.environ.get("DEBUNKD_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_cells(jobs):
    """Run ``(cfg, seed, out_dir)`` jobs, in worker processes when more than one slot is available."""
    slots = min(worker_slots(), len(jobs))
    if slots <= 1:
        return [_safe_cell(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=slots) as pool:
        return list(pool.map(_safe_cell, *zip(*jobs)))


def _safe_cell(cfg, seed, out_dir):
    try:
        return run_cell(cfg, seed, out_dir)
    except Exception as exc:  # recorded as an error row; the sweep continues
        log.exception("run failed: policy=%s seed=%s", cfg.get("policy"), seed)
        return exc


def summarize(metrics) -> tuple[float, float]:
    vals = [m for m in metrics if not math.isnan(m)]
    if not vals:
        return float("nan"), float("nan")
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return float(np.mean(vals)), std


def run(cfg: dict, out_dir=None) -> list[RunRecord]:
    """One record per seed; writes per-seed rewards CSVs and ``runs.csv`` with a summary row."""
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        dump_config(cfg, Path(out_dir) / "config.txt")
    results = _map_cells([(cfg, seed, out_dir) for seed in cfg["seeds"]])
    for res in results:
        if isinstance(res, Exception):
            raise res
    records = list(results)
    if out_dir:
        write_runs(records, Path(out_dir) / "runs.csv")
    return records


def write_runs(records: list[RunRecord], path) -> None:
    mean, std = summarize([r.metric for r in records])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["config_hash", "policy", "seed", "metric", "std", "wall_seconds"])
        for r in records:
            w.writerow([r.config_hash, r.policy, r.seed, f"{r.metric:.6f}", "", f"{r.wall_seconds:.3f}"])
        policy = records[0].policy if records else ""
        w.writerow([records[0].config_hash if records else "", policy, "summary", f"{mean:.6f}", f"{std:.6f}", ""])


# ---------------------------------------------------------------- sweeps

def apply_sweep_value(cfg: dict, parameter: str, value) -> dict:
    if parameter not in SWEEPABLE:
        raise ConfigError(f"unknown sweep parameter: {parameter}")
    new = dict(cfg)
    new[parameter] = _parse_value(parameter, value, DEFAULTS[parameter])
    if parameter == "beta":
        # keep gamma = 3 * alpha with alpha + beta + gamma = 1
        rest = 1.0 - new["beta"]
        new["alpha"], new["gamma"] = rest / 4.0, 3.0 * rest / 4.0
    return make_config({k: v for k, v in new.items()})


SWEEP_COLUMNS = ["policy", "parameter", "value", "seed", "metric", "error"]


def sweep(cfg: dict, parameter: str, values, policies=None, out_path=None) -> list[dict]:
    """Cross product of values x policies x seeds as tidy rows; failed cells become error rows."""
    if parameter not in SWEEPABLE:
        raise ConfigError(f"unknown sweep parameter: {parameter}")
    if parameter == "policy":
        policies = [None]
    policies = list(policies or [cfg["policy"]])
    cells, jobs = [], []
    for value in values:
        for policy in policies:
            base = dict(cfg) if policy is None else dict(cfg, policy=policy)
            cell_cfg = apply_sweep_value(base, parameter, value)
            for seed in cfg["seeds"]:
                cells.append((cell_cfg["policy"], value, seed))
                jobs.append((cell_cfg, seed, None))
    rows = []
    for (policy, value, seed), res in zip(cells, _map_cells(jobs)):
        if isinstance(res, Exception):
            rows.append({"policy": policy, "parameter": parameter, "value": str(value), "seed": seed,
                         "metric": "nan", "error": f"{type(res).__name__}: {res}".replace("\n", " ")})
        else:
            rows.append({"policy": policy, "parameter": parameter, "value": str(value), "seed": seed,
                         "metric": f"{res.metric:.6f}", "error": ""})
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        with Path(out_path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, SWEEP_COLUMNS)
            w.writeheader()
            w.writerows(rows)
    return rows


def emit_plot_data(csv_path, out_dir) -> list[Path]:
    """One ``<parameter>_<policy>.dat`` per series with columns x, mean, std (n-1 denominator)."""
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(csv_path)
    groups: dict[tuple[str, str], dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    with csv_path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row.get("error"):
                continue
            metric = float(row["metric"])
            if math.isnan(metric):
                continue
            groups[(row["parameter"], row["policy"])][row["value"]].append(metric)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (parameter, policy), series in sorted(groups.items()):
        path = out_dir / f"{parameter}_{policy}.dat"

        def order(x):
            try:
                return (0, float(x), x)
            except ValueError:
                return (1, 0.0, x)

        with path.open("w", encoding="utf-8") as fh:
            fh.write("# x mean std\n")
            for x in sorted(series, key=order):
                mean, std = summarize(series[x])
                fh.write(f"{x} {mean:.6f} {std:.6f}\n")
        written.append(path)
    return written
