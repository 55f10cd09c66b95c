"""Scenario expansion, replicate seeding, log files and summaries.

Layout of an experiment directory::

    <out>/summary.json
    <out>/<config-name>/config.json
    <out>/<config-name>/events_<i>.csv
    <out>/<config-name>/timeseries_<i>.csv

Every CSV starts with a ``# fingerprint=... seed=... label=...`` comment
line followed by the header row.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import metrics
from .config import AGENT_DENSITY, ConfigError, ExperimentConfig, from_dict, to_dict
from .forest import PolicyKind
from .metrics import EVENT_FIELDS, TIMESERIES_FIELDS, RunRecord
from .sim import run_replicate
from .world import GaussianDensity

log = logging.getLogger(__name__)

SCENARIOS = ("compare", "scale", "ablation", "delta-sweep", "custom")
SCALE_SIZES = (25, 100)
DELTA_RANGE = tuple(range(3, 11))


class ExperimentError(RuntimeError):
    """Some replicates failed; the summary was not written."""

    def __init__(self, message: str, completed: dict):
        super().__init__(message)
        self.completed = completed


def replicate_seed(master: int, index: int) -> int:
    """Seed of replicate ``index``.

    The master seed and the replicate counter are mixed by numpy's
    SeedSequence hash (``spawn_key=(index,)``), so replicate ``i`` gets the
    same seed however many replicates are requested.
    """
    ss = np.random.SeedSequence(int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def scale_scenario(base: ExperimentConfig, n_agents: int) -> ExperimentConfig:
    """Resize ``base`` to ``n_agents`` at constant agent density.

    The side grows with sqrt(n), the event mean moves to the centre, the
    covariance grows with the side and the event rate with the area.
    """
    if n_agents <= 0:
        raise ConfigError("n_agents must be positive")
    if n_agents == base.n_agents:
        return base
    w = base.world
    side = math.sqrt(n_agents / AGENT_DENSITY)
    k = side / math.sqrt(w.area)
    cov = tuple(c * k for c in w.density.cov)
    world = dataclasses.replace(
        w, width=side, height=side,
        density=GaussianDensity((side / 2, side / 2), cov),
        event_rate=w.event_rate * k * k,
    )
    return dataclasses.replace(base, n_agents=n_agents, world=world)


def _with_policy(base: ExperimentConfig, **changes) -> ExperimentConfig:
    return dataclasses.replace(base, policy=dataclasses.replace(base.policy, **changes))


def expand(scenario: str, base: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """The named configurations a scenario runs, in a fixed order."""
    dec = _with_policy(base, kind=PolicyKind.DECENTRALISED)
    hier = _with_policy(base, kind=PolicyKind.HIERARCHICAL)
    hyb = _with_policy(base, kind=PolicyKind.HYBRID)
    if scenario == "compare":
        out = [("decentralised", dec), ("hierarchical", hier), ("hybrid", hyb)]
    elif scenario == "scale":
        out = [(f"hybrid-n{n}", scale_scenario(hyb, n)) for n in SCALE_SIZES]
    elif scenario == "ablation":
        out = [
            ("hybrid", hyb),
            ("hybrid-no-ar", _with_policy(hyb, active_recruitment_enabled=False)),
            ("hybrid-no-dissolution", _with_policy(hyb, dissolution_enabled=False)),
        ]
    elif scenario == "delta-sweep":
        out = [("decentralised", dec), ("hierarchical", hier)]
        out += [(f"hybrid-d{d}", _with_policy(hyb, delta=d)) for d in DELTA_RANGE]
    elif scenario == "custom":
        out = [(base.policy.label, base)]
    else:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    for _, cfg in out:
        cfg.validate()
    return out


# -- log files ---------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _header(rec: RunRecord) -> str:
    return f"# fingerprint={rec.fingerprint} seed={rec.seed} label={rec.label}\n"


def write_events(path, rec: RunRecord) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header(rec))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_FIELDS)
        for row in rec.events:
            w.writerow([_fmt(v) for v in row])


def write_timeseries(path, rec: RunRecord) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header(rec))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMESERIES_FIELDS)
        for row in rec.timeseries:
            # op_msgs, intra_msgs, in_trees and trees are integral
            w.writerow([_fmt(int(v)) if i in (1, 2, 3, 4) else _fmt(float(v))
                        for i, v in enumerate(row)])


def _read_header(fh) -> dict:
    first = fh.readline()
    if not first.startswith("#"):
        raise ValueError(f"{fh.name}: missing fingerprint line")
    return dict(kv.split("=", 1) for kv in first[1:].split())


def read_run(events_path, timeseries_path) -> RunRecord:
    """Load one replicate's logs back into a RunRecord."""
    with open(events_path) as fh:
        meta = _read_header(fh)
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != EVENT_FIELDS:
        raise ValueError(f"{events_path}: unexpected header {rows[0]}")

    def num(s, cast=float):
        return None if s == "" else cast(s)

    events = [(int(r[0]), float(r[1]), float(r[2]), float(r[3]),
               num(r[4]), num(r[5]), num(r[6])) for r in rows[1:]]
    with open(timeseries_path) as fh:
        meta_ts = _read_header(fh)
        header = fh.readline().strip().split(",")
        if tuple(header) != TIMESERIES_FIELDS:
            raise ValueError(f"{timeseries_path}: unexpected header {header}")
        ts = np.loadtxt(fh, delimiter=",", ndmin=2)
    if meta_ts.get("fingerprint") != meta.get("fingerprint"):
        raise ValueError(f"{events_path} and {timeseries_path} come from different configurations")
    if ts.size == 0:
        ts = np.zeros((0, len(TIMESERIES_FIELDS)))
    return RunRecord(events, ts, meta["fingerprint"], int(meta["seed"]), meta.get("label", ""))


# -- summaries ---------------------------------------------------------------------

def summarise(records: Sequence[RunRecord], dt: float = 1.0, window: int = 500) -> dict:
    """Cross-replicate statistics of one configuration."""
    fps = {r.fingerprint for r in records}
    if len(fps) > 1:
        raise ValueError(f"refusing to summarise runs from different configurations: {sorted(fps)}")
    wait = metrics.waiting_time_summary(records)
    msgs = metrics.message_rates(records, dt)
    out = {
        "fingerprint": next(iter(fps)),
        "replicates": len(records),
        "seeds": [r.seed for r in records],
        "waiting_median": wait["median"],
        "waiting_iqr": wait["iqr"],
        "waiting_replicate_means": wait["replicate_means"],
        "waiting_excluded": wait["excluded"],
        "operator_msgs_per_s": msgs["operator_mean"],
        "operator_msgs_std": msgs["operator_std"],
        "intra_msgs_per_s": msgs["intra_mean"],
        "intra_msgs_std": msgs["intra_std"],
        "message_points": msgs["points"],
        "events_spawned": int(sum(len(r.events) for r in records)),
        "events_censored": int(sum(r.censored() for r in records)),
    }
    lengths = {len(r.timeseries) for r in records}
    if len(lengths) == 1 and lengths.pop() > 0:
        in_trees = np.mean([r.column("in_trees") for r in records], axis=0)
        cov = np.mean([r.column("coverage") for r in records], axis=0)
        plateau = metrics.plateau_stats(in_trees, window=window)
        tail = slice(len(cov) - len(cov) // 3, None)
        out.update({
            "in_trees_plateau": plateau["level"],
            "in_trees_max_rolling_std": plateau["max_rolling_std"],
            "in_trees_relative_std": plateau["relative_std"],
            "in_trees_time_to_plateau": plateau["time_to_plateau"],
            "coverage_plateau": float(cov[tail].mean()),
            "trees_plateau": float(np.mean([r.column("trees")[tail].mean() for r in records])),
        })
    return out


def _json_safe(d):
    if isinstance(d, dict):
        return {k: _json_safe(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_json_safe(v) for v in d]
    if isinstance(d, float) and not math.isfinite(d):
        return None
    return d


def write_summary(out_dir, scenario: str, master_seed: int, sections: dict) -> Path:
    path = Path(out_dir) / "summary.json"
    doc = {
        "scenario": scenario,
        "master_seed": master_seed,
        "fingerprints": {name: s["fingerprint"] for name, s in sections.items()},
        "configs": sections,
    }
    path.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=False) + "\n")
    return path


def _runs_in(cfg_dir: Path) -> list[RunRecord]:
    recs = []
    for ev in sorted(cfg_dir.glob("events_*.csv"), key=lambda p: int(p.stem.split("_")[1])):
        ts = cfg_dir / ev.name.replace("events_", "timeseries_")
        if not ts.exists():
            raise ValueError(f"{ev} has no matching timeseries file")
        recs.append(read_run(ev, ts))
    return recs


def summarize_dir(in_dir) -> dict:
    """Recompute every configuration's summary from the logs under ``in_dir``."""
    in_dir = Path(in_dir)
    if not in_dir.is_dir():
        raise FileNotFoundError(f"{in_dir} is not a directory")
    sections = {}
    for cfg_dir in sorted(p for p in in_dir.iterdir() if p.is_dir()):
        recs = _runs_in(cfg_dir)
        if not recs:
            continue
        dt = 1.0
        cfg_file = cfg_dir / "config.json"
        if cfg_file.exists():
            meta = json.loads(cfg_file.read_text())
            dt = meta["config"].get("dt", 1.0)
            if any(r.fingerprint != meta["fingerprint"] for r in recs):
                raise ValueError(f"{cfg_dir}: logs do not match config.json fingerprint")
        sections[cfg_dir.name] = summarise(recs, dt)
    if not sections:
        raise ValueError(f"no replicate logs found under {in_dir}")
    prev = in_dir / "summary.json"
    scenario, master = "unknown", None
    if prev.exists():
        old = json.loads(prev.read_text())
        scenario, master = old.get("scenario", scenario), old.get("master_seed")
    write_summary(in_dir, scenario, master, sections)
    return sections


# -- running -----------------------------------------------------------------------

def _job(args):
    cfg, seed = args
    return run_replicate(cfg, seed)


def run_configs(cfg: ExperimentConfig, seeds: Sequence[int], workers: int = 1,
                on_done: Optional[Callable[[RunRecord], None]] = None) -> list[RunRecord]:
    """Run one replicate per seed; on any failure raise ExperimentError naming the finished seeds."""
    done, failures = {}, []
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            futures = [(s, ex.submit(_job, (cfg, s))) for s in seeds]
            for s, fut in futures:
                try:
                    done[s] = fut.result()
                    if on_done:
                        on_done(done[s])
                except Exception as exc:  # noqa: BLE001 - reported below
                    failures.append((s, exc))
    else:
        for s in seeds:
            try:
                done[s] = run_replicate(cfg, s)
                if on_done:
                    on_done(done[s])
            except Exception as exc:  # noqa: BLE001
                failures.append((s, exc))
    if failures:
        lines = [f"seed {s}: {type(e).__name__}: {e}" for s, e in failures]
        raise ExperimentError(
            f"{len(failures)} of {len(seeds)} replicates failed ({'; '.join(lines)}); "
            f"completed seeds: {sorted(done)}", done)
    return [done[s] for s in seeds]


def run_experiment(scenario: str, base: ExperimentConfig, out_dir=None, workers: int = 1,
                   progress: Optional[Callable[[str], None]] = None) -> dict:
    """Run every configuration of ``scenario`` and write logs plus ``summary.json``.

    Returns ``{config name: summary dict}``. With ``out_dir=None`` nothing is
    written.
    """
    configs = expand(scenario, base)
    seeds = [replicate_seed(base.seed, i) for i in range(base.replicates)]
    out = Path(out_dir) if out_dir is not None else None
    sections = {}
    for name, cfg in configs:
        t0 = time.perf_counter()
        cfg_dir = None
        if out is not None:
            cfg_dir = out / name
            cfg_dir.mkdir(parents=True, exist_ok=True)
            (cfg_dir / "config.json").write_text(json.dumps(
                {"fingerprint": cfg.fingerprint(), "config": to_dict(cfg)}, indent=2) + "\n")

        def save(rec, cfg_dir=cfg_dir):
            if cfg_dir is None:
                return
            i = seeds.index(rec.seed)
            write_events(cfg_dir / f"events_{i}.csv", rec)
            write_timeseries(cfg_dir / f"timeseries_{i}.csv", rec)

        try:
            recs = run_configs(cfg, seeds, workers, on_done=save)
        except ExperimentError as exc:
            raise ExperimentError(f"{name}: {exc}", exc.completed) from exc
        sections[name] = summarise(recs, cfg.dt)
        if progress:
            s = sections[name]
            progress(f"{name}: {len(recs)} replicates in {time.perf_counter() - t0:.1f}s, "
                     f"median wait {s['waiting_median']}, op {s['operator_msgs_per_s']:.2f}/s")
    if out is not None:
        write_summary(out, scenario, base.seed, sections)
    return sections


def load_config_dir(cfg_dir) -> ExperimentConfig:
    meta = json.loads((Path(cfg_dir) / "config.json").read_text())
    return from_dict(meta["config"])
