"""Command-line entry point: tune, search, train, report, gen-graph, bench.

Run settings come from an optional ``key = value`` file (``--config``) and
are overridden by flags. Exit codes: 0 success, 1 runtime failure (target
failure, unreadable trace, unwritable output), 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import landscape, tuners
from .config_space import Configuration, EmptySpaceError, SearchSpace
from .traces import TraceFormatError, TraceRecord, now_iso, read_trace, records_from_trace, write_trace

logger = logging.getLogger("argotune")

WORKLOADS = ("gnn", "synthetic")
MODELS = ("gcn", "sage")
SAMPLERS = ("neighbor", "shadow")
ALGOS = ("bo", "sa", "exhaustive", "default")
SPACES = ("capped", "full")
GRAPH_KINDS = ("erdos_renyi", "preferential_attachment")


class ConfigError(ValueError):
    """Invalid run configuration (exit status 2)."""


def _int_tuple(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if text in (None, "", "none") else int(text)


@dataclass(frozen=True)
class RunConfig:
    workload: str = "synthetic"
    graph: Optional[str] = None
    model: str = "sage"
    sampler: str = "neighbor"
    fanouts: tuple = (15, 10, 5)
    shadow_fanouts: tuple = (10, 5)
    hidden: int = 16
    lr: float = 0.1
    batch_size: int = 64
    epochs: Optional[int] = None
    algo: str = "bo"
    n_search: Optional[int] = None
    cores: Optional[int] = None
    space: str = "capped"
    preset: str = "sampling-bound"
    noise: float = 0.0
    seed: int = 0
    deterministic: bool = False
    out: Optional[str] = None
    fixed: Optional[tuple] = None
    nodes: int = 2000
    edge_prob: float = 0.005

    _CONVERT = {
        "fanouts": _int_tuple, "shadow_fanouts": _int_tuple, "fixed": lambda v: None if v in (None, "") else _int_tuple(v),
        "hidden": int, "batch_size": int, "epochs": _opt_int, "n_search": _opt_int, "cores": _opt_int,
        "seed": int, "nodes": int, "lr": float, "noise": float, "edge_prob": float, "deterministic": _bool,
        "graph": lambda v: v or None, "out": lambda v: v or None,
    }

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for raw_key, value in values.items():
            key = raw_key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown setting {raw_key!r}")
            try:
                kwargs[key] = cls._CONVERT.get(key, str)(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {raw_key}: {exc}") from None
        return cls(**kwargs)

    def space_for(self, total_cores: int) -> SearchSpace:
        return SearchSpace.capped(total_cores) if self.space == "capped" else SearchSpace(total_cores)

    def validate(self, command: str) -> None:
        for name, allowed in (("workload", WORKLOADS), ("model", MODELS), ("sampler", SAMPLERS),
                              ("algo", ALGOS), ("space", SPACES)):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {', '.join(allowed)}; got {getattr(self, name)!r}")
        if self.graph is not None and not Path(self.graph).is_file():
            raise ConfigError(f"graph file not found: {self.graph}")
        if self.workload == "synthetic":
            try:
                synthetic_params(self)
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"bad landscape preset {self.preset!r}: {exc}") from None
        if self.batch_size < 1 or self.hidden < 1 or self.lr <= 0 or self.nodes < 2:
            raise ConfigError("batch size, hidden width, learning rate and node count must be positive")
        if not self.fanouts or any(f < 1 for f in self.fanouts + self.shadow_fanouts):
            raise ConfigError("fanouts must be positive integers")
        if self.cores is not None and self.cores < 1:
            raise ConfigError("cores must be positive")
        if self.epochs is not None and self.epochs < 1:
            raise ConfigError("epochs must be positive")
        if self.n_search is not None and self.n_search < 1:
            raise ConfigError("n-search must be positive")
        if self.fixed is not None and len(self.fixed) != 3:
            raise ConfigError("fixed configuration must be n,s,t")
        if command in ("tune", "bench") and self.algo in ("bo", "sa") and self.epochs is not None \
                and self.n_search is not None and self.epochs < self.n_search:
            raise ConfigError(f"epochs ({self.epochs}) must be >= n-search ({self.n_search})")


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def write_config_file(cfg: RunConfig, path) -> None:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ",".join(map(str, value))
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


# -- targets ----------------------------------------------------------------

def total_cores_for(cfg: RunConfig) -> int:
    if cfg.cores is not None:
        return cfg.cores
    from .engine.binding import physical_cores

    return physical_cores()


def build_workload(cfg: RunConfig):
    from .gnn import GnnWorkload, SamplerConfig, generate_graph, load_graph

    if cfg.graph is not None:
        try:
            graph = load_graph(cfg.graph)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load graph {cfg.graph}: {exc}") from None
    else:
        graph = generate_graph("erdos_renyi", cfg.nodes, cfg.edge_prob, seed=cfg.seed)
    sampler = SamplerConfig(cfg.sampler, tuple(cfg.fanouts), tuple(cfg.shadow_fanouts), len(cfg.fanouts))
    return GnnWorkload.build(graph, cfg.model, cfg.hidden, sampler, batch_size=cfg.batch_size, lr=cfg.lr,
                             seed=cfg.seed)


def synthetic_params(cfg: RunConfig) -> landscape.LandscapeParams:
    """Named preset, or a preset file written by :func:`landscape.write_params`."""
    if Path(cfg.preset).is_file():
        preset = landscape.read_params(cfg.preset)
    else:
        presets = {p.name: p for p in landscape.preset_suite()}
        if cfg.preset not in presets:
            raise KeyError(f"choose one of {', '.join(presets)} or a preset file")
        preset = presets[cfg.preset]
    return replace(preset, noise_std=cfg.noise, seed=cfg.seed)


def build_target(cfg: RunConfig, total_cores: int) -> Callable[[Configuration], float]:
    if cfg.workload == "synthetic":
        return landscape.LandscapeTarget(synthetic_params(cfg))
    from .engine import DETERMINISTIC, STOCHASTIC, EngineTarget

    return EngineTarget(build_workload(cfg), total_cores, DETERMINISTIC if cfg.deterministic else STOCHASTIC)


def run_tuner(cfg: RunConfig, space: SearchSpace, target) -> tuple[Configuration, tuners.ObservationTrace]:
    if cfg.algo == "exhaustive":
        return tuners.exhaustive_search(space, target)
    if cfg.algo == "default":
        chosen = tuners.default_policy(space)
        trace = tuners.ObservationTrace()
        for _ in range(cfg.epochs or 1):
            trace.record(chosen, tuners._evaluate(target, chosen), "default")
        return chosen, trace
    budget = tuners.TunerBudget.default(space, cfg.epochs)
    if cfg.n_search is not None:
        budget = tuners.TunerBudget(min(cfg.n_search, len(space)), max(cfg.epochs or cfg.n_search,
                                                                        min(cfg.n_search, len(space))))
    if cfg.algo == "bo":
        return tuners.bayes_tune(space, target, budget, seed=cfg.seed)
    return tuners.simulated_annealing(space, target, budget, seed=cfg.seed)


# -- commands ---------------------------------------------------------------

def _fmt(cfg: Configuration) -> str:
    n, s, t = cfg.as_tuple()
    return f"n={n} s={s} t={t}"


def cmd_tune(cfg: RunConfig, target=None, out=None) -> int:
    out = out or sys.stdout
    cfg.validate("tune")
    total = total_cores_for(cfg)
    try:
        space = cfg.space_for(total)
        len(space)
    except EmptySpaceError as exc:
        raise ConfigError(f"no configurations fit {total} cores: {exc}") from None
    if cfg.fixed is not None:
        raise ConfigError("fixed configurations are for the train command")
    target = target if target is not None else build_target(cfg, total)
    try:
        _, trace = run_tuner(cfg, space, target)
    except tuners.TuningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    records = records_from_trace(trace)
    if cfg.out:
        try:
            write_trace(records, cfg.out)
        except OSError as exc:
            print(f"error: cannot write trace: {exc}", file=sys.stderr)
            return 1
    failures = sum(e.failed for e in trace)
    try:
        best_cfg, best = trace.best()
    except tuners.TuningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"best configuration: {_fmt(best_cfg)}", file=out)
    print(f"best epoch time: {best:.6g} s", file=out)
    print(f"searches: {len(trace.search_entries())}", file=out)
    if failures:
        print(f"error: {failures} evaluation(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_train(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    cfg.validate("train")
    if cfg.workload != "gnn":
        raise ConfigError("train needs the gnn workload")
    from .engine import DETERMINISTIC, STOCHASTIC, EngineError, run_epoch
    from .engine.plan import ConfigurationRejected

    total = total_cores_for(cfg)
    if cfg.fixed is not None:
        chosen = Configuration(*cfg.fixed)
    else:
        try:
            chosen = tuners.default_policy(cfg.space_for(total))
        except (ValueError, EmptySpaceError) as exc:
            raise ConfigError(str(exc)) from None
    if min(chosen.as_tuple()) < 1 or chosen.total_cores_used > total:
        raise ConfigError(f"{_fmt(chosen)} does not fit {total} cores")
    workload = build_workload(cfg)
    mode = DETERMINISTIC if cfg.deterministic else STOCHASTIC
    rows = []
    for epoch in range(cfg.epochs or 1):
        try:
            result = run_epoch(chosen, workload, mode, total_cores=total)
        except ConfigurationRejected as exc:
            raise ConfigError(str(exc)) from None
        except EngineError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        m = result.metrics
        rows.append((epoch, repr(m.mean_loss), repr(m.accuracy), repr(result.epoch_time)))
        print(f"epoch {epoch}: loss {m.mean_loss:.6f} acc {m.accuracy:.4f} time {result.epoch_time:.3f}s", file=out)
    if cfg.out:
        try:
            with open(cfg.out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["epoch", "loss", "accuracy", "epoch_time_s"])
                w.writerows(rows)
        except OSError as exc:
            print(f"error: cannot write metrics: {exc}", file=sys.stderr)
            return 1
    return 0


def summarize(records: Sequence[TraceRecord], exhaustive: Optional[Sequence[TraceRecord]] = None) -> dict:
    ok = [r for r in records if r.epoch_time_s is not None]
    if not ok:
        raise ValueError("trace has no successful evaluation")
    best = min(ok, key=lambda r: (r.epoch_time_s, r.iter))
    summary = {
        "best_config": best.config.as_tuple(),
        "best_time_s": best.epoch_time_s,
        "searches": sum(r.phase == "search" for r in records),
        "evaluations": len(records),
        "ratio": None,
    }
    if exhaustive is not None:
        ref = [r.epoch_time_s for r in exhaustive if r.epoch_time_s is not None]
        if not ref:
            raise ValueError("exhaustive trace has no successful evaluation")
        summary["exhaustive_best_s"] = min(ref)
        summary["ratio"] = min(ref) / best.epoch_time_s
    return summary


def cmd_report(trace_path, exhaustive_path=None, csv_out=None, out=None) -> int:
    out = out or sys.stdout
    loaded = {}
    for label, path in (("trace", trace_path), ("exhaustive trace", exhaustive_path)):
        if path is None:
            continue
        try:
            loaded[label] = read_trace(path)
        except TraceFormatError as exc:
            print(f"error: {path}: malformed {exc}", file=sys.stderr)
            return 1
        except OSError as exc:
            print(f"error: cannot read {label}: {exc}", file=sys.stderr)
            return 1
        if not loaded[label]:
            print(f"error: {label} {path} is empty", file=sys.stderr)
            return 1
    records = loaded["trace"]
    try:
        summary = summarize(records, loaded.get("exhaustive trace"))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    n, s, t = summary["best_config"]
    print(f"best configuration: n={n} s={s} t={t}", file=out)
    print(f"best epoch time: {summary['best_time_s']:.6g} s", file=out)
    print(f"searches: {summary['searches']}", file=out)
    if summary["ratio"] is not None:
        print(f"exhaustive best: {summary['exhaustive_best_s']:.6g} s", file=out)
        print(f"ratio (exhaustive best / best found): {summary['ratio']:.2f}", file=out)
    if csv_out:
        ref = summary.get("exhaustive_best_s")
        try:
            with open(csv_out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["iter", "n", "s", "t", "epoch_time_s", "best_so_far_s", "phase", "ratio"])
                for r in records:
                    ratio = "" if ref is None or r.epoch_time_s is None else repr(ref / r.epoch_time_s)
                    w.writerow([r.iter, *r.config.as_tuple(),
                                "" if r.epoch_time_s is None else repr(r.epoch_time_s),
                                "" if r.best_so_far_s is None else repr(r.best_so_far_s), r.phase, ratio])
        except OSError as exc:
            print(f"error: cannot write CSV: {exc}", file=sys.stderr)
            return 1
    return 0


def cmd_gen_graph(kind: str, nodes: int, param: float, out_path, feature_dim: int = 16, classes: int = 2,
                  seed: int = 0, homophily: Optional[float] = None, out=None) -> int:
    out = out or sys.stdout
    from .gnn.graph import generate_graph, save_graph

    if kind not in GRAPH_KINDS:
        raise ConfigError(f"kind must be one of {', '.join(GRAPH_KINDS)}")
    try:
        graph = generate_graph(kind, nodes, param, feature_dim, classes, seed, homophily=homophily)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        edges, side = save_graph(graph, out_path)
    except OSError as exc:
        print(f"error: cannot write graph: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {graph.num_edges // 2} edges to {edges} and features to {side}", file=out)
    return 0


def cmd_bench(cfg: RunConfig, out=None) -> int:
    """Epoch throughput of the tuned configuration vs the default policy (informational)."""
    out = out or sys.stdout
    cfg.validate("bench")
    total = total_cores_for(cfg)
    from .engine.binding import physical_cores

    if physical_cores() < 8 and cfg.cores is None:
        print(json.dumps({"status": "skipped", "reason": f"host has {physical_cores()} cores, need 8"}), file=out)
        return 0
    space = cfg.space_for(total)
    target = build_target(replace(cfg, workload="gnn"), total)
    tuned, trace = run_tuner(replace(cfg, algo="bo"), space, target)
    base_cfg = tuners.default_policy(space)
    base = min(target(base_cfg) for _ in range(2))
    best = min(target(tuned) for _ in range(2))
    report = {"status": "ok", "tuned": tuned.as_tuple(), "default": base_cfg.as_tuple(),
              "tuned_epoch_s": best, "default_epoch_s": base, "speedup": base / best,
              "searches": len(trace.search_entries()), "timestamp": now_iso()}
    print(json.dumps(report), file=out)
    if cfg.out:
        Path(cfg.out).write_text(json.dumps(report) + "\n")
    return 0


# -- argument parsing -------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value run-configuration file")
    p.add_argument("--workload", choices=WORKLOADS)
    p.add_argument("--graph", help="edge-list file (feature sidecar at PATH.feat)")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--sampler", choices=SAMPLERS)
    p.add_argument("--fanouts", help="comma-separated, one per layer, input side first")
    p.add_argument("--shadow-fanouts")
    p.add_argument("--hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--n-search", type=int)
    p.add_argument("--cores", type=int, help="total cores (larger than the host simulates; binding off)")
    p.add_argument("--space", choices=SPACES)
    p.add_argument("--preset", help="synthetic landscape preset name or preset file")
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--deterministic", action="store_true", default=None)
    p.add_argument("--nodes", type=int)
    p.add_argument("--edge-prob", type=float)
    p.add_argument("--fixed", help="n,s,t for train")
    p.add_argument("--out")


_RUN_KEYS = [f.name for f in fields(RunConfig)]


def _run_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in _RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return RunConfig.from_mapping(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="argotune", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("tune", "run a tuner and write a JSON-lines trace"),
                            ("search", "exhaustive search (tune --algo exhaustive)"),
                            ("train", "train epochs at a fixed configuration, write per-epoch CSV"),
                            ("bench", "tuned vs default throughput (informational)")):
        _add_run_flags(sub.add_parser(name, help=help_text))
    rep = sub.add_parser("report", help="summarize a trace")
    rep.add_argument("trace")
    rep.add_argument("--exhaustive", help="trace of an exhaustive search on the same target")
    rep.add_argument("--out", help="CSV dump of the trace")
    gen = sub.add_parser("gen-graph", help="write a synthetic graph and feature sidecar")
    gen.add_argument("--kind", default="erdos_renyi", choices=GRAPH_KINDS)
    gen.add_argument("--nodes", type=int, default=1000)
    gen.add_argument("--param", type=float, default=0.01, help="edge probability or edges per new node")
    gen.add_argument("--feature-dim", type=int, default=16)
    gen.add_argument("--classes", type=int, default=2)
    gen.add_argument("--homophily", type=float)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors already exit with 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.trace, args.exhaustive, args.out)
        if args.command == "gen-graph":
            return cmd_gen_graph(args.kind, args.nodes, args.param, args.out, args.feature_dim, args.classes,
                                 args.seed, args.homophily)
        cfg = _run_config(args)
        if args.command == "search":
            cfg = replace(cfg, algo="exhaustive")
        if args.command in ("tune", "search"):
            return cmd_tune(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        return cmd_bench(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
