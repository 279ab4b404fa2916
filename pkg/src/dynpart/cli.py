"""Command-line front end: gen, partition, assign, fuse, simulate, compare,
train-predictor, report.

Stages communicate through fixed-name JSON artifacts in the output directory
(graph.dg, chunks.json, assignment.json, fusion.json, report.json,
compare.csv). Every command is a pure function of its inputs: rerunning with
the same config and seed rewrites byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import costmodel, graphstore, sim
from .assign import Assignment, assign
from .config import ConfigError, RunConfig, load_config
from .costmodel import ChunkStats, Predictor, total_true_cost, train_predictor
from .fusion import FusionPlan, plan_fusion
from .partition import chunk_graph_from_json, chunk_graph_to_json
from .sim import build_plan, compare_methods, run_epochs

GRAPH_FILE = "graph.dg"
CHUNKS_FILE = "chunks.json"
ASSIGNMENT_FILE = "assignment.json"
FUSION_FILE = "fusion.json"
REPORT_FILE = "report.json"
COMPARE_FILE = "compare.csv"
PREDICTOR_FILE = "predictor.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _read_json(path: Path, stage: str) -> dict:
    if not path.exists():
        raise StageError(stage, f"missing upstream artifact {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_graph(cfg: RunConfig, out: Path, stage: str) -> graphstore.DynamicGraph:
    if cfg.graph_path is not None:
        return graphstore.load_graph(cfg.graph_path)
    generated = out / GRAPH_FILE
    if generated.exists():
        return graphstore.load_graph(str(generated))
    if cfg.synthetic is not None:
        return graphstore.generate(cfg.synthetic)
    raise StageError(stage, "no graph available; run 'gen' or set graph.path")


def _predictor(cfg: RunConfig) -> Predictor | None:
    return Predictor.load(cfg.predictor_path) if cfg.predictor_path else None


def cmd_gen(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    if cfg.synthetic is None:
        raise StageError("gen", "gen needs graph.synthetic in the config")
    g = graphstore.generate(cfg.synthetic)
    graphstore.save_graph(g, str(out / GRAPH_FILE))
    print(f"wrote {out / GRAPH_FILE}: T={g.T} instances={g.n_instances} "
          f"edges={g.n_spatial_edges}")
    return 0


def cmd_partition(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    g = _load_graph(cfg, out, "partition")
    plan = build_plan(
        g, cfg.method, cfg.profile, cfg.cluster, cfg.cost, cfg.memory,
        size_cap=cfg.size_cap, max_rounds=cfg.max_rounds, predictor=_predictor(cfg),
        fuse=False,
    )
    _write_json(out / CHUNKS_FILE, chunk_graph_to_json(plan.chunk_graph, cfg.profile))
    print(f"wrote {out / CHUNKS_FILE}: method={cfg.method} "
          f"chunks={len(plan.chunk_graph.chunks)}")
    return 0


def cmd_assign(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    g = _load_graph(cfg, out, "assign")
    doc = _read_json(out / CHUNKS_FILE, "assign")
    cg, profile = chunk_graph_from_json(doc)
    method = cg.method
    predictor = _predictor(cfg)
    workloads = {
        c.id: (predictor.predict(c.stats) if predictor else total_true_cost(c.stats, cfg.cost))
        for c in cg.chunks
    }
    if method == "pgc":
        asg = assign(cg, workloads, cfg.cluster.n_devices)
    else:
        plan = build_plan(
            g, method, cfg.profile, cfg.cluster, cfg.cost, cfg.memory,
            size_cap=cfg.size_cap, max_rounds=cfg.max_rounds, fuse=False,
        )
        asg = plan.assignment
    doc = asg.to_dict()
    doc["method"] = method
    _write_json(out / ASSIGNMENT_FILE, doc)
    print(f"wrote {out / ASSIGNMENT_FILE}: devices={cfg.cluster.n_devices}")
    return 0


def cmd_fuse(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    cg, _profile = chunk_graph_from_json(_read_json(out / CHUNKS_FILE, "fuse"))
    asg_doc = _read_json(out / ASSIGNMENT_FILE, "fuse")
    workloads = {c.id: float(c.stats.n_vertices) for c in cg.chunks}
    asg = Assignment.from_dict(asg_doc, workloads)
    plan = plan_fusion(cg, asg, cfg.cluster.memory_budget, cfg.memory)
    _write_json(out / FUSION_FILE, plan.to_dict())
    n_groups = sum(len(gl) for gl in plan.groups_by_device.values())
    print(f"wrote {out / FUSION_FILE}: groups={n_groups}")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    g = _load_graph(cfg, out, "simulate")
    plan = build_plan(
        g, cfg.method, cfg.profile, cfg.cluster, cfg.cost, cfg.memory,
        size_cap=cfg.size_cap, max_rounds=cfg.max_rounds, predictor=_predictor(cfg),
    )
    reports = run_epochs(
        g, plan, cfg.profile, cfg.cluster, cfg.epochs, cfg.stale, cfg.drift,
        seed=cfg.seed, coeffs=cfg.cost,
        initial_loss=cfg.initial_loss, loss_decay=cfg.loss_decay,
    )
    doc = {
        "version": 1,
        "method": cfg.method,
        "epochs": [r.to_dict() for r in reports],
    }
    _write_json(out / REPORT_FILE, doc)
    print(f"wrote {out / REPORT_FILE}: epochs={cfg.epochs} "
          f"wall_ms={reports[-1].wall_ms:.3f}")
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    g = _load_graph(cfg, out, "compare")
    result = compare_methods(
        g, cfg.profile, cfg.cluster, sim.METHODS, cfg.epochs,
        coeffs=cfg.cost, mem_coeffs=cfg.memory, stale_config=cfg.stale,
        drift_spec=cfg.drift, size_cap=cfg.size_cap, max_rounds=cfg.max_rounds,
        seed=cfg.seed, predictor=_predictor(cfg),
    )
    doc = {
        "version": 1,
        "methods": {
            m: {
                "mean": result.mean_report(m),
                "epochs": [r.to_dict() for r in result.reports[m]],
            }
            for m in result.methods
        },
    }
    _write_json(out / REPORT_FILE, doc)
    with open(out / COMPARE_FILE, "w", encoding="utf-8") as fh:
        fh.write(result.csv_text())
    print(result.table_text(), end="")
    print(f"wrote {out / REPORT_FILE} and {out / COMPARE_FILE}")
    return 0


def cmd_train_predictor(cfg: RunConfig, samples: int, epochs: int) -> int:
    out = _out_dir(cfg)
    rng = np.random.default_rng(cfg.seed)
    stats, measured = [], []
    for _ in range(samples):
        n_v = int(rng.integers(20, 3000))
        s = ChunkStats(
            n_vertices=n_v,
            n_edges=int(rng.integers(0, 8 * n_v)),
            total_sequence_length=int(n_v * rng.uniform(0.5, 1.5)),
            feature_dim=int(rng.integers(2, 65)),
            layer_dims=tuple(
                int(rng.integers(8, 257)) for _ in range(int(rng.integers(1, 4)))
            ),
        )
        noise = 1.0 + rng.uniform(-0.05, 0.05)
        stats.append(s)
        measured.append(total_true_cost(s, cfg.cost) * noise)
    predictor = train_predictor(
        list(zip(stats, measured)), epochs=epochs, seed=cfg.seed
    )
    predictor.save(str(out / PREDICTOR_FILE))
    print(f"wrote {out / PREDICTOR_FILE}: train_mape={predictor.train_mape:.4f} "
          f"val_mape={predictor.val_mape:.4f}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    doc = _read_json(out / REPORT_FILE, "report")
    if "methods" in doc:
        cols = ["method", "wall_ms", "traffic_bytes", "load_divergence",
                "padding_slots", "stale_reduction_pct"]
        rows = []
        for m, entry in sorted(doc["methods"].items()):
            mean = entry["mean"]
            rows.append([str(mean.get(c, m if c == "method" else "")) for c in cols])
        widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(cols)]
        print("  ".join(c.ljust(widths[i]) for i, c in enumerate(cols)))
        for r in rows:
            print("  ".join(r[i].ljust(widths[i]) for i in range(len(cols))))
    else:
        for rep in doc["epochs"]:
            print(json.dumps(rep, sort_keys=True))
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dynpart",
        description="Partition dynamic graphs into chunks and simulate "
        "distributed training epochs.",
    )
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--out", help="override output directory")
    p.add_argument("--method", choices=sim.METHODS, help="override partition method")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("gen", "partition", "assign", "fuse", "simulate", "compare", "report"):
        sub.add_parser(name)
    tp = sub.add_parser("train-predictor")
    tp.add_argument("--samples", type=int, default=50_000)
    tp.add_argument("--epochs", type=int, default=100)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    overrides = {"seed": args.seed, "out_dir": args.out, "method": args.method}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "partition":
            return cmd_partition(cfg)
        if args.command == "assign":
            return cmd_assign(cfg)
        if args.command == "fuse":
            return cmd_fuse(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "train-predictor":
            return cmd_train_predictor(cfg, args.samples, args.epochs)
        if args.command == "report":
            return cmd_report(cfg)
        raise StageError("cli", f"unknown command {args.command!r}")
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except (ConfigError, graphstore.GraphFormatError, ValueError) as exc:
        print(f"error [{args.command}] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
