"""Command-line entry point tying the pipeline, harness, and analysis together.

Subcommands: generate (synthesize a benchmark), evaluate (score a detector),
analyze (semantic clustering of candidate pools), stats (difficulty x
category histogram). Exit codes: 0 success, 1 fatal config/IO error,
2 completed with per-item errors.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from . import analysis, harness
from .corpus import (
    load_benchmark,
    load_corpus,
    load_items_jsonl,
    write_json_atomic,
    write_jsonl_atomic,
    write_text_atomic,
)
from .errors import ConfigError, HallugenError
from .filters import ensemble_vote, retained
from .models import (
    HallucinationCategory,
    HallucinationRecord,
    MetricsReport,
    QAItem,
)
from .pipeline import PipelineConfig, ProviderSet, run_corpus
from .providers import ClientRegistry, ProviderConfig, load_roster
from .seeding import stable_seed

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


@dataclass
class RunConfig:
    """Resolved run configuration: knobs plus roster-backed provider configs."""

    pipeline: PipelineConfig
    roster: dict[str, ProviderConfig]
    seed: int = 0
    workers: int = 4
    detector: str = ""
    protocol: str = "binary"
    knowledge_shown: bool = False


def _resolve_name(roster: dict[str, ProviderConfig], name: str) -> ProviderConfig:
    if name not in roster:
        raise ConfigError(f"provider name {name!r} not found in roster")
    return roster[name]


def load_run_config(path: str) -> RunConfig:
    """Load a run config JSON; relative paths resolve against the config dir."""
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc

    base = os.path.dirname(os.path.abspath(path))
    roster_path = raw.get("providers")
    if not roster_path:
        raise ConfigError(f"config {path}: missing 'providers' roster path")
    if not os.path.isabs(roster_path):
        roster_path = os.path.join(base, roster_path)
    roster = load_roster(roster_path)

    p = raw.get("pipeline", {})
    try:
        pipeline = PipelineConfig(
            generator=_resolve_name(roster, p["generator"]),
            discriminators=tuple(_resolve_name(roster, n)
                                 for n in p["discriminators"]),
            nli=_resolve_name(roster, p["nli"]),
            embedder=_resolve_name(roster, p["embedder"]),
            critic=_resolve_name(roster, p["critic"]),
            distinctness_checker=(_resolve_name(roster, p["distinctness_checker"])
                                  if p.get("distinctness_checker") else None),
            attempt_budget=p.get("attempt_budget", 5),
            tau=p.get("tau", 0.75),
            length_window=p.get("length_window", 0.10),
            temperature_band=tuple(p.get("temperature_band", (0.3, 0.7))),
            retain_rule=p.get("retain_rule", "any_fooled"),
            extra_llm_correctness=p.get("extra_llm_correctness", False),
        )
    except KeyError as exc:
        raise ConfigError(f"config {path}: pipeline section missing {exc}") from exc
    return RunConfig(
        pipeline=pipeline,
        roster=roster,
        seed=raw.get("seed", 0),
        workers=raw.get("workers", 4),
        detector=raw.get("detector", ""),
        protocol=raw.get("protocol", "binary"),
        knowledge_shown=raw.get("knowledge_shown", False),
    )


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    workers = cfg.workers if args.workers is None else args.workers
    items, row_errors = load_corpus(args.input)
    registry = ClientRegistry()
    providers = ProviderSet.resolve(cfg.pipeline, registry)
    records, summary = run_corpus(items, cfg.pipeline, providers, seed, workers)
    summary.provider_calls = registry.call_counts()

    os.makedirs(args.out, exist_ok=True)
    write_jsonl_atomic(os.path.join(args.out, "benchmark.jsonl"),
                       (r.to_dict() for r in records))
    write_jsonl_atomic(os.path.join(args.out, "items.jsonl"),
                       (i.to_dict() for i in items))
    summary_dict = summary.to_dict()
    summary_dict["seed"] = seed
    summary_dict["corpus_row_errors"] = row_errors
    write_json_atomic(os.path.join(args.out, "summary.json"), summary_dict)
    print(f"generated {summary.n_records}/{summary.n_items} records "
          f"({summary.fallback_count} fallback) -> {args.out}")
    return EXIT_PARTIAL if (summary.errored or row_errors) else EXIT_OK


def _load_eval_inputs(args: argparse.Namespace,
                      ) -> tuple[list[HallucinationRecord], list[QAItem]]:
    benchmark = load_benchmark(args.benchmark)
    items_path = args.items or os.path.join(os.path.dirname(args.benchmark),
                                            "items.jsonl")
    if not os.path.exists(items_path):
        raise ConfigError(
            f"items file not found at {items_path}; pass --items explicitly")
    items = load_items_jsonl(items_path)
    by_id = {i.id for i in items}
    missing = [r.item_id for r in benchmark if r.item_id not in by_id]
    if missing:
        raise ConfigError(f"benchmark references unknown item ids (first: "
                          f"{missing[0]!r})")
    return benchmark, items


def _report_csv(report: MetricsReport) -> str:
    header = ("stratum,tp,fp,tn,fn,abstained,invalid,precision,recall,f1,"
              "accuracy,response_rate")
    rows = [header]

    def line(name: str, r: Any) -> str:
        return (f"{name},{r.tp},{r.fp},{r.tn},{r.fn},{r.abstained},{r.invalid},"
                f"{r.precision:.6f},{r.recall:.6f},{r.f1:.6f},{r.accuracy:.6f},"
                f"{r.response_rate:.6f}")

    rows.append(line("overall", report))
    for stratum, sub in sorted(report.strata.items()):
        rows.append(line(stratum, sub))
    return "\n".join(rows) + "\n"


def _report_table(report: MetricsReport) -> str:
    lines = [
        f"{'stratum':<45} {'n':>5} {'prec':>7} {'recall':>7} {'f1':>7} "
        f"{'acc':>7} {'resp%':>7}",
    ]

    def line(name: str, r: Any) -> str:
        return (f"{name:<45} {r.total:>5} {r.precision:>7.3f} {r.recall:>7.3f} "
                f"{r.f1:>7.3f} {r.accuracy:>7.3f} {100 * r.response_rate:>6.1f}%")

    lines.append(line("overall", report))
    for stratum, sub in sorted(report.strata.items()):
        lines.append(line(stratum, sub))
    if report.degenerate:
        lines.append(f"degenerate (0/0 -> 0): {', '.join(report.degenerate)}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    detector_name = args.detector or cfg.detector
    if not detector_name:
        raise ConfigError("no detector named (pass --detector or set it in config)")
    seed = cfg.seed if args.seed is None else args.seed
    benchmark, items = _load_eval_inputs(args)
    registry = ClientRegistry()
    detector = registry.resolve(_resolve_name(cfg.roster, detector_name))
    knowledge_shown = args.knowledge == "on"
    report, outcomes = harness.evaluate(
        benchmark, items, detector, protocol=args.protocol,
        knowledge_shown=knowledge_shown, seed=seed,
        workers=cfg.workers if args.workers is None else args.workers)

    out_dir = args.out or os.path.dirname(os.path.abspath(args.benchmark))
    os.makedirs(out_dir, exist_ok=True)
    tagname = f"{detector_name}_{args.protocol}_k{'on' if knowledge_shown else 'off'}"
    write_json_atomic(os.path.join(out_dir, f"metrics_{tagname}.json"),
                      report.to_dict())
    write_text_atomic(os.path.join(out_dir, f"metrics_{tagname}.csv"),
                      _report_csv(report))
    table = _report_table(report)
    write_text_atomic(os.path.join(out_dir, f"metrics_{tagname}.txt"), table)
    print(table, end="")
    hard_failures = sum(1 for o in outcomes if o.provider_failed)
    if hard_failures:
        print(f"provider hard failures: {hard_failures}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _analysis_pools(args: argparse.Namespace,
                    ) -> list[dict[str, Any]]:
    """Build per-item response pools from a benchmark or raw-responses file."""
    pools = []
    with open(args.benchmark, encoding="utf-8") as f:
        first_line = ""
        for line in f:
            if line.strip():
                first_line = line
                break
    row = json.loads(first_line) if first_line else {}
    if "responses" in row:
        with open(args.benchmark, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                raw = json.loads(line)
                pools.append({
                    "item_id": str(raw.get("item_id", raw.get("id", ""))),
                    "question": raw.get("question", ""),
                    "ground_truth": raw["ground_truth"],
                    "responses": list(raw["responses"])[: args.pool_size],
                    "fooled": raw.get("fooled"),
                })
        return pools
    benchmark = load_benchmark(args.benchmark)
    items_path = args.items or os.path.join(os.path.dirname(args.benchmark),
                                            "items.jsonl")
    if not os.path.exists(items_path):
        raise ConfigError(
            f"items file not found at {items_path}; pass --items explicitly")
    by_id = {i.id: i for i in load_items_jsonl(items_path)}
    for record in benchmark:
        item = by_id[record.item_id]
        responses = [record.hallucinated_answer]
        responses.extend(c.text for c in record.rejected_candidates)
        pools.append({
            "item_id": record.item_id,
            "question": item.question,
            "ground_truth": item.ground_truth,
            "responses": responses[: args.pool_size],
            "fooled": None,
        })
    return pools


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    registry = ClientRegistry()
    providers = ProviderSet.resolve(cfg.pipeline, registry)
    pools = _analysis_pools(args)

    item_reports = []
    all_values: dict[str, list[float]] = {"cosine": [], "euclidean": [],
                                          "rouge1_f1": []}
    all_fooled: list[bool] = []
    csv_rows = ["item_id,response_index,cluster_id,fooled,cosine,euclidean,rouge1_f1"]
    pure_total = 0
    bearing_total = 0
    isolated_count = 0
    for pool in pools:
        responses = pool["responses"]
        if not responses:
            continue
        fooled = pool["fooled"]
        if fooled is None:
            # records do not store per-candidate verdicts; re-vote each one
            fooled = []
            for i, text in enumerate(responses):
                verdict = ensemble_vote(
                    pool["question"], text, pool["ground_truth"],
                    providers.discriminators,
                    seed=stable_seed(cfg.seed, pool["item_id"], "analyze", i))
                fooled.append(retained(verdict, cfg.pipeline.retain_rule))
        fooled = [bool(x) for x in fooled]
        clusters = analysis.cluster_by_entailment(
            responses, pool["ground_truth"], providers.nli, cfg.pipeline.tau,
            fooled=fooled)
        uniformity = analysis.uniformity_report(clusters, fooled)
        member = analysis.member_level_metrics(responses, pool["ground_truth"],
                                               providers.embedder)
        cluster_of = {i: c.id for c in clusters for i in c.member_indices}
        for i in range(len(responses)):
            csv_rows.append(
                f"{pool['item_id']},{i},{cluster_of[i]},{int(fooled[i])},"
                f"{member['cosine'][i]:.6f},{member['euclidean'][i]:.6f},"
                f"{member['rouge1_f1'][i]:.6f}")
        for metric in all_values:
            all_values[metric].extend(member[metric])
        all_fooled.extend(fooled)
        proximity = {}
        for cluster in clusters:
            if cluster.member_indices:
                stats = analysis.cluster_proximity(
                    cluster, responses, pool["ground_truth"], providers.embedder)
                proximity[str(cluster.id)] = {
                    "mean_cosine": stats.mean_cosine,
                    "mean_euclidean": stats.mean_euclidean,
                    "mean_rouge1_f1": stats.mean_rouge1_f1,
                    "n": stats.n,
                }
        bearing = [c for c in clusters if c.member_indices]
        bearing_total += len(bearing)
        pure_total += sum(1 for frac in
                          uniformity.per_cluster_fooled_fraction.values()
                          if frac in (0.0, 1.0))
        isolated_count += int(uniformity.ground_truth_isolated)
        item_reports.append({
            "item_id": pool["item_id"],
            "n_responses": len(responses),
            "clusters": [c.to_dict() for c in clusters],
            "proximity": proximity,
            "uniformity": uniformity.to_dict(),
        })

    separation = analysis.fooled_separation_test(all_values, all_fooled)
    report = {
        "items": item_reports,
        "separation": {
            m: {"mean_fooled": r.mean_fooled, "mean_not_fooled": r.mean_not_fooled,
                "p_value": r.p_value, "reason": r.reason}
            for m, r in sorted(separation.items())
        },
        "overall": {
            "pure_fraction": pure_total / bearing_total if bearing_total else 1.0,
            "ground_truth_isolated_fraction":
                isolated_count / len(item_reports) if item_reports else 1.0,
        },
    }
    out_dir = args.out or os.path.dirname(os.path.abspath(args.benchmark))
    os.makedirs(out_dir, exist_ok=True)
    write_json_atomic(os.path.join(out_dir, "clusters.json"), report)
    write_text_atomic(os.path.join(out_dir, "cluster_members.csv"),
                      "\n".join(csv_rows) + "\n")
    print(f"analyzed {len(item_reports)} pools -> {out_dir}")
    return EXIT_OK


def benchmark_stats(records: Sequence[HallucinationRecord],
                    ) -> dict[str, dict[str, int]]:
    """Difficulty x category histogram over benchmark records."""
    table = {c.value: {"easy": 0, "medium": 0, "hard": 0, "total": 0}
             for c in HallucinationCategory}
    for record in records:
        row = table[record.category.value]
        row[record.difficulty.value] += 1
        row["total"] += 1
    return table


def format_stats_table(table: dict[str, dict[str, int]]) -> str:
    """Render the histogram with per-category difficulty percentages."""
    lines = [f"{'category':<40} {'easy':>12} {'medium':>12} {'hard':>12} {'total':>7}"]
    totals = {"easy": 0, "medium": 0, "hard": 0, "total": 0}

    def cell(count: int, total: int) -> str:
        pct = 100.0 * count / total if total else 0.0
        return f"{count} ({pct:.1f}%)"

    for category, row in table.items():
        for key in totals:
            totals[key] += row[key]
        lines.append(
            f"{category:<40} {cell(row['easy'], row['total']):>12} "
            f"{cell(row['medium'], row['total']):>12} "
            f"{cell(row['hard'], row['total']):>12} {row['total']:>7}")
    lines.append(
        f"{'total':<40} {cell(totals['easy'], totals['total']):>12} "
        f"{cell(totals['medium'], totals['total']):>12} "
        f"{cell(totals['hard'], totals['total']):>12} {totals['total']:>7}")
    return "\n".join(lines) + "\n"


def cmd_stats(args: argparse.Namespace) -> int:
    records = load_benchmark(args.benchmark)
    print(format_stats_table(benchmark_stats(records)), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hallugen",
        description="Synthesize hallucinated QA benchmarks and evaluate detectors.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a benchmark from a corpus")
    g.add_argument("--config", required=True)
    g.add_argument("--input", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--workers", type=int, default=None)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="score a detector on a benchmark")
    e.add_argument("--benchmark", required=True)
    e.add_argument("--detector", default="")
    e.add_argument("--protocol", choices=["binary", "ternary"], default="binary")
    e.add_argument("--knowledge", choices=["on", "off"], default="off")
    e.add_argument("--config", required=True)
    e.add_argument("--items", default=None)
    e.add_argument("--out", default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--workers", type=int, default=None)
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("analyze", help="semantic clustering of candidate pools")
    a.add_argument("--benchmark", required=True)
    a.add_argument("--pool-size", type=int, default=50, dest="pool_size")
    a.add_argument("--config", required=True)
    a.add_argument("--items", default=None)
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("stats", help="difficulty x category histogram")
    s.add_argument("--benchmark", required=True)
    s.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HallugenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
