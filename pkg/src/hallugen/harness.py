"""Detector evaluation under four protocols.

{binary, ternary} x {with knowledge, without knowledge}: every benchmark
row contributes a balanced pair of tasks (its hallucinated answer with gold
"hallucinated", its ground truth with gold "not hallucinated"); verdicts
aggregate into a confusion report with difficulty/category/tag strata.
"""

import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .errors import ProviderError, VerdictParseError
from .models import (
    DetectionVerdict,
    HallucinationRecord,
    MetricsReport,
    QAItem,
    SamplingParams,
    VerdictLabel,
)
from .providers import ProviderClient
from .seeding import stable_seed

log = logging.getLogger(__name__)

PROTOCOLS = ("binary", "ternary")

# matches "temperature of approximately 0.2-0.3" guidance for discriminative runs
DETECTOR_TEMPERATURE = 0.25


@dataclass(frozen=True)
class EvalTask:
    """One detector query: an answer presented for a yes/no(/not sure) call."""

    record: HallucinationRecord
    item: QAItem
    presented_answer: str
    gold_label: bool  # True = the presented answer is hallucinated
    knowledge_shown: bool
    protocol: str

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")


def build_task_set(benchmark: Sequence[HallucinationRecord],
                   items: dict[str, QAItem], protocol: str,
                   knowledge_shown: bool) -> list[EvalTask]:
    """Balanced task construction: two tasks per row, one per gold label."""
    tasks = []
    for record in benchmark:
        item = items[record.item_id]
        for answer, gold in ((record.hallucinated_answer, True),
                             (item.ground_truth, False)):
            tasks.append(EvalTask(
                record=record, item=item, presented_answer=answer,
                gold_label=gold, knowledge_shown=knowledge_shown,
                protocol=protocol))
    return tasks


DETECTION_SYSTEM_BINARY = """\
You are a careful medical reviewer detecting hallucinated answers. You will
see a question and a candidate answer. Decide whether the answer is
hallucinated: plausible-sounding but factually incorrect or unsupported.
Reply with exactly one word: Yes (the answer is hallucinated) or No (it is
not).
"""

DETECTION_SYSTEM_TERNARY = """\
You are a careful medical reviewer detecting hallucinated answers. You will
see a question and a candidate answer. Decide whether the answer is
hallucinated: plausible-sounding but factually incorrect or unsupported.
You may decline to answer if you lack full confidence. Reply with exactly
one of: Yes (hallucinated), No (not hallucinated), or Not Sure.
"""


def build_detection_prompt(task: EvalTask) -> tuple[str, str]:
    """Assemble the detection prompt; knowledge appears only when shown."""
    if task.knowledge_shown and not task.item.knowledge:
        raise ValueError(f"item {task.item.id}: knowledge_shown with empty knowledge")
    parts = [f"Question: {task.item.question}"]
    if task.knowledge_shown:
        parts.append("Knowledge:")
        parts.extend(f"- {p}" for p in task.item.knowledge)
    parts.append(f"Answer: {task.presented_answer}")
    if task.protocol == "binary":
        parts.append("Is this answer hallucinated? Reply with exactly one "
                     "word: Yes or No.")
        return DETECTION_SYSTEM_BINARY, "\n".join(parts)
    parts.append("Is this answer hallucinated? Reply with exactly one of: "
                 "Yes, No, or Not Sure.")
    return DETECTION_SYSTEM_TERNARY, "\n".join(parts)


_VERDICT_RE = re.compile(
    r"^\s*(?:(?:final\s+)?answer\s*:\s*)?(yes|no|not\s+sure)\s*[.!]?\s*$",
    re.IGNORECASE)

_LABELS = {
    "yes": VerdictLabel.YES_HALLUCINATED,
    "no": VerdictLabel.NOT_HALLUCINATED,
    "not sure": VerdictLabel.NOT_SURE,
}


def parse_verdict(raw: str, protocol: str) -> DetectionVerdict:
    """Case-insensitive parse of the constrained verdict token.

    The binary protocol rejects not-sure replies; callers re-ask once and
    then count the reply as invalid.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    m = _VERDICT_RE.match(raw or "")
    if not m:
        raise VerdictParseError(f"unparseable verdict: {raw!r}")
    token = re.sub(r"\s+", " ", m.group(1).lower())
    label = _LABELS[token]
    if protocol == "binary" and label is VerdictLabel.NOT_SURE:
        raise VerdictParseError("'not sure' is not a legal binary verdict")
    return DetectionVerdict(label=label, raw=raw)


@dataclass(frozen=True)
class TaskOutcome:
    """One evaluated task: its verdict (None when invalid) plus the task.

    provider_failed marks invalids caused by a hard provider failure rather
    than an unparseable reply.
    """

    task: EvalTask
    verdict: Optional[DetectionVerdict]
    invalid: bool = False
    provider_failed: bool = False


def compute_binary_metrics(tp: int, fp: int, tn: int, fn: int,
                           ) -> tuple[float, float, float, float]:
    """(precision, recall, f1, accuracy) with every 0/0 defined as 0."""
    for name, v in (("tp", tp), ("fp", fp), ("tn", tn), ("fn", fn)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + tn + fn
    accuracy = (tp + tn) / total if total else 0.0
    return precision, recall, f1, accuracy


def _degenerate_flags(tp: int, fp: int, tn: int, fn: int,
                      abstained: int) -> tuple[str, ...]:
    flags = []
    if tp + fp == 0:
        flags.append("precision")
    if tp + fn == 0:
        flags.append("recall")
    if tp + fp == 0 or tp + fn == 0:
        flags.append("f1")
    if tp + fp + tn + fn == 0:
        flags.append("accuracy")
    if tp + fp + tn + fn + abstained == 0:
        flags.append("response_rate")
    return tuple(flags)


def build_metrics_report(tp: int, fp: int, tn: int, fn: int, abstained: int = 0,
                         invalid: int = 0,
                         strata: Optional[dict[str, MetricsReport]] = None,
                         ) -> MetricsReport:
    """Assemble a MetricsReport from confusion counts."""
    precision, recall, f1, accuracy = compute_binary_metrics(tp, fp, tn, fn)
    total = tp + fp + tn + fn + abstained
    answered = tp + fp + tn + fn
    return MetricsReport(
        tp=tp, fp=fp, tn=tn, fn=fn, abstained=abstained,
        precision=precision, recall=recall, f1=f1, accuracy=accuracy,
        response_rate=answered / total if total else 0.0,
        invalid=invalid,
        degenerate=_degenerate_flags(tp, fp, tn, fn, abstained),
        strata=strata or {},
    )


def _confusion(outcomes: Sequence[TaskOutcome]) -> tuple[int, int, int, int, int, int]:
    """Count (tp, fp, tn, fn, abstained, invalid) over task outcomes.

    Invalid replies score as wrong under binary and as abstentions under
    ternary; both stay visible through the invalid counter.
    """
    tp = fp = tn = fn = abstained = invalid = 0
    for out in outcomes:
        gold = out.task.gold_label
        if out.invalid:
            invalid += 1
            if out.task.protocol == "ternary":
                abstained += 1
            elif gold:
                fn += 1
            else:
                fp += 1
            continue
        assert out.verdict is not None
        label = out.verdict.label
        if label is VerdictLabel.NOT_SURE:
            abstained += 1
        elif label is VerdictLabel.YES_HALLUCINATED:
            tp, fp = (tp + 1, fp) if gold else (tp, fp + 1)
        else:
            fn, tn = (fn + 1, tn) if gold else (fn, tn + 1)
    return tp, fp, tn, fn, abstained, invalid


def aggregate_report(outcomes: Sequence[TaskOutcome],
                     strata: Optional[dict[str, MetricsReport]] = None,
                     ) -> MetricsReport:
    tp, fp, tn, fn, abstained, invalid = _confusion(outcomes)
    return build_metrics_report(tp, fp, tn, fn, abstained, invalid, strata)


BREAKDOWN_KEYS = ("difficulty", "category", "tag")


def _stratum_of(task: EvalTask, key: str) -> str:
    if key == "difficulty":
        return task.record.difficulty.value
    if key == "category":
        return task.record.category.value
    if key == "tag":
        # first tag is the item's principal stratum; multi-tag items would
        # otherwise break the partition property
        return task.item.tags[0] if task.item.tags else "untagged"
    raise ValueError(f"unknown breakdown key {key!r}")


def breakdown_by(outcomes: Sequence[TaskOutcome], key: str,
                 ) -> dict[str, MetricsReport]:
    """Per-stratum reports; strata partition the tasks exactly."""
    groups: dict[str, list[TaskOutcome]] = {}
    for out in outcomes:
        groups.setdefault(_stratum_of(out.task, key), []).append(out)
    return {stratum: aggregate_report(group)
            for stratum, group in sorted(groups.items())}


def _ask_detector(detector: ProviderClient, task: EvalTask,
                  temperature: float) -> TaskOutcome:
    """Query once, re-ask once on a bad reply, then mark invalid."""
    system, user = build_detection_prompt(task)
    params = SamplingParams(temperature=temperature, max_tokens=16)
    for _ in range(2):
        try:
            raw = detector.complete(system, user, params)
            return TaskOutcome(task=task, verdict=parse_verdict(raw, task.protocol))
        except VerdictParseError:
            continue
        except ProviderError as exc:
            log.warning("detector failed on item %s: %s", task.item.id, exc)
            return TaskOutcome(task=task, verdict=None, invalid=True,
                               provider_failed=True)
    return TaskOutcome(task=task, verdict=None, invalid=True)


def evaluate(benchmark: Sequence[HallucinationRecord], items: Sequence[QAItem],
             detector: ProviderClient, protocol: str = "binary",
             knowledge_shown: bool = False, seed: int = 0, workers: int = 8,
             temperature: float = DETECTOR_TEMPERATURE,
             ) -> tuple[MetricsReport, list[TaskOutcome]]:
    """Evaluate a detector over a benchmark; returns the stratified report.

    Tasks are shuffled with the seed, queried concurrently, and reduced by
    one aggregator, so the report is independent of completion order.
    """
    if not benchmark:
        raise ValueError("evaluate requires a non-empty benchmark")
    by_id = {item.id: item for item in items}
    tasks = build_task_set(benchmark, by_id, protocol, knowledge_shown)
    random.Random(seed).shuffle(tasks)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(pool.map(
            lambda t: _ask_detector(detector, t, temperature), tasks))
    strata: dict[str, MetricsReport] = {}
    for key in BREAKDOWN_KEYS:
        for stratum, report in breakdown_by(outcomes, key).items():
            strata[f"{key}:{stratum}"] = report
    return aggregate_report(outcomes, strata), outcomes


@dataclass(frozen=True)
class AbstentionStats:
    """Selective-prediction numbers from a ternary run."""

    f1_ns: float
    p_ns: float
    response_rate: float
    degenerate: tuple[str, ...] = ()


def abstention_metrics(outcomes: Sequence[TaskOutcome]) -> AbstentionStats:
    """F1/precision over answered tasks plus the answered fraction."""
    report = aggregate_report(outcomes)
    return AbstentionStats(
        f1_ns=report.f1,
        p_ns=report.precision,
        response_rate=report.response_rate,
        degenerate=report.degenerate,
    )


@dataclass(frozen=True)
class AbstentionReport:
    """Ternary (NS) numbers next to a fresh forced-binary (R) run."""

    f1_ns: float
    p_ns: float
    response_rate: float
    f1_r: float
    p_r: float

    def to_dict(self) -> dict[str, float]:
        return {
            "f1_ns": self.f1_ns,
            "p_ns": self.p_ns,
            "response_rate": self.response_rate,
            "f1_r": self.f1_r,
            "p_r": self.p_r,
        }


def abstention_report(benchmark: Sequence[HallucinationRecord],
                      items: Sequence[QAItem], detector: ProviderClient,
                      knowledge_shown: bool = False, seed: int = 0,
                      workers: int = 8) -> AbstentionReport:
    """Run ternary then a fresh forced-binary pass over the same tasks."""
    _, ternary = evaluate(benchmark, items, detector, "ternary",
                          knowledge_shown, seed, workers)
    ns = abstention_metrics(ternary)
    forced, _ = evaluate(benchmark, items, detector, "binary",
                         knowledge_shown, stable_seed(seed, "forced"), workers)
    return AbstentionReport(
        f1_ns=ns.f1_ns, p_ns=ns.p_ns, response_rate=ns.response_rate,
        f1_r=forced.f1, p_r=forced.precision,
    )
