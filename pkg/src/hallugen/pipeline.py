"""Per-item hallucination synthesis loop.

Each item goes through up to ``attempt_budget`` rounds of: generate a
candidate, gate it (length window, discriminator-ensemble quality vote,
bidirectional-entailment correctness), and on failure critique it and
regenerate once within the same round with the critique appended to the
prompt. When the budget exhausts, the stored candidate closest to the
ground truth in embedding space is emitted as an easy fallback record.
"""

import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

from .analysis import vector_metrics
from .errors import ConfigError, GenerationParseError, PipelineError, ProviderError
from .filters import (
    RETAIN_RULES,
    bidirectional_entailment,
    ensemble_vote,
    llm_distinctness_check,
    retained,
)
from .models import (
    CandidateAnswer,
    Difficulty,
    EntailmentResult,
    HallucinationCategory,
    HallucinationRecord,
    QAItem,
    QualityVerdict,
    SamplingParams,
    word_count,
)
from .prompts import build_critique_prompt, build_generation_prompt
from .providers import ClientRegistry, ProviderClient, ProviderConfig
from .seeding import stable_seed

log = logging.getLogger(__name__)

# closed-interval boundary tolerance for the length window (|ratio-1| <= w)
_WINDOW_EPS = 1e-9


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs and provider roles for the synthesis loop."""

    generator: ProviderConfig
    discriminators: tuple[ProviderConfig, ...]
    nli: ProviderConfig
    embedder: ProviderConfig
    critic: ProviderConfig
    distinctness_checker: Optional[ProviderConfig] = None
    attempt_budget: int = 5
    tau: float = 0.75
    length_window: float = 0.10
    temperature_band: tuple[float, float] = (0.3, 0.7)
    retain_rule: str = "any_fooled"
    extra_llm_correctness: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "discriminators", tuple(self.discriminators))
        if len(self.discriminators) < 2:
            raise ConfigError("pipeline requires at least 2 discriminators")
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau {self.tau} outside (0, 1)")
        if not 0.0 < self.length_window < 1.0:
            raise ConfigError(f"length_window {self.length_window} outside (0, 1)")
        lo, hi = self.temperature_band
        if not (0.0 <= lo <= hi <= 1.0):
            raise ConfigError(f"temperature_band {self.temperature_band} invalid")
        if self.attempt_budget < 1:
            raise ConfigError("attempt_budget must be >= 1")
        if self.retain_rule not in RETAIN_RULES:
            raise ConfigError(f"unknown retain_rule {self.retain_rule!r}")
        if self.extra_llm_correctness and self.distinctness_checker is None:
            raise ConfigError("extra_llm_correctness requires a distinctness_checker")


@dataclass
class ProviderSet:
    """Live clients resolved from a PipelineConfig."""

    generator: ProviderClient
    discriminators: list[ProviderClient]
    nli: ProviderClient
    embedder: ProviderClient
    critic: ProviderClient
    distinctness: Optional[ProviderClient] = None

    @classmethod
    def resolve(cls, cfg: PipelineConfig, registry: ClientRegistry) -> "ProviderSet":
        return cls(
            generator=registry.resolve(cfg.generator),
            discriminators=[registry.resolve(d) for d in cfg.discriminators],
            nli=registry.resolve(cfg.nli),
            embedder=registry.resolve(cfg.embedder),
            critic=registry.resolve(cfg.critic),
            distinctness=(registry.resolve(cfg.distinctness_checker)
                          if cfg.distinctness_checker else None),
        )


_CATEGORY_RE = re.compile(r"^\s*category\s*:\s*(.+?)\s*$", re.IGNORECASE | re.MULTILINE)
_ANSWER_RE = re.compile(r"^\s*answer\s*:\s*(.+)\s*$",
                        re.IGNORECASE | re.MULTILINE | re.DOTALL)


def parse_generation_reply(reply: str) -> tuple[HallucinationCategory, str]:
    """Split a structured generator reply into (category, answer text)."""
    cat_m = _CATEGORY_RE.search(reply)
    ans_m = _ANSWER_RE.search(reply)
    if not cat_m or not ans_m:
        raise GenerationParseError(f"reply missing category or answer: {reply[:120]!r}")
    try:
        category = HallucinationCategory.parse(cat_m.group(1))
    except ValueError as exc:
        raise GenerationParseError(str(exc)) from exc
    text = ans_m.group(1).strip()
    if not text:
        raise GenerationParseError("empty answer text")
    return category, text


def generate_candidate(item: QAItem, attempt_index: int,
                       prior_feedback: Optional[list[str]],
                       cfg: PipelineConfig, generator: ProviderClient,
                       rng_seed: int) -> CandidateAnswer:
    """One generation call: draw a temperature, prompt, parse, measure length."""
    if attempt_index > cfg.attempt_budget:
        raise ValueError("attempt_index exceeds the attempt budget")
    rng = random.Random(rng_seed)
    lo, hi = cfg.temperature_band
    params = SamplingParams(temperature=lo + rng.random() * (hi - lo), seed=rng_seed)
    system, user = build_generation_prompt(item, prior_feedback)
    reply = generator.complete(system, user, params)
    category, text = parse_generation_reply(reply)
    return CandidateAnswer(
        text=text,
        category=category,
        attempt_index=attempt_index,
        refined=bool(prior_feedback),
        sampling=params,
        length_ratio=word_count(text) / word_count(item.ground_truth),
    )


def length_window_check(candidate: CandidateAnswer, cfg: PipelineConfig) -> bool:
    """True when the candidate length is within the closed +/-window of the truth."""
    return abs(candidate.length_ratio - 1.0) <= cfg.length_window + _WINDOW_EPS


def critique(candidate: CandidateAnswer, item: QAItem, verdicts: QualityVerdict,
             critic: ProviderClient) -> str:
    """Ask the critic why the candidate is detectable; provider errors propagate."""
    system, user = build_critique_prompt(
        candidate.text, item, verdicts.fooled_count if verdicts else 0,
        len(verdicts.fooled) if verdicts else 0)
    return critic.complete(system, user, SamplingParams(temperature=0.3, max_tokens=256))


def fallback_select(candidates: list[CandidateAnswer], item: QAItem,
                    embedder: ProviderClient) -> CandidateAnswer:
    """Pick the stored candidate whose embedding is closest (cosine) to the truth.

    Exact ties go to the earliest generation, so reruns are stable.
    """
    if not candidates:
        raise ValueError("fallback_select requires at least one candidate")
    gt_vec = embedder.embed(item.ground_truth)
    best: Optional[CandidateAnswer] = None
    best_cos = float("-inf")
    for cand in candidates:
        cos, _ = vector_metrics(embedder.embed(cand.text), gt_vec)
        if cos > best_cos:
            best, best_cos = cand, cos
    assert best is not None
    return best


@dataclass
class _GateOutcome:
    status: str  # accept | length | quality | correctness
    verdict: Optional[QualityVerdict] = None
    entailment: Optional[EntailmentResult] = None


def _gate(candidate: CandidateAnswer, item: QAItem, cfg: PipelineConfig,
          providers: ProviderSet, vote_seed: int) -> _GateOutcome:
    """Run the cheap-first gate chain on one candidate."""
    if not length_window_check(candidate, cfg):
        return _GateOutcome("length")
    verdict = ensemble_vote(item.question, candidate.text, item.ground_truth,
                            providers.discriminators, seed=vote_seed)
    if not retained(verdict, cfg.retain_rule):
        return _GateOutcome("quality", verdict)
    ent = bidirectional_entailment(candidate.text, item.ground_truth,
                                   providers.nli, cfg.tau)
    if not ent.passes:
        return _GateOutcome("correctness", verdict, ent)
    if cfg.extra_llm_correctness and providers.distinctness is not None:
        if not llm_distinctness_check(candidate.text, item.ground_truth,
                                      providers.distinctness):
            return _GateOutcome("correctness", verdict, ent)
    return _GateOutcome("accept", verdict, ent)


def run_pipeline(item: QAItem, cfg: PipelineConfig, providers: ProviderSet,
                 rng_seed: int) -> HallucinationRecord:
    """Synthesize one hallucination record for one item.

    rng_seed should already be item-specific (derived from the run seed and
    the item id) so items never perturb each other's draws.
    """
    if not item.knowledge:
        raise PipelineError(f"item {item.id}: generation requires knowledge passages")
    candidates: list[CandidateAnswer] = []
    entailments: dict[int, EntailmentResult] = {}
    feedback_log: list[str] = []
    vote_seed = stable_seed(rng_seed, "ab-placement")

    def reject(cand: CandidateAnswer, outcome: _GateOutcome) -> None:
        candidates.append(cand)
        if outcome.entailment is not None:
            entailments[len(candidates) - 1] = outcome.entailment

    def success(cand: CandidateAnswer, outcome: _GateOutcome,
                attempt: int) -> HallucinationRecord:
        assert outcome.verdict is not None and outcome.entailment is not None
        return HallucinationRecord(
            item_id=item.id,
            hallucinated_answer=cand.text,
            category=cand.category,
            difficulty=outcome.verdict.difficulty,
            fallback_used=False,
            attempts_made=attempt,
            entailment=outcome.entailment,
            feedback_log=tuple(feedback_log),
            rejected_candidates=tuple(candidates),
        )

    for attempt in range(1, cfg.attempt_budget + 1):
        try:
            base = generate_candidate(
                item, attempt, None, cfg, providers.generator,
                stable_seed(rng_seed, "gen", attempt, "base"))
        except GenerationParseError as exc:
            log.warning("item %s attempt %d: %s", item.id, attempt, exc)
            continue
        outcome = _gate(base, item, cfg, providers, vote_seed)
        if outcome.status == "accept":
            return success(base, outcome, attempt)
        reject(base, outcome)

        # second chance within the same attempt: critiqued refinement for
        # detectability failures, plain regeneration for mechanical ones
        second_feedback: Optional[list[str]] = None
        if outcome.status in ("quality", "correctness"):
            try:
                feedback_log.append(critique(base, item, outcome.verdict,
                                             providers.critic))
                second_feedback = list(feedback_log)
            except ProviderError as exc:
                log.warning("item %s attempt %d: critic failed (%s); "
                            "regenerating without feedback", item.id, attempt, exc)
        try:
            second = generate_candidate(
                item, attempt, second_feedback, cfg, providers.generator,
                stable_seed(rng_seed, "gen", attempt, "second"))
        except GenerationParseError as exc:
            log.warning("item %s attempt %d (second): %s", item.id, attempt, exc)
            continue
        outcome2 = _gate(second, item, cfg, providers, vote_seed)
        if outcome2.status == "accept":
            return success(second, outcome2, attempt)
        reject(second, outcome2)

    if not candidates:
        raise PipelineError(
            f"item {item.id}: no parseable candidate in {cfg.attempt_budget} attempts")
    winner = fallback_select(candidates, item, providers.embedder)
    winner_idx = candidates.index(winner)
    rejected = tuple(c for i, c in enumerate(candidates) if i != winner_idx)
    return HallucinationRecord(
        item_id=item.id,
        hallucinated_answer=winner.text,
        category=winner.category,
        difficulty=Difficulty.EASY,
        fallback_used=True,
        attempts_made=cfg.attempt_budget,
        entailment=entailments.get(winner_idx),
        feedback_log=tuple(feedback_log),
        rejected_candidates=rejected,
    )


@dataclass
class RunSummary:
    """Aggregate accounting for one generation run."""

    n_items: int = 0
    n_records: int = 0
    fallback_count: int = 0
    difficulty_counts: dict[str, int] = field(default_factory=dict)
    category_counts: dict[str, int] = field(default_factory=dict)
    errored: list[dict[str, str]] = field(default_factory=list)
    provider_calls: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_items": self.n_items,
            "n_records": self.n_records,
            "fallback_count": self.fallback_count,
            "difficulty_counts": dict(sorted(self.difficulty_counts.items())),
            "category_counts": dict(sorted(self.category_counts.items())),
            "errored": self.errored,
            "provider_calls": self.provider_calls,
        }


def run_corpus(items: list[QAItem], cfg: PipelineConfig, providers: ProviderSet,
               run_seed: int, workers: int = 4,
               ) -> tuple[list[HallucinationRecord], RunSummary]:
    """Run the pipeline over a corpus with a bounded worker pool.

    Emission order follows input order regardless of completion order; an
    item that hits an unrecoverable provider failure lands in the errored
    list, never half-built in the record stream.
    """
    summary = RunSummary(n_items=len(items))

    def one(item: QAItem) -> HallucinationRecord | Exception:
        try:
            return run_pipeline(item, cfg, providers, stable_seed(run_seed, item.id))
        except (ProviderError, PipelineError) as exc:
            return exc

    records: list[HallucinationRecord] = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for item, result in zip(items, pool.map(one, items)):
            if isinstance(result, Exception):
                log.error("item %s errored: %s", item.id, result)
                summary.errored.append({"item_id": item.id, "error": str(result)})
                continue
            records.append(result)
            summary.n_records += 1
            summary.fallback_count += int(result.fallback_used)
            d = result.difficulty.value
            c = result.category.value
            summary.difficulty_counts[d] = summary.difficulty_counts.get(d, 0) + 1
            summary.category_counts[c] = summary.category_counts.get(c, 0) + 1
    return records, summary
