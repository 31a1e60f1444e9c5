"""Domain types shared across the pipeline, harness, and analysis modules.

Every type is an immutable value with serialization-stable snake_case field
names; ``to_dict``/``from_dict`` round-trip through the JSONL record schema.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional


class HallucinationCategory(str, Enum):
    """Closed set of hallucinated-answer categories."""

    MISINTERPRETATION_OF_QUESTION = "misinterpretation_of_question"
    INCOMPLETE_INFORMATION = "incomplete_information"
    MECHANISM_PATHWAY_MISATTRIBUTION = "mechanism_pathway_misattribution"
    METHODOLOGICAL_EVIDENCE_FABRICATION = "methodological_evidence_fabrication"

    @classmethod
    def parse(cls, token: str) -> "HallucinationCategory":
        """Parse a category token; normalizes case/spacing, rejects anything else."""
        normalized = token.strip().lower().replace(" ", "_").replace("-", "_")
        try:
            return cls(normalized)
        except ValueError:
            raise ValueError(f"unknown hallucination category: {token!r}") from None


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"
    FAILED = "failed"


def grade_difficulty(fooled_count: int, k: int) -> Difficulty:
    """Grade a candidate from how many of k ensemble judges it fooled.

    hard when all k judges were fooled, easy when exactly one was, failed
    when none were, medium otherwise.
    """
    if k < 2:
        raise ValueError(f"ensemble size must be >= 2, got {k}")
    if not 0 <= fooled_count <= k:
        raise ValueError(f"fooled_count {fooled_count} outside [0, {k}]")
    if fooled_count == k:
        return Difficulty.HARD
    if fooled_count == 1:
        return Difficulty.EASY
    if fooled_count == 0:
        return Difficulty.FAILED
    return Difficulty.MEDIUM


@dataclass(frozen=True)
class QAItem:
    """One ground-truth record: question, gold answer, knowledge context, tags."""

    id: str
    question: str
    ground_truth: str
    knowledge: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    split: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("QAItem.id must be non-empty")
        if not self.question.strip():
            raise ValueError(f"QAItem {self.id}: question must be non-empty")
        if not self.ground_truth.strip():
            raise ValueError(f"QAItem {self.id}: ground_truth must be non-empty")
        object.__setattr__(self, "knowledge", tuple(self.knowledge))
        object.__setattr__(self, "tags", tuple(self.tags))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "ground_truth": self.ground_truth,
            "knowledge": list(self.knowledge),
            "tags": list(self.tags),
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QAItem":
        return cls(
            id=d["id"],
            question=d["question"],
            ground_truth=d["ground_truth"],
            knowledge=tuple(d.get("knowledge", ())),
            tags=tuple(d.get("tags", ())),
            split=d.get("split", ""),
        )


@dataclass(frozen=True)
class SamplingParams:
    """Sampling settings recorded with each generation call."""

    temperature: float
    top_p: float = 0.95
    max_tokens: int = 512
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 1]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SamplingParams":
        return cls(
            temperature=d["temperature"],
            top_p=d.get("top_p", 0.95),
            max_tokens=d.get("max_tokens", 512),
            seed=d.get("seed"),
        )


def word_count(text: str) -> int:
    """Whitespace word count; the unit for the length-window check."""
    return len(text.split())


@dataclass(frozen=True)
class CandidateAnswer:
    """One generated hallucination attempt with sampling provenance.

    length_ratio is recorded even when the window check later fails; the
    check is a filter, not a constructor guard.
    """

    text: str
    category: HallucinationCategory
    attempt_index: int
    refined: bool
    sampling: SamplingParams
    length_ratio: float

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("CandidateAnswer.text must be non-empty")
        if self.attempt_index < 1:
            raise ValueError("attempt_index must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "category": self.category.value,
            "attempt_index": self.attempt_index,
            "refined": self.refined,
            "sampling": self.sampling.to_dict(),
            "length_ratio": self.length_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CandidateAnswer":
        return cls(
            text=d["text"],
            category=HallucinationCategory(d["category"]),
            attempt_index=d["attempt_index"],
            refined=d["refined"],
            sampling=SamplingParams.from_dict(d["sampling"]),
            length_ratio=d["length_ratio"],
        )


@dataclass(frozen=True)
class QualityVerdict:
    """Outcome of the discriminator-ensemble quality vote."""

    fooled: tuple[bool, ...]
    fooled_count: int
    difficulty: Difficulty

    def __post_init__(self) -> None:
        object.__setattr__(self, "fooled", tuple(self.fooled))
        if self.fooled_count != sum(self.fooled):
            raise ValueError("fooled_count must equal the number of true entries")
        if self.difficulty != grade_difficulty(self.fooled_count, len(self.fooled)):
            raise ValueError("difficulty inconsistent with fooled votes")

    @classmethod
    def from_votes(cls, fooled: list[bool] | tuple[bool, ...]) -> "QualityVerdict":
        fooled = tuple(fooled)
        count = sum(fooled)
        return cls(fooled=fooled, fooled_count=count,
                   difficulty=grade_difficulty(count, len(fooled)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "fooled": list(self.fooled),
            "fooled_count": self.fooled_count,
            "difficulty": self.difficulty.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QualityVerdict":
        return cls(
            fooled=tuple(d["fooled"]),
            fooled_count=d["fooled_count"],
            difficulty=Difficulty(d["difficulty"]),
        )


@dataclass(frozen=True)
class EntailmentResult:
    """Bidirectional entailment outcome against the ground truth.

    score is exactly min(forward, backward); passes means the candidate is
    semantically far enough from the truth (score < tau).
    """

    forward: float
    backward: float
    score: float
    passes: bool

    def __post_init__(self) -> None:
        for name in ("forward", "backward"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} score {v} outside [0, 1]")
        if self.score != min(self.forward, self.backward):
            raise ValueError("score must equal min(forward, backward)")

    @classmethod
    def from_scores(cls, forward: float, backward: float, tau: float) -> "EntailmentResult":
        score = min(forward, backward)
        return cls(forward=forward, backward=backward, score=score, passes=score < tau)

    def to_dict(self) -> dict[str, Any]:
        return {
            "forward": self.forward,
            "backward": self.backward,
            "score": self.score,
            "passes": self.passes,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EntailmentResult":
        return cls(
            forward=d["forward"],
            backward=d["backward"],
            score=d["score"],
            passes=d["passes"],
        )


@dataclass(frozen=True)
class HallucinationRecord:
    """The finished benchmark row: accepted answer plus full audit trail."""

    item_id: str
    hallucinated_answer: str
    category: HallucinationCategory
    difficulty: Difficulty
    fallback_used: bool
    attempts_made: int
    entailment: Optional[EntailmentResult] = None
    feedback_log: tuple[str, ...] = ()
    rejected_candidates: tuple[CandidateAnswer, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "feedback_log", tuple(self.feedback_log))
        object.__setattr__(self, "rejected_candidates", tuple(self.rejected_candidates))
        if not self.fallback_used:
            if self.entailment is None or not self.entailment.passes:
                raise ValueError(
                    "non-fallback record requires a passing entailment result")
            if self.difficulty not in (Difficulty.EASY, Difficulty.MEDIUM, Difficulty.HARD):
                raise ValueError("non-fallback record difficulty must be easy/medium/hard")
        else:
            if self.difficulty != Difficulty.EASY:
                raise ValueError("fallback records are always graded easy")
        if self.attempts_made < 1:
            raise ValueError("attempts_made must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "hallucinated_answer": self.hallucinated_answer,
            "category": self.category.value,
            "difficulty": self.difficulty.value,
            "fallback_used": self.fallback_used,
            "attempts_made": self.attempts_made,
            "entailment": self.entailment.to_dict() if self.entailment else None,
            "feedback_log": list(self.feedback_log),
            "rejected_candidates": [c.to_dict() for c in self.rejected_candidates],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "HallucinationRecord":
        ent = d.get("entailment")
        return cls(
            item_id=d["item_id"],
            hallucinated_answer=d["hallucinated_answer"],
            category=HallucinationCategory(d["category"]),
            difficulty=Difficulty(d["difficulty"]),
            fallback_used=d["fallback_used"],
            attempts_made=d["attempts_made"],
            entailment=EntailmentResult.from_dict(ent) if ent else None,
            feedback_log=tuple(d.get("feedback_log", ())),
            rejected_candidates=tuple(
                CandidateAnswer.from_dict(c) for c in d.get("rejected_candidates", ())
            ),
        )


class VerdictLabel(str, Enum):
    YES_HALLUCINATED = "yes_hallucinated"
    NOT_HALLUCINATED = "not_hallucinated"
    NOT_SURE = "not_sure"


@dataclass(frozen=True)
class DetectionVerdict:
    """Parsed detector reply; not_sure is only legal under the ternary protocol."""

    label: VerdictLabel
    raw: str

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label.value, "raw": self.raw}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DetectionVerdict":
        return cls(label=VerdictLabel(d["label"]), raw=d["raw"])


@dataclass(frozen=True)
class MetricsReport:
    """Detector evaluation result with optional per-stratum breakdowns.

    precision/recall/f1/accuracy are computed over answered items only;
    abstentions leave the confusion matrix. Degenerate 0/0 ratios are
    reported as 0.0 and the affected metric names listed in `degenerate`.
    `invalid` counts unparseable replies (scored wrong under binary,
    abstained under ternary) so users can re-score.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    abstained: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    response_rate: float
    invalid: int = 0
    degenerate: tuple[str, ...] = ()
    strata: dict[str, "MetricsReport"] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn", "abstained", "invalid"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        object.__setattr__(self, "degenerate", tuple(self.degenerate))

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn + self.abstained

    @property
    def answered(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict[str, Any]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "abstained": self.abstained,
            "invalid": self.invalid,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "response_rate": self.response_rate,
            "degenerate": list(self.degenerate),
            "strata": {k: v.to_dict() for k, v in sorted(self.strata.items())},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MetricsReport":
        return cls(
            tp=d["tp"], fp=d["fp"], tn=d["tn"], fn=d["fn"],
            abstained=d["abstained"],
            precision=d["precision"], recall=d["recall"], f1=d["f1"],
            accuracy=d["accuracy"], response_rate=d["response_rate"],
            invalid=d.get("invalid", 0),
            degenerate=tuple(d.get("degenerate", ())),
            strata={k: cls.from_dict(v) for k, v in d.get("strata", {}).items()},
        )
