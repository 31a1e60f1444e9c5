"""The two filter stages: discriminator-ensemble quality voting with
difficulty grading, and correctness checking via bidirectional entailment
plus an optional LLM distinctness check."""

import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from .errors import JudgeParseError, ProviderError
from .models import EntailmentResult, QualityVerdict, SamplingParams
from .providers import ProviderClient
from .prompts import build_distinctness_prompt
from .seeding import stable_seed

log = logging.getLogger(__name__)

RETAIN_RULES = ("any_fooled", "majority_fooled")


def _vote_one(judge: ProviderClient, question: str, candidate: str,
              ground_truth: str, seed: int) -> bool:
    """Run one judge with randomized A/B placement; True means fooled.

    The placement seed derives from (run seed, item id, judge name) so the
    outcome is deterministic and position bias cancels across a corpus. An
    unparseable verdict after the built-in re-ask counts as not fooled:
    noise must never inflate difficulty.
    """
    rng = random.Random(stable_seed(seed, judge.config.name))
    candidate_first = rng.random() < 0.5
    a, b = (candidate, ground_truth) if candidate_first else (ground_truth, candidate)
    try:
        choice = judge.judge_pair(question, a, b)
    except JudgeParseError:
        log.warning("judge %s: unparseable verdict after re-ask; counting as not fooled",
                    judge.config.name)
        return False
    return (choice.chosen == "A") == candidate_first


def ensemble_vote(question: str, candidate: str, ground_truth: str,
                  discriminators: Sequence[ProviderClient],
                  seed: int = 0) -> QualityVerdict:
    """Query every discriminator concurrently and grade the difficulty.

    The fooled list is ordered by provider name, so the verdict is invariant
    to the order the discriminators were supplied in.
    """
    if len(discriminators) < 2:
        raise ValueError("ensemble_vote requires at least 2 discriminators")
    judges = sorted(discriminators, key=lambda j: j.config.name)
    with ThreadPoolExecutor(max_workers=len(judges)) as pool:
        fooled = list(pool.map(
            lambda j: _vote_one(j, question, candidate, ground_truth, seed),
            judges))
    return QualityVerdict.from_votes(fooled)


def retained(verdict: QualityVerdict, rule: str) -> bool:
    """Keep rule for graded candidates: at least one fooled, or a strict majority."""
    if rule == "any_fooled":
        return verdict.fooled_count >= 1
    if rule == "majority_fooled":
        return verdict.fooled_count > len(verdict.fooled) / 2
    raise ValueError(f"unknown retain rule: {rule!r}")


def bidirectional_entailment(h: str, gt: str, nli_provider: ProviderClient,
                             tau: float) -> EntailmentResult:
    """Score semantic closeness in both directions and gate on the minimum.

    A candidate passes (is kept) when min(NLI(h->gt), NLI(gt->h)) < tau,
    i.e. it is genuinely not equivalent to the truth.
    """
    if not h.strip() or not gt.strip():
        raise ValueError("bidirectional_entailment requires non-empty texts")
    forward = nli_provider.nli_entail(h, gt)
    backward = nli_provider.nli_entail(gt, h)
    return EntailmentResult.from_scores(forward, backward, tau)


_DISTINCT_RE = re.compile(r"^\s*(?:answer\s*:\s*)?(different|same)\s*\.?\s*$",
                          re.IGNORECASE)


def llm_distinctness_check(h: str, gt: str, checker: ProviderClient) -> bool:
    """Lightweight semantic comparison: True when the answers differ meaningfully.

    One re-ask on an unparseable reply; still unparseable (or a provider
    failure on the re-ask) is treated as reject and logged.
    """
    system, user = build_distinctness_prompt(h, gt)
    params = SamplingParams(temperature=0.0, max_tokens=8)
    for attempt in range(2):
        try:
            raw = checker.complete(system, user, params)
        except ProviderError as exc:
            log.warning("distinctness checker failed (%s); treating as same", exc)
            return False
        m = _DISTINCT_RE.match(raw)
        if m:
            return m.group(1).lower() == "different"
        log.warning("distinctness checker reply unparseable%s: %r",
                    " after re-ask" if attempt else "", raw)
    return False
