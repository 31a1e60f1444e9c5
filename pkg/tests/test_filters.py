import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hallugen.filters import (
    bidirectional_entailment,
    ensemble_vote,
    llm_distinctness_check,
    retained,
)
from hallugen.models import Difficulty, QualityVerdict
from hallugen.providers import (
    MockGenerateClient,
    MockJudgeClient,
    MockNliClient,
    judge_avoids_text,
    judge_prefers_text,
)

GT = "the treatment reduces mortality"
CAND = "the treatment increases appetite"
Q = "does the treatment work?"


def judges(pattern: str) -> list[MockJudgeClient]:
    out = []
    for i, ch in enumerate(pattern):
        script = judge_avoids_text(GT) if ch == "f" else judge_prefers_text(GT)
        out.append(MockJudgeClient(script, name=f"judge-{chr(97 + i)}"))
    return out


class TestEnsembleVote:
    def test_all_fooled_is_hard(self):
        v = ensemble_vote(Q, CAND, GT, judges("fff"))
        assert v.fooled_count == 3 and v.difficulty is Difficulty.HARD

    def test_one_fooled_is_easy(self):
        v = ensemble_vote(Q, CAND, GT, judges("fnn"))
        assert v.difficulty is Difficulty.EASY

    def test_none_fooled_is_failed(self):
        v = ensemble_vote(Q, CAND, GT, judges("nnn"))
        assert v.fooled_count == 0 and v.difficulty is Difficulty.FAILED

    def test_requires_two_judges(self):
        with pytest.raises(ValueError):
            ensemble_vote(Q, CAND, GT, judges("f"))

    def test_order_invariance(self):
        panel = judges("fnf")
        for perm in itertools.permutations(panel):
            v = ensemble_vote(Q, CAND, GT, list(perm), seed=7)
            assert v.fooled == (True, False, True)  # name order: a, b, c

    def test_parse_error_counts_as_not_fooled(self):
        bad = MockJudgeClient(lambda q, a, b: "mumble", name="judge-x")
        panel = judges("ff") + [bad]
        v = ensemble_vote(Q, CAND, GT, panel)
        assert v.fooled_count == 2 and v.difficulty is Difficulty.MEDIUM

    def test_position_blindness_of_derandomization(self):
        # a judge with a fixed preference must yield the same fooled outcome
        # under every placement seed
        for seed in range(25):
            v = ensemble_vote(Q, CAND, GT, judges("fnn"), seed=seed)
            assert v.fooled == (True, False, False)


class TestRetained:
    def test_any_fooled_single(self):
        v = QualityVerdict.from_votes([True, False, False])
        assert retained(v, "any_fooled")
        assert not retained(v, "majority_fooled")

    def test_majority_two_of_three(self):
        v = QualityVerdict.from_votes([True, True, False])
        assert retained(v, "majority_fooled")

    def test_majority_exact_half_fails(self):
        v = QualityVerdict.from_votes([True, True, False, False])
        assert not retained(v, "majority_fooled")

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            retained(QualityVerdict.from_votes([True, False]), "quorum")

    @given(st.lists(st.booleans(), min_size=2, max_size=6))
    def test_rule_monotonicity(self, votes):
        v = QualityVerdict.from_votes(votes)
        if retained(v, "majority_fooled"):
            assert retained(v, "any_fooled")


class TestBidirectionalEntailment:
    def test_min_and_threshold(self):
        nli = MockNliClient({(CAND, GT): 0.9, (GT, CAND): 0.6})
        r = bidirectional_entailment(CAND, GT, nli, tau=0.75)
        assert r.forward == 0.9 and r.backward == 0.6
        assert r.score == 0.6 and r.passes

    def test_equal_scores_fail_at_threshold(self):
        nli = MockNliClient(0.8)
        assert not bidirectional_entailment(CAND, GT, nli, tau=0.75).passes

    def test_identical_answers_rejected(self):
        # faithful backend contract: p entails p with probability 1
        r = bidirectional_entailment(GT, GT, MockNliClient(), tau=0.75)
        assert r.score == 1.0 and not r.passes

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            bidirectional_entailment("", GT, MockNliClient(), tau=0.75)

    @given(st.floats(0, 1), st.floats(0, 1),
           st.floats(0.05, 0.95), st.floats(0.0, 0.9))
    def test_monotone_in_tau(self, fwd, bwd, tau, bump):
        nli = MockNliClient({("h", "g"): fwd, ("g", "h"): bwd})
        r_low = bidirectional_entailment("h", "g", nli, tau=tau)
        r_high = bidirectional_entailment("h", "g", nli, tau=min(tau + bump, 1.0 - 1e-9))
        if r_low.passes:
            assert r_high.passes


class TestDistinctnessCheck:
    def test_scripted_different(self):
        assert llm_distinctness_check("a", "b", MockGenerateClient("different"))

    def test_scripted_same(self):
        assert not llm_distinctness_check("a", "b", MockGenerateClient("same"))

    def test_identity_with_honest_checker(self):
        def honest(system, user, params):
            # the two answers appear on the first two lines of the prompt
            lines = user.splitlines()
            a = lines[0].split(": ", 1)[1]
            b = lines[1].split(": ", 1)[1]
            return "same" if a == b else "different"

        checker = MockGenerateClient(honest)
        assert not llm_distinctness_check(GT, GT, checker)
        assert llm_distinctness_check(CAND, GT, checker)

    def test_unparseable_after_reask_rejects(self):
        assert not llm_distinctness_check("a", "b", MockGenerateClient("hmm"))

    def test_reask_recovers(self):
        checker = MockGenerateClient(["garbled", "different"])
        assert llm_distinctness_check("a", "b", checker)

    def test_provider_failure_rejects(self):
        broken = MockGenerateClient("different", fail_first=99, max_retries=0)
        assert not llm_distinctness_check("a", "b", broken)
