import collections
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from hallugen.analysis import (
    GROUND_TRUTH_INDEX,
    Cluster,
    cluster_by_entailment,
    cluster_proximity,
    fooled_separation_test,
    member_level_metrics,
    rouge1_f1,
    uniformity_report,
    vector_metrics,
    welch_t_test,
)
from hallugen.providers import MockEmbedClient, MockNliClient


def brute_force_rouge1(candidate: str, reference: str) -> float:
    """Independent clipped-count unigram F1 used as the oracle."""

    def toks(text):
        out = []
        for w in text.lower().split():
            w = w.strip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")
            if w:
                out.append(w)
        return out

    c, r = toks(candidate), toks(reference)
    if not c or not r:
        return 0.0
    overlap = sum(min(collections.Counter(c)[t], collections.Counter(r)[t])
                  for t in set(c))
    if overlap == 0:
        return 0.0
    p = overlap / len(c)
    rec = overlap / len(r)
    return 2 * p * rec / (p + rec)


class TestRouge1:
    def test_identity(self):
        assert rouge1_f1("mitochondria drive apoptosis",
                         "mitochondria drive apoptosis") == 1.0

    def test_hand_counted_case(self):
        assert rouge1_f1("a b c", "c d") == pytest.approx(0.4, abs=1e-12)

    def test_empty_sides(self):
        assert rouge1_f1("", "x") == 0.0
        assert rouge1_f1("x", "") == 0.0
        assert rouge1_f1("...", "x") == 0.0  # punctuation-only tokenizes empty

    def test_case_and_punctuation_insensitive(self):
        assert rouge1_f1("Aspirin, reduces Inflammation.",
                         "aspirin reduces inflammation") == 1.0

    def test_clipped_counts(self):
        # "a a a" vs "a": overlap clipped to 1 -> P=1/3, R=1, F1=0.5
        assert rouge1_f1("a a a", "a") == pytest.approx(0.5, abs=1e-12)

    @given(st.lists(st.sampled_from("abcdef"), max_size=12),
           st.lists(st.sampled_from("abcdef"), max_size=12))
    def test_matches_bruteforce_oracle(self, xs, ys):
        cand, ref = " ".join(xs), " ".join(ys)
        got = rouge1_f1(cand, ref)
        assert got == pytest.approx(brute_force_rouge1(cand, ref), abs=1e-12)
        assert 0.0 <= got <= 1.0


class TestVectorMetrics:
    def test_identical_vectors(self):
        cos, euc = vector_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert cos == pytest.approx(1.0, abs=1e-12)
        assert euc == 0.0

    def test_orthogonal_unit_vectors(self):
        cos, euc = vector_metrics([1.0, 0.0], [0.0, 1.0])
        assert cos == pytest.approx(0.0, abs=1e-12)
        assert euc == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_random_pairs_match_definition(self):
        rng = random.Random(7)
        for _ in range(50):
            u = [rng.uniform(-2, 2) for _ in range(10)]
            v = [rng.uniform(-2, 2) for _ in range(10)]
            cos, euc = vector_metrics(u, v)
            dot = sum(a * b for a, b in zip(u, v))
            nu = math.sqrt(sum(a * a for a in u))
            nv = math.sqrt(sum(b * b for b in v))
            assert cos == pytest.approx(dot / (nu * nv), abs=1e-12)
            assert euc == pytest.approx(
                math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v))), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            vector_metrics([1.0], [1.0, 2.0])

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            vector_metrics([0.0, 0.0], [1.0, 0.0])


def scripted_nli_from_partition(responses, ground_truth, partition, gt_class=None):
    """NLI table for a transitive relation: 1.0 within a class, else 0.0."""
    class_of = {}
    for class_id, members in enumerate(partition):
        for idx in members:
            class_of[responses[idx]] = class_id
    if gt_class is not None:
        class_of[ground_truth] = gt_class

    def score(premise, hypothesis):
        if premise == hypothesis:
            return 1.0
        a = class_of.get(premise)
        b = class_of.get(hypothesis)
        return 1.0 if a is not None and a == b else 0.0

    return MockNliClient(score)


class TestClustering:
    def test_three_paraphrase_groups(self):
        responses = [f"r{i}" for i in range(6)]
        partition = [[0, 2, 4], [1, 5], [3]]
        nli = scripted_nli_from_partition(responses, "gt", partition)
        clusters = cluster_by_entailment(responses, "gt", nli, 0.75)
        sizes = sorted(len(c.member_indices) for c in clusters
                       if c.member_indices)
        assert sizes == [1, 2, 3]
        got = {frozenset(c.member_indices) for c in clusters if c.member_indices}
        assert got == {frozenset(p) for p in partition}

    def test_all_distinct_gives_singletons(self):
        responses = [f"r{i}" for i in range(5)]
        nli = MockNliClient(lambda p, h: 1.0 if p == h else 0.0)
        clusters = cluster_by_entailment(responses, "gt", nli, 0.75)
        bearing = [c for c in clusters if c.member_indices]
        assert len(bearing) == 5
        assert all(len(c.member_indices) == 1 for c in bearing)

    def test_ground_truth_joins_matching_cluster(self):
        responses = ["r0", "r1", "r2"]
        partition = [[0], [1], [2]]
        nli = scripted_nli_from_partition(responses, "gt", partition, gt_class=1)
        clusters = cluster_by_entailment(responses, "gt", nli, 0.75)
        flagged = [c for c in clusters if c.contains_ground_truth]
        assert len(flagged) == 1
        assert flagged[0].member_indices == (1,)

    def test_isolated_ground_truth_opens_own_cluster(self):
        responses = ["r0", "r1"]
        nli = scripted_nli_from_partition(responses, "gt", [[0, 1]])
        clusters = cluster_by_entailment(responses, "gt", nli, 0.75)
        gt_cluster = [c for c in clusters if c.contains_ground_truth][0]
        assert gt_cluster.member_indices == ()
        assert gt_cluster.representative_index == GROUND_TRUTH_INDEX

    def test_partition_property_under_random_relations(self):
        rng = random.Random(11)
        for _ in range(30):
            n = rng.randint(1, 20)
            responses = [f"r{i}" for i in range(n)]
            table = {}
            for a in responses + ["gt"]:
                for b in responses + ["gt"]:
                    table[(a, b)] = 1.0 if a == b else rng.random()
            clusters = cluster_by_entailment(responses, "gt",
                                             MockNliClient(lambda p, h: table[(p, h)]),
                                             0.75)
            seen = sorted(i for c in clusters for i in c.member_indices)
            assert seen == list(range(n))

    def test_transitive_relations_reproduce_equivalence_classes(self):
        rng = random.Random(13)
        for _ in range(30):
            n = rng.randint(1, 25)
            responses = [f"resp {i}" for i in range(n)]
            indices = list(range(n))
            rng.shuffle(indices)
            partition = []
            while indices:
                take = rng.randint(1, len(indices))
                partition.append(indices[:take])
                indices = indices[take:]
            nli = scripted_nli_from_partition(responses, "gt", partition)
            clusters = cluster_by_entailment(responses, "gt", nli, 0.75)
            got = {frozenset(c.member_indices) for c in clusters if c.member_indices}
            assert got == {frozenset(p) for p in partition}

    def test_fooled_fraction_attached(self):
        responses = ["r0", "r1", "r2", "r3"]
        nli = scripted_nli_from_partition(responses, "gt", [[0, 1], [2, 3]])
        clusters = cluster_by_entailment(responses, "gt", nli, 0.75,
                                         fooled=[True, True, True, False])
        by_members = {c.member_indices: c.fooled_fraction
                      for c in clusters if c.member_indices}
        assert by_members[(0, 1)] == 1.0
        assert by_members[(2, 3)] == 0.5

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError):
            cluster_by_entailment([], "gt", MockNliClient(0.5), 0.75)

    def test_determinism(self):
        responses = [f"r{i}" for i in range(8)]
        a = cluster_by_entailment(responses, "gt", MockNliClient(), 0.75)
        b = cluster_by_entailment(responses, "gt", MockNliClient(), 0.75)
        assert a == b


class TestClusterProximity:
    def test_singleton_equals_member_metrics(self):
        embedder = MockEmbedClient(table={"gt": [1.0, 0.0], "only": [0.6, 0.8]})
        cluster = Cluster(id=0, member_indices=(0,), representative_index=0,
                          contains_ground_truth=False, fooled_fraction=0.0)
        got = cluster_proximity(cluster, ["only"], "gt", embedder)
        cos, euc = vector_metrics([0.6, 0.8], [1.0, 0.0])
        assert got.mean_cosine == pytest.approx(cos)
        assert got.mean_euclidean == pytest.approx(euc)
        assert got.mean_rouge1_f1 == rouge1_f1("only", "gt")
        assert got.n == 1

    def test_mean_rouge_is_arithmetic_mean(self):
        # two members with rouge 0.2 and 0.6 against the reference
        reference = "t1 t2 t3 t4 t5"
        m1 = "t1 x2 x3 x4 x5"        # overlap 1: P=R=1/5 -> F1=0.2
        m2 = "t1 t2 t3 x4 x5"        # overlap 3: P=R=3/5 -> F1=0.6
        assert rouge1_f1(m1, reference) == pytest.approx(0.2, abs=1e-12)
        assert rouge1_f1(m2, reference) == pytest.approx(0.6, abs=1e-12)
        embedder = MockEmbedClient(dim=4)
        cluster = Cluster(id=0, member_indices=(0, 1), representative_index=0,
                          contains_ground_truth=False, fooled_fraction=0.0)
        got = cluster_proximity(cluster, [m1, m2], reference, embedder)
        assert got.mean_rouge1_f1 == pytest.approx(0.4, abs=1e-12)

    def test_mean_over_five_members_matches_bruteforce(self):
        responses = [f"member {i} text" for i in range(5)]
        embedder = MockEmbedClient(dim=6)
        cluster = Cluster(id=0, member_indices=tuple(range(5)),
                          representative_index=0, contains_ground_truth=False,
                          fooled_fraction=0.0)
        got = cluster_proximity(cluster, responses, "gt text", embedder)
        gt_vec = embedder.embed("gt text")
        cosines = [vector_metrics(embedder.embed(r), gt_vec)[0] for r in responses]
        euclids = [vector_metrics(embedder.embed(r), gt_vec)[1] for r in responses]
        rouges = [rouge1_f1(r, "gt text") for r in responses]
        assert got.mean_cosine == pytest.approx(sum(cosines) / 5, abs=1e-12)
        assert got.mean_euclidean == pytest.approx(sum(euclids) / 5, abs=1e-12)
        assert got.mean_rouge1_f1 == pytest.approx(sum(rouges) / 5, abs=1e-12)

    def test_ground_truth_only_cluster_rejected(self):
        cluster = Cluster(id=0, member_indices=(),
                          representative_index=GROUND_TRUTH_INDEX,
                          contains_ground_truth=True, fooled_fraction=0.0)
        with pytest.raises(ValueError):
            cluster_proximity(cluster, [], "gt", MockEmbedClient())


class TestWelch:
    def test_identical_groups_p_one(self):
        assert welch_t_test([0.5, 0.6, 0.7], [0.5, 0.6, 0.7]) == pytest.approx(1.0)

    def test_zero_variance_separated_groups(self):
        p = welch_t_test([0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0])
        assert p < 0.01

    def test_matches_reference_statistics_oracle(self):
        # frozen from scipy.stats.ttest_ind(equal_var=False)
        p = welch_t_test([0.61, 0.72, 0.68, 0.75, 0.70], [0.52, 0.49, 0.58, 0.55])
        assert p == pytest.approx(0.0013328870520167074, rel=1e-6)
        p2 = welch_t_test([0.1, 0.2, 0.3, 0.4], [0.3, 0.5, 0.7, 0.9])
        assert p2 == pytest.approx(0.06645858409863338, rel=1e-6)

    def test_agrees_with_scipy_on_random_data(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = rng.normal(0.0, 1.0, size=rng.integers(3, 30))
            b = rng.normal(0.3, 1.5, size=rng.integers(3, 30))
            mine = welch_t_test(a, b)
            ref = scipy_stats.ttest_ind(a, b, equal_var=False).pvalue
            assert mine == pytest.approx(float(ref), rel=1e-9, abs=1e-12)

    def test_small_group_rejected(self):
        with pytest.raises(ValueError):
            welch_t_test([1.0], [0.5, 0.6])


class TestSeparation:
    def test_groups_and_means(self):
        values = {"cosine": [0.9, 0.8, 0.3, 0.2], "rouge1_f1": [0.5, 0.6, 0.1, 0.1]}
        fooled = [True, True, False, False]
        results = fooled_separation_test(values, fooled)
        assert results["cosine"].mean_fooled == pytest.approx(0.85)
        assert results["cosine"].mean_not_fooled == pytest.approx(0.25)
        assert results["cosine"].computable

    def test_small_group_not_computable(self):
        results = fooled_separation_test({"cosine": [0.9, 0.3, 0.2]},
                                         [True, False, False])
        r = results["cosine"]
        assert not r.computable and r.p_value is None
        assert "2 samples" in r.reason
        assert r.mean_fooled == pytest.approx(0.9)

    def test_member_level_metrics_alignment(self):
        embedder = MockEmbedClient(dim=4)
        values = member_level_metrics(["a b", "c d"], "a b", embedder)
        assert values["rouge1_f1"][0] == 1.0
        assert len(values["cosine"]) == 2


class TestUniformity:
    def _clusters(self, memberships, gt_cluster=None):
        clusters = []
        for cid, members in enumerate(memberships):
            clusters.append(Cluster(
                id=cid, member_indices=tuple(members),
                representative_index=members[0] if members else GROUND_TRUTH_INDEX,
                contains_ground_truth=(cid == gt_cluster),
                fooled_fraction=0.0))
        return clusters

    def test_all_singletons_pure(self):
        clusters = self._clusters([[0], [1], [2]])
        report = uniformity_report(clusters, [True, False, True])
        assert report.pure_fraction == 1.0

    def test_mixed_cluster_fraction(self):
        clusters = self._clusters([[0, 1], [2], [3], [4]])
        report = uniformity_report(clusters, [True, False, True, False, True])
        assert report.pure_fraction == 0.75
        assert report.per_cluster_fooled_fraction[0] == 0.5

    def test_ground_truth_isolation_flag(self):
        isolated = self._clusters([[0], [1]], gt_cluster=None)
        isolated.append(Cluster(id=2, member_indices=(),
                                representative_index=GROUND_TRUTH_INDEX,
                                contains_ground_truth=True, fooled_fraction=0.0))
        assert uniformity_report(isolated, [True, False]).ground_truth_isolated

        shared = self._clusters([[0], [1]], gt_cluster=0)
        assert not uniformity_report(shared, [True, False]).ground_truth_isolated
