"""Semantic structure of candidate pools.

Clusters candidate answers by mutual entailment with the ground truth,
measures each cluster's proximity to the truth (cosine, Euclidean,
unigram-overlap F1), tests whether detector-fooling members sit closer to
the truth, and reports cluster uniformity and ground-truth isolation.
"""

import math
import string
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
from scipy import stats

from .providers import ProviderClient

# representative_index value marking "the ground truth itself"
GROUND_TRUTH_INDEX = -1


@dataclass(frozen=True)
class Cluster:
    """One semantic cluster over a response pool.

    member_indices index into the response list; the ground truth is never a
    member (it is tracked via contains_ground_truth). A cluster opened by
    the ground truth alone has representative_index == GROUND_TRUTH_INDEX
    and no members.
    """

    id: int
    member_indices: tuple[int, ...]
    representative_index: int
    contains_ground_truth: bool
    fooled_fraction: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "member_indices", tuple(self.member_indices))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "member_indices": list(self.member_indices),
            "representative_index": self.representative_index,
            "contains_ground_truth": self.contains_ground_truth,
            "fooled_fraction": self.fooled_fraction,
        }


@dataclass(frozen=True)
class ProximityStats:
    """Mean closeness of a cluster's members to the ground truth."""

    mean_cosine: float
    mean_euclidean: float
    mean_rouge1_f1: float
    n: int


def _bidirectional(nli: ProviderClient, a: str, b: str) -> float:
    return min(nli.nli_entail(a, b), nli.nli_entail(b, a))


def cluster_by_entailment(responses: Sequence[str], ground_truth: str,
                          nli_provider: ProviderClient, tau_cluster: float,
                          fooled: Optional[Sequence[bool]] = None,
                          ) -> list[Cluster]:
    """Greedy representative clustering of responses, ground truth last.

    Each response joins the first existing cluster whose representative it
    mutually entails (bidirectional score >= tau_cluster), else opens a new
    cluster. Input order is semantic: it pins the outcome when the scored
    relation is not transitive.
    """
    if not responses:
        raise ValueError("cluster_by_entailment requires at least one response")
    if not 0.0 < tau_cluster < 1.0:
        raise ValueError(f"tau_cluster {tau_cluster} outside (0, 1)")
    if fooled is not None and len(fooled) != len(responses):
        raise ValueError("fooled labels must align with responses")

    reps: list[int] = []          # representative response index per cluster
    members: list[list[int]] = []
    for idx, text in enumerate(responses):
        placed = False
        for cid, rep_idx in enumerate(reps):
            if _bidirectional(nli_provider, text, responses[rep_idx]) >= tau_cluster:
                members[cid].append(idx)
                placed = True
                break
        if not placed:
            reps.append(idx)
            members.append([idx])

    gt_cluster: Optional[int] = None
    for cid, rep_idx in enumerate(reps):
        if _bidirectional(nli_provider, ground_truth, responses[rep_idx]) >= tau_cluster:
            gt_cluster = cid
            break

    clusters = []
    for cid, (rep_idx, idxs) in enumerate(zip(reps, members)):
        if fooled is not None:
            frac = sum(fooled[i] for i in idxs) / len(idxs)
        else:
            frac = 0.0
        clusters.append(Cluster(
            id=cid,
            member_indices=tuple(idxs),
            representative_index=rep_idx,
            contains_ground_truth=(cid == gt_cluster),
            fooled_fraction=frac,
        ))
    if gt_cluster is None:
        clusters.append(Cluster(
            id=len(clusters),
            member_indices=(),
            representative_index=GROUND_TRUTH_INDEX,
            contains_ground_truth=True,
            fooled_fraction=0.0,
        ))
    return clusters


_PUNCT = string.punctuation


def _tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokens with surrounding punctuation stripped."""
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(_PUNCT)
        if tok:
            tokens.append(tok)
    return tokens


def rouge1_f1(candidate: str, reference: str) -> float:
    """Unigram overlap F1 with clipped counts; 0.0 when either side is empty."""
    cand = _tokenize(candidate)
    ref = _tokenize(reference)
    if not cand or not ref:
        return 0.0
    ref_counts: dict[str, int] = {}
    for tok in ref:
        ref_counts[tok] = ref_counts.get(tok, 0) + 1
    overlap = 0
    for tok in cand:
        if ref_counts.get(tok, 0) > 0:
            overlap += 1
            ref_counts[tok] -= 1
    if overlap == 0:
        return 0.0
    precision = overlap / len(cand)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def vector_metrics(u: Sequence[float], v: Sequence[float]) -> tuple[float, float]:
    """(cosine similarity, Euclidean distance) between two equal-length vectors."""
    a = np.asarray(u, dtype=float)
    b = np.asarray(v, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for a zero-norm vector")
    cosine = float(np.dot(a, b) / (na * nb))
    euclidean = float(np.linalg.norm(a - b))
    return cosine, euclidean


def cluster_proximity(cluster: Cluster, responses: Sequence[str],
                      ground_truth: str, embedder: ProviderClient,
                      ) -> ProximityStats:
    """Average member proximity to the ground truth.

    The ground truth never contributes to its own cluster's averages: only
    response members are measured.
    """
    if not cluster.member_indices:
        raise ValueError(f"cluster {cluster.id} has no response members")
    gt_vec = embedder.embed(ground_truth)
    cosines, euclids, rouges = [], [], []
    for idx in cluster.member_indices:
        cos, euc = vector_metrics(embedder.embed(responses[idx]), gt_vec)
        cosines.append(cos)
        euclids.append(euc)
        rouges.append(rouge1_f1(responses[idx], ground_truth))
    n = len(cluster.member_indices)
    return ProximityStats(
        mean_cosine=sum(cosines) / n,
        mean_euclidean=sum(euclids) / n,
        mean_rouge1_f1=sum(rouges) / n,
        n=n,
    )


def member_level_metrics(responses: Sequence[str], ground_truth: str,
                         embedder: ProviderClient) -> dict[str, list[float]]:
    """Per-response proximity values against the ground truth."""
    gt_vec = embedder.embed(ground_truth)
    out: dict[str, list[float]] = {"cosine": [], "euclidean": [], "rouge1_f1": []}
    for text in responses:
        cos, euc = vector_metrics(embedder.embed(text), gt_vec)
        out["cosine"].append(cos)
        out["euclidean"].append(euc)
        out["rouge1_f1"].append(rouge1_f1(text, ground_truth))
    return out


@dataclass(frozen=True)
class SeparationResult:
    """Welch two-sample comparison of one metric between fooled groups."""

    metric: str
    mean_fooled: Optional[float]
    mean_not_fooled: Optional[float]
    p_value: Optional[float]
    reason: str = ""

    @property
    def computable(self) -> bool:
        return self.p_value is not None


_VAR_EPS = 1e-24


def welch_t_test(group_a: Sequence[float], group_b: Sequence[float]) -> float:
    """Two-sided Welch's t-test p-value with an epsilon variance guard.

    The guard keeps zero-variance groups well-defined: identical groups give
    p = 1, separated constant groups give p near 0.
    """
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("welch_t_test requires >= 2 samples per group")
    va = float(np.var(a, ddof=1))
    vb = float(np.var(b, ddof=1))
    sa = va / len(a)
    sb = vb / len(b)
    se2 = sa + sb
    t = (float(a.mean()) - float(b.mean())) / math.sqrt(se2 + _VAR_EPS)
    denom = (sa ** 2) / (len(a) - 1) + (sb ** 2) / (len(b) - 1)
    if denom <= 0.0:
        df = float(len(a) + len(b) - 2)
    else:
        df = (se2 ** 2) / denom
    return float(2.0 * stats.t.sf(abs(t), df))


def fooled_separation_test(member_values: dict[str, Sequence[float]],
                           fooled: Sequence[bool]) -> dict[str, SeparationResult]:
    """Per-metric Welch test of fooled vs not-fooled member values.

    A group smaller than 2 makes the metric not-computable; that is reported
    explicitly rather than defaulted.
    """
    fooled = list(fooled)
    results: dict[str, SeparationResult] = {}
    for metric, values in member_values.items():
        values = list(values)
        if len(values) != len(fooled):
            raise ValueError(f"{metric}: values and fooled labels misaligned")
        group_f = [v for v, f in zip(values, fooled) if f]
        group_n = [v for v, f in zip(values, fooled) if not f]
        if len(group_f) < 2 or len(group_n) < 2:
            results[metric] = SeparationResult(
                metric=metric,
                mean_fooled=(sum(group_f) / len(group_f)) if group_f else None,
                mean_not_fooled=(sum(group_n) / len(group_n)) if group_n else None,
                p_value=None,
                reason=f"needs >= 2 samples per group "
                       f"(fooled={len(group_f)}, not_fooled={len(group_n)})",
            )
            continue
        results[metric] = SeparationResult(
            metric=metric,
            mean_fooled=sum(group_f) / len(group_f),
            mean_not_fooled=sum(group_n) / len(group_n),
            p_value=welch_t_test(group_f, group_n),
        )
    return results


@dataclass(frozen=True)
class UniformityReport:
    """Cluster purity and ground-truth isolation summary."""

    per_cluster_fooled_fraction: dict[int, float]
    pure_fraction: float
    ground_truth_isolated: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_cluster_fooled_fraction": {
                str(k): v for k, v in sorted(self.per_cluster_fooled_fraction.items())
            },
            "pure_fraction": self.pure_fraction,
            "ground_truth_isolated": self.ground_truth_isolated,
        }


def uniformity_report(clusters: Sequence[Cluster],
                      fooled: Sequence[bool]) -> UniformityReport:
    """Fraction of pure clusters (all-fooled or none-fooled) and GT isolation.

    Purity is judged over response-bearing clusters; a cluster the ground
    truth opened alone has nothing to be pure about. The ground truth is
    isolated when no hallucinated response shares its cluster.
    """
    fractions: dict[int, float] = {}
    pure = 0
    bearing = 0
    isolated = True
    for cluster in clusters:
        if cluster.contains_ground_truth and cluster.member_indices:
            isolated = False
        if not cluster.member_indices:
            continue
        bearing += 1
        frac = sum(fooled[i] for i in cluster.member_indices) / len(cluster.member_indices)
        fractions[cluster.id] = frac
        if frac in (0.0, 1.0):
            pure += 1
    return UniformityReport(
        per_cluster_fooled_fraction=fractions,
        pure_fraction=pure / bearing if bearing else 1.0,
        ground_truth_isolated=isolated,
    )
