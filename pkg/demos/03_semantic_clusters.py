"""
Semantic structure of a candidate pool
======================================

Clusters a pool of candidate answers by mutual entailment against scripted
NLI scores, measures each cluster's proximity to the gold answer, and runs
the fooled-vs-not-fooled separation test.
"""

from hallugen.analysis import (
    cluster_by_entailment,
    cluster_proximity,
    fooled_separation_test,
    member_level_metrics,
    uniformity_report,
)
from hallugen.providers import MockEmbedClient, MockNliClient

GOLD = "well differentiated tumors were not early cancer in this cohort"

# Three paraphrase families. Members of one family mutually entail each
# other; families do not cross-entail, and none entails the gold answer.
pool = [
    "the tumors were early cancer due to their small size",            # family A
    "because of their small size these tumors were early cancer",      # family A
    "early cancer status follows from the small tumor size",           # family A
    "the tumors were early cancer because of low histological grade",  # family B
    "low histological grade makes these tumors early cancer",          # family B
    "survival outcomes were driven mainly by patient age",             # family C
]
family = {0: "A", 1: "A", 2: "A", 3: "B", 4: "B", 5: "C"}
fooled = [True, True, True, False, False, True]

def scripted_nli(premise: str, hypothesis: str) -> float:
    if premise == hypothesis:
        return 1.0
    if premise in pool and hypothesis in pool:
        same_family = family[pool.index(premise)] == family[pool.index(hypothesis)]
        return 1.0 if same_family else 0.0
    return 0.0  # nothing entails the gold answer


nli = MockNliClient(scripted_nli)

clusters = cluster_by_entailment(pool, GOLD, nli, tau_cluster=0.75,
                                 fooled=fooled)
print(f"{len(clusters)} clusters over {len(pool)} candidates")
for cluster in clusters:
    members = [pool[i][:40] for i in cluster.member_indices]
    print(f"  cluster {cluster.id}: fooled_fraction={cluster.fooled_fraction:.2f} "
          f"contains_gold={cluster.contains_ground_truth}")
    for text in members:
        print(f"      - {text}...")

# Uniformity: clusters tend to be all-fooling or all-caught; the gold
# answer should sit in its own cluster.
report = uniformity_report(clusters, fooled)
print(f"\npure-cluster fraction: {report.pure_fraction:.2f}")
print(f"gold answer isolated:  {report.ground_truth_isolated}")

# Proximity of each cluster to the gold answer (hash embeddings here; a
# real embedder plugs in through the same provider interface).
embedder = MockEmbedClient(dim=24)
for cluster in clusters:
    if not cluster.member_indices:
        continue
    stats = cluster_proximity(cluster, pool, GOLD, embedder)
    print(f"cluster {cluster.id}: mean cosine={stats.mean_cosine:+.3f} "
          f"euclidean={stats.mean_euclidean:.3f} rouge1={stats.mean_rouge1_f1:.3f}")

# Member-level separation test: do detector-fooling candidates sit closer
# to the gold answer than caught ones?
values = member_level_metrics(pool, GOLD, embedder)
for metric, result in fooled_separation_test(values, fooled).items():
    if result.computable:
        print(f"{metric:<10} fooled={result.mean_fooled:+.3f} "
              f"caught={result.mean_not_fooled:+.3f} p={result.p_value:.3f}")
    else:
        print(f"{metric:<10} not computable: {result.reason}")
