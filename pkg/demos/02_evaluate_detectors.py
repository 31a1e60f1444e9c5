"""
Evaluating hallucination detectors
==================================

Builds a small benchmark with known gold labels, then scores three scripted
detectors under the binary and ternary (abstention) protocols: an oracle,
an always-"yes" baseline, and a timid detector that abstains when unsure.
"""

from hallugen import (
    Difficulty,
    EntailmentResult,
    HallucinationCategory,
    HallucinationRecord,
    QAItem,
)
from hallugen.harness import abstention_report, evaluate
from hallugen.providers import MockGenerateClient

# Each benchmark row pairs a hallucinated answer (sentinel-marked here so
# the scripted oracle can recognize it) with its source item; the harness
# presents both the hallucination and the gold answer, so the task set is
# balanced by construction.
SENTINEL = "zz-wrong"
items, records = [], []
for i in range(30):
    items.append(QAItem(
        id=f"row-{i}", question=f"Does marker {i} predict the outcome?",
        ground_truth=f"marker {i} predicts the outcome in the cohort study",
        knowledge=(f"cohort study {i} background passage",),
        tags=("Diseases" if i % 3 else "Psychiatry",),
    ))
    records.append(HallucinationRecord(
        item_id=f"row-{i}",
        hallucinated_answer=f"marker {i} is {SENTINEL} and unrelated to outcome",
        category=list(HallucinationCategory)[i % 4],
        difficulty=[Difficulty.EASY, Difficulty.MEDIUM, Difficulty.HARD][i % 3],
        fallback_used=False,
        attempts_made=1,
        entailment=EntailmentResult.from_scores(0.2, 0.3, tau=0.75),
    ))


def answer_line(user_prompt: str) -> str:
    return next(l for l in user_prompt.splitlines() if l.startswith("Answer: "))


oracle = MockGenerateClient(
    lambda s, u, p: "Yes" if SENTINEL in answer_line(u) else "No",
    name="oracle")
always_yes = MockGenerateClient("Yes", name="always-yes")


def timid_reply(s, u, p):
    # abstains on hard rows when the ternary option is offered
    row = int(answer_line(u).split()[2])  # "Answer: marker <row> ..."
    if "Not Sure" in u and row % 3 == 2:
        return "Not Sure"
    return "Yes" if SENTINEL in answer_line(u) else "No"


timid = MockGenerateClient(timid_reply, name="timid")

print("binary protocol, knowledge hidden")
for name, detector in [("oracle", oracle), ("always-yes", always_yes)]:
    report, _ = evaluate(records, items, detector, protocol="binary", seed=3)
    print(f"  {name:<11} precision={report.precision:.3f} "
          f"recall={report.recall:.3f} f1={report.f1:.3f} "
          f"accuracy={report.accuracy:.3f}")

# Stratified view: every difficulty/category/tag stratum gets its own report.
report, _ = evaluate(records, items, oracle, protocol="binary", seed=3)
print("\noracle per-difficulty f1:",
      {k.split(":")[1]: round(v.f1, 3)
       for k, v in report.strata.items() if k.startswith("difficulty:")})

# Abstention-aware numbers: ternary run for the NS metrics plus a fresh
# forced-binary run for the R metrics over the same tasks.
stats = abstention_report(records, items, timid, seed=3)
print("\ntimid detector with a 'not sure' option")
print(f"  F1_NS={stats.f1_ns:.3f} P_NS={stats.p_ns:.3f} "
      f"Response%={100 * stats.response_rate:.1f}")
print(f"  F1_R ={stats.f1_r:.3f} P_R ={stats.p_r:.3f}   (forced binary)")
