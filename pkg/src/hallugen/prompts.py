"""Prompt construction for generation, judging, critique, and detection."""

from .models import QAItem

CATEGORY_GUIDE = """\
misinterpretation_of_question: misreads what the question asks and answers
something adjacent but irrelevant.
  Example question: Does high-dose vitamin C therapy improve survival rates
  in patients with sepsis?
  Example answer: Vitamin C is a water-soluble vitamin that plays a role in
  immune function and collagen synthesis.

incomplete_information: stays on topic but omits the essential details
needed to fully answer the question.
  Example question: How does penicillin treat strep throat?
  Example answer: Penicillin kills bacteria.

mechanism_pathway_misattribution: attributes a biological mechanism,
molecular pathway, or disease process that contradicts established
medical knowledge.
  Example question: What is the primary mechanism of action of aspirin in
  reducing inflammation?
  Example answer: Aspirin primarily reduces inflammation by blocking calcium
  channels in immune cells, which prevents the release of histamine and
  directly suppresses T-cell activation.

methodological_evidence_fabrication: invents research methods, statistical
data, or specific clinical outcomes.
  Example question: What is the success rate of ACL reconstruction surgery?
  Example answer: Recent clinical trials using quantum-guided surgical
  technique showed 99.7% success rate across 10,543 patients with zero
  complications when using gold-infused synthetic grafts.
"""

GENERATION_SYSTEM_PROMPT = f"""\
You write deliberately incorrect medical answers used to stress-test
hallucination detectors. Given a question, its ground-truth answer, and the
supporting knowledge, produce an answer that sounds plausible and stays
close to the ground truth in style and length, yet is factually wrong.

Choose exactly one of these four hallucination categories for your answer:

{CATEGORY_GUIDE}
Keep the answer within roughly 10% of the ground-truth answer's length.

Reply in exactly this format (two fields, nothing else):
category: <one of misinterpretation_of_question | incomplete_information | \
mechanism_pathway_misattribution | methodological_evidence_fabrication>
answer: <your hallucinated answer>
"""


def build_generation_prompt(item: QAItem,
                            prior_feedback: list[str] | tuple[str, ...] | None = None,
                            ) -> tuple[str, str]:
    """Assemble the hallucinated-answer generation prompt for one item.

    Requires non-empty knowledge; prior critiques, when present, are
    appended verbatim in order.
    """
    if not item.knowledge:
        raise ValueError(f"item {item.id}: generation requires non-empty knowledge")
    parts = [
        f"Question: {item.question}",
        f"Ground-truth answer: {item.ground_truth}",
        "Knowledge:",
    ]
    parts.extend(f"- {passage}" for passage in item.knowledge)
    if prior_feedback:
        parts.append("")
        parts.append("Previous attempt critique (address every point):")
        parts.extend(f"{i}. {fb}" for i, fb in enumerate(prior_feedback, 1))
    return GENERATION_SYSTEM_PROMPT, "\n".join(parts)


JUDGE_SYSTEM_PROMPT = """\
You are a careful medical fact checker. You will see a question and two
candidate answers labeled A and B. Decide which answer is more factually
accurate for the question. Reply with exactly one letter: A or B.
"""


def build_judge_prompt(question: str, answer_a: str, answer_b: str) -> tuple[str, str]:
    """Assemble the pairwise quality-judge prompt.

    Deliberately takes no knowledge context: the judge must choose from the
    question and the two answers alone.
    """
    user = (
        f"Question: {question}\n"
        f"Answer A: {answer_a}\n"
        f"Answer B: {answer_b}\n"
        "Which answer is more factually accurate? Reply with exactly one "
        "letter: A or B."
    )
    return JUDGE_SYSTEM_PROMPT, user


CRITIC_SYSTEM_PROMPT = """\
You review machine-written incorrect medical answers that were caught by
detectors. Explain concisely why the answer below is detectable as
artificial, focusing on (1) linguistic patterns that signal artificial
content and (2) structural elements that could be refined to enhance
naturalness. Reply with the critique text only.
"""


def build_critique_prompt(candidate_text: str, item: QAItem,
                          fooled_count: int, k: int) -> tuple[str, str]:
    user = (
        f"Question: {item.question}\n"
        f"Ground-truth answer: {item.ground_truth}\n"
        f"Candidate answer: {candidate_text}\n"
        f"Detection outcome: {k - fooled_count} of {k} reviewers flagged it.\n"
        "Why is this candidate detectable, and what should change?"
    )
    return CRITIC_SYSTEM_PROMPT, user


DISTINCTNESS_SYSTEM_PROMPT = """\
You compare two answers to the same medical question. State whether they
differ meaningfully in semantic content. Reply with exactly one word:
different (they make meaningfully different claims) or same (they convey
the same meaning).
"""


def build_distinctness_prompt(answer_a: str, answer_b: str) -> tuple[str, str]:
    user = (
        f"Answer 1: {answer_a}\n"
        f"Answer 2: {answer_b}\n"
        "Do these answers differ meaningfully in semantic content? Reply "
        "with exactly one word: different or same."
    )
    return DISTINCTNESS_SYSTEM_PROMPT, user
