"""Shared fixtures: scripted providers and small corpora."""

import pytest

from hallugen.models import QAItem
from hallugen.pipeline import PipelineConfig, ProviderSet
from hallugen.providers import (
    MockEmbedClient,
    MockGenerateClient,
    MockJudgeClient,
    MockNliClient,
    ProviderConfig,
    judge_avoids_text,
    judge_prefers_text,
)
from hallugen.seeding import hash_words


def mock_cfg(name: str, kind: str) -> ProviderConfig:
    return ProviderConfig(name=name, kind=kind, endpoint=f"mock://{kind}")


def make_item(item_id: str = "item-1", gt: str = "the treatment reduces mortality",
              tags: tuple[str, ...] = ("Diseases",), split: str = "labeled") -> QAItem:
    return QAItem(
        id=item_id,
        question="Does the treatment improve outcomes?",
        ground_truth=gt,
        knowledge=("A trial of the treatment reported reduced mortality.",),
        tags=tags,
        split=split,
    )


def make_pipeline_config(**overrides) -> PipelineConfig:
    base = dict(
        generator=mock_cfg("gen", "generate"),
        discriminators=(mock_cfg("judge-a", "judge"), mock_cfg("judge-b", "judge"),
                        mock_cfg("judge-c", "judge")),
        nli=mock_cfg("nli", "nli"),
        embedder=mock_cfg("embed", "embed"),
        critic=mock_cfg("critic", "generate"),
    )
    base.update(overrides)
    return PipelineConfig(**base)


def structured_reply(n_words: int, tag: str = "x",
                     category: str = "incomplete_information") -> str:
    return f"category: {category}\nanswer: {hash_words(n_words, tag)}"


def make_provider_set(item: QAItem, *, generator=None, judges=None, nli=None,
                      embedder=None, critic=None) -> ProviderSet:
    """Scripted provider set; defaults make the first candidate succeed."""
    gt_words = len(item.ground_truth.split())
    return ProviderSet(
        generator=generator or MockGenerateClient(structured_reply(gt_words)),
        discriminators=judges if judges is not None else [
            MockJudgeClient(judge_avoids_text(item.ground_truth), name=f"judge-{c}")
            for c in "abc"
        ],
        nli=nli or MockNliClient(0.3),
        embedder=embedder or MockEmbedClient(dim=8),
        critic=critic or MockGenerateClient("the phrasing is templated"),
    )


@pytest.fixture
def item() -> QAItem:
    return make_item()


def fooled_judges(item: QAItem, pattern: str) -> list[MockJudgeClient]:
    """One judge per pattern char: 'f' always fooled, 'n' never fooled."""
    judges = []
    for i, ch in enumerate(pattern):
        script = (judge_avoids_text(item.ground_truth) if ch == "f"
                  else judge_prefers_text(item.ground_truth))
        judges.append(MockJudgeClient(script, name=f"judge-{chr(97 + i)}"))
    return judges
