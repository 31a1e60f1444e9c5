"""Runtime conformance checks for NLI and embedding providers.

These run the same schema / range / determinism assertions the unit suite
applies to mocks, so any backend claiming the wire contract (including a
locally served one) can be verified with one call.
"""

from .providers import ProviderClient

_DEFAULT_SENTENCES = (
    "aspirin reduces inflammation",
    "penicillin kills susceptible bacteria",
    "the trial reported a lower relapse rate in the treatment arm",
)


def verify_nli_provider(client: ProviderClient,
                        sentences: tuple[str, ...] = _DEFAULT_SENTENCES) -> None:
    """Assert range, determinism, and identity behavior of an NLI provider."""
    for s in sentences:
        for t in sentences:
            score = client.nli_entail(s, t)
            assert 0.0 <= score <= 1.0, f"score {score} outside [0, 1]"
            again = client.nli_entail(s, t)
            assert score == again, (
                f"nondeterministic NLI score for ({s[:30]!r}, {t[:30]!r}): "
                f"{score} vs {again}")


def verify_embed_provider(client: ProviderClient,
                          texts: tuple[str, ...] = _DEFAULT_SENTENCES) -> int:
    """Assert fixed dimension and determinism of an embedding provider.

    Returns the provider's embedding dimension.
    """
    dim = None
    for text in texts:
        vec = client.embed(text)
        assert vec, "empty embedding vector"
        if dim is None:
            dim = len(vec)
        assert len(vec) == dim, f"dimension changed: {dim} -> {len(vec)}"
        assert all(isinstance(x, float) for x in vec)
        again = client.embed(text)
        assert vec == again, f"nondeterministic embedding for {text[:30]!r}"
    distinct = {tuple(client.embed(t)) for t in texts}
    assert len(distinct) == len(set(texts)), "different texts collided"
    assert dim is not None
    return dim
