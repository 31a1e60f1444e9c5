"""Deterministic seed derivation and hash-based mock primitives.

All derivations go through sha256 so results are stable across processes
and Python versions (builtin hash() is salted per process).
"""

import hashlib


def stable_seed(*parts: object) -> int:
    """Derive a 63-bit seed from the given parts.

    Seeds flow top-down: run seed -> per-item seed -> per-call seed, so
    adding or renaming one item never perturbs any other item's draws.
    """
    joined = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(joined.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def hash01(*parts: object) -> float:
    """Map the given parts to a deterministic float in [0, 1)."""
    return stable_seed(*parts) / float(1 << 63)


_SYLLABLES = (
    "ta", "ne", "ri", "mo", "sa", "lu", "ke", "vi", "do", "pa",
    "ze", "fi", "ga", "hu", "be", "no",
)


def hash_words(n: int, *parts: object) -> str:
    """Produce n deterministic pseudo-words derived from the given parts."""
    words = []
    for i in range(n):
        seed = stable_seed(i, *parts)
        syllables = 2 + seed % 3
        word = "".join(
            _SYLLABLES[(seed >> (4 * (j + 1))) % len(_SYLLABLES)]
            for j in range(syllables)
        )
        words.append(word)
    return " ".join(words)
