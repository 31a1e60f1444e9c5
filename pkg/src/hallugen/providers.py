"""Uniform gateway to external model capabilities.

Four capabilities (free-text generation, pairwise factuality judgment, NLI
entailment scoring, text embedding) behind one client interface, with an
HTTP backend and deterministic scripted mocks. Mock endpoints use the
``mock://`` scheme so a roster file alone can drive a fully offline run.
"""

import json
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import requests

from .errors import (
    AuthError,
    ConfigError,
    DimensionMismatchError,
    EmptyReplyError,
    JudgeParseError,
    ScoreRangeError,
    TransportError,
)
from .models import SamplingParams
from .prompts import build_judge_prompt
from .seeding import hash01, hash_words, stable_seed

PROVIDER_KINDS = ("generate", "judge", "nli", "embed")


@dataclass(frozen=True)
class ProviderConfig:
    """One provider endpoint; credentials live in the named env var, never here."""

    name: str
    kind: str
    endpoint: str
    model_id: str = ""
    auth_env_var: str = ""
    timeout_s: float = 30.0
    max_retries: int = 3
    rate_limit_rps: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in PROVIDER_KINDS:
            raise ConfigError(f"provider {self.name}: unknown kind {self.kind!r}")
        if self.timeout_s <= 0:
            raise ConfigError(f"provider {self.name}: timeout_s must be positive")
        if self.max_retries < 0:
            raise ConfigError(f"provider {self.name}: max_retries must be >= 0")
        if self.rate_limit_rps is not None and self.rate_limit_rps <= 0:
            raise ConfigError(f"provider {self.name}: rate_limit_rps must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model_id": self.model_id,
            "auth_env_var": self.auth_env_var,
            "timeout_s": self.timeout_s,
            "max_retries": self.max_retries,
            "rate_limit_rps": self.rate_limit_rps,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ProviderConfig":
        return cls(
            name=d["name"],
            kind=d["kind"],
            endpoint=d["endpoint"],
            model_id=d.get("model_id", ""),
            auth_env_var=d.get("auth_env_var", ""),
            timeout_s=d.get("timeout_s", 30.0),
            max_retries=d.get("max_retries", 3),
            rate_limit_rps=d.get("rate_limit_rps"),
        )


@dataclass(frozen=True)
class PairChoice:
    """De-constrained judge verdict: which presented answer was chosen."""

    chosen: str  # "A" or "B"
    raw: str

    def __post_init__(self) -> None:
        if self.chosen not in ("A", "B"):
            raise ValueError(f"chosen must be A or B, got {self.chosen!r}")


_PAIR_RE = re.compile(r"^\s*(?:answer\s*:\s*)?([ab])\s*\.?\s*$", re.IGNORECASE)


def parse_pair_choice(raw: str) -> str:
    """Exact-match parse of the constrained A/B judge format."""
    m = _PAIR_RE.match(raw or "")
    if not m:
        raise JudgeParseError(f"unparseable judge reply: {raw!r}")
    return m.group(1).upper()


class RateLimiter:
    """Serializes admission to at most rps calls per second; thread-safe."""

    def __init__(self, rps: Optional[float]):
        self._interval = 1.0 / rps if rps else 0.0
        self._lock = threading.Lock()
        self._next_ok = 0.0

    def acquire(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next_ok - now
            self._next_ok = max(now, self._next_ok) + self._interval
        if wait > 0:
            time.sleep(wait)


class ProviderClient:
    """Base client: retry loop, rate limiting, call accounting.

    Subclasses implement the raw operations for their kind; calls raising
    TransportError are retried with exponential backoff, so exactly
    min(failures, max_retries) + 1 attempts happen per logical call.
    """

    def __init__(self, config: ProviderConfig, backoff_s: float = 0.25):
        self.config = config
        self.backoff_s = backoff_s
        self._limiter = RateLimiter(config.rate_limit_rps)
        self._lock = threading.Lock()
        self.call_count = 0
        self.attempt_count = 0
        self._embed_dim: Optional[int] = None

    def _require_kind(self, kind: str) -> None:
        if self.config.kind != kind:
            raise ConfigError(
                f"provider {self.config.name} has kind {self.config.kind}, "
                f"operation requires {kind}")

    def _retry(self, fn: Callable[[], Any]) -> Any:
        with self._lock:
            self.call_count += 1
        last: Optional[Exception] = None
        for attempt in range(self.config.max_retries + 1):
            self._limiter.acquire()
            with self._lock:
                self.attempt_count += 1
            try:
                return fn()
            except TransportError as exc:
                last = exc
                if attempt < self.config.max_retries and self.backoff_s:
                    time.sleep(self.backoff_s * (2 ** attempt))
        raise TransportError(
            f"provider {self.config.name}: transport failure after "
            f"{self.config.max_retries + 1} attempts: {last}")

    # --- capability surface -------------------------------------------------

    def complete(self, system_prompt: str, user_prompt: str,
                 params: SamplingParams) -> str:
        self._require_kind("generate")
        if not system_prompt or not user_prompt:
            raise ValueError("prompts must be non-empty")
        reply = self._retry(lambda: self._complete_once(system_prompt, user_prompt, params))
        if not reply or not reply.strip():
            raise EmptyReplyError(f"provider {self.config.name} returned an empty reply")
        return reply

    def judge_pair(self, question: str, answer_a: str, answer_b: str) -> PairChoice:
        """Pick the more factually accurate of two answers; one re-ask on bad format.

        The judge never sees the knowledge context; callers randomize which
        side holds which answer and de-randomize the outcome.
        """
        self._require_kind("judge")
        raw = self._retry(lambda: self._judge_once(question, answer_a, answer_b))
        try:
            return PairChoice(chosen=parse_pair_choice(raw), raw=raw)
        except JudgeParseError:
            raw2 = self._retry(lambda: self._judge_once(question, answer_a, answer_b))
            return PairChoice(chosen=parse_pair_choice(raw2), raw=raw2)

    def nli_entail(self, premise: str, hypothesis: str) -> float:
        self._require_kind("nli")
        score = self._retry(lambda: self._nli_once(premise, hypothesis))
        if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
            raise ScoreRangeError(
                f"provider {self.config.name}: NLI score {score!r} outside [0, 1]")
        return float(score)

    def nli_entail_many(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        """Score many (premise, hypothesis) pairs; order-preserving."""
        return [self.nli_entail(p, h) for p, h in pairs]

    def embed(self, text: str) -> list[float]:
        self._require_kind("embed")
        if not text:
            raise ValueError("text to embed must be non-empty")
        vec = self._retry(lambda: self._embed_once(text))
        vec = [float(x) for x in vec]
        with self._lock:
            if self._embed_dim is None:
                self._embed_dim = len(vec)
            elif self._embed_dim != len(vec):
                raise DimensionMismatchError(
                    f"provider {self.config.name}: embedding dimension changed "
                    f"from {self._embed_dim} to {len(vec)}")
        return vec

    # --- backend hooks ------------------------------------------------------

    def _complete_once(self, system_prompt: str, user_prompt: str,
                       params: SamplingParams) -> str:
        raise NotImplementedError

    def _judge_once(self, question: str, answer_a: str, answer_b: str) -> str:
        raise NotImplementedError

    def _nli_once(self, premise: str, hypothesis: str) -> float:
        raise NotImplementedError

    def _embed_once(self, text: str) -> list[float]:
        raise NotImplementedError


# --------------------------------------------------------------------------
# HTTP backend
# --------------------------------------------------------------------------

_TRANSIENT_STATUS = {408, 429, 500, 502, 503, 504}


class HttpClient(ProviderClient):
    """JSON-over-HTTP backend.

    generate/judge speak the de-facto chat-completion schema; nli/embed use
    small bespoke bodies {premise, hypothesis} -> {entailment} and
    {text} -> {vector}. Credentials ride a bearer header read from the env
    var named in the config.
    """

    def __init__(self, config: ProviderConfig, backoff_s: float = 0.25,
                 session: Optional[requests.Session] = None):
        super().__init__(config, backoff_s=backoff_s)
        self._session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env_var:
            token = os.environ.get(self.config.auth_env_var, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, body: dict[str, Any]) -> dict[str, Any]:
        try:
            resp = self._session.post(
                self.config.endpoint, json=body, headers=self._headers(),
                timeout=self.config.timeout_s)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthError(
                f"provider {self.config.name}: authentication failed "
                f"({resp.status_code})")
        if resp.status_code in _TRANSIENT_STATUS:
            raise TransportError(
                f"provider {self.config.name}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(
                f"provider {self.config.name}: HTTP {resp.status_code}: "
                f"{resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise TransportError(
                f"provider {self.config.name}: non-JSON response") from exc

    def _chat(self, system_prompt: str, user_prompt: str,
              params: SamplingParams) -> str:
        body = {
            "model": self.config.model_id,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        }
        if params.seed is not None:
            body["seed"] = params.seed
        data = self._post(body)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(
                f"provider {self.config.name}: malformed chat response") from exc

    def _complete_once(self, system_prompt: str, user_prompt: str,
                       params: SamplingParams) -> str:
        return self._chat(system_prompt, user_prompt, params)

    def _judge_once(self, question: str, answer_a: str, answer_b: str) -> str:
        system, user = build_judge_prompt(question, answer_a, answer_b)
        return self._chat(system, user, SamplingParams(temperature=0.0, max_tokens=8))

    def _nli_once(self, premise: str, hypothesis: str) -> float:
        data = self._post({"premise": premise, "hypothesis": hypothesis})
        if "entailment" not in data:
            raise TransportError(
                f"provider {self.config.name}: NLI response missing 'entailment'")
        return data["entailment"]

    def _embed_once(self, text: str) -> list[float]:
        data = self._post({"text": text})
        if "vector" not in data or not isinstance(data["vector"], list):
            raise TransportError(
                f"provider {self.config.name}: embed response missing 'vector'")
        return data["vector"]


# --------------------------------------------------------------------------
# Scripted mock backend
# --------------------------------------------------------------------------

GenerateScript = (
    str | Sequence[str] | dict[str, str] | Callable[[str, str, SamplingParams], str]
)


def _mock_config(name: str, kind: str, max_retries: int = 3) -> ProviderConfig:
    return ProviderConfig(name=name, kind=kind, endpoint=f"mock://{kind}",
                          max_retries=max_retries)


class _MockBase(ProviderClient):
    """Shared failure-injection plumbing for scripted mocks."""

    def __init__(self, config: ProviderConfig, fail_first: int = 0):
        super().__init__(config, backoff_s=0.0)
        self._fail_remaining = fail_first

    def _maybe_fail(self) -> None:
        if self._fail_remaining > 0:
            self._fail_remaining -= 1
            raise TransportError(f"injected failure ({self.config.name})")


class MockGenerateClient(_MockBase):
    """Scripted text generator.

    script may be a fixed string, a sequence consumed call by call, a map
    from user prompt to reply, a callable (system, user, params) -> reply,
    or None for the echo behavior (returns the user prompt).
    """

    def __init__(self, script: Optional[GenerateScript] = None,
                 name: str = "mock-generate", fail_first: int = 0,
                 max_retries: int = 3):
        super().__init__(_mock_config(name, "generate", max_retries), fail_first)
        self._script = script
        self._iter_lock = threading.Lock()
        self._i = 0

    def _complete_once(self, system_prompt: str, user_prompt: str,
                       params: SamplingParams) -> str:
        self._maybe_fail()
        s = self._script
        if s is None:
            return user_prompt
        if callable(s):
            return s(system_prompt, user_prompt, params)
        if isinstance(s, str):
            return s
        if isinstance(s, dict):
            return s[user_prompt]
        with self._iter_lock:
            reply = s[min(self._i, len(s) - 1)]
            self._i += 1
        return reply


class MockJudgeClient(_MockBase):
    """Scripted pairwise judge.

    reply is a callable (question, answer_a, answer_b) -> raw reply string;
    the reply goes through the same constrained-format parse (with one
    re-ask) as HTTP judges, so parse-failure paths are exercised too.
    """

    def __init__(self, reply: Callable[[str, str, str], str],
                 name: str = "mock-judge", fail_first: int = 0,
                 max_retries: int = 3):
        super().__init__(_mock_config(name, "judge", max_retries), fail_first)
        self._reply = reply

    def _judge_once(self, question: str, answer_a: str, answer_b: str) -> str:
        self._maybe_fail()
        return self._reply(question, answer_a, answer_b)


def judge_prefers_text(text: str) -> Callable[[str, str, str], str]:
    """Judge script that always chooses the side equal to the given text."""

    def choose(question: str, a: str, b: str) -> str:
        return "A" if a == text else "B"

    return choose


def judge_avoids_text(text: str) -> Callable[[str, str, str], str]:
    """Judge script that always chooses the side NOT equal to the given text."""

    def choose(question: str, a: str, b: str) -> str:
        return "B" if a == text else "A"

    return choose


def judge_hash_choice(question: str, a: str, b: str) -> str:
    """Position-independent deterministic judge for roster-driven runs."""
    first, second = sorted((a, b))
    return "A" if (hash01("judge", question, first, second) < 0.5) == (a == first) else "B"


class MockNliClient(_MockBase):
    """Scripted NLI scorer.

    score may be a constant, a table keyed by (premise, hypothesis), or a
    callable; None gives the hash behavior (deterministic in [0, 1), and
    1.0 for identical texts, matching the identity contract of a faithful
    backend).
    """

    def __init__(self, score: Optional[
                     float | dict[tuple[str, str], float]
                     | Callable[[str, str], float]] = None,
                 name: str = "mock-nli", fail_first: int = 0,
                 max_retries: int = 3):
        super().__init__(_mock_config(name, "nli", max_retries), fail_first)
        self._score = score

    def _nli_once(self, premise: str, hypothesis: str) -> float:
        self._maybe_fail()
        s = self._score
        if s is None:
            if premise == hypothesis:
                return 1.0
            return hash01("nli", premise, hypothesis)
        if callable(s):
            return s(premise, hypothesis)
        if isinstance(s, dict):
            return s[(premise, hypothesis)]
        return float(s)


class MockEmbedClient(_MockBase):
    """Hashing-projection embedder: deterministic fixed-dimension vectors."""

    def __init__(self, dim: int = 32, name: str = "mock-embed",
                 fail_first: int = 0, max_retries: int = 3,
                 table: Optional[dict[str, Sequence[float]]] = None):
        super().__init__(_mock_config(name, "embed", max_retries), fail_first)
        self.dim = dim
        self._table = table

    def _embed_once(self, text: str) -> list[float]:
        self._maybe_fail()
        if self._table is not None:
            return list(self._table[text])
        return [hash01("embed", i, text) * 2.0 - 1.0 for i in range(self.dim)]


def _mock_generate_structured(system_prompt: str, user_prompt: str,
                              params: SamplingParams) -> str:
    """Default roster-mock generator: structured category+answer reply."""
    from .models import HallucinationCategory

    cats = list(HallucinationCategory)
    cat = cats[stable_seed("cat", user_prompt, params.temperature) % len(cats)]
    n_words = 8 + stable_seed("len", user_prompt, params.temperature) % 17
    answer = hash_words(n_words, "ans", user_prompt, params.temperature)
    return f"category: {cat.value}\nanswer: {answer}"


_ANSWER_LINE_RE = re.compile(r"^answer\s*:\s*(.*)$", re.IGNORECASE | re.MULTILINE)


def _mock_detector_script(oracle_token: Optional[str],
                          ) -> Callable[[str, str, SamplingParams], str]:
    """Roster-mock detector: oracle on a sentinel token, else hash-based."""

    def detect(system_prompt: str, user_prompt: str, params: SamplingParams) -> str:
        if oracle_token is not None:
            m = _ANSWER_LINE_RE.search(user_prompt)
            answer = m.group(1) if m else user_prompt
            return "Yes" if oracle_token in answer else "No"
        return "Yes" if hash01("detector", user_prompt) < 0.5 else "No"

    return detect


def build_mock_client(config: ProviderConfig) -> ProviderClient:
    """Construct the deterministic mock for a ``mock://`` endpoint."""
    kind = config.kind
    if kind == "generate":
        if config.endpoint == "mock://echo":
            script: Optional[GenerateScript] = None
        elif config.endpoint.startswith("mock://detector"):
            m = re.search(r"oracle=([\w-]+)", config.endpoint)
            script = _mock_detector_script(m.group(1) if m else None)
        else:
            script = _mock_generate_structured
        client: ProviderClient = MockGenerateClient(script, name=config.name)
    elif kind == "judge":
        client = MockJudgeClient(judge_hash_choice, name=config.name)
    elif kind == "nli":
        client = MockNliClient(None, name=config.name)
    elif kind == "embed":
        m = re.search(r"dim=(\d+)", config.endpoint)
        client = MockEmbedClient(dim=int(m.group(1)) if m else 32,
                                 name=config.name)
    else:
        raise ConfigError(f"no mock behavior for kind {kind!r}")
    # adopt the roster entry wholesale: retries, timeouts, rate limit
    client.config = config
    client._limiter = RateLimiter(config.rate_limit_rps)
    return client


# --------------------------------------------------------------------------
# Roster and client resolution
# --------------------------------------------------------------------------

def load_roster(path: str) -> dict[str, ProviderConfig]:
    """Load a roster file: a JSON array of provider configs, keyed by name."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise ConfigError(f"roster {path}: expected a JSON array")
    roster: dict[str, ProviderConfig] = {}
    for entry in data:
        cfg = ProviderConfig.from_dict(entry)
        if cfg.name in roster:
            raise ConfigError(f"roster {path}: duplicate provider name {cfg.name!r}")
        roster[cfg.name] = cfg
    return roster


class ClientRegistry:
    """Resolves provider configs to live clients, constructing on demand.

    Tests can pre-register scripted clients under a provider name; anything
    else is built from its endpoint scheme (mock:// or http[s]://).
    """

    def __init__(self) -> None:
        self._clients: dict[str, ProviderClient] = {}
        self._lock = threading.Lock()

    def register(self, client: ProviderClient) -> ProviderClient:
        with self._lock:
            self._clients[client.config.name] = client
        return client

    def resolve(self, config: ProviderConfig) -> ProviderClient:
        with self._lock:
            existing = self._clients.get(config.name)
            if existing is not None:
                return existing
        if config.endpoint.startswith("mock://"):
            client: ProviderClient = build_mock_client(config)
        elif config.endpoint.startswith(("http://", "https://")):
            client = HttpClient(config)
        else:
            raise ConfigError(
                f"provider {config.name}: unsupported endpoint {config.endpoint!r}")
        with self._lock:
            return self._clients.setdefault(config.name, client)

    def call_counts(self) -> dict[str, int]:
        with self._lock:
            return {name: c.call_count for name, c in sorted(self._clients.items())}
