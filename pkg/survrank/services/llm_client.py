"""Remote LLM comparator over an OpenAI-style chat-completions endpoint.

Responses are cached in an append-only JSON-lines file keyed by
SHA-256(model_id, prompt text), so a warm cache reproduces a run without
touching the network.
"""

import asyncio
import hashlib
import logging
import math
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import httpx
import orjson

from survrank.errors import ArgumentError, EndpointError, ParseError, TransportError
from survrank.services.cohort import CohortRecord
from survrank.services.comparator import ComparisonScore
from survrank.services.seeding import derive_seed
from survrank.services.textualize import PairPrompt, PromptTemplate, build_pair_prompt

logger = logging.getLogger(__name__)

LABELS = ("a", "b")

_ANSWER_PATTERN = re.compile(r"answer\s*(?:is|:)\s*[\(\*\"']*([ab])\b", re.IGNORECASE)
_LABEL_PATTERN = re.compile(r"\b([ab])\b", re.IGNORECASE)


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to query the remote comparator."""

    base_url: str
    model_id: str
    temperature: float = 0.00001
    max_in_flight: int = 4
    timeout: float = 30.0
    cache_path: Optional[Path] = None
    api_key: Optional[str] = None
    max_attempts: int = 3
    backoff_base: float = 0.5
    max_tokens: int = 4

    def __post_init__(self):
        if self.temperature < 0:
            raise ArgumentError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_in_flight < 1:
            raise ArgumentError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.max_attempts < 1:
            raise ArgumentError(f"max_attempts must be >= 1, got {self.max_attempts}")

    @property
    def url(self) -> str:
        base = self.base_url.rstrip("/")
        if base.endswith("/v1"):
            return f"{base}/chat/completions"
        return f"{base}/v1/chat/completions"

    def headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers


@dataclass(frozen=True)
class ComparisonResult:
    """The model's answer to one prompt.

    ``choice`` is None when the answer named neither label.
    """

    choice: Optional[str]
    choice_probability: float
    raw_response: str
    cached: bool = False


class ResponseCache:
    """Append-only JSON-lines cache: one {key, request, response, timestamp} per line."""

    def __init__(self, path: Optional[Path]):
        self._path = Path(path) if path is not None else None
        self._entries: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()
        self._load()

    @staticmethod
    def key(model_id: str, prompt_text: str) -> str:
        h = hashlib.sha256()
        h.update(model_id.encode("utf-8"))
        h.update(b"\x00")
        h.update(prompt_text.encode("utf-8"))
        return h.hexdigest()

    def _load(self):
        if self._path is None or not self._path.exists():
            return
        with open(self._path, "rb") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = orjson.loads(line)
                except orjson.JSONDecodeError:
                    logger.warning(f"Skipping corrupt cache line in {self._path}")
                    continue
                self._entries[entry["key"]] = entry["response"]
        logger.debug(f"Loaded {len(self._entries)} cached responses from {self._path}")

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        return self._entries.get(key)

    def put(self, key: str, request: Dict[str, Any], response: Dict[str, Any]):
        with self._lock:
            self._entries[key] = response
            if self._path is None:
                return
            self._path.parent.mkdir(parents=True, exist_ok=True)
            line = orjson.dumps(
                {
                    "key": key,
                    "request": request,
                    "response": response,
                    "timestamp": datetime.now().isoformat(timespec="seconds"),
                }
            )
            with open(self._path, "ab") as f:
                f.write(line + b"\n")


def parse_label(content: str) -> Optional[str]:
    """Find the answered label in free text, or None when it is ambiguous."""
    text = content.strip()
    bare = text.lower().strip(" .:()*\"'\n")
    if bare in LABELS:
        return bare
    match = _ANSWER_PATTERN.search(text)
    if match:
        return match.group(1).lower()
    found = {m.lower() for m in _LABEL_PATTERN.findall(text)}
    if len(found) == 1:
        return found.pop()
    return None


def extract_choice(data: Dict[str, Any]) -> Tuple[Optional[str], float, str]:
    """(label, probability of the label token, raw text) from a response body.

    The probability comes from the first logprob entry whose token is the
    chosen label; without logprobs it is 1.0.
    """
    try:
        choice = data["choices"][0]
    except (KeyError, IndexError, TypeError):
        return None, 1.0, orjson.dumps(data).decode("utf-8")[:500]

    content = (choice.get("message") or {}).get("content") or choice.get("text") or ""
    label = parse_label(content)
    probability = 1.0

    logprobs = choice.get("logprobs") or {}
    if label is not None and isinstance(logprobs, dict):
        for entry in logprobs.get("content") or []:
            token = str(entry.get("token", "")).strip().strip(".():*\"'").lower()
            if token == label and entry.get("logprob") is not None:
                probability = math.exp(float(entry["logprob"]))
                break

    return label, min(max(probability, 0.0), 1.0), content


class ChatCompletionsClient:
    """Queries the endpoint with at most ``max_in_flight`` requests in flight.

    ``transport`` lets tests plug in an ``httpx.MockTransport``.
    """

    def __init__(
        self,
        config: EndpointConfig,
        cache: Optional[ResponseCache] = None,
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ):
        self.config = config
        self.cache = cache if cache is not None else ResponseCache(config.cache_path)
        self._transport = transport
        self.network_calls = 0

    def build_request(self, prompt_text: str) -> Dict[str, Any]:
        return {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": self.config.temperature,
            "logprobs": True,
            "max_tokens": self.config.max_tokens,
        }

    async def _post(self, client: httpx.AsyncClient, payload: Dict[str, Any]) -> Dict[str, Any]:
        last_error: Optional[Exception] = None
        attempts = self.config.max_attempts
        for attempt in range(1, attempts + 1):
            try:
                self.network_calls += 1
                response = await client.post(self.config.url, json=payload, headers=self.config.headers())
            except httpx.TransportError as e:
                last_error = e
                logger.warning(f"Request failed (attempt {attempt}/{attempts}): {e!r}")
            else:
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = EndpointError(
                        f"Endpoint returned HTTP {response.status_code}",
                        status=response.status_code,
                        body_excerpt=response.text[:200],
                    )
                    logger.warning(
                        f"Endpoint returned {response.status_code} (attempt {attempt}/{attempts})"
                    )
                elif not response.is_success:
                    raise EndpointError(
                        f"Endpoint returned HTTP {response.status_code}",
                        status=response.status_code,
                        body_excerpt=response.text[:200],
                    )
                else:
                    try:
                        return response.json()
                    except ValueError as e:
                        raise EndpointError(
                            "Endpoint returned a non-JSON body",
                            status=response.status_code,
                            body_excerpt=response.text[:200],
                        ) from e

            if attempt < attempts and self.config.backoff_base > 0:
                await asyncio.sleep(self.config.backoff_base * 2 ** (attempt - 1))

        if isinstance(last_error, EndpointError):
            raise last_error
        raise TransportError(
            f"Endpoint {self.config.url} unreachable after {attempts} attempts: {last_error!r}"
        ) from last_error

    async def _query_one(
        self,
        client: httpx.AsyncClient,
        semaphore: asyncio.Semaphore,
        prompt_text: str,
    ) -> ComparisonResult:
        key = ResponseCache.key(self.config.model_id, prompt_text)
        hit = self.cache.get(key)
        if hit is not None:
            label, probability, raw = extract_choice(hit)
            return ComparisonResult(label, probability, raw, cached=True)

        request = self.build_request(prompt_text)
        async with semaphore:
            data = await self._post(client, request)
        self.cache.put(key, request, data)
        label, probability, raw = extract_choice(data)
        return ComparisonResult(label, probability, raw, cached=False)

    async def aquery_many(self, prompt_texts: Sequence[str]) -> List[ComparisonResult]:
        semaphore = asyncio.Semaphore(self.config.max_in_flight)
        async with httpx.AsyncClient(timeout=self.config.timeout, transport=self._transport) as client:
            # gather keeps request order, so results join by index
            return list(
                await asyncio.gather(*(self._query_one(client, semaphore, t) for t in prompt_texts))
            )

    def query_many(self, prompt_texts: Sequence[str]) -> List[ComparisonResult]:
        if not prompt_texts:
            return []
        return asyncio.run(self.aquery_many(prompt_texts))

    def query(self, prompt: PairPrompt) -> ComparisonResult:
        return self.query_many([prompt.text])[0]


def query_comparison(
    config: EndpointConfig,
    prompt: PairPrompt,
    client: Optional[ChatCompletionsClient] = None,
) -> ComparisonResult:
    """POST one comparison prompt (or answer it from the cache)."""
    client = client if client is not None else ChatCompletionsClient(config)
    return client.query(prompt)


def parse_choice(result: ComparisonResult, prompt: PairPrompt) -> ComparisonScore:
    """Probability that the prompt's subject (``first_id``) has the event first."""
    if result.choice not in LABELS:
        raise ParseError(f"Answer names neither label: {result.raw_response[:80]!r}")
    subject_label = prompt.label_of(prompt.first_id)
    p = result.choice_probability
    return ComparisonScore(p if result.choice == subject_label else 1.0 - p)


@dataclass
class RemoteComparator:
    """ComparatorModel backed by a remote LLM.

    With ``symmetrize`` every pair is asked in both subject orders and the
    two answers are averaged as (p(i, j) + 1 - p(j, i)) / 2.
    """

    client: ChatCompletionsClient
    template: PromptTemplate
    columns: Optional[Sequence[str]] = None
    symmetrize: bool = False
    indeterminate: int = 0
    audit: List[Dict[str, Any]] = field(default_factory=list)

    def _prompts(
        self,
        pairs: Sequence[Tuple[CohortRecord, CohortRecord]],
        policy: str,
        seeds: Sequence[int],
    ) -> List[PairPrompt]:
        return [
            build_pair_prompt(self.template, s, a, policy=policy, seed=seed, columns=self.columns)
            for (s, a), seed in zip(pairs, seeds)
        ]

    def _decode(self, prompts: List[PairPrompt], results: List[ComparisonResult]) -> List[Optional[float]]:
        scores: List[Optional[float]] = []
        for prompt, result in zip(prompts, results):
            other = next(rid for rid in prompt.mapping.values() if rid != prompt.first_id)
            self.audit.append(
                {
                    "subject": prompt.first_id,
                    "other": other,
                    "choice": result.choice,
                    "choice_probability": result.choice_probability,
                    "cached": result.cached,
                }
            )
            try:
                scores.append(parse_choice(result, prompt).p_first_earlier)
            except ParseError as e:
                self.indeterminate += 1
                logger.warning(f"Indeterminate comparison {prompt.first_id} vs {other}: {e.message}")
                scores.append(None)
        return scores

    def score_pairs(
        self,
        pairs: Sequence[Tuple[CohortRecord, CohortRecord]],
        policy: str = "shuffle",
        seeds: Optional[Sequence[int]] = None,
    ) -> List[Optional[float]]:
        if seeds is None:
            seeds = [derive_seed(0, s.id, a.id) for s, a in pairs]
        prompts = self._prompts(pairs, policy, seeds)

        if not self.symmetrize:
            return self._decode(prompts, self.client.query_many([p.text for p in prompts]))

        reverse = self._prompts(
            [(a, s) for s, a in pairs], policy, [derive_seed(seed, "reverse") for seed in seeds]
        )
        results = self.client.query_many([p.text for p in prompts + reverse])
        forward_scores = self._decode(prompts, results[: len(prompts)])
        reverse_scores = self._decode(reverse, results[len(prompts):])

        combined: List[Optional[float]] = []
        for fwd, rev in zip(forward_scores, reverse_scores):
            if fwd is None and rev is None:
                combined.append(None)
            elif rev is None:
                combined.append(fwd)
            elif fwd is None:
                combined.append(1.0 - rev)
            else:
                combined.append((fwd + 1.0 - rev) / 2.0)
        return combined
