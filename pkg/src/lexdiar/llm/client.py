"""HTTP client for the ``/v1/score`` protocol and the LLM-backed scorer.

Request body: ``{"id": str, "prompt": str, "continuations": [str, ...]}``.
Response body: ``{"id": str, "log_probs": [float, ...]}`` holding natural-log
probabilities of each whole continuation given the prompt.
"""

from __future__ import annotations

import itertools
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import requests

from ..core import Hypothesis, ScorerError, SpeakerProbVector
from .prompts import LlmPrompt, build_speaker_prompt, build_word_prompt

SCORE_PATH = "/v1/score"


@dataclass(frozen=True)
class ScoreResponse:
    log_probs: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "log_probs", tuple(self.log_probs))
        if any(not math.isfinite(v) for v in self.log_probs):
            raise ValueError("log_probs must be finite")


class LlmClient:
    """Thread-safe client; each call carries its own request id."""

    def __init__(self, endpoint: str, timeout: float = 30.0, id_prefix: str = "req"):
        self.url = endpoint.rstrip("/") + SCORE_PATH
        self.timeout = timeout
        self._ids = itertools.count()
        self._id_lock = threading.Lock()
        self._id_prefix = id_prefix
        self._local = threading.local()

    def _session(self) -> requests.Session:
        sess = getattr(self._local, "session", None)
        if sess is None:
            sess = self._local.session = requests.Session()
        return sess

    def _next_id(self) -> str:
        with self._id_lock:
            return f"{self._id_prefix}-{next(self._ids)}"

    def score(self, prompt: LlmPrompt) -> ScoreResponse:
        req_id = self._next_id()
        body = {"id": req_id, "prompt": prompt.text, "continuations": list(prompt.continuation_candidates)}
        try:
            resp = self._session().post(self.url, json=body, timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as err:
            raise ScorerError(f"LLM request {req_id} to {self.url} failed: {err}") from err
        return parse_score_response(payload, req_id, len(prompt.continuation_candidates))


def parse_score_response(payload, req_id: str, num_candidates: int) -> ScoreResponse:
    if not isinstance(payload, dict):
        raise ScorerError(f"response to {req_id} is not a JSON object")
    if payload.get("id") != req_id:
        raise ScorerError(f"response id {payload.get('id')!r} does not match request {req_id!r}")
    lps = payload.get("log_probs")
    if not isinstance(lps, list) or len(lps) != num_candidates:
        raise ScorerError(f"response to {req_id} must carry {num_candidates} log_probs")
    if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in lps):
        raise ScorerError(f"response to {req_id} has non-numeric log_probs")
    try:
        return ScoreResponse(tuple(float(v) for v in lps))
    except ValueError as err:
        raise ScorerError(f"response to {req_id}: {err}") from err


Endpoint = Union[str, LlmClient]


def _client(endpoint: Endpoint) -> LlmClient:
    return endpoint if isinstance(endpoint, LlmClient) else LlmClient(endpoint)


def speaker_probs_from_log_probs(log_probs: Sequence[float]) -> SpeakerProbVector:
    # shifting by the max leaves the ratio unchanged and avoids exp underflow
    top = max(log_probs)
    weights = [math.exp(v - top) for v in log_probs]
    total = math.fsum(weights)
    return SpeakerProbVector(tuple(w / total for w in weights))


def speaker_posterior_llm(endpoint: Endpoint, prompt: LlmPrompt) -> SpeakerProbVector:
    return speaker_probs_from_log_probs(_client(endpoint).score(prompt).log_probs)


def word_probability_llm(endpoint: Endpoint, prompt: LlmPrompt, prob_floor: float = 1e-10) -> float:
    if len(prompt.continuation_candidates) != 1:
        raise ValueError("word prompts carry exactly one continuation")
    lp = _client(endpoint).score(prompt).log_probs[0]
    return min(1.0, max(prob_floor, math.exp(lp)))


class LlmScorer:
    """Lexical scorer that asks a remote LLM; batches run on a thread pool."""

    kind = "llm"

    def __init__(self, client: Endpoint, prob_floor: float = 1e-10, max_workers: int = 8):
        self.client = _client(client)
        self.prob_floor = prob_floor
        self.max_workers = max_workers

    def _map(self, fn, items):
        if len(items) <= 1 or self.max_workers <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=min(self.max_workers, len(items))) as pool:
            return list(pool.map(fn, items))

    def speaker_posteriors(self, hyps: Sequence[Hypothesis], word: str, context_window: int) -> list[SpeakerProbVector]:
        prompts = [build_speaker_prompt(h, word, context_window) for h in hyps]
        return self._map(lambda p: speaker_posterior_llm(self.client, p), prompts)

    def word_probabilities(self, hyps: Sequence[Hypothesis], word: str, context_window: int) -> list[float]:
        prompts = [build_word_prompt(h, word, context_window) for h in hyps]
        return self._map(lambda p: word_probability_llm(self.client, p, self.prob_floor), prompts)
