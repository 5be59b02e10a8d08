"""Deterministic stand-in for an LLM scoring server.

Behaviour comes from a JSON rule table::

    {
      "default_log_prob": -6.0,
      "speaker_policy": {"type": "longest_last_turn", "prob": 0.9},
      "tokens": {"don't": ["don", "'t"]},
      "rules": [{"context": "that i'm", "token": "working", "log_prob": -0.5}]
    }

A continuation is split into tokens via ``tokens`` (default: itself) and its
log-probability is the sum over tokens. Each token takes the ``log_prob`` of
the rule with that token whose ``context`` is the longest suffix of the text
so far, else ``default_log_prob``. The text so far is the prompt, then a
space and the first token, then each later sub-token appended directly.

``speaker_policy`` (optional) overrides the rules for speaker prompts: the
speaker whose most recent turn in the dialogue is longest (ties: the more
recent turn) gets ``prob`` and the rest share the remainder evenly.
"""

from __future__ import annotations

import contextlib
import json
import logging
import math
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, Iterator, Optional, Sequence, Tuple, Union

from .client import SCORE_PATH
from .prompts import ANSWER_PREFIX, END_TAG

logger = logging.getLogger(__name__)

_TURN_RE = re.compile(r"^\[Speaker(\d+)\]: (.*)$")


@dataclass(frozen=True)
class MockRules:
    default_log_prob: float = -6.0
    rules: Tuple[Tuple[str, str, float], ...] = ()
    tokens: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    speaker_policy: Optional[Tuple[str, float]] = None

    @classmethod
    def from_dict(cls, cfg: dict) -> "MockRules":
        rules = tuple(
            (str(r.get("context", "")), str(r["token"]), float(r["log_prob"])) for r in cfg.get("rules", [])
        )
        tokens = {str(k): tuple(str(t) for t in v) for k, v in cfg.get("tokens", {}).items()}
        policy = None
        if cfg.get("speaker_policy"):
            sp = cfg["speaker_policy"]
            if sp.get("type") != "longest_last_turn":
                raise ValueError(f"unknown speaker policy {sp.get('type')!r}")
            prob = float(sp.get("prob", 0.9))
            if not (0.0 < prob < 1.0):
                raise ValueError("speaker policy prob must lie in (0, 1)")
            policy = ("longest_last_turn", prob)
        return cls(float(cfg.get("default_log_prob", -6.0)), rules, tokens, policy)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MockRules":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def token_log_prob(self, text: str, token: str) -> float:
        best_len = -1
        value = self.default_log_prob
        for context, tok, lp in self.rules:
            if tok == token and len(context) > best_len and text.endswith(context):
                best_len = len(context)
                value = lp
        return value

    def continuation_log_prob(self, prompt: str, continuation: str) -> float:
        pieces = self.tokens.get(continuation, (continuation,))
        text = prompt
        total = 0.0
        for i, piece in enumerate(pieces):
            total += self.token_log_prob(text, piece)
            text = text + (" " + piece if i == 0 else piece)
        return total

    def score(self, prompt: str, continuations: Sequence[str]) -> list[float]:
        if self.speaker_policy is not None and prompt.endswith(ANSWER_PREFIX):
            return self._speaker_policy(prompt, continuations)
        return [self.continuation_log_prob(prompt, c) for c in continuations]

    def _speaker_policy(self, prompt: str, continuations: Sequence[str]) -> list[float]:
        _, prob = self.speaker_policy
        last_len: Dict[str, int] = {}
        last_pos: Dict[str, int] = {}
        for pos, line in enumerate(prompt.split("\n")):
            if line == END_TAG:
                break
            m = _TURN_RE.match(line)
            if m:
                last_len[m.group(1)] = len(m.group(2).split())
                last_pos[m.group(1)] = pos
        n = len(continuations)
        if n == 1:
            return [0.0]
        winner = max(continuations, key=lambda c: (last_len.get(c, 0), last_pos.get(c, -1)))
        rest = math.log((1.0 - prob) / (n - 1))
        return [math.log(prob) if c == winner else rest for c in continuations]


def _handler_for(rules: MockRules):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            logger.debug("mock-llm: " + fmt, *args)

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload, separators=(",", ":")).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path != SCORE_PATH:
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                req = json.loads(self.rfile.read(length))
                req_id = req["id"]
                prompt = req["prompt"]
                conts = req["continuations"]
                if not isinstance(req_id, str) or not isinstance(prompt, str):
                    raise TypeError("id and prompt must be strings")
                if not isinstance(conts, list) or not conts or not all(isinstance(c, str) for c in conts):
                    raise TypeError("continuations must be a non-empty list of strings")
            except (ValueError, KeyError, TypeError) as err:
                self._send(400, {"error": f"bad request: {err}"})
                return
            self._send(200, {"id": req_id, "log_probs": rules.score(prompt, conts)})

    return Handler


def make_server(rules: MockRules, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _handler_for(rules))
    server.daemon_threads = True
    return server


@contextlib.contextmanager
def serve_in_thread(rules: MockRules, host: str = "127.0.0.1", port: int = 0) -> Iterator[str]:
    """Run a mock server for the duration of the block; yields its base URL."""
    server = make_server(rules, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://{host}:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join()


def run_mock_server(rules_path: Union[str, Path], port: int, host: str = "127.0.0.1") -> None:
    server = make_server(MockRules.load(rules_path), host, port)
    logger.info("mock LLM listening on http://%s:%d%s", host, server.server_address[1], SCORE_PATH)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
