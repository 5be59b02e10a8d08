"""End-to-end evaluation of TS-match against beam search decoding."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..core import DecoderConfig, SessionInput, SpeakerAttributedTranscript
from ..decoder import LexicalScorerPair, decode_beam, ts_match
from ..metrics import SessionScores, score_session

TS_MATCH = "TS-match"
BSD = "BSD"
SYSTEMS = (TS_MATCH, BSD)
MEAN = "mean"


def _record(session: str, system: str, scores: SessionScores) -> dict:
    return {
        "session": session,
        "system": system,
        "wer": scores.wer.rate,
        "sa_wer": scores.sa_wer.rate,
        "cp_wer": scores.cp_wer.rate,
        "delta_sa": scores.delta_sa,
        "delta_cp": scores.delta_cp,
    }


@dataclass
class Report:
    """Per-session scores for both systems plus word-weighted means."""

    per_session: dict = field(default_factory=dict)  # system -> list[(name, SessionScores)]

    def totals(self, system: str) -> SessionScores:
        rows = self.per_session[system]
        total = rows[0][1]
        for _, s in rows[1:]:
            total = total + s
        return total

    def records(self) -> list[dict]:
        out = []
        for system in SYSTEMS:
            out.extend(_record(name, system, s) for name, s in self.per_session[system])
        for system in SYSTEMS:
            out.append(_record(MEAN, system, self.totals(system)))
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records())

    def mean(self, system: str, metric: str) -> float:
        return _record(MEAN, system, self.totals(system))[metric]


def run_experiment(
    sessions: Sequence[SessionInput],
    references: Sequence[SpeakerAttributedTranscript],
    scorers: LexicalScorerPair,
    config: DecoderConfig,
    names: Optional[Sequence[str]] = None,
) -> Report:
    if len(sessions) != len(references):
        raise ValueError(f"{len(sessions)} sessions but {len(references)} references")
    if not sessions:
        raise ValueError("no sessions to evaluate")
    names = list(names) if names is not None else [f"session{i:03d}" for i in range(len(sessions))]
    if len(names) != len(sessions):
        raise ValueError("one name is needed per session")
    report = Report({TS_MATCH: [], BSD: []})
    for name, sess, ref in zip(names, sessions, references):
        report.per_session[TS_MATCH].append((name, score_session(ref, ts_match(sess))))
        report.per_session[BSD].append((name, score_session(ref, decode_beam(sess, scorers, config))))
    return report
