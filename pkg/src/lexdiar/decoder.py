"""Joint acoustic/lexical beam search over word-to-speaker assignments.

Each word contributes ``log q[k] + beta * (log P(k|word) + alpha * log P(word))``
to the score of assigning it to speaker ``k``; the decoder keeps the
``beam_width`` best partial assignments after every word.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .core import (
    BOS,
    EOS,
    DecoderConfig,
    Hypothesis,
    ScorerError,
    SessionInput,
    SpeakerAttributedTranscript,
    SpeakerProbVector,
    safe_log,
)

logger = logging.getLogger(__name__)

ORACLE_MAX_SEQUENCES = 10**7


class LexicalScorer(Protocol):
    kind: str

    def speaker_posteriors(
        self, hyps: Sequence[Hypothesis], word: str, context_window: int
    ) -> list[SpeakerProbVector]: ...

    def word_probabilities(self, hyps: Sequence[Hypothesis], word: str, context_window: int) -> list[float]: ...


class DecodeError(RuntimeError):
    def __init__(self, message: str, word_index: Optional[int] = None):
        self.word_index = word_index
        super().__init__(message)


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class LexicalScorerPair:
    """Scorers for P(S|W) and P(W); both ``None`` means acoustics only."""

    speaker_scorer: Optional[LexicalScorer] = None
    word_scorer: Optional[LexicalScorer] = None

    def __post_init__(self) -> None:
        if (self.speaker_scorer is None) != (self.word_scorer is None):
            raise ValueError("speaker and word scorers must both be set or both be none")

    @property
    def acoustic_only(self) -> bool:
        return self.speaker_scorer is None

    @property
    def label(self) -> str:
        if self.acoustic_only:
            return "none"
        return f"({self.speaker_scorer.kind}, {self.word_scorer.kind})"


NO_SCORERS = LexicalScorerPair()


def step_score(
    q: SpeakerProbVector,
    k: int,
    p_s_given_w: Optional[SpeakerProbVector],
    p_w: float,
    alpha: float,
    beta: float,
    prob_floor: float = 1e-10,
) -> float:
    """Score of assigning the current word to speaker ``k``.

    With ``p_s_given_w=None`` only the acoustic term is returned.
    """
    acoustic = safe_log(q[k], prob_floor)
    if p_s_given_w is None:
        return acoustic
    return acoustic + beta * (safe_log(p_s_given_w[k], prob_floor) + alpha * safe_log(p_w, prob_floor))


def _lexical_terms(scorers: LexicalScorerPair, hyps: Sequence[Hypothesis], word: str, config: DecoderConfig, index: int):
    if scorers.acoustic_only:
        return [None] * len(hyps), [1.0] * len(hyps)
    try:
        posts = scorers.speaker_scorer.speaker_posteriors(hyps, word, config.context_window)
        pws = scorers.word_scorer.word_probabilities(hyps, word, config.context_window)
    except ScorerError as err:
        raise DecodeError(f"lexical scorer failed at word {index} ({word!r}): {err}", index) from err
    for post in posts:
        if len(post) != hyps[0].num_speakers:
            raise DecodeError(f"speaker scorer returned {len(post)} entries at word {index}", index)
    return posts, pws


def beam_search(session: SessionInput, scorers: LexicalScorerPair, config: DecoderConfig) -> list[Hypothesis]:
    """Run the beam over the whole session; returns the final beam, best first.

    Ties in score are broken by the lexicographically smallest assignment.
    """
    n_spk = session.num_speakers
    if config.beta == 0:
        # the lexical term is multiplied by zero; skipping it is exact
        scorers = NO_SCORERS
    beam = [Hypothesis.initial(n_spk)]
    for i, token in enumerate(session.words):
        posts, pws = _lexical_terms(scorers, beam, token.text, config, i)
        children = []
        for h, post, pw in zip(beam, posts, pws):
            for k in range(n_spk):
                step = step_score(token.acoustic, k, post, pw, config.alpha, config.beta, config.prob_floor)
                # keys compare the parent's assignments then k, i.e. the child's assignment tuple
                children.append((-(h.log_score + step), h.assignments, k, h, step))
        kept = heapq.nsmallest(config.beam_width, children, key=lambda c: (c[0], c[1], c[2]))
        beam = [h.extend(k, token.text, step) for _, _, k, h, step in kept]
    return beam


def decode_beam(
    session: SessionInput, scorers: LexicalScorerPair = NO_SCORERS, config: DecoderConfig = DecoderConfig()
) -> SpeakerAttributedTranscript:
    if not session.words:
        return SpeakerAttributedTranscript(())
    best = beam_search(session, scorers, config)[0]
    return SpeakerAttributedTranscript.from_assignments(session.words, best.assignments)


def hypothesis_from_assignments(
    words: Sequence[str], assignments: Sequence[int], num_speakers: int, log_score: float = 0.0
) -> Hypothesis:
    """Rebuild a hypothesis' contexts from scratch, turn by turn."""
    turns: list[tuple[int, list[str]]] = []
    for w, k in zip(words, assignments):
        if turns and turns[-1][0] == k:
            turns[-1][1].append(w)
        else:
            turns.append((k, [w]))
    contexts: list[list[str]] = [[] for _ in range(num_speakers)]
    combined: list[str] = []
    for t, (k, ws) in enumerate(turns):
        closing = [EOS] if t < len(turns) - 1 else []
        piece = [BOS] + ws + closing
        contexts[k].extend(piece)
        combined.extend(piece)
    return Hypothesis(
        tuple(assignments),
        log_score,
        tuple(tuple(c) for c in contexts),
        tuple(combined),
        turns[-1][0] if turns else None,
    )


def decode_oracle(
    session: SessionInput, scorers: LexicalScorerPair = NO_SCORERS, config: DecoderConfig = DecoderConfig()
) -> SpeakerAttributedTranscript:
    """Exhaustive search over every assignment sequence (ties: lexicographically smallest)."""
    n_spk = session.num_speakers
    n = len(session.words)
    if n_spk**n > ORACLE_MAX_SEQUENCES:
        raise OracleTooLarge(f"{n_spk}^{n} assignment sequences exceed the oracle limit of {ORACLE_MAX_SEQUENCES}")
    if n == 0:
        return SpeakerAttributedTranscript(())
    if config.beta == 0:
        scorers = NO_SCORERS
    texts = [w.text for w in session.words]
    best_score = float("-inf")
    best: Optional[tuple[int, ...]] = None

    def visit(prefix: tuple[int, ...], score: float) -> None:
        nonlocal best_score, best
        i = len(prefix)
        if i == n:
            if score > best_score:
                best_score, best = score, prefix
            return
        hyp = hypothesis_from_assignments(texts[:i], prefix, n_spk)
        posts, pws = _lexical_terms(scorers, [hyp], texts[i], config, i)
        q = session.words[i].acoustic
        for k in range(n_spk):
            visit(prefix + (k,), score + step_score(q, k, posts[0], pws[0], config.alpha, config.beta, config.prob_floor))

    visit((), 0.0)
    return SpeakerAttributedTranscript.from_assignments(session.words, best)


def ts_match(session: SessionInput) -> SpeakerAttributedTranscript:
    """Label every word with the argmax of its acoustic vector (ties: lowest index)."""
    return SpeakerAttributedTranscript.from_assignments(session.words, [w.acoustic.argmax() for w in session.words])
