"""Shared domain types and log-domain helpers.

Every value here is immutable once built. Speaker contexts are token tuples
in which ``<s>`` / ``</s>`` delimit speaker turns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
MARKERS = frozenset((BOS, EOS))

SUM_TOLERANCE = 1e-9


class ScorerError(RuntimeError):
    """A lexical scorer could not produce a value (transport, protocol, model)."""


def safe_log(p: float, floor: float) -> float:
    """Natural log of ``max(p, floor)``."""
    return math.log(p if p > floor else floor)


@dataclass(frozen=True)
class SpeakerProbVector:
    """Probability of each speaker for a single word."""

    probs: Tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if not probs:
            raise ValueError("speaker probability vector must have at least one entry")
        for p in probs:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"speaker probability {p!r} outside [0, 1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"speaker probabilities sum to {total!r}, expected 1")

    @classmethod
    def from_weights(cls, weights: Iterable[float]) -> "SpeakerProbVector":
        """Normalize non-negative weights; all-zero weights give the uniform vector."""
        w = [float(x) for x in weights]
        if not w:
            raise ValueError("empty weight vector")
        if any(x < 0 or not math.isfinite(x) for x in w):
            raise ValueError(f"weights must be finite and non-negative: {w}")
        total = math.fsum(w)
        if total <= 0.0:
            return cls.uniform(len(w))
        return cls(tuple(x / total for x in w))

    @classmethod
    def uniform(cls, n: int) -> "SpeakerProbVector":
        return cls(tuple([1.0 / n] * n))

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, k: int) -> float:
        return self.probs[k]

    def __iter__(self):
        return iter(self.probs)

    def argmax(self) -> int:
        # first maximum wins, so ties go to the lowest index
        best = 0
        for k, p in enumerate(self.probs):
            if p > self.probs[best]:
                best = k
        return best


@dataclass(frozen=True)
class WordToken:
    text: str
    start: float
    end: float
    acoustic: Optional[SpeakerProbVector] = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("word text must be non-empty")
        if self.end < self.start:
            raise ValueError(f"word {self.text!r} ends ({self.end}) before it starts ({self.start})")


@dataclass(frozen=True)
class SessionInput:
    """Onset-ordered words with their acoustic speaker vectors.

    Use :meth:`from_words` to build from unsorted input; the constructor
    itself only validates.
    """

    words: Tuple[WordToken, ...]
    num_speakers: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "words", tuple(self.words))
        if self.num_speakers < 1:
            raise ValueError("num_speakers must be >= 1")
        prev = None
        for i, w in enumerate(self.words):
            if w.acoustic is None:
                raise ValueError(f"word {i} ({w.text!r}) has no acoustic vector")
            if len(w.acoustic) != self.num_speakers:
                raise ValueError(
                    f"word {i} ({w.text!r}) has {len(w.acoustic)} speaker entries, "
                    f"expected {self.num_speakers}"
                )
            if prev is not None and (w.start, w.end) < (prev.start, prev.end):
                raise ValueError(f"word {i} ({w.text!r}) is out of onset order")
            prev = w

    @classmethod
    def from_words(cls, words: Iterable[WordToken], num_speakers: int) -> "SessionInput":
        # sorted() is stable, so equal (start, end) keep input order
        return cls(tuple(sorted(words, key=lambda w: (w.start, w.end))), num_speakers)

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class Hypothesis:
    """A partial word-to-speaker assignment carried by the beam.

    ``speaker_contexts[k]`` is speaker k's own transcript with turn markers;
    ``combined_context`` interleaves all speakers in onset order. Only
    ``last_speaker`` may have an open (unterminated) turn.
    """

    assignments: Tuple[int, ...]
    log_score: float
    speaker_contexts: Tuple[Tuple[str, ...], ...]
    combined_context: Tuple[str, ...]
    last_speaker: Optional[int]

    @classmethod
    def initial(cls, num_speakers: int) -> "Hypothesis":
        return cls((), 0.0, tuple(() for _ in range(num_speakers)), (), None)

    @property
    def num_speakers(self) -> int:
        return len(self.speaker_contexts)

    def extend(self, speaker: int, word: str, step: float = 0.0) -> "Hypothesis":
        """Commit ``word`` to ``speaker`` and add ``step`` to the score."""
        contexts = list(self.speaker_contexts)
        last = self.last_speaker
        if last is None:
            contexts[speaker] = contexts[speaker] + (BOS, word)
            combined = self.combined_context + (BOS, word)
        elif last == speaker:
            contexts[speaker] = contexts[speaker] + (word,)
            combined = self.combined_context + (word,)
        else:
            contexts[last] = contexts[last] + (EOS,)
            contexts[speaker] = contexts[speaker] + (BOS, word)
            combined = self.combined_context + (EOS, BOS, word)
        return Hypothesis(
            self.assignments + (speaker,),
            self.log_score + step,
            tuple(contexts),
            combined,
            speaker,
        )

    def dialogue_turns(self) -> list[tuple[int, list[str]]]:
        """Group committed words into ``(speaker, words)`` turns, onset order."""
        words = [t for t in self.combined_context if t not in MARKERS]
        turns: list[tuple[int, list[str]]] = []
        for w, k in zip(words, self.assignments):
            if turns and turns[-1][0] == k:
                turns[-1][1].append(w)
            else:
                turns.append((k, [w]))
        return turns


def last_words_window(tokens: Sequence[str], num_words: int) -> Tuple[str, ...]:
    """Suffix of ``tokens`` holding at most ``num_words`` word tokens.

    Turn markers do not count towards the limit. The suffix starts right after
    the word that would exceed it, so markers between the retained words (and
    any trailing ones) are kept.
    """
    if num_words < 0:
        raise ValueError("num_words must be non-negative")
    seen = 0
    for i in range(len(tokens) - 1, -1, -1):
        if tokens[i] not in MARKERS:
            if seen == num_words:
                return tuple(tokens[i + 1:])
            seen += 1
    return tuple(tokens)


@dataclass(frozen=True)
class DecoderConfig:
    alpha: float = 0.5
    beta: float = 0.5
    context_window: int = 40
    beam_width: int = 16
    prob_floor: float = 1e-10

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.context_window < 1:
            raise ValueError("context_window must be >= 1")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if not (0.0 < self.prob_floor < 1.0):
            raise ValueError("prob_floor must lie in (0, 1)")


@dataclass(frozen=True)
class TranscriptEntry:
    text: str
    start: float
    end: float
    speaker: int


@dataclass(frozen=True)
class SpeakerAttributedTranscript:
    entries: Tuple[TranscriptEntry, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        for i, e in enumerate(self.entries):
            if e.speaker < 0:
                raise ValueError(f"entry {i} has negative speaker index {e.speaker}")
        for a, b in zip(self.entries, self.entries[1:]):
            if (b.start, b.end) < (a.start, a.end):
                raise ValueError("transcript entries must be onset-ordered")

    @classmethod
    def from_assignments(
        cls, words: Sequence[WordToken], speakers: Sequence[int]
    ) -> "SpeakerAttributedTranscript":
        if len(words) != len(speakers):
            raise ValueError("one speaker label is needed per word")
        return cls(
            tuple(TranscriptEntry(w.text, w.start, w.end, int(k)) for w, k in zip(words, speakers))
        )

    @property
    def speakers(self) -> Tuple[int, ...]:
        return tuple(e.speaker for e in self.entries)

    @property
    def words(self) -> Tuple[str, ...]:
        return tuple(e.text for e in self.entries)

    def words_by_speaker(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for e in self.entries:
            out.setdefault(e.speaker, []).append(e.text)
        return out

    def __len__(self) -> int:
        return len(self.entries)
