"""WER, speaker-attributed WER, cpWER and the diarization deltas."""

from __future__ import annotations

import itertools
import unicodedata
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .core import SpeakerAttributedTranscript, TranscriptEntry

CPWER_MAX_SPEAKERS = 8


@dataclass(frozen=True)
class AlignmentResult:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    reference_length: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def degenerate(self) -> bool:
        """True when there is no reference; the rate then divides by 1."""
        return self.reference_length == 0

    @property
    def rate(self) -> float:
        return self.errors / (self.reference_length or 1)

    def __add__(self, other: "AlignmentResult") -> "AlignmentResult":
        return AlignmentResult(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.reference_length + other.reference_length,
        )


def _is_edge(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def _strip_punct(word: str) -> str:
    start, end = 0, len(word)
    while start < end and _is_edge(word[start]):
        start += 1
    while end > start and _is_edge(word[end - 1]):
        end -= 1
    return word[start:end]


def normalize_text(words: Iterable[str]) -> list[str]:
    """Lowercase and trim edge punctuation; words that become empty are dropped."""
    out = []
    for w in words:
        w = _strip_punct(w.lower())
        if w:
            out.append(w)
    return out


def normalize_transcript(transcript: SpeakerAttributedTranscript) -> SpeakerAttributedTranscript:
    entries = []
    for e in transcript.entries:
        norm = normalize_text([e.text])
        if norm:
            entries.append(TranscriptEntry(norm[0], e.start, e.end, e.speaker))
    return SpeakerAttributedTranscript(tuple(entries))


def wer(reference: Sequence[str], hypothesis: Sequence[str]) -> AlignmentResult:
    """Unit-cost edit alignment.

    Among minimum-edit alignments the one with the most substitutions is
    reported, which pins S, I and D uniquely.
    """
    ref, hyp = list(reference), list(hypothesis)
    n, m = len(ref), len(hyp)
    # cost = edits * base - substitutions, so minimising it orders by
    # (edits, -substitutions); substitutions never reach base
    base = n + m + 1
    prev = [j * base for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [i * base] + [0] * m
        r = ref[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] if r == hyp[j - 1] else prev[j - 1] + base - 1
            up = prev[j] + base
            if up < best:
                best = up
            left = cur[j - 1] + base
            if left < best:
                best = left
            cur[j] = best
        prev = cur
    cost = prev[m]
    edits = -(-cost // base)
    subs = edits * base - cost
    # edits = S + I + D and m - n = I - D
    rest = edits - subs
    ins = (rest + (m - n)) // 2
    dels = rest - ins
    return AlignmentResult(subs, ins, dels, n)


def _mapped_words(transcript: SpeakerAttributedTranscript, mapping: Mapping[int, Optional[int]]) -> Dict[Optional[int], list[str]]:
    out: Dict[Optional[int], list[str]] = {}
    for e in transcript.entries:
        if e.speaker not in mapping:
            raise ValueError(f"speaker mapping has no entry for hypothesis speaker {e.speaker}")
        out.setdefault(mapping[e.speaker], []).append(e.text)
    return out


def sa_wer(
    reference: SpeakerAttributedTranscript,
    hypothesis: SpeakerAttributedTranscript,
    mapping: Optional[Mapping[int, Optional[int]]] = None,
) -> AlignmentResult:
    """Per-speaker WER summed over reference speakers under a fixed mapping.

    ``mapping`` sends hypothesis speakers to reference speakers; the default
    is the identity. Hypothesis words mapped to a speaker absent from the
    reference count as insertions.
    """
    if mapping is None:
        mapping = {k: k for k in set(hypothesis.speakers)}
    ref_words = reference.words_by_speaker()
    hyp_words = _mapped_words(hypothesis, mapping)
    total = AlignmentResult()
    for spk in sorted(set(ref_words) | set(hyp_words), key=_speaker_key):
        total = total + wer(ref_words.get(spk, []), hyp_words.get(spk, []))
    return total


def _speaker_key(spk):
    return (spk is None, -1 if spk is None else spk)


def cp_wer(
    reference: SpeakerAttributedTranscript, hypothesis: SpeakerAttributedTranscript
) -> Tuple[AlignmentResult, Dict[int, Optional[int]]]:
    """Minimum over speaker permutations of the summed per-speaker WER.

    The smaller side is padded with empty speakers. Returns the alignment and
    the winning map from hypothesis speakers to reference speakers (``None``
    for a padded reference slot). Ties keep the first permutation.
    """
    ref_words = reference.words_by_speaker()
    hyp_words = hypothesis.words_by_speaker()
    ref_spk: list[Optional[int]] = sorted(ref_words)
    hyp_spk: list[Optional[int]] = sorted(hyp_words)
    size = max(len(ref_spk), len(hyp_spk))
    if size > CPWER_MAX_SPEAKERS:
        raise ValueError(f"cpWER brute force supports at most {CPWER_MAX_SPEAKERS} speakers, got {size}")
    ref_spk += [None] * (size - len(ref_spk))
    hyp_spk += [None] * (size - len(hyp_spk))

    # pairwise alignments are reused across permutations
    pair = {}
    for i, r in enumerate(ref_spk):
        for j, h in enumerate(hyp_spk):
            pair[i, j] = wer(ref_words.get(r, []) if r is not None else [], hyp_words.get(h, []) if h is not None else [])

    best: Optional[AlignmentResult] = None
    best_perm: Tuple[int, ...] = tuple(range(size))
    for perm in itertools.permutations(range(size)):
        result = AlignmentResult()
        for i, j in enumerate(perm):
            result = result + pair[i, j]
        if best is None or result.errors < best.errors:
            best, best_perm = result, perm
    if best is None:
        best = AlignmentResult()
    mapping = {hyp_spk[j]: ref_spk[i] for i, j in enumerate(best_perm) if hyp_spk[j] is not None}
    return best, mapping


def deltas(wer_rate: float, sa_rate: float, cp_rate: float) -> Tuple[float, float]:
    """(SA-WER - WER, cpWER - WER)."""
    return sa_rate - wer_rate, cp_rate - wer_rate


@dataclass(frozen=True)
class SessionScores:
    wer: AlignmentResult
    sa_wer: AlignmentResult
    cp_wer: AlignmentResult

    @property
    def delta_sa(self) -> float:
        return deltas(self.wer.rate, self.sa_wer.rate, self.cp_wer.rate)[0]

    @property
    def delta_cp(self) -> float:
        return deltas(self.wer.rate, self.sa_wer.rate, self.cp_wer.rate)[1]

    def __add__(self, other: "SessionScores") -> "SessionScores":
        return SessionScores(self.wer + other.wer, self.sa_wer + other.sa_wer, self.cp_wer + other.cp_wer)


def score_session(
    reference: SpeakerAttributedTranscript,
    hypothesis: SpeakerAttributedTranscript,
    mapping: Optional[Mapping[int, Optional[int]]] = None,
    normalize: bool = True,
) -> SessionScores:
    if normalize:
        reference = normalize_transcript(reference)
        hypothesis = normalize_transcript(hypothesis)
    return SessionScores(
        wer(reference.words, hypothesis.words),
        sa_wer(reference, hypothesis, mapping),
        cp_wer(reference, hypothesis)[0],
    )
