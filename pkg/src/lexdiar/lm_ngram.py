"""ARPA back-off language models and n-gram speaker/word probabilities."""

from __future__ import annotations

import io
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, TextIO, Tuple, Union

from .core import BOS, UNK, Hypothesis, SpeakerProbVector, last_words_window

logger = logging.getLogger(__name__)

Ngram = Tuple[str, ...]
# (log10 prob, log10 backoff or None)
Entry = Tuple[float, Optional[float]]

# log10 value given to <unk> when a model omits it
MISSING_UNK_LOG10 = -99.0

_COUNT_RE = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
_SECTION_RE = re.compile(r"^\\(\d+)-grams:$")


class ArpaParseError(ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


@dataclass(frozen=True, eq=False)
class NgramModel:
    """Parsed back-off model. ``tables[n]`` maps n-token tuples to entries."""

    order: int
    tables: Dict[int, Dict[Ngram, Entry]]
    vocabulary: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("model order must be >= 1")
        if UNK not in self.vocabulary:
            raise ValueError("vocabulary must contain <unk>")
        for n in range(2, self.order + 1):
            lower = self.tables.get(n - 1, {})
            for gram in self.tables.get(n, {}):
                if gram[:-1] not in lower:
                    raise ValueError(f"{n}-gram {' '.join(gram)!r} has no {n - 1}-gram prefix entry")

    def map_token(self, token: str) -> str:
        return token if token in self.vocabulary else UNK

    def entry(self, gram: Ngram) -> Optional[Entry]:
        table = self.tables.get(len(gram))
        return None if table is None else table.get(gram)


def parse_arpa(stream: Union[TextIO, Iterable[str]]) -> NgramModel:
    """Parse ARPA text. Probabilities and back-offs stay in log10."""
    declared: Dict[int, int] = {}
    tables: Dict[int, Dict[Ngram, Entry]] = {}
    state = "preamble"
    current = 0
    seen_end = False
    lineno = 0

    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if state == "preamble":
            if line == "\\data\\":
                state = "data"
            continue
        if line == "\\end\\":
            seen_end = True
            break
        m = _SECTION_RE.match(line)
        if m:
            n = int(m.group(1))
            if n not in declared:
                raise ArpaParseError(f"section \\{n}-grams: was not declared in \\data\\", lineno)
            if n in tables:
                raise ArpaParseError(f"duplicate \\{n}-grams: section", lineno)
            if n != (current + 1 if current else 1):
                raise ArpaParseError(f"expected \\{current + 1}-grams:, found \\{n}-grams:", lineno)
            current = n
            tables[n] = {}
            state = "grams"
            continue
        if state == "data":
            m = _COUNT_RE.match(line)
            if not m:
                raise ArpaParseError(f"expected 'ngram N=count' in \\data\\, got {line!r}", lineno)
            declared[int(m.group(1))] = int(m.group(2))
            continue
        # inside an n-gram section
        parts = line.split()
        if len(parts) not in (current + 1, current + 2):
            raise ArpaParseError(f"expected {current} tokens plus probability in \\{current}-grams:", lineno)
        try:
            logp = float(parts[0])
            bow = float(parts[current + 1]) if len(parts) == current + 2 else None
        except ValueError:
            raise ArpaParseError(f"non-numeric probability or back-off: {line!r}", lineno) from None
        if not math.isfinite(logp) or (bow is not None and not math.isfinite(bow)):
            raise ArpaParseError(f"non-finite value: {line!r}", lineno)
        gram = tuple(parts[1 : current + 1])
        tables[current][gram] = (logp, bow)

    if state == "preamble":
        raise ArpaParseError("missing \\data\\ marker")
    if not seen_end:
        raise ArpaParseError("missing \\end\\ marker", lineno)
    if not declared:
        raise ArpaParseError("\\data\\ section declares no n-gram counts")
    for n, count in sorted(declared.items()):
        if n not in tables:
            raise ArpaParseError(f"missing \\{n}-grams: section")
        if len(tables[n]) != count:
            raise ArpaParseError(f"\\data\\ declares {count} {n}-grams but {len(tables[n])} were found")
    order = max(declared)
    if sorted(declared) != list(range(1, order + 1)):
        raise ArpaParseError("n-gram orders must be contiguous from 1")

    vocabulary = {gram[0] for gram in tables[1]}
    if UNK not in vocabulary:
        logger.warning("ARPA model has no <unk>; adding it with log10 prob %s", MISSING_UNK_LOG10)
        tables[1][(UNK,)] = (MISSING_UNK_LOG10, None)
        vocabulary.add(UNK)
    try:
        return NgramModel(order, tables, frozenset(vocabulary))
    except ValueError as err:
        raise ArpaParseError(str(err)) from err


def load_arpa(path: Union[str, Path]) -> NgramModel:
    with open(path, encoding="utf-8") as fh:
        return parse_arpa(fh)


def parse_arpa_text(text: str) -> NgramModel:
    return parse_arpa(io.StringIO(text))


def score_word(model: NgramModel, context: Sequence[str], word: str) -> float:
    """Katz back-off log10 P(word | context). Unknown tokens score as <unk>."""
    word = model.map_token(word)
    ctx = tuple(model.map_token(t) for t in context[-(model.order - 1):]) if model.order > 1 else ()
    total = 0.0
    while True:
        hit = model.entry(ctx + (word,))
        if hit is not None:
            return total + hit[0]
        if not ctx:
            # word is in the vocabulary, so only a hand-built table can miss here
            return total + MISSING_UNK_LOG10
        bow = model.entry(ctx)
        if bow is not None and bow[1] is not None:
            total += bow[1]
        ctx = ctx[1:]


def speaker_context(hyp: Hypothesis, speaker: int, context_window: int) -> Tuple[str, ...]:
    """The history speaker ``speaker`` would continue from with the next word.

    A speaker other than the one holding the open turn starts a new turn, so
    ``<s>`` is appended to their transcript first.
    """
    tokens = hyp.speaker_contexts[speaker]
    if speaker != hyp.last_speaker:
        tokens = tokens + (BOS,)
    return last_words_window(tokens, context_window - 1)


def combined_context(hyp: Hypothesis, context_window: int) -> Tuple[str, ...]:
    tokens = hyp.combined_context or (BOS,)
    return last_words_window(tokens, context_window - 1)


def speaker_posterior_ngram(
    model: NgramModel, hyp: Hypothesis, word: str, context_window: int, prob_floor: float = 1e-10
) -> SpeakerProbVector:
    """P(speaker | word): each speaker's n-gram likelihood of ``word``, normalized."""
    probs = [10.0 ** score_word(model, speaker_context(hyp, k, context_window), word) for k in range(hyp.num_speakers)]
    if all(p <= prob_floor for p in probs):
        return SpeakerProbVector.uniform(len(probs))
    total = math.fsum(probs)
    return SpeakerProbVector(tuple(p / total for p in probs))


def word_probability_ngram(
    model: NgramModel, hyp: Hypothesis, word: str, context_window: int, prob_floor: float = 1e-10
) -> float:
    """P(word | all-speaker history), clamped to ``[prob_floor, 1]``."""
    p = 10.0 ** score_word(model, combined_context(hyp, context_window), word)
    return min(1.0, max(prob_floor, p))


class NgramScorer:
    """Lexical scorer backed by an ARPA model."""

    kind = "ngram"

    def __init__(self, model: NgramModel, prob_floor: float = 1e-10):
        self.model = model
        self.prob_floor = prob_floor

    def speaker_posteriors(self, hyps: Sequence[Hypothesis], word: str, context_window: int) -> list[SpeakerProbVector]:
        return [speaker_posterior_ngram(self.model, h, word, context_window, self.prob_floor) for h in hyps]

    def word_probabilities(self, hyps: Sequence[Hypothesis], word: str, context_window: int) -> list[float]:
        return [word_probability_ngram(self.model, h, word, context_window, self.prob_floor) for h in hyps]


def format_arpa(tables: Dict[int, Dict[Ngram, Entry]], precision: int = 10) -> str:
    """Render n-gram tables as ARPA text (inverse of :func:`parse_arpa`)."""
    order = max(tables)
    lines = ["\\data\\"]
    for n in range(1, order + 1):
        lines.append(f"ngram {n}={len(tables[n])}")
    for n in range(1, order + 1):
        lines.append("")
        lines.append(f"\\{n}-grams:")
        for gram, (logp, bow) in tables[n].items():
            row = [f"{logp:.{precision}f}", " ".join(gram)]
            if bow is not None:
                row.append(f"{bow:.{precision}f}")
            lines.append("\t".join(row))
    lines.append("")
    lines.append("\\end\\")
    return "\n".join(lines) + "\n"
