"""Synthetic multi-speaker sessions with controllable lexical and acoustic cues.

Each speaker draws words from its own Zipf-weighted table. A share
``lexical_separability`` of every table is speaker-exclusive vocabulary and the
rest is a pool common to all speakers. Acoustic vectors are
``softmax((one_hot + noise * g) / noise)`` with ``g`` standard normal, so the
noise level acts as a temperature and sets how often the arg-max is wrong.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Tuple

import numpy as np

from ..core import BOS, EOS, UNK, SessionInput, SpeakerAttributedTranscript, SpeakerProbVector, WordToken
from ..lm_ngram import format_arpa

WORDS_PER_SPEAKER = 12
SHARED_WORDS = 12
WORD_DURATION = 0.3
WORD_GAP = 0.05
ZIPF_EXPONENT = 1.0
# mass reserved for <unk> and for uniform smoothing in the exported bigram model
UNK_PROB = 1e-4
SMOOTHING = 1e-3


@dataclass(frozen=True)
class SynthConfig:
    num_speakers: int = 2
    num_words: int = 150
    lexical_separability: float = 1.0
    acoustic_noise: float = 0.5
    turn_change_prob: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_speakers < 1:
            raise ValueError("num_speakers must be >= 1")
        if self.num_words < 0:
            raise ValueError("num_words must be >= 0")
        if not (0.0 <= self.lexical_separability <= 1.0):
            raise ValueError("lexical_separability must lie in [0, 1]")
        if self.acoustic_noise < 0:
            raise ValueError("acoustic_noise must be >= 0")
        if not (0.0 < self.turn_change_prob < 1.0):
            raise ValueError("turn_change_prob must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def _zipf(n: int) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** ZIPF_EXPONENT
    return w / w.sum()


def vocabulary_tables(num_speakers: int, lexical_separability: float) -> Tuple[Tuple[str, ...], np.ndarray]:
    """Word list and per-speaker word distributions (rows sum to 1).

    Depends only on the speaker count and separability, so every session
    generated with the same two values shares one vocabulary.
    """
    own = [[f"s{k}w{j}" for j in range(WORDS_PER_SPEAKER)] for k in range(num_speakers)]
    shared = [f"c{j}" for j in range(SHARED_WORDS)]
    words = tuple(w for group in own for w in group) + tuple(shared)
    table = np.zeros((num_speakers, len(words)))
    zo, zs = _zipf(WORDS_PER_SPEAKER), _zipf(SHARED_WORDS)
    for k in range(num_speakers):
        base = k * WORDS_PER_SPEAKER
        table[k, base : base + WORDS_PER_SPEAKER] = lexical_separability * zo
        table[k, num_speakers * WORDS_PER_SPEAKER :] = (1.0 - lexical_separability) * zs
    return words, table


def acoustic_vector(true_speaker: int, num_speakers: int, noise: float, rng: np.random.Generator) -> SpeakerProbVector:
    if noise == 0.0:
        return SpeakerProbVector(tuple(1.0 if k == true_speaker else 0.0 for k in range(num_speakers)))
    logits = np.zeros(num_speakers)
    logits[true_speaker] = 1.0
    logits = (logits + noise * rng.standard_normal(num_speakers)) / noise
    logits -= logits.max()
    w = np.exp(logits)
    return SpeakerProbVector.from_weights((w / w.sum()).tolist())


def generate_synthetic_session(cfg: SynthConfig) -> Tuple[SessionInput, SpeakerAttributedTranscript]:
    rng = np.random.default_rng(cfg.seed)
    words, table = vocabulary_tables(cfg.num_speakers, cfg.lexical_separability)
    speaker = int(rng.integers(cfg.num_speakers))
    tokens, speakers = [], []
    t = 0.0
    for i in range(cfg.num_words):
        if i > 0 and cfg.num_speakers > 1 and rng.random() < cfg.turn_change_prob:
            others = [k for k in range(cfg.num_speakers) if k != speaker]
            speaker = others[int(rng.integers(len(others)))]
        w = words[int(rng.choice(len(words), p=table[speaker]))]
        q = acoustic_vector(speaker, cfg.num_speakers, cfg.acoustic_noise, rng)
        start, end = round(t, 6), round(t + WORD_DURATION, 6)
        tokens.append(WordToken(w, start, end, q))
        speakers.append(speaker)
        t += WORD_DURATION + WORD_GAP
    session = SessionInput(tuple(tokens), cfg.num_speakers)
    return session, SpeakerAttributedTranscript.from_assignments(tokens, speakers)


def word_speaker_support(num_speakers: int, lexical_separability: float) -> Dict[str, frozenset]:
    """Speakers that can emit each word."""
    words, table = vocabulary_tables(num_speakers, lexical_separability)
    return {w: frozenset(int(k) for k in np.nonzero(table[:, j])[0]) for j, w in enumerate(words)}


def generator_arpa(num_speakers: int, lexical_separability: float, turn_change_prob: float) -> str:
    """Bigram ARPA text matching the generator's own statistics.

    Within a speaker's transcript a word is followed by another word of the
    same speaker's table, or by ``</s>`` at a turn change. After ``<s>`` the
    next word comes from the speaker-averaged table. Every listed history
    carries a full distribution so the model is closed-vocabulary.
    """
    words, table = vocabulary_tables(num_speakers, lexical_separability)
    mix = table.mean(axis=0)
    # P(speaker | word), uniform speaker prior
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.where(mix > 0, table / (num_speakers * mix), 1.0 / num_speakers)
    uniform = np.full(len(words), 1.0 / len(words))
    keep = 1.0 - UNK_PROB

    def log10(p: float) -> float:
        return math.log10(p) if p > 0 else -99.0

    unigrams = {(BOS,): (-99.0, 0.0), (EOS,): (log10(keep * turn_change_prob), None), (UNK,): (log10(UNK_PROB), None)}
    uni_words = keep * (1.0 - turn_change_prob) * ((1 - SMOOTHING) * mix + SMOOTHING * uniform)
    for j, w in enumerate(words):
        unigrams[(w,)] = (log10(uni_words[j]), 0.0)

    bigrams = {}
    start_dist = keep * ((1 - SMOOTHING) * mix + SMOOTHING * uniform)
    for j, w in enumerate(words):
        bigrams[(BOS, w)] = (log10(start_dist[j]), None)
    bigrams[(BOS, UNK)] = (log10(UNK_PROB), None)
    bigrams[(BOS, EOS)] = (-99.0, None)
    for i, v in enumerate(words):
        nxt = post[:, i] @ table
        dist = keep * (1.0 - turn_change_prob) * ((1 - SMOOTHING) * nxt + SMOOTHING * uniform)
        for j, w in enumerate(words):
            bigrams[(v, w)] = (log10(dist[j]), None)
        bigrams[(v, EOS)] = (log10(keep * turn_change_prob), None)
        bigrams[(v, UNK)] = (log10(UNK_PROB), None)
    return format_arpa({1: unigrams, 2: bigrams})


def session_seeds(seed: int, count: int) -> list[int]:
    """Independent per-session seeds derived from one corpus seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def generate_corpus(cfg: SynthConfig, num_sessions: int) -> list[Tuple[SessionInput, SpeakerAttributedTranscript]]:
    """``num_sessions`` sessions sharing ``cfg`` except for their derived seeds."""
    fields = cfg.to_dict()
    out = []
    for s in session_seeds(cfg.seed, num_sessions):
        fields["seed"] = s
        out.append(generate_synthetic_session(SynthConfig(**fields)))
    return out
