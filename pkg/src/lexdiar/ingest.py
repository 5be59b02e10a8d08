"""Session loading and frame-to-word speaker probability aggregation.

Session files are JSON lines, one word per line::

    {"word": "hello", "start": 0.0, "end": 0.4, "q": [0.9, 0.1]}

``q`` may be omitted when a frame sidecar is supplied. The sidecar is also
JSON lines: a header ``{"frame_rate": 0.05}`` followed by one array of
per-speaker sigmoid values per frame. Reference and hypothesis transcripts
use the session layout plus an integer ``speaker`` field.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

from .core import SessionInput, SpeakerAttributedTranscript, SpeakerProbVector, TranscriptEntry, WordToken

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DEFAULT_FRAME_RATE = 0.05
# file-provided q vectors are rounded text; accept this much drift before renormalizing
Q_FILE_TOLERANCE = 1e-3
# absorbs i * frame_rate rounding so a frame starting exactly at a word boundary lands on one side
TIME_EPS = 1e-9


class IngestWarning(UserWarning):
    pass


class SessionFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FrameLogits:
    """Frame-level diarizer sigmoids; frame i starts at ``i * frame_rate_seconds``."""

    frames: Tuple[Tuple[float, ...], ...]
    frame_rate_seconds: float = DEFAULT_FRAME_RATE

    def __post_init__(self) -> None:
        frames = tuple(tuple(float(v) for v in f) for f in self.frames)
        object.__setattr__(self, "frames", frames)
        if self.frame_rate_seconds <= 0:
            raise ValueError("frame_rate_seconds must be positive")
        if frames:
            n = len(frames[0])
            if n < 1:
                raise ValueError("frames must have at least one speaker channel")
            for i, f in enumerate(frames):
                if len(f) != n:
                    raise ValueError(f"frame {i} has {len(f)} channels, expected {n}")
                if any(not (0.0 <= v <= 1.0) for v in f):
                    raise ValueError(f"frame {i} has values outside [0, 1]")

    @property
    def num_speakers(self) -> int:
        return len(self.frames[0]) if self.frames else 0


def aggregate_word_probability(frames: FrameLogits, start: float, end: float) -> SpeakerProbVector:
    """Speaker probability vector for the word spanning ``[start, end)``.

    Sums the raw sigmoid values of every frame whose start time falls inside
    the span, per speaker, then normalizes by the grand total. Falls back to
    the uniform vector (with an :class:`IngestWarning`) when the span holds no
    frames or only zeros.
    """
    if end < start:
        raise ValueError("end must be >= start")
    if not frames.frames:
        raise ValueError("frames must be non-empty")
    n = frames.num_speakers
    rate = frames.frame_rate_seconds
    # candidate index range, then an exact membership test on each frame start
    first = max(0, int(math.floor(start / rate)) - 1)
    last = min(len(frames.frames), int(math.ceil(end / rate)) + 1)
    sums = [0.0] * n
    count = 0
    for i in range(first, last):
        t = i * rate
        if start - TIME_EPS <= t < end - TIME_EPS:
            count += 1
            for k, v in enumerate(frames.frames[i]):
                sums[k] += v
    if count == 0 or math.fsum(sums) <= 0.0:
        warnings.warn(
            f"no usable frames in [{start}, {end}); using a uniform speaker vector",
            IngestWarning,
            stacklevel=2,
        )
        return SpeakerProbVector.uniform(n)
    return SpeakerProbVector.from_weights(sums)


def load_frames(path: PathLike) -> FrameLogits:
    lines = _read_json_lines(path)
    if not lines:
        raise SessionFormatError(f"{path}: empty frame file")
    lineno, header = lines[0]
    if not isinstance(header, dict) or "frame_rate" not in header:
        raise SessionFormatError(f"{path}:{lineno}: first record must be a frame_rate header")
    frames = []
    for lineno, rec in lines[1:]:
        if not isinstance(rec, list):
            raise SessionFormatError(f"{path}:{lineno}: frame must be an array of numbers")
        frames.append(rec)
    try:
        return FrameLogits(tuple(tuple(f) for f in frames), float(header["frame_rate"]))
    except (TypeError, ValueError) as err:
        raise SessionFormatError(f"{path}: {err}") from err


def load_session(path: PathLike, frames_path: Optional[PathLike] = None) -> SessionInput:
    """Read a session file into an onset-ordered :class:`SessionInput`.

    Words without a ``q`` field get one aggregated from ``frames_path`` (or a
    sibling ``<stem>.frames.jsonl`` if present).
    """
    path = Path(path)
    records = _parse_word_records(path)
    frames = None
    if frames_path is None:
        sibling = _frames_sibling(path)
        if sibling.exists():
            frames_path = sibling
    if frames_path is not None:
        frames = load_frames(frames_path)

    words = []
    num_speakers = None
    for idx, (lineno, rec) in enumerate(records):
        if "q" in rec:
            q = _file_q(rec["q"], path, lineno)
        elif frames is not None:
            q = aggregate_word_probability(frames, rec["start"], rec["end"])
        else:
            raise SessionFormatError(f"{path}:{lineno}: word {idx} has no q and no frame file was given")
        if num_speakers is None:
            num_speakers = len(q)
        elif len(q) != num_speakers:
            raise SessionFormatError(
                f"{path}:{lineno}: word {idx} ({rec['word']!r}) has {len(q)} speaker entries, "
                f"expected {num_speakers}"
            )
        words.append(WordToken(rec["word"], rec["start"], rec["end"], q))

    if num_speakers is None:
        if frames is None:
            raise SessionFormatError(f"{path}: empty session and no frame file to infer speaker count")
        num_speakers = frames.num_speakers
    return _sorted_session(words, num_speakers, path)


def session_from_records(records: Iterable[dict]) -> SessionInput:
    """Build a session from in-memory records shaped like file lines."""
    words = []
    for idx, rec in enumerate(records):
        _check_word_record(rec, "<records>", idx)
        words.append(WordToken(rec["word"], float(rec["start"]), float(rec["end"]), _file_q(rec["q"], "<records>", idx)))
    if not words:
        raise SessionFormatError("cannot infer speaker count from zero records")
    n = len(words[0].acoustic)
    for idx, w in enumerate(words):
        if len(w.acoustic) != n:
            raise SessionFormatError(f"word {idx} ({w.text!r}) has {len(w.acoustic)} speaker entries, expected {n}")
    return _sorted_session(words, n, "<records>")


def write_session(session: SessionInput, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in session.words:
            rec = {"word": w.text, "start": w.start, "end": w.end, "q": list(w.acoustic.probs)}
            fh.write(json.dumps(rec) + "\n")


def load_transcript(path: PathLike) -> SpeakerAttributedTranscript:
    """Read a reference or hypothesis transcript (session format plus ``speaker``)."""
    path = Path(path)
    entries = []
    for idx, (lineno, rec) in enumerate(_parse_word_records(path)):
        spk = rec.get("speaker")
        if isinstance(spk, bool) or not isinstance(spk, int) or spk < 0:
            raise SessionFormatError(f"{path}:{lineno}: word {idx} needs a non-negative integer 'speaker'")
        entries.append(TranscriptEntry(rec["word"], rec["start"], rec["end"], spk))
    if any((b.start, b.end) < (a.start, a.end) for a, b in zip(entries, entries[1:])):
        warnings.warn(f"{path}: transcript not onset-ordered; sorting", IngestWarning, stacklevel=2)
        entries.sort(key=lambda e: (e.start, e.end))
    return SpeakerAttributedTranscript(tuple(entries))


def write_transcript(
    transcript: SpeakerAttributedTranscript, path: PathLike, session: Optional[SessionInput] = None
) -> None:
    """Write a transcript; with ``session`` the acoustic ``q`` is kept alongside."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, e in enumerate(transcript.entries):
            rec = {"word": e.text, "start": e.start, "end": e.end}
            if session is not None:
                rec["q"] = list(session.words[i].acoustic.probs)
            rec["speaker"] = e.speaker
            fh.write(json.dumps(rec) + "\n")


def _frames_sibling(path: Path) -> Path:
    name = path.name
    for suffix in (".session.jsonl", ".jsonl"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)] + ".frames.jsonl")
    return path.with_name(name + ".frames.jsonl")


def _sorted_session(words: Sequence[WordToken], num_speakers: int, source) -> SessionInput:
    keys = [(w.start, w.end) for w in words]
    if any(b < a for a, b in zip(keys, keys[1:])):
        warnings.warn(f"{source}: words not onset-ordered; sorting", IngestWarning, stacklevel=3)
    return SessionInput.from_words(words, num_speakers)


def _read_json_lines(path: PathLike) -> list[tuple[int, object]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append((lineno, json.loads(line)))
            except json.JSONDecodeError as err:
                raise SessionFormatError(f"{path}:{lineno}: malformed record: {err.msg}") from err
    return out


def _parse_word_records(path: PathLike) -> list[tuple[int, dict]]:
    records = []
    for idx, (lineno, rec) in enumerate(_read_json_lines(path)):
        _check_word_record(rec, path, lineno)
        rec = dict(rec)
        rec["start"] = float(rec["start"])
        rec["end"] = float(rec["end"])
        records.append((lineno, rec))
    return records


def _check_word_record(rec, source, where) -> None:
    if not isinstance(rec, dict):
        raise SessionFormatError(f"{source}:{where}: record must be an object")
    for key in ("word", "start", "end"):
        if key not in rec:
            raise SessionFormatError(f"{source}:{where}: missing field {key!r}")
    if not isinstance(rec["word"], str) or not rec["word"]:
        raise SessionFormatError(f"{source}:{where}: 'word' must be a non-empty string")
    for key in ("start", "end"):
        v = rec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SessionFormatError(f"{source}:{where}: {key!r} must be a finite number")
    if rec["end"] < rec["start"]:
        raise SessionFormatError(f"{source}:{where}: 'end' precedes 'start'")


def _file_q(raw, source, where) -> SpeakerProbVector:
    if not isinstance(raw, list) or not raw:
        raise SessionFormatError(f"{source}:{where}: 'q' must be a non-empty array")
    vals = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
            raise SessionFormatError(f"{source}:{where}: 'q' entries must be finite non-negative numbers")
        vals.append(float(v))
    total = math.fsum(vals)
    if abs(total - 1.0) > Q_FILE_TOLERANCE:
        raise SessionFormatError(f"{source}:{where}: 'q' sums to {total}, not 1")
    return SpeakerProbVector.from_weights(vals)
