"""Dialogue prompts for LLM speaker and word scoring.

Rendering rules: one ``[Speaker<k>]: words`` line per turn, a single space
after each colon, single newlines between lines, no trailing newline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from ..core import Hypothesis

END_TAG = "[end]"
ANSWER_PREFIX = "Answer:[Speaker"
# stands in for the dialogue when no word has been committed yet
EMPTY_DIALOGUE = "[start]"


@dataclass(frozen=True)
class LlmPrompt:
    text: str
    continuation_candidates: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "continuation_candidates", tuple(self.continuation_candidates))
        if not self.text:
            raise ValueError("prompt text must be non-empty")
        if not self.continuation_candidates:
            raise ValueError("prompt needs at least one continuation candidate")
        if len(set(self.continuation_candidates)) != len(self.continuation_candidates):
            raise ValueError("continuation candidates must be distinct")


def dialogue_lines(hyp: Hypothesis, context_window: int) -> list[str]:
    """Turn lines covering the last ``context_window`` committed words."""
    turns = hyp.dialogue_turns()
    budget = context_window
    kept: list[tuple[int, list[str]]] = []
    for speaker, words in reversed(turns):
        if budget <= 0:
            break
        take = words[-budget:]
        kept.append((speaker, take))
        budget -= len(take)
    kept.reverse()
    return [f"[Speaker{k}]: {' '.join(words)}" for k, words in kept]


def build_speaker_prompt(hyp: Hypothesis, word: str, context_window: int) -> LlmPrompt:
    lines = dialogue_lines(hyp, context_window)
    lines.append(END_TAG)
    lines.append(f"Question: The next word is ({word}). Who spoke ({word})?")
    lines.append(ANSWER_PREFIX)
    candidates = tuple(str(k) for k in range(hyp.num_speakers))
    return LlmPrompt("\n".join(lines), candidates)


def build_word_prompt(hyp: Hypothesis, word: str, context_window: int) -> LlmPrompt:
    """The dialogue alone, ending where ``word`` would be inserted."""
    lines = dialogue_lines(hyp, context_window)
    text = "\n".join(lines) if lines else EMPTY_DIALOGUE
    return LlmPrompt(text, (word,))
