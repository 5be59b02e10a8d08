from .client import (
    LlmClient,
    LlmScorer,
    ScoreResponse,
    speaker_posterior_llm,
    speaker_probs_from_log_probs,
    word_probability_llm,
)
from .mock import MockRules, make_server, run_mock_server, serve_in_thread
from .prompts import LlmPrompt, build_speaker_prompt, build_word_prompt

__all__ = [
    "LlmClient",
    "LlmPrompt",
    "LlmScorer",
    "MockRules",
    "ScoreResponse",
    "build_speaker_prompt",
    "build_word_prompt",
    "make_server",
    "run_mock_server",
    "serve_in_thread",
    "speaker_posterior_llm",
    "speaker_probs_from_log_probs",
    "word_probability_llm",
]
