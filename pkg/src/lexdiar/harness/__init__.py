from .experiment import BSD, TS_MATCH, Report, run_experiment
from .synth import (
    SynthConfig,
    generate_corpus,
    generate_synthetic_session,
    generator_arpa,
    vocabulary_tables,
    word_speaker_support,
)
from .tuning import SearchSpace, TuneResult, TuningError, run_search, tune

__all__ = [
    "BSD",
    "TS_MATCH",
    "Report",
    "SearchSpace",
    "SynthConfig",
    "TuneResult",
    "TuningError",
    "generate_corpus",
    "generate_synthetic_session",
    "generator_arpa",
    "run_experiment",
    "run_search",
    "tune",
    "vocabulary_tables",
    "word_speaker_support",
]
