"""Seeded random search over (alpha, beta, context window, beam width)."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

from ..core import DecoderConfig, SessionInput, SpeakerAttributedTranscript
from ..decoder import DecodeError, LexicalScorerPair, decode_beam
from ..metrics import SessionScores, score_session

logger = logging.getLogger(__name__)

Objective = Callable[[SessionScores], float]
DevSet = Sequence[Tuple[SessionInput, SpeakerAttributedTranscript]]


def delta_sa_objective(scores: SessionScores) -> float:
    return scores.delta_sa


@dataclass(frozen=True)
class SearchSpace:
    """Trial 0 pins beta to 0 whenever the beta range contains it, so the
    acoustic-only setting is always among the candidates."""

    alpha_range: Tuple[float, float] = (0.0, 1.0)
    beta_range: Tuple[float, float] = (0.0, 1.0)
    context_values: Tuple[int, ...] = (40,)
    beam_widths: Tuple[int, ...] = (16,)
    budget: int = 20
    seed: int = 0
    prob_floor: float = 1e-10

    def __post_init__(self) -> None:
        for name in ("alpha_range", "beta_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} must be a non-negative interval (lo <= hi)")
            object.__setattr__(self, name, (float(lo), float(hi)))
        object.__setattr__(self, "context_values", tuple(sorted(set(int(c) for c in self.context_values))))
        object.__setattr__(self, "beam_widths", tuple(sorted(set(int(b) for b in self.beam_widths))))
        if not self.context_values or not self.beam_widths:
            raise ValueError("context_values and beam_widths must be non-empty")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    @classmethod
    def from_dict(cls, cfg: dict, **overrides) -> "SearchSpace":
        merged = {**cfg, **{k: v for k, v in overrides.items() if v is not None}}
        return cls(
            alpha_range=tuple(merged.get("alpha_range", (0.0, 1.0))),
            beta_range=tuple(merged.get("beta_range", (0.0, 1.0))),
            context_values=tuple(merged.get("context_values", (40,))),
            beam_widths=tuple(merged.get("beam_widths", (16,))),
            budget=int(merged.get("budget", 20)),
            seed=int(merged.get("seed", 0)),
            prob_floor=float(merged.get("prob_floor", 1e-10)),
        )

    def sample(self) -> list[DecoderConfig]:
        rng = random.Random(self.seed)
        out = []
        for trial in range(self.budget):
            alpha = rng.uniform(*self.alpha_range)
            beta = rng.uniform(*self.beta_range)
            context = rng.choice(self.context_values)
            beam = rng.choice(self.beam_widths)
            if trial == 0 and self.beta_range[0] == 0.0:
                beta = 0.0
            out.append(DecoderConfig(alpha, beta, context, beam, self.prob_floor))
        return out


@dataclass
class Trial:
    index: int
    config: DecoderConfig
    value: Optional[float] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class TuneResult:
    best: DecoderConfig
    best_value: float
    trials: list[Trial] = field(default_factory=list)


class TuningError(RuntimeError):
    pass


def evaluate_config(dev: DevSet, scorers: LexicalScorerPair, config: DecoderConfig, objective: Objective) -> float:
    values = [objective(score_session(ref, decode_beam(sess, scorers, config))) for sess, ref in dev]
    return sum(values) / len(values)


def run_search(
    dev: DevSet, scorers: LexicalScorerPair, space: SearchSpace, objective: Optional[Objective] = None
) -> TuneResult:
    if not dev:
        raise ValueError("tuning needs at least one dev session")
    objective = objective or delta_sa_objective
    trials = []
    best: Optional[Trial] = None
    for i, cfg in enumerate(space.sample()):
        trial = Trial(i, cfg)
        try:
            trial.value = evaluate_config(dev, scorers, cfg, objective)
        except DecodeError as err:
            trial.error = str(err)
            logger.warning("trial %d failed: %s", i, err)
        trials.append(trial)
        if not trial.failed and (best is None or trial.value < best.value):
            best = trial
        logger.info("trial %d %s -> %s", i, cfg, trial.value)
    if best is None:
        raise TuningError(f"all {len(trials)} trials failed")
    return TuneResult(best.config, best.value, trials)


def tune(
    dev: DevSet, scorers: LexicalScorerPair, space: SearchSpace, objective: Optional[Objective] = None
) -> DecoderConfig:
    """Best config by mean dev objective (default: delta SA-WER); ties keep the earliest trial."""
    return run_search(dev, scorers, space, objective).best
