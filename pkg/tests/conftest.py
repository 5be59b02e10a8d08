from pathlib import Path

import pytest

from lexdiar.core import Hypothesis
from lexdiar.lm_ngram import load_arpa

DATA = Path(__file__).parent / "data"

# the four-turn two-speaker exchange used throughout the prompt/context tests
DIALOGUE_TURNS = [
    (0, "how are you doing these days"),
    (1, "things are going very well"),
    (0, "well tell me more"),
    (1, "there is a project that i'm"),
]


def build_hypothesis(turns, num_speakers=2):
    hyp = Hypothesis.initial(num_speakers)
    for speaker, text in turns:
        for w in text.split():
            hyp = hyp.extend(speaker, w)
    return hyp


@pytest.fixture
def dialogue_hyp():
    return build_hypothesis(DIALOGUE_TURNS)


@pytest.fixture(scope="session")
def toy_model():
    return load_arpa(DATA / "toy_trigram.arpa")


@pytest.fixture(scope="session")
def closed_model():
    return load_arpa(DATA / "closed_trigram.arpa")


# criterion -> (passed, detail), filled in by test_acceptance
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
