import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
import requests

from lexdiar.core import Hypothesis, ScorerError
from lexdiar.decoder import DecodeError, LexicalScorerPair, decode_beam
from lexdiar.core import DecoderConfig, SessionInput, SpeakerProbVector, WordToken
from lexdiar.llm import (
    LlmClient,
    LlmPrompt,
    LlmScorer,
    MockRules,
    build_speaker_prompt,
    build_word_prompt,
    serve_in_thread,
    speaker_posterior_llm,
    speaker_probs_from_log_probs,
    word_probability_llm,
)
from lexdiar.llm.client import parse_score_response

from conftest import build_hypothesis

EXPECTED_PROMPT = (
    "[Speaker0]: how are you doing these days\n"
    "[Speaker1]: things are going very well\n"
    "[Speaker0]: well tell me more\n"
    "[Speaker1]: there is a project that i'm\n"
    "[end]\n"
    "Question: The next word is (working). Who spoke (working)?\n"
    "Answer:[Speaker"
)


def test_dialogue_speaker_prompt(dialogue_hyp):
    p = build_speaker_prompt(dialogue_hyp, "working", 40)
    assert p.text == EXPECTED_PROMPT
    assert p.continuation_candidates == ("0", "1")


def test_empty_history_speaker_prompt():
    p = build_speaker_prompt(Hypothesis.initial(3), "hi", 40)
    assert p.text == "[end]\nQuestion: The next word is (hi). Who spoke (hi)?\nAnswer:[Speaker"
    assert p.continuation_candidates == ("0", "1", "2")


def test_window_one_keeps_last_word(dialogue_hyp):
    p = build_speaker_prompt(dialogue_hyp, "working", 1)
    assert p.text.split("\n")[0] == "[Speaker1]: i'm"
    assert p.text.split("\n")[1] == "[end]"


def test_window_spans_turn_boundary(dialogue_hyp):
    p = build_word_prompt(dialogue_hyp, "working", 8)
    assert p.text == "[Speaker0]: me more\n[Speaker1]: there is a project that i'm"


def test_word_prompt(dialogue_hyp):
    p = build_word_prompt(dialogue_hyp, "working", 40)
    assert p.text == EXPECTED_PROMPT.split("\n[end]")[0]
    assert p.continuation_candidates == ("working",)
    assert build_word_prompt(Hypothesis.initial(2), "don't", 40) == LlmPrompt("[start]", ("don't",))


def test_prompt_validation():
    with pytest.raises(ValueError):
        LlmPrompt("x", ())
    with pytest.raises(ValueError):
        LlmPrompt("x", ("a", "a"))


def test_log_prob_normalization():
    assert speaker_probs_from_log_probs([math.log(0.6), math.log(0.2)]).probs == pytest.approx((0.75, 0.25), abs=1e-15)
    assert speaker_probs_from_log_probs([-3.0, -3.0, -3.0]).probs == pytest.approx((1 / 3,) * 3)
    # extreme values must not underflow to 0/0
    assert speaker_probs_from_log_probs([-2000.0, -2001.0])[0] == pytest.approx(1 / (1 + math.exp(-1)))


def test_response_parsing_errors():
    assert parse_score_response({"id": "r", "log_probs": [0.0]}, "r", 1).log_probs == (0.0,)
    for bad in ({"id": "x", "log_probs": [0.0]}, {"id": "r", "log_probs": [0.0, 1.0]}, {"id": "r", "log_probs": ["a"]}, []):
        with pytest.raises(ScorerError):
            parse_score_response(bad, "r", 1)


RULES = {
    "default_log_prob": -6.0,
    "speaker_policy": {"type": "longest_last_turn", "prob": 0.9},
    "tokens": {"don't": ["don", "'t"]},
    "rules": [
        {"context": "", "token": "hello", "log_prob": math.log(0.05)},
        {"context": "", "token": "don", "log_prob": math.log(0.5)},
        {"context": " don", "token": "'t", "log_prob": math.log(0.2)},
        {"context": "that i'm", "token": "working", "log_prob": math.log(0.3)},
        {"context": "", "token": "sure", "log_prob": 0.0},
    ],
}


@pytest.fixture(scope="module")
def mock_url():
    with serve_in_thread(MockRules.from_dict(RULES)) as url:
        yield url


def test_mock_speaker_policy(mock_url, dialogue_hyp):
    post = speaker_posterior_llm(mock_url, build_speaker_prompt(dialogue_hyp, "working", 40))
    assert post.probs == pytest.approx((0.1, 0.9), abs=1e-12)


def test_mock_word_probabilities(mock_url, dialogue_hyp):
    h = Hypothesis.initial(2)
    assert word_probability_llm(mock_url, build_word_prompt(h, "hello", 40)) == pytest.approx(0.05)
    assert word_probability_llm(mock_url, build_word_prompt(h, "don't", 40)) == pytest.approx(0.1)
    assert word_probability_llm(mock_url, build_word_prompt(h, "sure", 40)) == 1.0
    assert word_probability_llm(mock_url, build_word_prompt(dialogue_hyp, "working", 40)) == pytest.approx(0.3)
    assert word_probability_llm(mock_url, build_word_prompt(h, "zzz", 40)) == pytest.approx(math.exp(-6))


def test_mock_rejects_bad_requests(mock_url):
    r = requests.post(mock_url + "/v1/score", data=b"{not json", timeout=5)
    assert r.status_code == 400
    r = requests.post(mock_url + "/v1/score", json={"id": "a", "prompt": "p", "continuations": []}, timeout=5)
    assert r.status_code == 400
    assert requests.post(mock_url + "/other", json={}, timeout=5).status_code == 404


def test_client_ids_are_unique(mock_url):
    client = LlmClient(mock_url)
    assert [client._next_id() for _ in range(3)] == ["req-0", "req-1", "req-2"]


def test_scorer_batches_match_single_calls(mock_url, dialogue_hyp):
    sc = LlmScorer(mock_url, max_workers=4)
    hyps = [dialogue_hyp, Hypothesis.initial(2), build_hypothesis([(0, "that i'm")])]
    posts = sc.speaker_posteriors(hyps, "working", 40)
    assert [p.probs for p in posts] == [
        speaker_posterior_llm(mock_url, build_speaker_prompt(h, "working", 40)).probs for h in hyps
    ]
    assert sc.word_probabilities(hyps, "working", 40) == pytest.approx([0.3, math.exp(-6), 0.3])


class _WrongIdHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        self.rfile.read(int(self.headers["Content-Length"]))
        body = json.dumps({"id": "someone-else", "log_probs": [0.0, 0.0]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def test_protocol_errors_surface():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _WrongIdHandler)
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    try:
        url = f"http://127.0.0.1:{server.server_address[1]}"
        with pytest.raises(ScorerError, match="does not match"):
            speaker_posterior_llm(url, build_speaker_prompt(Hypothesis.initial(2), "x", 5))
    finally:
        server.shutdown()
        server.server_close()


def test_unreachable_server_aborts_decode():
    with serve_in_thread(MockRules()) as url:
        pass  # server is gone once the block exits
    scorer = LlmScorer(LlmClient(url, timeout=2))
    q = SpeakerProbVector((0.6, 0.4))
    sess = SessionInput((WordToken("a", 0, 1, q), WordToken("b", 1, 2, q)), 2)
    with pytest.raises(DecodeError) as info:
        decode_beam(sess, LexicalScorerPair(scorer, scorer), DecoderConfig())
    assert info.value.word_index == 0


def test_mock_rules_validation():
    with pytest.raises(ValueError):
        MockRules.from_dict({"speaker_policy": {"type": "coin"}})
    with pytest.raises(ValueError):
        MockRules.from_dict({"speaker_policy": {"type": "longest_last_turn", "prob": 1.0}})


def test_mock_longest_suffix_wins():
    rules = MockRules.from_dict(
        {"rules": [{"context": "i'm", "token": "w", "log_prob": -1.0}, {"context": "that i'm", "token": "w", "log_prob": -0.1}]}
    )
    assert rules.score("so that i'm", ["w"]) == [-0.1]
    assert rules.score("yes i'm", ["w"]) == [-1.0]


def test_mock_policy_tie_goes_to_recent_turn():
    rules = MockRules.from_dict({"speaker_policy": {"type": "longest_last_turn", "prob": 0.8}})
    h = build_hypothesis([(0, "a b"), (1, "c"), (2, "d e")], num_speakers=3)
    lps = rules.score(build_speaker_prompt(h, "x", 40).text, ["0", "1", "2"])
    assert [math.exp(v) for v in lps] == pytest.approx([0.1, 0.1, 0.8])
