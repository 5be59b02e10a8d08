"""Command line entry point: decode, score, tune, synth, run, mock-llm."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional

from .core import DecoderConfig
from .decoder import NO_SCORERS, DecodeError, LexicalScorerPair, decode_beam
from .harness.experiment import run_experiment
from .harness.synth import SynthConfig, generate_corpus, generator_arpa
from .harness.tuning import SearchSpace, run_search
from .ingest import load_session, load_transcript, write_session, write_transcript
from .lm_ngram import NgramScorer, load_arpa
from .metrics import cp_wer, normalize_transcript, sa_wer, wer

logger = logging.getLogger("lexdiar")

SESSION_SUFFIX = ".session.jsonl"
REF_SUFFIX = ".ref.jsonl"


def build_scorers(
    lm: str,
    speaker_lm: Optional[str] = None,
    word_lm: Optional[str] = None,
    arpa: Optional[str] = None,
    llm_endpoint: Optional[str] = None,
    prob_floor: float = 1e-10,
) -> LexicalScorerPair:
    """``lm`` sets both scorers; ``speaker_lm`` / ``word_lm`` override one side."""
    if lm == "none" and speaker_lm is None and word_lm is None:
        return NO_SCORERS
    speaker_kind = speaker_lm or (lm if lm != "none" else None)
    word_kind = word_lm or (lm if lm != "none" else None)
    if speaker_kind is None or word_kind is None:
        raise SystemExit("error: both --speaker-lm and --word-lm are needed when --lm is none")
    made = {}

    def make(kind: str):
        if kind in made:
            return made[kind]
        if kind == "ngram":
            if not arpa:
                raise SystemExit("error: --arpa is required for n-gram scoring")
            made[kind] = NgramScorer(load_arpa(arpa), prob_floor)
        elif kind == "llm":
            if not llm_endpoint:
                raise SystemExit("error: --llm-endpoint is required for LLM scoring")
            from .llm import LlmScorer

            made[kind] = LlmScorer(llm_endpoint, prob_floor)
        else:
            raise SystemExit(f"error: unknown scorer {kind!r}")
        return made[kind]

    return LexicalScorerPair(make(speaker_kind), make(word_kind))


def _add_scorer_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lm", choices=("none", "ngram", "llm"), default="none")
    p.add_argument("--speaker-lm", choices=("ngram", "llm"))
    p.add_argument("--word-lm", choices=("ngram", "llm"))
    p.add_argument("--arpa")
    p.add_argument("--llm-endpoint")


def _add_decoder_args(p: argparse.ArgumentParser) -> None:
    d = DecoderConfig()
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--context", type=int, default=d.context_window)
    p.add_argument("--beam-width", type=int, default=d.beam_width)
    p.add_argument("--prob-floor", type=float, default=d.prob_floor)


def _decoder_config(args) -> DecoderConfig:
    return DecoderConfig(args.alpha, args.beta, args.context, args.beam_width, args.prob_floor)


def _scorers(args) -> LexicalScorerPair:
    return build_scorers(args.lm, args.speaker_lm, args.word_lm, args.arpa, args.llm_endpoint, args.prob_floor)


def _load_dir(directory: str):
    root = Path(directory)
    names, sessions, refs = [], [], []
    for path in sorted(root.glob("*" + SESSION_SUFFIX)):
        name = path.name[: -len(SESSION_SUFFIX)]
        ref_path = root / (name + REF_SUFFIX)
        if not ref_path.exists():
            raise SystemExit(f"error: {path} has no reference {ref_path.name}")
        names.append(name)
        sessions.append(load_session(path))
        refs.append(load_transcript(ref_path))
    if not sessions:
        raise SystemExit(f"error: no *{SESSION_SUFFIX} files in {root}")
    return names, sessions, refs


def cmd_decode(args) -> int:
    session = load_session(args.session)
    transcript = decode_beam(session, _scorers(args), _decoder_config(args))
    if args.out:
        write_transcript(transcript, args.out)
    else:
        for e in transcript.entries:
            sys.stdout.write(json.dumps({"word": e.text, "start": e.start, "end": e.end, "speaker": e.speaker}) + "\n")
    return 0


def cmd_score(args) -> int:
    ref = normalize_transcript(load_transcript(args.ref))
    hyp = normalize_transcript(load_transcript(args.hyp))
    out = {}
    w = wer(ref.words, hyp.words)
    if args.metric in ("wer", "all"):
        out["wer"] = asdict(w) | {"rate": w.rate}
    if args.metric in ("sawer", "all"):
        s = sa_wer(ref, hyp)
        out["sa_wer"] = asdict(s) | {"rate": s.rate}
    if args.metric in ("cpwer", "all"):
        c, perm = cp_wer(ref, hyp)
        out["cp_wer"] = asdict(c) | {"rate": c.rate, "mapping": {str(k): v for k, v in perm.items()}}
    if args.metric == "all":
        out["delta_sa"] = out["sa_wer"]["rate"] - w.rate
        out["delta_cp"] = out["cp_wer"]["rate"] - w.rate
    print(json.dumps(out, indent=2))
    return 0


def cmd_tune(args) -> int:
    _, sessions, refs = _load_dir(args.dev_dir)
    with open(args.space, encoding="utf-8") as fh:
        space = SearchSpace.from_dict(json.load(fh), budget=args.budget, seed=args.seed)
    result = run_search(list(zip(sessions, refs)), _scorers(args), space)
    for t in result.trials:
        logger.info("trial %d value=%s error=%s config=%s", t.index, t.value, t.error, t.config)
    payload = asdict(result.best) | {"objective": result.best_value}
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_synth(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    num_sessions = int(raw.pop("num_sessions", 1))
    cfg = SynthConfig(**raw)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, (session, ref) in enumerate(generate_corpus(cfg, num_sessions)):
        write_session(session, out / f"session{i:03d}{SESSION_SUFFIX}")
        write_transcript(ref, out / f"session{i:03d}{REF_SUFFIX}", session)
    (out / "lm.arpa").write_text(
        generator_arpa(cfg.num_speakers, cfg.lexical_separability, cfg.turn_change_prob), encoding="utf-8"
    )
    (out / "synth_config.json").write_text(json.dumps(cfg.to_dict() | {"num_sessions": num_sessions}, indent=2) + "\n")
    print(f"wrote {num_sessions} sessions to {out}")
    return 0


def cmd_run(args) -> int:
    names, sessions, refs = _load_dir(args.data_dir)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        config = DecoderConfig(**{k: raw[k] for k in ("alpha", "beta", "context_window", "beam_width", "prob_floor") if k in raw})
    else:
        config = _decoder_config(args)
    report = run_experiment(sessions, refs, _scorers(args), config, names)
    text = report.to_jsonl()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_mock_llm(args) -> int:
    from .llm.mock import run_mock_server

    run_mock_server(args.rules, args.port, args.host)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexdiar", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="assign speakers to the words of one session")
    p.add_argument("--session", required=True)
    _add_scorer_args(p)
    _add_decoder_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="compare a hypothesis transcript with a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--metric", choices=("wer", "sawer", "cpwer", "all"), default="all")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("tune", help="random search over decoder settings on a dev set")
    p.add_argument("--dev-dir", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    _add_scorer_args(p)
    p.add_argument("--prob-floor", type=float, default=DecoderConfig().prob_floor)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("synth", help="write a synthetic corpus and its bigram model")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="score TS-match and beam search on a corpus")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--config", help="decoder config JSON, e.g. the output of tune")
    _add_scorer_args(p)
    _add_decoder_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("mock-llm", help="serve the deterministic mock LLM")
    p.add_argument("--rules", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_mock_llm)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DecodeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
