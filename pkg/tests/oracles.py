"""Independent brute-force references used by the tests."""

import itertools
from functools import lru_cache

from lexdiar.decoder import _lexical_terms, hypothesis_from_assignments, step_score


def all_alignments(ref, hyp):
    """Every (S, I, D) reachable by some alignment of ref onto hyp."""

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(ref) and j == len(hyp):
            return {(0, 0, 0)}
        out = set()
        if i < len(ref) and j < len(hyp):
            cost = 0 if ref[i] == hyp[j] else 1
            out |= {(s + cost, a, d) for s, a, d in go(i + 1, j + 1)}
        if i < len(ref):
            out |= {(s, a, d + 1) for s, a, d in go(i + 1, j)}
        if j < len(hyp):
            out |= {(s, a + 1, d) for s, a, d in go(i, j + 1)}
        return out

    return go(0, 0)


def edit_distance(a, b):
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] != b[j]))

    return go(0, 0)


def brute_cpwer_errors(reference, hypothesis):
    """Min over all injective speaker matchings, recomputed from scratch."""
    ref = reference.words_by_speaker()
    hyp = hypothesis.words_by_speaker()
    r_keys, h_keys = list(ref), list(hyp)
    n = max(len(r_keys), len(h_keys))
    r_keys += [None] * (n - len(r_keys))
    h_keys += [None] * (n - len(h_keys))
    best = None
    for perm in itertools.permutations(h_keys):
        total = sum(edit_distance(ref.get(r, []), hyp.get(h, [])) for r, h in zip(r_keys, perm))
        best = total if best is None else min(best, total)
    return best


def enumerate_scores(session, scorers, config):
    """Total score of every assignment sequence, each scored independently."""
    n_spk = session.num_speakers
    texts = [w.text for w in session.words]
    out = {}
    for seq in itertools.product(range(n_spk), repeat=len(texts)):
        total = 0.0
        for i in range(len(texts)):
            hyp = hypothesis_from_assignments(texts[:i], seq[:i], n_spk)
            posts, pws = _lexical_terms(scorers, [hyp], texts[i], config, i)
            total += step_score(
                session.words[i].acoustic, seq[i], posts[0], pws[0], config.alpha, config.beta, config.prob_floor
            )
        out[seq] = total
    return out


def brute_best(scores):
    top = max(scores.values())
    return min(seq for seq, s in scores.items() if s == top)
