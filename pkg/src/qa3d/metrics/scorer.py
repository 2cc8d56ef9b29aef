"""Caption-style evaluation metrics: BLEU-1/4, ROUGE-L, CIDEr-D.

These double as the reinforcement-learning reward, so the implementation
follows the consensus coco-caption conventions: CIDEr-D with clipped tf-idf
counts, Gaussian length penalty (sigma=6) and a x10 scale; corpus-level BLEU
with the epsilon floor and no add-one smoothing; ROUGE-L as an F-measure
with beta=1.2 taking the max precision/recall over references.

Tokens may be any hashable (strings for evaluation, vocabulary ids on the
reward path); they are interned to small ints before hitting the kernels.
Reference averages use ``math.fsum`` so scores are invariant to reference
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._backend import impl as _k

NMAX = 4
CIDER_SIGMA = 6.0
_TINY = 1e-15
_SMALL = 1e-9
_MAX_INTERN = (1 << 15) - 2

BLEU1, BLEU4, ROUGEL, CIDER = "BLEU-1", "BLEU-4", "ROUGE-L", "CIDEr"


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class Score:
    metric: str
    value: float


class _Interner:
    """Hashable token -> small int, shared across one scoring context."""

    def __init__(self):
        self._map: dict = {}

    def ids(self, tokens) -> list:
        out = []
        m = self._map
        for t in tokens:
            i = m.get(t)
            if i is None:
                i = len(m)
                if i > _MAX_INTERN:
                    raise EvaluationError(f"token universe exceeds {_MAX_INTERN} distinct entries")
                m[t] = i
            out.append(i)
        return out


class NGramStats:
    """Frozen document-frequency table over a reference corpus.

    ``df`` maps packed n-grams to the number of reference sets containing
    them; scoring never mutates it (the interner may grow for unseen
    candidate tokens, which does not affect stored frequencies).
    """

    def __init__(self, df: dict, n_docs: int, interner: _Interner):
        self.df = df
        self.n_docs = n_docs
        self.log_ndocs = math.log(n_docs)
        self._interner = interner

    @classmethod
    def build(cls, reference_sets) -> "NGramStats":
        if not reference_sets:
            raise ValueError("idf corpus needs at least one reference set")
        interner = _Interner()
        df: dict = {}
        for refs in reference_sets:
            if not refs:
                raise ValueError("encountered an empty reference set")
            seen = set()
            for ref in refs:
                seen.update(_k.count_ngrams(interner.ids(ref), NMAX).keys())
            for key in seen:
                df[key] = df.get(key, 0) + 1
        return cls(df, len(reference_sets), interner)

    def cook(self, tokens):
        """Precompute the tf-idf representation of one sentence."""
        return _k.cider_cook(self._interner.ids(tokens), self.df, self.log_ndocs, NMAX)

    def sim(self, cooked_candidate, cooked_reference) -> float:
        return _k.cider_sim(cooked_candidate, cooked_reference, CIDER_SIGMA, NMAX)

    def score_cooked(self, cooked_candidate, cooked_references) -> float:
        sims = [self.sim(cooked_candidate, r) for r in cooked_references]
        return 10.0 * math.fsum(sims) / len(sims)


def build_idf(reference_sets) -> NGramStats:
    """Document frequencies over a corpus of reference sets."""
    return NGramStats.build(reference_sets)


def cider(candidate, references, stats: NGramStats) -> Score:
    """CIDEr-D of one candidate against its references, in [0, 10]."""
    if not references:
        raise ValueError("cider needs at least one reference")
    cooked_c = stats.cook(candidate)
    return Score(CIDER, stats.score_cooked(cooked_c, [stats.cook(r) for r in references]))


def bleu(candidates, reference_sets, n: int) -> Score:
    """Corpus-level BLEU-n: geometric mean of clipped precisions x brevity."""
    if n not in (1, 2, 3, 4):
        raise ValueError("BLEU order must be in 1..4")
    if not candidates or len(candidates) != len(reference_sets):
        raise ValueError("candidates and reference sets must align and be non-empty")
    interner = _Interner()
    correct = [0] * n
    guess = [0] * n
    testlen = reflen = 0
    for cand, refs in zip(candidates, reference_sets):
        tl, rl, cor, gue = _k.bleu_stats(interner.ids(cand), [interner.ids(r) for r in refs], n)
        testlen += tl
        reflen += rl
        for k in range(n):
            correct[k] += cor[k]
            guess[k] += gue[k]
    value = 1.0
    for k in range(n):
        value *= (correct[k] + _TINY) / (guess[k] + _SMALL)
    value **= 1.0 / n
    ratio = (testlen + _TINY) / (reflen + _SMALL)
    if ratio < 1:
        value *= math.exp(1.0 - 1.0 / ratio)
    return Score(BLEU1 if n == 1 else f"BLEU-{n}", value)


def rouge_l(candidate, references, beta: float = 1.2) -> Score:
    """ROUGE-L F-measure, max precision/recall over references."""
    if not references:
        raise ValueError("rouge_l needs at least one reference")
    if not candidate:
        return Score(ROUGEL, 0.0)
    interner = _Interner()
    cand = interner.ids(candidate)
    prec_max = rec_max = 0.0
    for ref in references:
        if not ref:
            continue
        rids = interner.ids(ref)
        lcs = _k.lcs_length(cand, rids)
        prec_max = max(prec_max, lcs / len(cand))
        rec_max = max(rec_max, lcs / len(rids))
    if prec_max == 0.0 or rec_max == 0.0:
        return Score(ROUGEL, 0.0)
    b2 = beta * beta
    return Score(ROUGEL, ((1 + b2) * prec_max * rec_max) / (rec_max + b2 * prec_max))


def score_corpus(predictions: dict, gold: dict) -> dict[str, Score]:
    """Corpus-level BLEU plus per-item means of ROUGE-L and CIDEr-D.

    The CIDEr idf corpus is the gold reference sets themselves.
    """
    missing_pred = sorted(set(gold) - set(predictions))
    missing_gold = sorted(set(predictions) - set(gold))
    if missing_pred or missing_gold:
        raise EvaluationError(
            f"prediction/gold key mismatch: missing predictions for {missing_pred[:5]}, "
            f"missing gold for {missing_gold[:5]}"
        )
    ids = sorted(gold)
    cands = [predictions[i] for i in ids]
    refs = [gold[i] for i in ids]
    stats = build_idf(refs)
    cider_vals = [cider(c, r, stats).value for c, r in zip(cands, refs)]
    rouge_vals = [rouge_l(c, r).value for c, r in zip(cands, refs)]
    return {
        BLEU1: bleu(cands, refs, 1),
        BLEU4: bleu(cands, refs, 4),
        ROUGEL: Score(ROUGEL, math.fsum(rouge_vals) / len(ids)),
        CIDER: Score(CIDER, math.fsum(cider_vals) / len(ids)),
    }


def format_report(scores: dict[str, Score], extra: dict | None = None) -> str:
    """Aligned text table; values reported x100 with two decimals."""
    rows = [(name, s.value * 100.0) for name, s in scores.items()]
    for name, value in (extra or {}).items():
        rows.append((name, value * 100.0))
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value:7.2f}" for name, value in rows)
