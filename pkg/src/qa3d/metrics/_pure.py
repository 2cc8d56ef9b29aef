"""Pure-Python metric kernels.

Reference implementation of the hot scoring primitives; the compiled twin in
``_kernels.pyx`` must match it bit-for-bit. Token sequences arrive as lists
of small interned integer ids; n-grams are packed into single ints at 15
bits per slot (so ids must stay below 32766, checked by the interner).
"""

from __future__ import annotations

import math

BACKEND = "pure"
_SHIFT = 15


def count_ngrams(ids: list, nmax: int) -> dict:
    """Counts of all 1..nmax-grams, keyed by packed id."""
    counts: dict = {}
    length = len(ids)
    for start in range(length):
        key = 0
        for n in range(1, nmax + 1):
            if start + n > length:
                break
            key = (key << _SHIFT) | (ids[start + n - 1] + 1)
            counts[key] = counts.get(key, 0) + 1
    return counts


def ngram_order(key: int) -> int:
    order = 0
    while key:
        key >>= _SHIFT
        order += 1
    return order


def cider_cook(ids: list, df: dict, log_ndocs: float, nmax: int):
    """tf-idf vectors per n-gram order, their norms, and the token length."""
    vecs = [dict() for _ in range(nmax)]
    norms = [0.0] * nmax
    for key, tf in count_ngrams(ids, nmax).items():
        idf = log_ndocs - math.log(max(1.0, df.get(key, 0)))
        n = ngram_order(key) - 1
        w = float(tf) * idf
        vecs[n][key] = w
        norms[n] += w * w
    return vecs, [math.sqrt(x) for x in norms], len(ids)


def cider_sim(cooked_c, cooked_r, sigma: float, nmax: int) -> float:
    """Length-penalized clipped tf-idf cosine, averaged over orders."""
    vecs_c, norms_c, len_c = cooked_c
    vecs_r, norms_r, len_r = cooked_r
    delta = float(len_c - len_r)
    penalty = math.exp(-(delta * delta) / (2.0 * sigma * sigma))
    total = 0.0
    for n in range(nmax):
        num = 0.0
        ref_vec = vecs_r[n]
        for key, wc in vecs_c[n].items():
            wr = ref_vec.get(key, 0.0)
            num += min(wc, wr) * wr
        if norms_c[n] != 0.0 and norms_r[n] != 0.0:
            num /= norms_c[n] * norms_r[n]
        total += num * penalty
    return total / nmax


def bleu_stats(cand_ids: list, ref_ids_list: list, nmax: int):
    """Per-order clipped match and candidate counts, plus length bookkeeping.

    The reference length is the one closest to the candidate length (shorter
    wins ties).
    """
    testlen = len(cand_ids)
    reflen = min((abs(len(r) - testlen), len(r)) for r in ref_ids_list)[1]
    max_ref: dict = {}
    for r in ref_ids_list:
        for key, c in count_ngrams(r, nmax).items():
            if c > max_ref.get(key, 0):
                max_ref[key] = c
    correct = [0] * nmax
    guess = [max(0, testlen - k) for k in range(nmax)]
    for key, c in count_ngrams(cand_ids, nmax).items():
        correct[ngram_order(key) - 1] += min(c, max_ref.get(key, 0))
    return testlen, reflen, correct, guess


def lcs_length(a: list, b: list) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            elif cur[j - 1] >= prev[j]:
                cur[j] = cur[j - 1]
            else:
                cur[j] = prev[j]
        prev = cur
    return prev[-1]
