# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled metric kernels; drop-in twin of ``_pure`` (same values, faster).

Keep the arithmetic order identical to the pure backend: tests assert exact
equality between the two.
"""

from libc.math cimport exp, log, sqrt
from libc.stdlib cimport free, malloc

BACKEND = "compiled"

DEF SHIFT = 15


cdef long long* _to_c_ids(list ids, Py_ssize_t length) except NULL:
    cdef long long* buf = <long long*> malloc(length * sizeof(long long) + 1)
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(length):
        buf[i] = <long long> ids[i]
    return buf


def count_ngrams(list ids, int nmax):
    """Counts of all 1..nmax-grams, keyed by packed id."""
    cdef Py_ssize_t length = len(ids)
    cdef long long* cids = _to_c_ids(ids, length)
    cdef dict counts = {}
    cdef Py_ssize_t start
    cdef int n
    cdef long long key
    cdef object pykey, prev
    try:
        for start in range(length):
            key = 0
            for n in range(1, nmax + 1):
                if start + n > length:
                    break
                key = (key << SHIFT) | (cids[start + n - 1] + 1)
                pykey = key
                prev = counts.get(pykey)
                counts[pykey] = 1 if prev is None else <long long> prev + 1
    finally:
        free(cids)
    return counts


def ngram_order(key):
    cdef long long k = <long long> key
    cdef int order = 0
    while k:
        k >>= SHIFT
        order += 1
    return order


def cider_cook(list ids, dict df, double log_ndocs, int nmax):
    """tf-idf vectors per n-gram order, their norms, and the token length."""
    cdef list vecs = [dict() for _ in range(nmax)]
    cdef list norms_acc = [0.0] * nmax
    cdef dict counts = count_ngrams(ids, nmax)
    cdef long long key
    cdef double idf, w, dfc
    cdef int n
    cdef object pykey, tf, dfval
    for pykey, tf in counts.items():
        key = <long long> pykey
        dfval = df.get(pykey)
        dfc = 0.0 if dfval is None else <double> dfval
        idf = log_ndocs - log(dfc if dfc > 1.0 else 1.0)
        n = 0
        while key:
            key >>= SHIFT
            n += 1
        n -= 1
        w = (<double> tf) * idf
        (<dict> vecs[n])[pykey] = w
        norms_acc[n] = <double> norms_acc[n] + w * w
    return vecs, [sqrt(<double> x) for x in norms_acc], len(ids)


def cider_sim(cooked_c, cooked_r, double sigma, int nmax):
    """Length-penalized clipped tf-idf cosine, averaged over orders."""
    cdef list vecs_c = cooked_c[0]
    cdef list norms_c = cooked_c[1]
    cdef Py_ssize_t len_c = cooked_c[2]
    cdef list vecs_r = cooked_r[0]
    cdef list norms_r = cooked_r[1]
    cdef Py_ssize_t len_r = cooked_r[2]
    cdef double delta = <double> (len_c - len_r)
    cdef double penalty = exp(-(delta * delta) / (2.0 * sigma * sigma))
    cdef double total = 0.0, num, wc, wr, nc, nr
    cdef int n
    cdef dict ref_vec, cand_vec
    cdef object pykey, val, rv
    for n in range(nmax):
        num = 0.0
        cand_vec = <dict> vecs_c[n]
        ref_vec = <dict> vecs_r[n]
        for pykey, val in cand_vec.items():
            rv = ref_vec.get(pykey)
            if rv is None:
                continue
            wc = <double> val
            wr = <double> rv
            num += (wc if wc < wr else wr) * wr
        nc = <double> norms_c[n]
        nr = <double> norms_r[n]
        if nc != 0.0 and nr != 0.0:
            num /= nc * nr
        total += num * penalty
    return total / nmax


def bleu_stats(list cand_ids, list ref_ids_list, int nmax):
    """Per-order clipped match and candidate counts, plus length bookkeeping."""
    cdef Py_ssize_t testlen = len(cand_ids)
    cdef Py_ssize_t reflen = -1, best_gap = -1, rl, gap
    cdef object ref
    for ref in ref_ids_list:
        rl = len(<list> ref)
        gap = rl - testlen if rl > testlen else testlen - rl
        if best_gap < 0 or gap < best_gap or (gap == best_gap and rl < reflen):
            best_gap = gap
            reflen = rl
    cdef dict max_ref = {}
    cdef object pykey, val, prev
    for ref in ref_ids_list:
        for pykey, val in count_ngrams(<list> ref, nmax).items():
            prev = max_ref.get(pykey)
            if prev is None or <long long> val > <long long> prev:
                max_ref[pykey] = val
    cdef list correct = [0] * nmax
    cdef list guess = [max(0, testlen - k) for k in range(nmax)]
    cdef long long key, c, m
    cdef int n
    for pykey, val in count_ngrams(cand_ids, nmax).items():
        key = <long long> pykey
        c = <long long> val
        prev = max_ref.get(pykey)
        m = 0 if prev is None else <long long> prev
        n = 0
        while key:
            key >>= SHIFT
            n += 1
        correct[n - 1] = <long long> correct[n - 1] + (c if c < m else m)
    return testlen, reflen, correct, guess


def lcs_length(list a, list b):
    cdef Py_ssize_t la = len(a), lb = len(b)
    if la == 0 or lb == 0:
        return 0
    cdef long long* ca = _to_c_ids(a, la)
    cdef long long* cb = _to_c_ids(b, lb)
    cdef long long* prev = <long long*> malloc((lb + 1) * sizeof(long long))
    cdef long long* cur = <long long*> malloc((lb + 1) * sizeof(long long))
    if prev == NULL or cur == NULL:
        free(ca); free(cb); free(prev); free(cur)
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef long long tmp, result
    try:
        for j in range(lb + 1):
            prev[j] = 0
        for i in range(la):
            cur[0] = 0
            for j in range(1, lb + 1):
                if ca[i] == cb[j - 1]:
                    cur[j] = prev[j - 1] + 1
                elif cur[j - 1] >= prev[j]:
                    cur[j] = cur[j - 1]
                else:
                    cur[j] = prev[j]
            for j in range(lb + 1):
                tmp = prev[j]; prev[j] = cur[j]; cur[j] = tmp
        result = prev[lb]
    finally:
        free(ca); free(cb); free(prev); free(cur)
    return result
