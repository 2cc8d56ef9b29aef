"""Greedy, beam-search, and sampled generation.

All decoders run over a step function

    step_fn(rows, prefixes) -> (N, V) log-probabilities

where ``rows`` indexes the encoded batch entries the ``prefixes`` (token id
matrix including the leading <start>) belong to. This keeps the search
logic independent of the network, so tests can drive it with hand-written
probability tables.

Scores are summed log-probabilities with no length normalization. <pad> and
<start> are never proposed as continuations; <unk> can optionally be banned
too. Ties break deterministically: lowest token id first, then the beam the
candidate extends.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .data.vocab import END_ID, PAD_ID, START_ID, UNK_ID


@dataclass
class DecodeResult:
    """One generated sequence. ``tokens`` excludes <start> and <end>;
    ``log_probs`` has one entry per emitted token plus the <end> step when
    the sequence terminated naturally."""

    tokens: list[int]
    log_probs: list[float]
    ended: bool

    @property
    def total_log_prob(self) -> float:
        return float(sum(self.log_probs))


@dataclass
class BeamSet:
    k: int
    results: list[DecodeResult] = field(default_factory=list)

    def best(self) -> DecodeResult:
        return self.results[0]

    def mean_of(self, fn) -> float:
        return float(np.mean([fn(r) for r in self.results]))


def _banned_ids(ban_unk: bool) -> list[int]:
    return [PAD_ID, START_ID, UNK_ID] if ban_unk else [PAD_ID, START_ID]


def greedy_decode_batch(step_fn, batch_size: int, max_len: int, ban_unk: bool = False) -> list[DecodeResult]:
    """Argmax walk per batch row until <end> or the length cap."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    banned = _banned_ids(ban_unk)
    results = [DecodeResult([], [], False) for _ in range(batch_size)]
    active = list(range(batch_size))
    prefixes = np.full((batch_size, 1), START_ID, dtype=np.int64)
    for _ in range(max_len):
        rows = np.array(active, dtype=np.int64)
        logp = np.asarray(step_fn(rows, prefixes[rows]), dtype=np.float64)
        choices = np.copy(logp)
        choices[:, banned] = -np.inf
        picks = np.argmax(choices, axis=1)
        still = []
        for i, row in enumerate(active):
            tok = int(picks[i])
            results[row].log_probs.append(float(logp[i, tok]))
            if tok == END_ID:
                results[row].ended = True
            else:
                results[row].tokens.append(tok)
                still.append(row)
        prefixes = np.concatenate([prefixes, np.full((batch_size, 1), PAD_ID, dtype=np.int64)], axis=1)
        prefixes[np.array(active, dtype=np.int64), -1] = picks
        active = still
        if not active:
            break
    return results


def sample_decode_batch(
    step_fn,
    batch_size: int,
    max_len: int,
    rng: np.random.Generator,
    temperature: float = 1.0,
    ban_unk: bool = False,
) -> list[DecodeResult]:
    """Multinomial sampling; recorded log-probs are the untempered model's."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    banned = _banned_ids(ban_unk)
    results = [DecodeResult([], [], False) for _ in range(batch_size)]
    active = list(range(batch_size))
    prefixes = np.full((batch_size, 1), START_ID, dtype=np.int64)
    for _ in range(max_len):
        rows = np.array(active, dtype=np.int64)
        logp = np.asarray(step_fn(rows, prefixes[rows]), dtype=np.float64)
        scaled = np.copy(logp)
        scaled[:, banned] = -np.inf
        if temperature <= 1e-6:
            picks = np.argmax(scaled, axis=1)
        else:
            scaled = scaled / temperature
            scaled -= scaled.max(axis=1, keepdims=True)
            probs = np.exp(scaled)
            probs /= probs.sum(axis=1, keepdims=True)
            picks = np.array([rng.choice(len(p), p=p) for p in probs], dtype=np.int64)
        still = []
        for i, row in enumerate(active):
            tok = int(picks[i])
            results[row].log_probs.append(float(logp[i, tok]))
            if tok == END_ID:
                results[row].ended = True
            else:
                results[row].tokens.append(tok)
                still.append(row)
        prefixes = np.concatenate([prefixes, np.full((batch_size, 1), PAD_ID, dtype=np.int64)], axis=1)
        prefixes[np.array(active, dtype=np.int64), -1] = picks
        active = still
        if not active:
            break
    return results


class _Hypothesis:
    __slots__ = ("tokens", "log_probs", "score", "ended")

    def __init__(self, tokens, log_probs, score, ended=False):
        self.tokens = tokens
        self.log_probs = log_probs
        self.score = score
        self.ended = ended

    def as_result(self) -> DecodeResult:
        return DecodeResult(list(self.tokens), list(self.log_probs), self.ended)


def beam_decode_batch(
    step_fn, batch_size: int, k: int, max_len: int, ban_unk: bool = False
) -> list[BeamSet]:
    """Standard beam search on summed log-probabilities.

    Hypotheses reaching <end> are retired; the search keeps going with the
    remaining width until k have finished or the cap is hit, at which point
    the best unfinished hypotheses fill any empty slots. Returned beams are
    sorted by score (token-sequence tie-break), at most k per sample but
    fewer if the sequence space itself is smaller.
    """
    if k < 1 or max_len < 1:
        raise ValueError("beam width and max_len must be >= 1")
    banned = _banned_ids(ban_unk)
    active: list[list[_Hypothesis]] = [
        [_Hypothesis((), (), 0.0)] for _ in range(batch_size)
    ]
    finished: list[list[_Hypothesis]] = [[] for _ in range(batch_size)]

    for step in range(max_len):
        rows, stacked = [], []
        for b in range(batch_size):
            if len(finished[b]) >= k:
                continue
            for hyp in active[b]:
                rows.append(b)
                stacked.append((START_ID,) + hyp.tokens)
        if not rows:
            break
        prefixes = np.array(stacked, dtype=np.int64)  # uniform length: step+1
        logp = np.asarray(step_fn(np.array(rows, dtype=np.int64), prefixes), dtype=np.float64)
        vocab = logp.shape[1]
        allowed = np.array([t for t in range(vocab) if t not in banned], dtype=np.int64)

        offset = 0
        for b in range(batch_size):
            if len(finished[b]) >= k or not active[b]:
                continue
            width = len(active[b])
            table = logp[offset : offset + width]
            offset += width
            scores = (
                np.array([h.score for h in active[b]])[:, None] + table[:, allowed]
            ).ravel()
            tok_ids = np.tile(allowed, width)
            beam_ids = np.repeat(np.arange(width), len(allowed))
            order = np.lexsort((beam_ids, tok_ids, -scores))
            new_active = []
            budget = k - len(finished[b])
            for idx in order[:budget]:
                tok, bi = int(tok_ids[idx]), int(beam_ids[idx])
                hyp = active[b][bi]
                lp = float(table[bi, tok])
                if tok == END_ID:
                    finished[b].append(
                        _Hypothesis(hyp.tokens, hyp.log_probs + (lp,), float(scores[idx]), ended=True)
                    )
                else:
                    new_active.append(
                        _Hypothesis(hyp.tokens + (tok,), hyp.log_probs + (lp,), float(scores[idx]))
                    )
            active[b] = new_active

    out = []
    for b in range(batch_size):
        # once k hypotheses have properly ended, truncated ones are discarded
        pool = finished[b] if len(finished[b]) >= k else finished[b] + active[b]
        pool.sort(key=lambda h: (-h.score, h.tokens))
        chosen = pool[:k]
        out.append(BeamSet(k, [h.as_result() for h in chosen]))
    return out


# ---------------------------------------------------------------------------
# model adapters

def model_step_fn(model, encoded):
    """Bind a decoder snapshot into the step-function protocol."""
    with torch.no_grad():
        memory = model.prepare_memory(encoded)

    def step(rows, prefixes):
        with torch.no_grad():
            sub = memory.select(rows)
            ids = torch.as_tensor(prefixes, dtype=torch.long, device=memory.seq.device)
            logits = model.decode_logits(sub, ids)[:, -1]
            return torch.log_softmax(logits.double(), dim=-1).cpu().numpy()

    return step


def greedy_decode(model, encoded, max_len: int | None = None, ban_unk: bool = False) -> list[DecodeResult]:
    max_len = max_len or model.max_output_len
    was_training = model.training
    model.eval()
    try:
        return greedy_decode_batch(model_step_fn(model, encoded), encoded.seq.shape[0], max_len, ban_unk)
    finally:
        model.train(was_training)


def beam_decode(model, encoded, k: int, max_len: int | None = None, ban_unk: bool = False) -> list[BeamSet]:
    max_len = max_len or model.max_output_len
    was_training = model.training
    model.eval()
    try:
        return beam_decode_batch(model_step_fn(model, encoded), encoded.seq.shape[0], k, max_len, ban_unk)
    finally:
        model.train(was_training)


def sample_decode(
    model,
    encoded,
    rng: np.random.Generator,
    max_len: int | None = None,
    temperature: float = 1.0,
    ban_unk: bool = False,
) -> list[DecodeResult]:
    max_len = max_len or model.max_output_len
    was_training = model.training
    model.eval()
    try:
        return sample_decode_batch(
            model_step_fn(model, encoded), encoded.seq.shape[0], max_len, rng, temperature, ban_unk
        )
    finally:
        model.train(was_training)
