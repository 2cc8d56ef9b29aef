"""Reward computation for self-critical training.

Rewards are CIDEr-D scores computed in vocabulary-id space against frozen
idf statistics: answer rewards against the document frequencies of the
training answers, question-reconstruction rewards against those of the
training questions. Freezing both tables once per run keeps the reward
stationary across iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..metrics import NGramStats, build_idf


@dataclass
class RewardBundle:
    """Per-sample rewards; question-reconstruction terms are None when the
    helper reward is disabled."""

    r_vqa_g: float
    r_vqa_b: float
    r_vqg_g: float | None = None
    r_vqg_b: float | None = None

    @property
    def advantage(self) -> float:
        adv = self.r_vqa_g - self.r_vqa_b
        if self.r_vqg_g is not None:
            adv += self.r_vqg_g - self.r_vqg_b
        return adv

    def as_dict(self) -> dict:
        out = {"r_vqa_g": self.r_vqa_g, "r_vqa_b": self.r_vqa_b}
        if self.r_vqg_g is not None:
            out["r_vqg_g"] = self.r_vqg_g
            out["r_vqg_b"] = self.r_vqg_b
        out["advantage"] = self.advantage
        return out


class RewardComputer:
    """CIDEr-D scorer over id sequences with cached reference cooking."""

    def __init__(self, answer_stats: NGramStats, question_stats: NGramStats | None):
        self.answer_stats = answer_stats
        self.question_stats = question_stats
        self._ref_cache: dict = {}

    @classmethod
    def from_training_split(cls, samples, vocab, with_questions: bool) -> "RewardComputer":
        answer_sets = [[vocab.encode(a) for a in s.answers] for s in samples]
        answer_stats = build_idf(answer_sets)
        question_stats = None
        if with_questions:
            question_stats = build_idf([[vocab.encode(s.question)] for s in samples])
        return cls(answer_stats, question_stats)

    def _cooked_refs(self, stats: NGramStats, key, refs):
        cached = self._ref_cache.get(key)
        if cached is None:
            cached = [stats.cook(r) for r in refs]
            self._ref_cache[key] = cached
        return cached

    def answer_reward(self, candidate_ids, ref_key, reference_id_lists) -> float:
        if not candidate_ids:
            return 0.0
        cooked = self._cooked_refs(self.answer_stats, ("a", ref_key), reference_id_lists)
        return self.answer_stats.score_cooked(self.answer_stats.cook(candidate_ids), cooked)

    def question_reward(self, candidate_ids, ref_key, question_ids) -> float:
        if self.question_stats is None:
            raise RuntimeError("question reward requested but no question idf was built")
        if not candidate_ids:
            return 0.0
        cooked = self._cooked_refs(self.question_stats, ("q", ref_key), [question_ids])
        return self.question_stats.score_cooked(self.question_stats.cook(candidate_ids), cooked)
