from ._backend import BACKEND, available_backends
from .scorer import (
    BLEU1,
    BLEU4,
    CIDER,
    CIDER_SIGMA,
    NMAX,
    ROUGEL,
    EvaluationError,
    NGramStats,
    Score,
    bleu,
    build_idf,
    cider,
    format_report,
    rouge_l,
    score_corpus,
)

__all__ = [
    "BACKEND",
    "BLEU1",
    "BLEU4",
    "CIDER",
    "CIDER_SIGMA",
    "NMAX",
    "ROUGEL",
    "EvaluationError",
    "NGramStats",
    "Score",
    "available_backends",
    "bleu",
    "build_idf",
    "cider",
    "format_report",
    "rouge_l",
    "score_corpus",
]
