"""Shared text normalization.

The same rules are applied to questions, answers, and metric inputs so that
training targets and evaluation references never diverge: lowercase, drop
punctuation (apostrophes are kept so contractions survive), split on
whitespace.
"""

import re

_NON_TOKEN = re.compile(r"[^a-z0-9' ]+")
_BARE_APOSTROPHE = re.compile(r"(?<![a-z0-9])'|'(?![a-z0-9])")


def tokenize(text: str) -> list[str]:
    """Normalize a sentence into a list of tokens."""
    text = _NON_TOKEN.sub(" ", text.lower())
    text = _BARE_APOSTROPHE.sub(" ", text)
    return text.split()


def detokenize(tokens: list[str]) -> str:
    return " ".join(tokens)
