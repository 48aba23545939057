"""Answer-quality metrics: token F1 and exact match.

Normalization rules, fixed for reproducibility: case-fold, delete punctuation
except hyphens (which stay token-internal, so "Go-Go" is one token), split on
whitespace, strip stray edge hyphens, and drop the articles a/an/the.
"""

from __future__ import annotations

import string
from collections import Counter

ARTICLES = {"a", "an", "the"}
_DROP = {c: None for c in string.punctuation if c != "-"}
_DROP_TABLE = str.maketrans(_DROP)


def normalize_answer(text: str) -> list[str]:
    cleaned = text.casefold().translate(_DROP_TABLE)
    tokens = []
    for token in cleaned.split():
        token = token.strip("-")
        if token and token not in ARTICLES:
            tokens.append(token)
    return tokens


def answer_f1_em(pred: str, gold: str) -> tuple[float, int]:
    """(token F1 in [0,1], exact match in {0,1}) under shared normalization.

    F1 uses multiset token overlap; two empty answers count as a perfect match.
    """
    pred_tokens = normalize_answer(pred)
    gold_tokens = normalize_answer(gold)
    em = int(pred_tokens == gold_tokens)
    if not pred_tokens and not gold_tokens:
        return 1.0, 1
    if not pred_tokens or not gold_tokens:
        return 0.0, em
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0, em
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall), em
