"""Keyword inference for executables that have no description of their own.

The retrieved neighbors' descriptions are pooled into one pseudo-document
and scored term by term with tf * idf, where idf comes from the description
corpus the model was fitted on. Smoothed idf: ln(N / (1 + df)) + 1.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from importlib import resources

from sklearn.base import BaseEstimator

from .errors import EmptyCorpus
from .validation import check_fitted


def default_stopwords() -> frozenset[str]:
    text = resources.files("macneto.data").joinpath("stopwords.txt").read_text("utf-8")
    words: set[str] = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        words.update(line.split())
    return frozenset(words)


class TfidfKeywords(BaseEstimator):
    """Document-frequency model over descriptions plus pooled-query scoring.

    Fitted attributes: vocabulary_ (term -> document frequency) and
    document_count_.
    """

    def __init__(self, lowercase: bool = True, stopwords: frozenset[str] | None = None,
                 min_token_len: int = 3):
        self.lowercase = lowercase
        self.stopwords = stopwords
        self.min_token_len = min_token_len

    def _tokenize(self, text: str) -> list[str]:
        if self.lowercase:
            text = text.lower()
        stop = self.stopwords if self.stopwords is not None else _DEFAULT_STOPWORDS
        return [
            tok
            for tok in re.findall(r"[a-zA-Z0-9]+", text)
            if len(tok) >= self.min_token_len and tok not in stop
        ]

    def fit(self, descriptions: list[str], y=None):
        if not descriptions:
            raise EmptyCorpus("cannot fit a keyword model on zero descriptions")
        vocabulary: Counter[str] = Counter()
        for doc in descriptions:
            vocabulary.update(set(self._tokenize(doc)))
        self.vocabulary_ = dict(vocabulary)
        self.document_count_ = len(descriptions)
        return self

    def idf(self, term: str) -> float:
        check_fitted(self, "vocabulary_")
        return math.log(self.document_count_ / (1 + self.vocabulary_.get(term, 0))) + 1.0

    def infer(self, retrieved_descriptions: list[str], top: int = 10) -> list[tuple[str, float]]:
        """Top keywords for the pooled retrieved descriptions, scores attached.

        Ordering is by descending score, then lexicographic; terms come only
        from the retrieved descriptions.
        """
        check_fitted(self, "vocabulary_")
        pooled: Counter[str] = Counter()
        for doc in retrieved_descriptions:
            pooled.update(self._tokenize(doc))
        scored = [(term, tf * self.idf(term)) for term, tf in pooled.items()]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:top]


_DEFAULT_STOPWORDS = default_stopwords()
