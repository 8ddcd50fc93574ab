"""
Sparse TF-IDF text features: word 1–2-grams plus character 3–5-grams,
rows L2-normalised.
"""
import json
import logging
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.preprocessing import normalize

from .exceptions import EmptyCorpusError, ModelFormatError
from .sparse_io import read_vector, write_vector

logger = logging.getLogger(__name__)

WORD = "word"
CHAR = "char"
WORD_NGRAMS = (1, 2)
CHAR_NGRAMS = (3, 5)
WORD_TOKENS = r"(?u)\b\w+\b"


def _counter(analyzer, vocabulary=None):
    if analyzer == WORD:
        return CountVectorizer(
            analyzer=WORD,
            ngram_range=WORD_NGRAMS,
            token_pattern=WORD_TOKENS,
            lowercase=True,
            vocabulary=vocabulary,
            dtype=np.float64,
        )
    return CountVectorizer(
        analyzer=CHAR,
        ngram_range=CHAR_NGRAMS,
        lowercase=True,
        vocabulary=vocabulary,
        dtype=np.float64,
    )


def smooth_idf(document_frequency, n_documents):
    """`ln((N + 1) / (df + 1)) + 1`, the smoothed idf of scikit-learn."""
    document_frequency = np.asarray(document_frequency, dtype=np.float64)
    return np.log((n_documents + 1.0) / (document_frequency + 1.0)) + 1.0


class Vectorizer:
    """
    Fitted TF-IDF vectorizer.

    Arguments:
        word_vocabulary: Word n-grams in feature order.
        char_vocabulary: Character n-grams in feature order; their feature
            indexes follow the word block.
        idf: Per-feature inverse document frequency.
        document_frequency: Per-feature document counts, when known.
    """

    def __init__(
        self,
        word_vocabulary: Sequence[str],
        char_vocabulary: Sequence[str],
        idf,
        document_frequency=None,
    ):
        self.word_vocabulary = list(word_vocabulary)
        self.char_vocabulary = list(char_vocabulary)
        self.idf = np.asarray(idf, dtype=np.float64)
        self.document_frequency = (
            None
            if document_frequency is None
            else np.asarray(document_frequency, dtype=np.int64)
        )
        if len(self.idf) != self.n_features:
            raise ValueError("idf length does not match vocabulary size")
        self._blocks = []
        for analyzer, vocabulary in (
            (WORD, self.word_vocabulary),
            (CHAR, self.char_vocabulary),
        ):
            if vocabulary:
                self._blocks.append(
                    _counter(
                        analyzer, {gram: i for i, gram in enumerate(vocabulary)}
                    )
                )
        self._idf_diagonal = sp.diags(self.idf, format="csr")

    @property
    def n_features(self) -> int:
        return len(self.word_vocabulary) + len(self.char_vocabulary)

    @property
    def vocabulary(self) -> Dict[Tuple[str, str], int]:
        """`(analyzer, gram)` → feature index."""
        mapping = {(WORD, gram): i for i, gram in enumerate(self.word_vocabulary)}
        offset = len(self.word_vocabulary)
        for i, gram in enumerate(self.char_vocabulary):
            mapping[(CHAR, gram)] = offset + i
        return mapping

    def transform(self, texts: Sequence[str]) -> sp.csr_matrix:
        texts = list(texts)
        counts = sp.hstack(
            [block.transform(texts) for block in self._blocks], format="csr"
        )
        features = counts @ self._idf_diagonal
        return normalize(features, norm="l2", copy=False).tocsr()

    # --------------------------------------------------------------- #
    # Persistence
    # --------------------------------------------------------------- #

    def save(self, directory: str) -> None:
        with open(os.path.join(directory, "vectorizer.json"), "w", encoding="utf-8") as f:
            json.dump(
                {
                    "word_ngrams": list(WORD_NGRAMS),
                    "char_ngrams": list(CHAR_NGRAMS),
                    "word_vocabulary": self.word_vocabulary,
                    "char_vocabulary": self.char_vocabulary,
                },
                f,
                ensure_ascii=False,
                sort_keys=True,
            )
            f.write("\n")
        write_vector(self.idf, os.path.join(directory, "vectorizer_idf.bin"))

    @classmethod
    def load(cls, directory: str) -> "Vectorizer":
        with open(os.path.join(directory, "vectorizer.json"), encoding="utf-8") as f:
            meta = json.load(f)
        if (
            tuple(meta.get("word_ngrams", ())) != WORD_NGRAMS
            or tuple(meta.get("char_ngrams", ())) != CHAR_NGRAMS
        ):
            raise ModelFormatError("unsupported n-gram configuration")
        idf = read_vector(os.path.join(directory, "vectorizer_idf.bin"))
        word, char = meta["word_vocabulary"], meta["char_vocabulary"]
        if len(idf) != len(word) + len(char):
            raise ModelFormatError("idf vector does not match the vocabulary")
        return cls(word, char, idf)


def _fit_block(analyzer, texts) -> Tuple[List[str], Optional[np.ndarray]]:
    counter = _counter(analyzer)
    try:
        counts = counter.fit_transform(texts).tocsr()
    except ValueError:
        # Every text is too short for this analyzer.
        return [], None
    vocabulary = counter.vocabulary_
    grams = sorted(vocabulary, key=vocabulary.get)
    document_frequency = np.bincount(counts.indices, minlength=len(grams))
    return grams, document_frequency


def fit_vectorizer(training_texts: Sequence[str]) -> Vectorizer:
    """
    Fits the TF-IDF vocabulary and idf weights.

    Raises:
        EmptyCorpusError: If there are no texts or no extractable n-grams.
    """
    texts = list(training_texts)
    if not texts:
        raise EmptyCorpusError("cannot fit a vectorizer on an empty corpus")
    word, word_df = _fit_block(WORD, texts)
    char, char_df = _fit_block(CHAR, texts)
    if not word and not char:
        raise EmptyCorpusError("no word or character n-grams in the corpus")
    document_frequency = np.concatenate(
        [df for df in (word_df, char_df) if df is not None]
    )
    vectorizer = Vectorizer(
        word, char, smooth_idf(document_frequency, len(texts)), document_frequency
    )
    logger.info(
        "Fitted vectorizer on %d texts: %d word and %d character features",
        len(texts),
        len(word),
        len(char),
    )
    return vectorizer
