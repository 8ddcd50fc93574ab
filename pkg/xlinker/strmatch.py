"""
Fuzzy candidate generation over every KOS name and synonym with
normalised Levenshtein similarity.
"""
from collections import defaultdict
from typing import Dict, List, NamedTuple, Tuple

import numpy as np
from rapidfuzz import process
from rapidfuzz.distance import Levenshtein

from .kos import KnowledgeBase

STRING_MATCH = "string-match"
XMR = "xmr"
EXACT_LOOKUP = "exact-lookup"


class ScoredCandidate(
    NamedTuple(
        "ScoredCandidate",
        [
            ("concept_index", int),
            ("score", float),
            ("source", str),
            ("matched_surface", str),
        ],
    )
):
    """
    A candidate concept with its similarity score in [0, 1].
    """

    def __new__(cls, concept_index, score, source, matched_surface=""):
        if not 0.0 <= score <= 1.0:
            raise ValueError("candidate score {} outside [0, 1]".format(score))
        return super().__new__(cls, concept_index, float(score), source, matched_surface)


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    return Levenshtein.distance(a, b)


def similarity(a: str, b: str) -> float:
    """`1 - d(a, b) / max(|a|, |b|)`; two empty strings are identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest


class NameIndex:
    """
    Searchable set of lowercased surface forms.

    Attributes:
        entries: `(surface, concept index)` pairs, one per distinct pair.
        exact: surface → sorted tuple of concept indexes.
        length_buckets: surface length → positions in `entries`.
    """

    def __init__(self, entries: List[Tuple[str, int]]):
        self.entries = []  # type: List[Tuple[str, int]]
        seen = set()
        exact = defaultdict(set)
        buckets = defaultdict(list)
        for surface, concept_index in entries:
            if (surface, concept_index) in seen:
                continue
            seen.add((surface, concept_index))
            buckets[len(surface)].append(len(self.entries))
            self.entries.append((surface, concept_index))
            exact[surface].add(concept_index)
        self.exact = {
            surface: tuple(sorted(indexes)) for surface, indexes in exact.items()
        }  # type: Dict[str, Tuple[int, ...]]
        self.length_buckets = dict(buckets)  # type: Dict[int, List[int]]
        self._bucket_surfaces = {
            length: [self.entries[i][0] for i in positions]
            for length, positions in self.length_buckets.items()
        }

    def __len__(self):
        return len(self.entries)

    def _bucket_order(self, length):
        """Buckets ordered by the best similarity any of their strings can reach."""

        def bound(bucket_length):
            longest = max(length, bucket_length)
            if longest == 0:
                return 1.0
            return 1.0 - abs(length - bucket_length) / longest

        return sorted(self.length_buckets, key=lambda size: (-bound(size), size)), bound

    def search(self, query: str, top_n: int, prune: bool = True) -> List[ScoredCandidate]:
        if top_n < 1:
            raise ValueError("top_n must be at least 1")
        if not self.entries:
            return []
        query = query.lower()
        best = {}  # concept index -> (score, surface)
        order, bound = self._bucket_order(len(query))
        for length in order:
            if prune and len(best) >= top_n:
                nth_best = sorted((s for s, _ in best.values()), reverse=True)[top_n - 1]
                if bound(length) < nth_best:
                    break
            surfaces = self._bucket_surfaces[length]
            distances = process.cdist([query], surfaces, scorer=Levenshtein.distance)[0]
            longest = max(len(query), length)
            scores = (
                np.ones(len(surfaces))
                if longest == 0
                else 1.0 - distances / float(longest)
            )
            for position, score in zip(self.length_buckets[length], scores):
                surface, concept_index = self.entries[position]
                score = float(score)
                current = best.get(concept_index)
                if (
                    current is None
                    or score > current[0]
                    or (score == current[0] and surface < current[1])
                ):
                    best[concept_index] = (score, surface)

        ranked = sorted(best.items(), key=lambda item: (-item[1][0], item[0]))
        return [
            ScoredCandidate(concept_index, score, STRING_MATCH, surface)
            for concept_index, (score, surface) in ranked[:top_n]
        ]


def build_name_index(kb: KnowledgeBase) -> NameIndex:
    entries = []
    for concept_index, concept in enumerate(kb):
        for form in concept.surface_forms:
            entries.append((form.lower(), concept_index))
    return NameIndex(entries)


def match(
    mention_text: str, index: NameIndex, top_n: int = 1, prune: bool = True
) -> List[ScoredCandidate]:
    """
    Top `top_n` concepts by best surface-form similarity, descending, ties
    by ascending concept index. Length buckets whose best reachable score is
    below the current n-th best are skipped when `prune` is set.
    """
    return index.search(mention_text, top_n, prune)
