"""
Extreme multi-label ranking over the label tree: per-node linear matchers,
leaf rankers, beam-search prediction and an exact-lookup memorisation map.
"""
import json
import logging
import os
import warnings
from collections import defaultdict
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from joblib import Parallel, delayed
from scipy.special import expit
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression

from .cluster import (
    DEFAULT_ITERATIONS,
    DEFAULT_MAX_LEAF_SIZE,
    DEFAULT_SEED,
    ClusterTree,
    LabelEmbeddings,
    build_cluster_tree,
    label_embeddings,
)
from .corpus import TrainingSet, clean_text
from .exceptions import ModelFormatError
from .sparse_io import canonical, read_matrix, read_vector, write_matrix, write_vector
from .strmatch import EXACT_LOOKUP, XMR, ScoredCandidate
from .vectorizer import Vectorizer, fit_vectorizer

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

# Only exact lookups score 1.0; model scores stop just below it.
BELOW_ONE = float(np.nextafter(1.0, 0.0))

__all__ = [
    "LabelEmbeddings",
    "TrainConfig",
    "XmrModel",
    "build_cluster_tree",
    "fit_vectorizer",
    "label_embeddings",
    "predict",
    "train",
    "train_model",
]


class TrainConfig(
    NamedTuple(
        "TrainConfig",
        [
            ("max_leaf_size", int),
            ("seed", int),
            ("C", float),
            ("tol", float),
            ("max_iter", int),
            ("n_jobs", int),
            ("cluster_iterations", int),
        ],
    )
):
    """
    Training hyperparameters.

    Arguments:
        max_leaf_size: Largest leaf of the label tree.
        seed: Seed of the tree construction.
        C: Inverse L2 regularisation strength of every linear model.
        tol: Solver stopping tolerance.
        max_iter: Solver iteration limit.
        n_jobs: joblib workers for the per-node problems.
        cluster_iterations: Assignment rounds per tree split.
    """

    def __new__(
        cls,
        max_leaf_size=DEFAULT_MAX_LEAF_SIZE,
        seed=DEFAULT_SEED,
        C=1.0,
        tol=1e-4,
        max_iter=1000,
        n_jobs=1,
        cluster_iterations=DEFAULT_ITERATIONS,
    ):
        if max_leaf_size < 1:
            raise ValueError("max_leaf_size must be at least 1")
        if C <= 0 or tol <= 0:
            raise ValueError("C and tol must be positive")
        return super().__new__(
            cls,
            int(max_leaf_size),
            int(seed),
            float(C),
            float(tol),
            int(max_iter),
            int(n_jobs),
            int(cluster_iterations),
        )


# --------------------------------------------------------------- #
# Training
# --------------------------------------------------------------- #


def _fit_binary(features, targets, config, name):
    """
    One L2-regularised logistic model. A problem with only positive examples
    gets zero weights and an infinite bias, so its probability is exactly 1.
    """
    if targets.all():
        return None, np.inf
    if not targets.any():
        raise ValueError("{} has no positive examples".format(name))
    model = LogisticRegression(
        C=config.C, tol=config.tol, max_iter=config.max_iter, solver="lbfgs"
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        model.fit(features, targets)
    if any(issubclass(w.category, ConvergenceWarning) for w in caught):
        logger.warning(
            "Solver did not converge for %s after %d iterations; keeping its weights",
            name,
            config.max_iter,
        )
    return sp.csr_matrix(model.coef_), float(model.intercept_[0])


def _stack(results, n_features):
    rows = [
        sp.csr_matrix((1, n_features)) if weights is None else weights
        for weights, _ in results
    ]
    if not rows:
        return sp.csr_matrix((0, n_features)), np.zeros(0)
    bias = np.array([b for _, b in results], dtype=np.float64)
    return sp.vstack(rows, format="csr"), bias


def train(
    train: TrainingSet,
    vec: Vectorizer,
    tree: ClusterTree,
    config: Optional[TrainConfig] = None,
    label_ids: Optional[Sequence[str]] = None,
) -> "XmrModel":
    """
    Fits the matcher at every tree edge and the ranker at every leaf.

    Each non-root node gets a one-vs-rest model that separates instances of
    its subtree from the other instances under its parent; each label gets a
    one-vs-rest model among the instances of its leaf.

    Arguments:
        train: Training instances.
        vec: The fitted vectorizer.
        tree: Label tree over the labels of `train`.
        config: Hyperparameters; `TrainConfig()` when omitted.
        label_ids: KOS identifier per label index, stored in the manifest.
    """
    config = config or TrainConfig()
    features = vec.transform(train.texts)
    labels = np.asarray(train.labels, dtype=np.int64)
    missing = set(np.unique(labels).tolist()) - set(tree.labels.tolist())
    if missing:
        raise ValueError(
            "{} training labels are not in the tree".format(len(missing))
        )

    instances_of = defaultdict(list)
    for row, label in enumerate(labels):
        instances_of[int(label)].append(row)

    def subtree_rows(node):
        return np.sort(
            np.concatenate(
                [np.asarray(instances_of[int(label)], dtype=np.int64) for label in tree.members(node)]
            )
        )

    problems = []
    for node in range(1, tree.num_nodes):
        rows = subtree_rows(tree.parent[node])
        targets = np.isin(labels[rows], tree.members(node)).astype(np.int64)
        problems.append((rows, targets, "node {}".format(node)))
    rank_labels = []
    for leaf in tree.leaves:
        rows = subtree_rows(leaf)
        for label in tree.leaf_labels[leaf]:
            rank_labels.append(int(label))
            targets = (labels[rows] == label).astype(np.int64)
            problems.append((rows, targets, "leaf {} label {}".format(leaf, label)))

    logger.info(
        "Training %d linear models over %d instances and %d features",
        len(problems),
        len(train),
        vec.n_features,
    )
    results = Parallel(n_jobs=config.n_jobs)(
        delayed(_fit_binary)(features[rows], targets, config, name)
        for rows, targets, name in problems
    )

    edges = [(None, np.inf)] + results[: tree.num_nodes - 1]
    edge_weights, edge_bias = _stack(edges, vec.n_features)
    rank_weights, rank_bias = _stack(results[tree.num_nodes - 1:], vec.n_features)

    exact = defaultdict(set)
    for text, label in train.pairs():
        exact[clean_text(text)].add(label)
    num_labels = len(label_ids) if label_ids is not None else int(labels.max()) + 1
    priors = np.zeros(num_labels, dtype=np.float64)
    for instance in train:
        priors[instance.label] += instance.frequency

    return XmrModel(
        vec,
        tree,
        edge_weights,
        edge_bias,
        np.asarray(rank_labels, dtype=np.int64),
        rank_weights,
        rank_bias,
        {text: tuple(sorted(found)) for text, found in exact.items()},
        priors,
        label_ids=label_ids,
        config=config,
    )


def train_model(
    training_set: TrainingSet,
    config: Optional[TrainConfig] = None,
    label_ids: Optional[Sequence[str]] = None,
) -> "XmrModel":
    """Vectorizer, label embeddings, tree and linear models in one call."""
    config = config or TrainConfig()
    vec = fit_vectorizer(training_set.texts)
    embeddings = label_embeddings(
        training_set, vec, len(label_ids) if label_ids is not None else None
    )
    tree = build_cluster_tree(
        embeddings, config.max_leaf_size, config.seed, config.cluster_iterations
    )
    return train(training_set, vec, tree, config, label_ids)


# --------------------------------------------------------------- #
# Model
# --------------------------------------------------------------- #


class XmrModel:
    """
    A trained ranker.

    Attributes:
        vectorizer: Text features.
        tree: The label tree.
        edge_weights: One row per tree node; row `n` scores the edge into
            `n` (the root row is empty with infinite bias).
        edge_bias: Intercepts of `edge_weights`.
        rank_labels: The label scored by each row of `rank_weights`.
        rank_weights: Per-label ranker weights.
        rank_bias: Intercepts of `rank_weights`.
        exact_map: Lowercased training text → sorted labels.
        label_priors: Training frequency per label.
        label_ids: KOS identifier per label index, when known.
        config: The hyperparameters the model was trained with.
    """

    def __init__(
        self,
        vectorizer: Vectorizer,
        tree: ClusterTree,
        edge_weights: sp.csr_matrix,
        edge_bias: np.ndarray,
        rank_labels: np.ndarray,
        rank_weights: sp.csr_matrix,
        rank_bias: np.ndarray,
        exact_map: Dict[str, Tuple[int, ...]],
        label_priors: np.ndarray,
        label_ids: Optional[Sequence[str]] = None,
        config: Optional[TrainConfig] = None,
    ):
        self.vectorizer = vectorizer
        self.tree = tree
        self.edge_weights = canonical(edge_weights)
        self.edge_bias = np.asarray(edge_bias, dtype=np.float64)
        self.rank_labels = np.asarray(rank_labels, dtype=np.int64)
        self.rank_weights = canonical(rank_weights)
        self.rank_bias = np.asarray(rank_bias, dtype=np.float64)
        self.exact_map = dict(exact_map)
        self.label_priors = np.asarray(label_priors, dtype=np.float64)
        self.label_ids = list(label_ids) if label_ids is not None else None
        self.config = config or TrainConfig()

        if self.edge_weights.shape[0] != tree.num_nodes:
            raise ModelFormatError("edge weights do not cover every tree node")
        if self.rank_weights.shape[0] != len(self.rank_labels):
            raise ModelFormatError("ranker weights do not match the ranked labels")
        self._rank_row = {int(label): row for row, label in enumerate(self.rank_labels)}

    @property
    def num_labels(self) -> int:
        return len(self.label_priors)

    def _edge_probabilities(self, nodes, x):
        margins = (self.edge_weights[nodes] @ x.T).toarray().ravel()
        return expit(margins + self.edge_bias[nodes])

    def _rank_probabilities(self, labels, x):
        rows = [self._rank_row[int(label)] for label in labels]
        margins = (self.rank_weights[rows] @ x.T).toarray().ravel()
        return expit(margins + self.rank_bias[rows])

    def _leaf_scores(self, frontier, x) -> List[Tuple[int, float]]:
        scored = []
        for path_score, leaf in frontier:
            labels = self.tree.leaf_labels[leaf]
            for label, probability in zip(labels, self._rank_probabilities(labels, x)):
                scored.append((int(label), min(path_score * float(probability), BELOW_ONE)))
        return scored

    def _beam_search(self, x, beam: int) -> List[Tuple[int, float]]:
        frontier = [(1.0, 0)]
        while any(self.tree.children[node] for _, node in frontier):
            expanded = [(score, node) for score, node in frontier if self.tree.is_leaf(node)]
            parents = [(score, node) for score, node in frontier if not self.tree.is_leaf(node)]
            kids = [kid for _, node in parents for kid in self.tree.children[node]]
            probabilities = iter(self._edge_probabilities(kids, x))
            for score, node in parents:
                for kid in self.tree.children[node]:
                    expanded.append((score * float(next(probabilities)), kid))
            expanded.sort(key=lambda item: (-item[0], item[1]))
            frontier = expanded[:beam]
        return self._leaf_scores(frontier, x)

    def _exact_candidate(self, text: str) -> Tuple[Optional[ScoredCandidate], str]:
        key = clean_text(text)
        found = self.exact_map.get(key, ())
        if len(found) == 1:
            return ScoredCandidate(found[0], 1.0, EXACT_LOOKUP, key), key
        return None, key

    def predict(self, mention_text: str, beam: int = 10, top_k: int = 10) -> List[ScoredCandidate]:
        """
        Ranks labels for one mention.

        An unambiguous training string is returned first with score 1.0 and
        source `exact-lookup`; the rest comes from beam search, each score
        being the product of edge probabilities along the path times the
        leaf ranker's probability.

        Arguments:
            mention_text: The mention, any case.
            beam: Nodes kept per level.
            top_k: Length of the returned list.
        """
        if beam < 1 or top_k < 1:
            raise ValueError("beam and top_k must be at least 1")
        exact, _ = self._exact_candidate(mention_text)
        results = [exact] if exact else []
        x = self.vectorizer.transform([mention_text])
        if x.nnz == 0:
            return results

        scored = self._beam_search(x, beam)
        scored.sort(key=lambda item: (-item[1], item[0]))
        for label, score in scored:
            if len(results) >= top_k:
                break
            if exact and label == exact.concept_index:
                continue
            if score <= 0.0:
                # Underflow on very deep paths.
                continue
            results.append(ScoredCandidate(label, score, XMR))
        return results

    def score_labels(self, mention_text: str) -> Dict[int, float]:
        """Exhaustive path-times-ranker score of every label in the tree."""
        x = self.vectorizer.transform([mention_text])
        return dict(self._beam_search(x, self.tree.num_nodes))

    # --------------------------------------------------------------- #
    # Persistence
    # --------------------------------------------------------------- #

    def save(self, directory: str) -> None:
        """Writes the model directory; equal models give identical bytes."""
        os.makedirs(directory, exist_ok=True)
        manifest = {
            "format_version": MODEL_FORMAT_VERSION,
            "seed": self.config.seed,
            "hyperparameters": self.config._asdict(),
            "num_labels": self.num_labels,
            "label_ids": self.label_ids,
        }
        with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        self.vectorizer.save(directory)
        self.tree.save(directory)
        write_matrix(self.edge_weights, os.path.join(directory, "edge_weights.bin"))
        write_vector(_finite(self.edge_bias), os.path.join(directory, "edge_bias.bin"))
        write_vector(self.rank_labels, os.path.join(directory, "rank_labels.bin"))
        write_matrix(self.rank_weights, os.path.join(directory, "rank_weights.bin"))
        write_vector(_finite(self.rank_bias), os.path.join(directory, "rank_bias.bin"))
        write_vector(self.label_priors, os.path.join(directory, "label_priors.bin"))
        with open(os.path.join(directory, "exact_map.tsv"), "w", encoding="utf-8") as f:
            for text in sorted(self.exact_map):
                f.write(
                    "{}\t{}\n".format(text, ",".join(str(label) for label in self.exact_map[text]))
                )

    @classmethod
    def load(cls, directory: str) -> "XmrModel":
        path = os.path.join(directory, "manifest.json")
        try:
            with open(path, encoding="utf-8") as f:
                manifest = json.load(f)
        except ValueError:
            raise ModelFormatError("{} is not valid JSON".format(path)) from None
        if manifest.get("format_version") != MODEL_FORMAT_VERSION:
            raise ModelFormatError(
                "unsupported model format {!r}".format(manifest.get("format_version"))
            )

        exact_map = {}
        with open(os.path.join(directory, "exact_map.tsv"), encoding="utf-8") as f:
            for line_number, line in enumerate(f, 1):
                text, sep, labels = line.rstrip("\n").rpartition("\t")
                if not sep:
                    raise ModelFormatError("exact_map.tsv line {} is malformed".format(line_number))
                exact_map[text] = tuple(int(label) for label in labels.split(","))

        label_priors = read_vector(os.path.join(directory, "label_priors.bin"))
        return cls(
            Vectorizer.load(directory),
            ClusterTree.load(directory),
            read_matrix(os.path.join(directory, "edge_weights.bin")),
            _infinite(read_vector(os.path.join(directory, "edge_bias.bin"))),
            read_vector(os.path.join(directory, "rank_labels.bin")).astype(np.int64),
            read_matrix(os.path.join(directory, "rank_weights.bin")),
            _infinite(read_vector(os.path.join(directory, "rank_bias.bin"))),
            exact_map,
            label_priors,
            label_ids=manifest.get("label_ids"),
            config=TrainConfig(**manifest["hyperparameters"]),
        )


# Biases of single-class problems are +inf; stored as the largest double.
def _finite(bias):
    return np.where(np.isposinf(bias), np.finfo(np.float64).max, bias)


def _infinite(bias):
    return np.where(bias == np.finfo(np.float64).max, np.inf, bias)


def predict(
    mention_text: str, model: XmrModel, beam: int = 10, top_k: int = 10
) -> List[ScoredCandidate]:
    return model.predict(mention_text, beam, top_k)
