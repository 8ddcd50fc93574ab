"""
Semantic label indexing: PIFA label embeddings and the balanced binary
label tree built over them.
"""
import json
import logging
import math
import os
from collections import defaultdict, deque
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from sklearn.preprocessing import normalize

from .corpus import TrainingSet
from .exceptions import ModelFormatError
from .sparse_io import read_matrix, write_matrix
from .vectorizer import Vectorizer

logger = logging.getLogger(__name__)

BRANCHING = 2
DEFAULT_MAX_LEAF_SIZE = 100
DEFAULT_SEED = 42
DEFAULT_ITERATIONS = 20


class LabelEmbeddings(
    NamedTuple(
        "LabelEmbeddings",
        [("labels", np.ndarray), ("matrix", sp.csr_matrix), ("missing", Tuple[int, ...])],
    )
):
    """
    Attributes:
        labels: Sorted label indexes that own at least one instance.
        matrix: One L2-normalised row per entry of `labels`.
        missing: Labels of `0..num_labels-1` left out for lack of instances.
    """

    def __len__(self):
        return len(self.labels)


def label_embeddings(
    train: TrainingSet, vec: Vectorizer, num_labels: Optional[int] = None
) -> LabelEmbeddings:
    """
    Sums the feature vectors of each label's training texts and normalises
    the sums (PIFA).

    Arguments:
        train: Training instances.
        vec: The fitted vectorizer.
        num_labels: Size of the label space; labels below it without
            instances are reported in `missing`.
    """
    rows = defaultdict(list)
    for position, label in enumerate(train.labels):
        rows[label].append(position)
    labels = np.array(sorted(rows), dtype=np.int64)

    features = vec.transform(train.texts)
    membership = sp.csr_matrix(
        (
            np.ones(len(train), dtype=np.float64),
            (
                np.searchsorted(labels, np.asarray(train.labels, dtype=np.int64)),
                np.arange(len(train)),
            ),
        ),
        shape=(len(labels), len(train)),
    )
    matrix = normalize(membership @ features, norm="l2", copy=False).tocsr()

    missing = ()
    if num_labels is not None:
        missing = tuple(sorted(set(range(num_labels)) - set(rows)))
        if missing:
            logger.warning(
                "%d labels have no training instances and are left out of the tree",
                len(missing),
            )
    return LabelEmbeddings(labels, matrix, missing)


def _farthest_pair(matrix: sp.csr_matrix, rng: np.random.Generator) -> Tuple[int, int]:
    n = matrix.shape[0]
    first = int(rng.integers(n))
    similarities = (matrix @ matrix[first].T).toarray().ravel()
    similarities[first] = np.inf
    return first, int(np.argmin(similarities))


def _bisect(matrix: sp.csr_matrix, rng: np.random.Generator, iterations: int) -> np.ndarray:
    """
    Capacity-constrained spherical 2-means. Returns a 0/1 side per row; each
    side holds at most ceil(n / 2) rows.
    """
    n = matrix.shape[0]
    capacity = math.ceil(n / 2)
    positions = np.arange(n)
    centroids = normalize(matrix[list(_farthest_pair(matrix, rng))])
    assignment = None
    for _ in range(iterations):
        scores = (matrix @ centroids.T).toarray()
        margin = scores[:, 0] - scores[:, 1]
        preferred = (margin < 0).astype(np.int64)
        # Most decided points claim their side first.
        order = np.lexsort((positions, -np.abs(margin)))
        sides = np.empty(n, dtype=np.int64)
        filled = [0, 0]
        for row in order:
            side = preferred[row]
            if filled[side] >= capacity:
                side = 1 - side
            sides[row] = side
            filled[side] += 1
        if assignment is not None and np.array_equal(sides, assignment):
            break
        assignment = sides
        centroids = normalize(
            sp.vstack(
                [
                    sp.csr_matrix(matrix[assignment == side].sum(axis=0))
                    for side in range(BRANCHING)
                ]
            ).tocsr()
        )
    return assignment


class ClusterTree:
    """
    Balanced binary label tree. Nodes are numbered breadth-first from the
    root (0); leaves hold sorted label indexes.

    Arguments:
        children: Child node ids per node; empty for leaves.
        leaf_labels: Node id → member labels, for every leaf.
        centroids: One normalised row per node.
    """

    branching = BRANCHING

    def __init__(
        self,
        children: Sequence[Sequence[int]],
        leaf_labels: dict,
        centroids: sp.csr_matrix,
    ):
        self.children = [tuple(c) for c in children]
        self.leaf_labels = {
            int(node): np.asarray(sorted(labels), dtype=np.int64)
            for node, labels in leaf_labels.items()
        }
        self.centroids = sp.csr_matrix(centroids)
        self.parent = np.full(len(self.children), -1, dtype=np.int64)
        for node, kids in enumerate(self.children):
            for kid in kids:
                self.parent[kid] = node

        self.leaves = [node for node, kids in enumerate(self.children) if not kids]
        if set(self.leaves) != set(self.leaf_labels):
            raise ModelFormatError("leaf label table does not match the tree")
        self.leaf_assignment = {}
        for ordinal, node in enumerate(self.leaves):
            for label in self.leaf_labels[node]:
                if int(label) in self.leaf_assignment:
                    raise ModelFormatError("label {} in two leaves".format(label))
                self.leaf_assignment[int(label)] = ordinal
        self._members = self._collect_members()

    def _collect_members(self) -> List[np.ndarray]:
        members = [None] * len(self.children)
        for node in reversed(range(len(self.children))):
            if self.children[node]:
                members[node] = np.sort(
                    np.concatenate([members[kid] for kid in self.children[node]])
                )
            else:
                members[node] = self.leaf_labels[node]
        return members

    def __len__(self):
        return len(self.children)

    @property
    def num_nodes(self) -> int:
        return len(self.children)

    @property
    def labels(self) -> np.ndarray:
        return self._members[0]

    @property
    def depth(self) -> int:
        """Number of levels, counting the root."""
        depth = 1
        for node in self.leaves:
            level, current = 1, node
            while self.parent[current] >= 0:
                current = self.parent[current]
                level += 1
            depth = max(depth, level)
        return depth

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    def members(self, node: int) -> np.ndarray:
        """Sorted labels in the subtree of `node`."""
        return self._members[node]

    def leaf_of(self, label: int) -> int:
        return self.leaves[self.leaf_assignment[label]]

    def cluster_matrix(self, num_labels: Optional[int] = None) -> sp.csr_matrix:
        """The label-to-leaf matrix Cl, one 1 per assigned label row."""
        if num_labels is None:
            num_labels = int(self.labels.max()) + 1
        rows = sorted(self.leaf_assignment)
        return sp.csr_matrix(
            (
                np.ones(len(rows)),
                (rows, [self.leaf_assignment[label] for label in rows]),
            ),
            shape=(num_labels, len(self.leaves)),
        )

    # --------------------------------------------------------------- #
    # Persistence
    # --------------------------------------------------------------- #

    def save(self, directory: str) -> None:
        with open(os.path.join(directory, "tree.json"), "w", encoding="utf-8") as f:
            json.dump(
                {
                    "branching": self.branching,
                    "children": [list(kids) for kids in self.children],
                    "leaf_labels": {
                        str(node): [int(label) for label in labels]
                        for node, labels in self.leaf_labels.items()
                    },
                },
                f,
                sort_keys=True,
            )
            f.write("\n")
        write_matrix(self.centroids, os.path.join(directory, "tree_centroids.bin"))

    @classmethod
    def load(cls, directory: str) -> "ClusterTree":
        with open(os.path.join(directory, "tree.json"), encoding="utf-8") as f:
            meta = json.load(f)
        if meta.get("branching") != BRANCHING:
            raise ModelFormatError("unsupported branching factor")
        return cls(
            meta["children"],
            {int(node): labels for node, labels in meta["leaf_labels"].items()},
            read_matrix(os.path.join(directory, "tree_centroids.bin")),
        )


def build_cluster_tree(
    embeddings: LabelEmbeddings,
    max_leaf_size: int = DEFAULT_MAX_LEAF_SIZE,
    seed: int = DEFAULT_SEED,
    iterations: int = DEFAULT_ITERATIONS,
) -> ClusterTree:
    """
    Recursively splits the labels with balanced spherical 2-means until every
    node holds at most `max_leaf_size` labels.

    Arguments:
        embeddings: Per-label vectors from `label_embeddings`.
        max_leaf_size: Largest leaf allowed.
        seed: Seeds the choice of each split's first centroid.
        iterations: Assignment rounds per split.

    Returns:
        The tree; identical inputs and seed give an identical tree.
    """
    if len(embeddings) == 0:
        raise ValueError("cannot build a tree without labels")
    if max_leaf_size < 1:
        raise ValueError("max_leaf_size must be at least 1")

    rng = np.random.default_rng(seed)
    matrix = embeddings.matrix
    rows_of = [np.arange(len(embeddings))]
    children = [[]]
    queue = deque([0])
    while queue:
        node = queue.popleft()
        rows = rows_of[node]
        if len(rows) <= max_leaf_size:
            continue
        sides = _bisect(matrix[rows], rng, iterations)
        for side in range(BRANCHING):
            kid = len(rows_of)
            rows_of.append(rows[sides == side])
            children.append([])
            children[node].append(kid)
            queue.append(kid)

    centroids = normalize(
        sp.vstack(
            [sp.csr_matrix(matrix[rows].sum(axis=0)) for rows in rows_of]
        ).tocsr()
    )
    leaf_labels = {
        node: embeddings.labels[rows]
        for node, rows in enumerate(rows_of)
        if not children[node]
    }
    tree = ClusterTree(children, leaf_labels, centroids)
    logger.info(
        "Built label tree over %d labels: %d nodes, %d leaves, depth %d",
        len(embeddings),
        tree.num_nodes,
        len(tree.leaves),
        tree.depth,
    )
    return tree
