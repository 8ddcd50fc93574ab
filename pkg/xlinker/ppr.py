"""
Collective disambiguation over a document's candidates: Personalized
PageRank from each candidate, weighted by information content.
"""
import logging
from collections import defaultdict
from typing import Dict, List, NamedTuple, Optional, Sequence

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .exceptions import ConvergenceError
from .kos import KnowledgeBase
from .strmatch import ScoredCandidate

logger = logging.getLogger(__name__)

DEFAULT_TELEPORT = 0.15
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 1000


class GraphNode(
    NamedTuple("GraphNode", [("mention", int), ("candidate", ScoredCandidate)])
):
    """A `(mention, candidate)` pair."""

    @property
    def concept_index(self) -> int:
        return self.candidate.concept_index

    @property
    def score(self) -> float:
        return self.candidate.score

    @property
    def source(self) -> str:
        return self.candidate.source


class DisambiguationGraph:
    """
    Undirected candidate graph of one document.

    Attributes:
        nodes: `GraphNode` per graph node, in node order.
        graph: `networkx.Graph` over node positions.
        mention_groups: Mention position → node positions.
    """

    def __init__(self, nodes: Sequence[GraphNode], graph: nx.Graph):
        self.nodes = list(nodes)
        self.graph = graph
        self.mention_groups = defaultdict(list)  # type: Dict[int, List[int]]
        for position, node in enumerate(self.nodes):
            self.mention_groups[node.mention].append(position)
        self.mention_groups = dict(self.mention_groups)
        self._transition = None

    def __len__(self):
        return len(self.nodes)

    @property
    def edges(self) -> List[tuple]:
        return sorted(tuple(sorted(edge)) for edge in self.graph.edges())

    def degree(self, node: int) -> int:
        return self.graph.degree(node)

    @property
    def adjacency(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            nx.to_scipy_sparse_array(
                self.graph, nodelist=range(len(self.nodes)), dtype=np.float64, format="csr"
            )
        )

    @property
    def transition(self) -> sp.csr_matrix:
        """Column-stochastic walk over edges; isolated columns are empty."""
        if self._transition is None:
            adjacency = self.adjacency
            degree = np.asarray(adjacency.sum(axis=1)).ravel()
            inverse = np.divide(
                1.0, degree, out=np.zeros_like(degree), where=degree > 0
            )
            # Symmetric adjacency: column j spreads node j's mass to its neighbours.
            self._transition = (adjacency @ sp.diags(inverse)).tocsr()
        return self._transition


def build_graph(
    candidate_lists: Sequence[Sequence[ScoredCandidate]], kb: KnowledgeBase
) -> DisambiguationGraph:
    """
    One node per `(mention, concept)`; repeated concepts within a mention are
    merged keeping the highest score. Nodes of different mentions are joined
    when their concepts are equal or directly related by is-a.

    Arguments:
        candidate_lists: Candidates per mention, in mention order.
        kb: The KOS the concept indexes refer to.
    """
    nodes = []
    for mention, candidates in enumerate(candidate_lists):
        best = {}
        for candidate in candidates:
            current = best.get(candidate.concept_index)
            if current is None or candidate.score > current.score:
                best[candidate.concept_index] = candidate
        for concept_index in sorted(best, key=lambda i: (-best[i].score, i)):
            nodes.append(GraphNode(mention, best[concept_index]))

    graph = nx.Graph()
    graph.add_nodes_from(range(len(nodes)))
    by_concept = defaultdict(list)
    for position, node in enumerate(nodes):
        by_concept[node.concept_index].append(position)
    for position, node in enumerate(nodes):
        related = {node.concept_index}
        related.update(
            kb.index_of(identifier)
            for identifier in kb.neighbors(kb.id_of(node.concept_index))
        )
        for concept_index in related:
            for other in by_concept.get(concept_index, ()):
                if other > position and nodes[other].mention != node.mention:
                    graph.add_edge(position, other)

    logger.debug(
        "Disambiguation graph: %d mentions, %d nodes, %d edges",
        len(candidate_lists),
        graph.number_of_nodes(),
        graph.number_of_edges(),
    )
    return DisambiguationGraph(nodes, graph)


def personalized_pagerank(
    graph: DisambiguationGraph,
    source: int,
    teleport: float = DEFAULT_TELEPORT,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> np.ndarray:
    """
    Stationary distribution of a walk that restarts at `source`.

    With probability `teleport` the walk jumps to `source`, otherwise it
    moves to a uniformly chosen neighbour; an isolated node sends all of its
    mass back to `source`. Power iteration starts from the source and stops
    once the L1 change is at most `tol`.

    Raises:
        ConvergenceError: After `max_iters` iterations without convergence;
            carries the last iterate.
    """
    n = len(graph)
    if n == 0:
        raise ValueError("graph has no nodes")
    if not 0 <= source < n:
        raise IndexError("source {} outside graph of {} nodes".format(source, n))
    if not 0.0 < teleport < 1.0:
        raise ValueError("teleport must lie in (0, 1)")

    transition = graph.transition
    has_edges = np.asarray(transition.sum(axis=0)).ravel() > 0
    scores = np.zeros(n)
    scores[source] = 1.0
    for iteration in range(1, max_iters + 1):
        walked = (1.0 - teleport) * (transition @ scores)
        walked[source] += teleport + (1.0 - teleport) * scores[~has_edges].sum()
        change = np.abs(walked - scores).sum()
        scores = walked
        if change <= tol:
            return scores
    raise ConvergenceError(
        "PageRank from node {} did not converge in {} iterations".format(
            source, max_iters
        ),
        iterate=scores,
        iterations=max_iters,
    )


class CoherenceScores:
    """Global coherence per graph node."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, node: int) -> float:
        return float(self.values[node])

    def __repr__(self):
        return "CoherenceScores({!r})".format(self.values.tolist())


def coherence_scores(
    graph: DisambiguationGraph,
    kb: KnowledgeBase,
    teleport: float = DEFAULT_TELEPORT,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> CoherenceScores:
    """
    `coherence(t) = IC(t) · Σ PPR(s → t)` over source nodes `s` of the
    other mentions.
    """
    totals = np.zeros(len(graph))
    mention_of = np.array([node.mention for node in graph.nodes], dtype=np.int64)
    for source in range(len(graph)):
        # An isolated source keeps all of its mass.
        if graph.degree(source) == 0:
            continue
        distribution = personalized_pagerank(graph, source, teleport, tol, max_iters)
        foreign = mention_of != mention_of[source]
        totals[foreign] += distribution[foreign]

    information = np.array(
        [kb.information_content(kb.id_of(node.concept_index)) for node in graph.nodes]
    )
    return CoherenceScores(totals * information)


def select(
    graph: DisambiguationGraph, scores: CoherenceScores
) -> Dict[int, ScoredCandidate]:
    """
    Picks one candidate per mention: highest coherence, then highest incoming
    score, then lowest concept index. A mention whose nodes all have zero
    coherence falls back to the highest incoming score.
    """
    chosen = {}
    for mention, positions in graph.mention_groups.items():
        # With every coherence at zero the first key term is constant and the
        # incoming score decides.
        best = max(
            positions,
            key=lambda p: (scores[p], graph.nodes[p].score, -graph.nodes[p].concept_index),
        )
        chosen[mention] = graph.nodes[best].candidate
    return chosen


def dump_graph(
    graph: DisambiguationGraph,
    kb: KnowledgeBase,
    mention_names: Optional[Sequence[str]] = None,
) -> str:
    """
    Line-oriented dump: `NODE idx mention concept ic score` per node, then
    `EDGE i j` per edge.
    """
    lines = []
    for position, node in enumerate(graph.nodes):
        identifier = kb.id_of(node.concept_index)
        mention = (
            mention_names[node.mention] if mention_names is not None else node.mention
        )
        lines.append(
            "NODE {} {} {} {:.6f} {:.6f}".format(
                position,
                mention,
                identifier,
                kb.information_content(identifier),
                node.score,
            )
        )
    for i, j in graph.edges:
        lines.append("EDGE {} {}".format(i, j))
    return "\n".join(lines) + "\n"
