"""
Target knowledge organization system (KOS): CTD-style vocabulary loading,
identifier/label indexing, is-a hierarchy queries and intrinsic information
content.
"""
import csv
import json
import logging
import math
import os
from typing import Dict, Iterable, List, NamedTuple, Optional, Set, Tuple

import networkx as nx

from .exceptions import IntegrityError, ParseError, UnknownConceptError

logger = logging.getLogger(__name__)

FORMAT_CTD_TSV = "ctd-tsv"
KB_FORMAT_VERSION = 1

# Prefixes stripped from identifiers in vocabularies and annotations.
IDENTIFIER_PREFIXES = ("MESH:", "OMIM:")

CTD_COLUMNS = (
    "Name",
    "ID",
    "AltIDs",
    "Definition",
    "ParentIDs",
    "TreeNumbers",
    "ParentTreeNumbers",
    "Synonyms",
)


def normalize_identifier(identifier: str) -> str:
    """
    Strips whitespace and a leading `MESH:`/`OMIM:` prefix.

    Arguments:
        identifier: A raw vocabulary or annotation identifier.
    """
    identifier = identifier.strip()
    for prefix in IDENTIFIER_PREFIXES:
        if identifier.startswith(prefix):
            return identifier[len(prefix) :]
    return identifier


def _split_field(value: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in value.split("|") if part.strip())


class Concept(
    NamedTuple(
        "Concept",
        [
            ("id", str),
            ("canonical_name", str),
            ("synonyms", Tuple[str, ...]),
            ("parent_ids", Tuple[str, ...]),
            ("alt_ids", Tuple[str, ...]),
        ],
    )
):
    """
    One KOS entry.

    Synonyms are deduplicated case-insensitively on construction, keeping
    the first spelling seen.
    """

    def __new__(cls, id, canonical_name, synonyms=(), parent_ids=(), alt_ids=()):
        seen = set()
        unique = []
        for synonym in synonyms:
            key = synonym.lower()
            if synonym and key not in seen:
                seen.add(key)
                unique.append(synonym)
        return super().__new__(
            cls, id, canonical_name, tuple(unique), tuple(parent_ids), tuple(alt_ids)
        )

    @property
    def surface_forms(self) -> Tuple[str, ...]:
        """Canonical name followed by the synonyms."""
        return (self.canonical_name,) + self.synonyms


class KnowledgeBase:
    """
    Immutable, validated collection of concepts.

    The dense label index follows load order. The is-a hierarchy is held as
    a `networkx.DiGraph` with edges from parent to child.

    Arguments:
        concepts: The concepts, in label-index order.

    Raises:
        IntegrityError: On duplicate or empty ids, empty names, dangling
            parents or hierarchy cycles.
    """

    def __init__(self, concepts: Iterable[Concept]):
        self._concepts = {}  # type: Dict[str, Concept]
        self._ids = []  # type: List[str]
        duplicates = []
        for concept in concepts:
            if not concept.id:
                raise IntegrityError("concept with empty identifier")
            if not concept.canonical_name:
                raise IntegrityError("concept with empty name", [concept.id])
            if concept.id in self._concepts:
                duplicates.append(concept.id)
                continue
            self._concepts[concept.id] = concept
            self._ids.append(concept.id)
        if duplicates:
            raise IntegrityError("duplicate concept identifiers", duplicates)

        self._index = {identifier: i for i, identifier in enumerate(self._ids)}

        dangling = sorted(
            {
                parent
                for concept in self._concepts.values()
                for parent in concept.parent_ids
                if parent not in self._concepts
            }
        )
        if dangling:
            raise IntegrityError("dangling parent identifiers", dangling)

        self._hierarchy = nx.DiGraph()
        self._hierarchy.add_nodes_from(self._ids)
        for concept in self._concepts.values():
            for parent in concept.parent_ids:
                self._hierarchy.add_edge(parent, concept.id)
        if not nx.is_directed_acyclic_graph(self._hierarchy):
            cycle = nx.find_cycle(self._hierarchy)
            raise IntegrityError(
                "cycle in is-a hierarchy", sorted({u for u, _ in cycle})
            )

        self._alt_owner = {}  # type: Dict[str, str]
        for identifier in self._ids:
            for alt in self._concepts[identifier].alt_ids:
                if alt not in self._concepts:
                    self._alt_owner.setdefault(alt, identifier)

    # --------------------------------------------------------------- #
    # Mapping protocol
    # --------------------------------------------------------------- #

    def __len__(self):
        return len(self._ids)

    def __contains__(self, identifier):
        return identifier in self._concepts

    def __iter__(self):
        return (self._concepts[identifier] for identifier in self._ids)

    def __getitem__(self, identifier) -> Concept:
        try:
            return self._concepts[identifier]
        except KeyError:
            raise UnknownConceptError(identifier) from None

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(self._ids)

    # --------------------------------------------------------------- #
    # Label index
    # --------------------------------------------------------------- #

    def index_of(self, identifier: str) -> int:
        try:
            return self._index[identifier]
        except KeyError:
            raise UnknownConceptError(identifier) from None

    def id_of(self, index: int) -> str:
        if not 0 <= index < len(self._ids):
            raise UnknownConceptError(index)
        return self._ids[index]

    def resolve(self, identifier: str) -> Optional[str]:
        """
        Maps an identifier to a live primary identifier.

        Primary ids map to themselves, alternate ids to their owning concept;
        anything else is obsolete and maps to `None`.
        """
        identifier = normalize_identifier(identifier)
        if identifier in self._concepts:
            return identifier
        return self._alt_owner.get(identifier)

    # --------------------------------------------------------------- #
    # Hierarchy
    # --------------------------------------------------------------- #

    def _require(self, identifier):
        if identifier not in self._concepts:
            raise UnknownConceptError(identifier)

    def children_count(self, identifier: str) -> int:
        self._require(identifier)
        return self._hierarchy.out_degree(identifier)

    def neighbors(self, identifier: str) -> Set[str]:
        """Parents and direct children (undirected is-a adjacency)."""
        self._require(identifier)
        return set(self._hierarchy.predecessors(identifier)) | set(
            self._hierarchy.successors(identifier)
        )

    def information_content(self, identifier: str) -> float:
        """
        Intrinsic IC: `-ln((children + 1) / |E|)`.
        """
        probability = (self.children_count(identifier) + 1) / len(self)
        return max(0.0, -math.log(probability))

    # --------------------------------------------------------------- #
    # Persistence
    # --------------------------------------------------------------- #

    def save(self, directory: str, source: Optional[str] = None) -> None:
        """
        Writes `kos.tsv` in CTD layout plus `manifest.json`.
        """
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "kos.tsv"), "w", encoding="utf-8") as f:
            f.write("# " + "\t".join(CTD_COLUMNS) + "\n")
            for concept in self:
                row = [
                    concept.canonical_name,
                    concept.id,
                    "|".join(concept.alt_ids),
                    "",
                    "|".join(concept.parent_ids),
                    "",
                    "",
                    "|".join(concept.synonyms),
                ]
                f.write("\t".join(row) + "\n")
        manifest = {
            "format_version": KB_FORMAT_VERSION,
            "concepts": len(self),
            "source": source,
        }
        with open(os.path.join(directory, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, directory: str) -> "KnowledgeBase":
        """Reads a directory written by `save` (or a bare CTD file path)."""
        if os.path.isfile(directory):
            return load_kos(directory)
        return load_kos(os.path.join(directory, "kos.tsv"))


def _parse_ctd_rows(lines: Iterable[str]) -> Iterable[Concept]:
    reader = csv.reader(lines, delimiter="\t", quoting=csv.QUOTE_NONE)
    for row in reader:
        line_number = reader.line_num
        if not row or not "".join(row).strip() or row[0].startswith("#"):
            continue
        if len(row) < 2:
            raise ParseError(
                "expected at least name and id columns, found {}".format(len(row)),
                line_number,
            )
        row = row + [""] * (len(CTD_COLUMNS) - len(row))
        name, identifier, alt, _, parents, _, _, synonyms = row[: len(CTD_COLUMNS)]
        name = name.strip()
        identifier = normalize_identifier(identifier)
        if not name or not identifier:
            raise ParseError("empty name or identifier", line_number)
        yield Concept(
            identifier,
            name,
            _split_field(synonyms),
            tuple(normalize_identifier(p) for p in _split_field(parents)),
            tuple(normalize_identifier(a) for a in _split_field(alt)),
        )


def load_kos(path: str, format: str = FORMAT_CTD_TSV) -> KnowledgeBase:
    """
    Loads a CTD-style vocabulary (MEDIC, CTD-Chemical).

    Arguments:
        path: The tab-separated vocabulary file.
        format: Only `ctd-tsv` is supported.

    Returns:
        A validated `KnowledgeBase`.
    """
    if format != FORMAT_CTD_TSV:
        raise ValueError("unsupported KOS format {!r}".format(format))
    with open(path, encoding="utf-8", newline="") as f:
        kb = KnowledgeBase(_parse_ctd_rows(f))
    logger.info("Loaded %d concepts from %s", len(kb), path)
    return kb


def information_content(kb: KnowledgeBase, identifier: str) -> float:
    return kb.information_content(identifier)


def neighbors(kb: KnowledgeBase, identifier: str) -> Set[str]:
    return kb.neighbors(identifier)
