"""
PubTator corpora, evaluation datasets and distantly supervised training
sets.
"""
import gzip
import logging
import re
from collections import Counter, defaultdict
from typing import (
    Collection,
    Iterable,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Set,
    Tuple,
)

from .exceptions import ParseError
from .kos import KnowledgeBase, normalize_identifier

logger = logging.getLogger(__name__)

ENTITY_DISEASE = "Disease"
ENTITY_CHEMICAL = "Chemical"

NIL_IDENTIFIERS = frozenset(["-1", "-", ""])

PROVENANCE_KOS = "kos-only"
PROVENANCE_PUBTATOR = "pubtator"
PROVENANCE_KOS_PUBTATOR = "kos+pubtator"

TEXT_LINE = re.compile(r"^([^|\t]+)\|([ta])\|(.*)$")


def open_text(path, mode="rt"):
    """Opens a UTF-8 text file, decompressing `.gz` paths."""
    if str(path).endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def split_identifiers(raw: str) -> Tuple[str, ...]:
    """
    Splits a (possibly composite) annotation identifier field into bare ids.

    NIL markers (`-1`, `-`) are kept as they are.
    """
    parts = [part.strip() for part in re.split(r"[|+]", raw)]
    return tuple(
        part if part in NIL_IDENTIFIERS else normalize_identifier(part)
        for part in parts
        if part
    )


def clean_text(text: str) -> str:
    """Lowercases and collapses whitespace (tabs and newlines included)."""
    return " ".join(text.lower().split())


# --------------------------------------------------------------- #
# Documents
# --------------------------------------------------------------- #


class Mention(
    NamedTuple(
        "Mention",
        [
            ("doc_id", str),
            ("span", Optional[Tuple[int, int]]),
            ("text", str),
            ("entity_type", str),
            ("gold_ids", Tuple[str, ...]),
            ("raw_id", str),
            ("extra", Tuple[str, ...]),
        ],
    )
):
    """
    An entity mention. `raw_id` is the identifier column exactly as read;
    `extra` holds any columns after it.
    """

    def __new__(
        cls, doc_id, span, text, entity_type, gold_ids=(), raw_id="", extra=()
    ):
        if not text:
            raise ValueError("mention text must be non-empty")
        if span is not None and not span[0] < span[1]:
            raise ValueError("mention span must satisfy start < end")
        return super().__new__(
            cls, doc_id, span, text, entity_type, tuple(gold_ids), raw_id, tuple(extra)
        )


class Document(
    NamedTuple(
        "Document",
        [
            ("doc_id", str),
            ("title", str),
            ("abstract", str),
            ("mentions", Tuple[Mention, ...]),
        ],
    )
):
    def __new__(cls, doc_id, title="", abstract="", mentions=()):
        if not doc_id:
            raise ValueError("document id must be non-empty")
        return super().__new__(cls, doc_id, title, abstract, tuple(mentions))

    @property
    def text(self) -> str:
        """Title and abstract joined the way PubTator offsets count them."""
        if self.abstract:
            return "{} {}".format(self.title, self.abstract)
        return self.title


class _DocumentBuilder:
    def __init__(self, doc_id):
        self.doc_id = doc_id
        self.title = ""
        self.abstract = ""
        self.mentions = []
        self.failed = False

    @property
    def length(self):
        return len(self.title) + (len(self.abstract) + 1 if self.abstract else 0)

    def build(self):
        return Document(self.doc_id, self.title, self.abstract, self.mentions)


def _parse_annotation(columns, builder, line_number):
    doc_id = columns[0]
    if builder is None or builder.doc_id != doc_id:
        raise ParseError(
            "annotation for unseen document {!r}".format(doc_id), line_number
        )
    try:
        start, end = int(columns[1]), int(columns[2])
    except ValueError:
        raise ParseError("non-integer offsets", line_number) from None
    if not start < end:
        raise ParseError("empty or inverted span {}-{}".format(start, end), line_number)
    if end > builder.length:
        raise ParseError(
            "span {}-{} exceeds document length {}".format(start, end, builder.length),
            line_number,
        )
    text = columns[3]
    if not text:
        raise ParseError("empty mention text", line_number)
    raw_id = columns[5] if len(columns) > 5 else ""
    return Mention(
        doc_id,
        (start, end),
        text,
        columns[4],
        split_identifiers(raw_id),
        raw_id,
        columns[6:],
    )


def iter_pubtator(
    lines: Iterable[str], errors: Optional[list] = None
) -> Iterator[Document]:
    """
    Streams documents from PubTator-formatted lines.

    Arguments:
        lines: `PMID|t|title`, `PMID|a|abstract` and tab-separated
            annotation lines, documents separated by blank lines.
        errors: When given, a malformed document is skipped and its
            `ParseError` appended here instead of being raised.

    Raises:
        ParseError: On a malformed line, unless `errors` is given.
    """
    builder = None
    for line_number, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            if builder is not None and not builder.failed:
                yield builder.build()
            builder = None
            continue

        match = TEXT_LINE.match(line)
        if match:
            doc_id, kind, body = match.groups()
            if builder is None or builder.doc_id != doc_id:
                if builder is not None and not builder.failed:
                    yield builder.build()
                builder = _DocumentBuilder(doc_id)
            if kind == "t":
                builder.title = body
            else:
                builder.abstract = body
            continue

        if builder is not None and builder.failed:
            continue
        columns = line.split("\t")
        if len(columns) == 4 and not columns[1].isdigit():
            logger.debug("Skipping relation line %d", line_number)
            continue
        try:
            if not 5 <= len(columns) <= 8:
                raise ParseError(
                    "expected 5-8 tab-separated columns, found {}".format(len(columns)),
                    line_number,
                )
            mention = _parse_annotation(columns, builder, line_number)
            builder.mentions.append(mention)
        except ParseError as error:
            if errors is None:
                raise
            errors.append(error)
            if builder is not None and builder.doc_id == columns[0]:
                builder.failed = True
            logger.warning("Skipping document %s: %s", columns[0], error)

    if builder is not None and not builder.failed:
        yield builder.build()


def parse_pubtator(
    stream: Iterable[str], errors: Optional[list] = None
) -> List[Document]:
    return list(iter_pubtator(stream, errors))


def iter_annotations(
    documents: Iterable[Document], entity_type: Optional[str] = None
) -> Iterator[Tuple[str, str, str]]:
    """Yields `(doc_id, text, raw identifier)` for every annotated mention."""
    for document in documents:
        for mention in document.mentions:
            if entity_type and mention.entity_type != entity_type:
                continue
            if mention.raw_id:
                yield document.doc_id, mention.text, mention.raw_id


def parse_bioconcepts(
    lines: Iterable[str], entity_type: Optional[str] = None
) -> Iterator[Tuple[str, str, str]]:
    """
    Reads bulk concept-annotation dumps.

    Each line is `PMID<TAB>Type<TAB>ConceptID<TAB>mention|mention…<TAB>Resource`;
    one `(doc_id, text, id)` triple is produced per listed mention.
    """
    for line_number, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        columns = line.split("\t")
        if len(columns) < 4:
            raise ParseError(
                "expected at least 4 tab-separated columns, found {}".format(
                    len(columns)
                ),
                line_number,
            )
        doc_id, kind, identifier, mentions = columns[:4]
        if entity_type and kind != entity_type:
            continue
        if identifier.strip() in NIL_IDENTIFIERS:
            continue
        for text in mentions.split("|"):
            if text.strip():
                yield doc_id, text, identifier


def read_exclusions(path) -> Set[str]:
    """
    Reads document ids to exclude: one per line, or the ids of any
    PubTator file (text and annotation lines both start with the id).
    """
    excluded = set()
    with open_text(path) as f:
        for line in f:
            if line.strip():
                excluded.add(re.split(r"[|\t]", line.strip(), 1)[0].strip())
    return excluded


# --------------------------------------------------------------- #
# Training sets
# --------------------------------------------------------------- #


class TrainingInstance(
    NamedTuple(
        "TrainingInstance", [("text", str), ("label", int), ("frequency", int)]
    )
):
    """A `(text, label)` pair with the corpus frequency it was ranked by."""

    def __new__(cls, text, label, frequency=1):
        return super().__new__(cls, text, label, frequency)


class TrainingSet:
    """
    Ordered, duplicate-free `(text, label)` instances.

    Arguments:
        instances: `TrainingInstance` records.
        provenance: `kos-only`, `pubtator` or `kos+pubtator`.
        cap: The per-label instance cap the set was generated with.
    """

    def __init__(self, instances=(), provenance=PROVENANCE_KOS_PUBTATOR, cap=None):
        self.instances = tuple(instances)
        self.provenance = provenance
        self.cap = cap

        seen = set()
        per_label = Counter()
        for instance in self.instances:
            pair = (instance.text, instance.label)
            if pair in seen:
                raise ValueError("duplicate training instance {!r}".format(pair))
            seen.add(pair)
            per_label[instance.label] += 1
        if cap is not None and per_label and max(per_label.values()) > cap:
            raise ValueError("label exceeds instance cap {}".format(cap))

    def __len__(self):
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def __eq__(self, other):
        if not isinstance(other, TrainingSet):
            return NotImplemented
        return self.pairs() == other.pairs()

    def pairs(self) -> List[Tuple[str, int]]:
        return [(instance.text, instance.label) for instance in self.instances]

    @property
    def texts(self) -> List[str]:
        return [instance.text for instance in self.instances]

    @property
    def labels(self) -> List[int]:
        return [instance.label for instance in self.instances]

    def label_counts(self) -> Counter:
        return Counter(self.labels)

    def validate(self, kb: KnowledgeBase) -> None:
        """Raises `ValueError` if a label is out of range for `kb`."""
        for instance in self.instances:
            if not 0 <= instance.label < len(kb):
                raise ValueError(
                    "label {} outside knowledge base".format(instance.label)
                )

    def as_annotations(self, kb: KnowledgeBase) -> Iterator[Tuple[None, str, str]]:
        """
        Re-expands the set into annotation triples, each instance repeated
        by its frequency.
        """
        for instance in self.instances:
            identifier = kb.id_of(instance.label)
            for _ in range(instance.frequency):
                yield None, instance.text, identifier


def _ranked_instances(label_counts, cap=None):
    instances = []
    for label in sorted(label_counts):
        ranked = sorted(label_counts[label].items(), key=lambda item: (-item[1], item[0]))
        if cap is not None:
            ranked = ranked[:cap]
        instances.extend(TrainingInstance(text, label, count) for text, count in ranked)
    return instances


def generate_training_set(
    annotations: Iterable[Tuple[Optional[str], str, str]],
    kb: KnowledgeBase,
    excluded_docs: Collection[str] = frozenset(),
    cap: Optional[int] = None,
) -> TrainingSet:
    """
    Turns raw annotations into a training set.

    In order: (1) drop annotations of excluded documents; (2) lowercase the
    text; (3) deduplicate `(text, id)` pairs, counting how often each pair
    occurred; (4) drop ids unknown to `kb` (after alternate-id remapping)
    and convert the rest to label indexes; (5) per label, rank strings by
    descending frequency (ties lexicographically) and keep at most `cap`.

    Arguments:
        annotations: `(doc_id, text, identifier)` triples; composite
            identifiers yield one instance per id.
        kb: The target KOS.
        excluded_docs: Document ids whose annotations are dropped.
        cap: Maximum instances per label, or `None` for all.
    """
    if cap is not None and cap < 1:
        raise ValueError("cap must be positive")

    pair_counts = Counter()
    total = excluded = 0
    for doc_id, text, identifier in annotations:
        total += 1
        if doc_id is not None and doc_id in excluded_docs:
            excluded += 1
            continue
        text = clean_text(text)
        if not text:
            continue
        for raw in split_identifiers(identifier):
            pair_counts[(text, raw)] += 1

    label_counts = defaultdict(Counter)
    obsolete = set()
    for (text, raw), count in pair_counts.items():
        primary = kb.resolve(raw) if raw not in NIL_IDENTIFIERS else None
        if primary is None:
            obsolete.add(raw)
            continue
        label_counts[kb.index_of(primary)][text] += count

    instances = _ranked_instances(label_counts, cap)
    logger.info(
        "Generated %d instances for %d labels from %d annotations "
        "(%d excluded by document, %d unknown identifiers)",
        len(instances),
        len(label_counts),
        total,
        excluded,
        len(obsolete),
    )
    if not instances:
        logger.warning("Training set is empty after filtering")
    return TrainingSet(instances, PROVENANCE_PUBTATOR, cap)


def kos_training_instances(kb: KnowledgeBase) -> TrainingSet:
    """One instance per lowercased canonical name and synonym."""
    instances = []
    for label, concept in enumerate(kb):
        seen = set()
        for form in concept.surface_forms:
            text = clean_text(form)
            if text and text not in seen:
                seen.add(text)
                instances.append(TrainingInstance(text, label))
    return TrainingSet(instances, PROVENANCE_KOS)


def merge_training_sets(*training_sets: TrainingSet) -> TrainingSet:
    """
    Unions training sets, summing frequencies of shared `(text, label)`
    pairs; the result is ordered by label, then frequency, then text.
    """
    label_counts = defaultdict(Counter)
    provenances = set()
    for training_set in training_sets:
        provenances.add(training_set.provenance)
        for instance in training_set:
            label_counts[instance.label][instance.text] += instance.frequency
    if provenances <= {PROVENANCE_KOS}:
        provenance = PROVENANCE_KOS
    elif provenances <= {PROVENANCE_PUBTATOR}:
        provenance = PROVENANCE_PUBTATOR
    else:
        provenance = PROVENANCE_KOS_PUBTATOR
    return TrainingSet(_ranked_instances(label_counts), provenance)


def write_training_set(training_set: TrainingSet, path) -> None:
    """Writes `label_index<TAB>text` lines."""
    with open_text(path, "wt") as f:
        for instance in training_set:
            f.write("{}\t{}\n".format(instance.label, instance.text))


def read_training_set(
    path, kb: Optional[KnowledgeBase] = None, provenance=PROVENANCE_KOS_PUBTATOR
) -> TrainingSet:
    """
    Reads a two-column training file. Repeated lines are merged into one
    instance whose frequency counts the repetitions.
    """
    counts = Counter()
    order = []
    with open_text(path) as f:
        for line_number, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            label, sep, text = line.partition("\t")
            if not sep or not text:
                raise ParseError("expected label<TAB>text", line_number)
            try:
                label = int(label)
            except ValueError:
                raise ParseError("non-integer label {!r}".format(label), line_number)
            if kb is not None and not 0 <= label < len(kb):
                raise ParseError("label {} outside knowledge base".format(label), line_number)
            pair = (text, label)
            if pair not in counts:
                order.append(pair)
            counts[pair] += 1
    return TrainingSet(
        [TrainingInstance(text, label, counts[(text, label)]) for text, label in order],
        provenance,
    )


# --------------------------------------------------------------- #
# Evaluation datasets
# --------------------------------------------------------------- #


class NilCounts(NamedTuple("NilCounts", [("no_id", int), ("obsolete", int)])):
    """Mentions removed because they carry no id, or only obsolete ids."""


def filter_nil_mentions(
    documents: Iterable[Document],
    kb: Optional[KnowledgeBase] = None,
    entity_type: Optional[str] = None,
) -> Tuple[List[Document], NilCounts]:
    """
    Drops NIL mentions and remaps alternate gold ids to primary ids.

    Arguments:
        documents: Parsed documents.
        kb: When given, mentions whose ids are all unknown are dropped as
            obsolete.
        entity_type: When given, mentions of other types are dropped
            without being counted.
    """
    no_id = obsolete = 0
    kept = []
    for document in documents:
        mentions = []
        for mention in document.mentions:
            if entity_type and mention.entity_type != entity_type:
                continue
            live = [i for i in mention.gold_ids if i not in NIL_IDENTIFIERS]
            if not live:
                no_id += 1
                continue
            if kb is not None:
                resolved = []
                for identifier in live:
                    primary = kb.resolve(identifier)
                    if primary is not None and primary not in resolved:
                        resolved.append(primary)
                if not resolved:
                    obsolete += 1
                    continue
                mention = mention._replace(gold_ids=tuple(resolved))
            mentions.append(mention)
        kept.append(document._replace(mentions=tuple(mentions)))
    return kept, NilCounts(no_id, obsolete)


def load_eval_dataset(
    path, kb: KnowledgeBase, entity_type: Optional[str] = None
) -> List[Document]:
    """
    Parses a PubTator evaluation file and removes NIL (`-1`/`-`) and
    obsolete mentions.
    """
    with open_text(path) as f:
        documents, counts = filter_nil_mentions(parse_pubtator(f), kb, entity_type)
    logger.info(
        "Loaded %d documents from %s (%d NIL mentions, %d obsolete removed)",
        len(documents),
        path,
        counts.no_id,
        counts.obsolete,
    )
    return documents
