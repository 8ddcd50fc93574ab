"""
Top-k accuracy, evaluation reports and training-overlap analysis.
"""
import logging
from collections import Counter, OrderedDict, defaultdict
from typing import (
    Collection,
    Dict,
    Iterable,
    Mapping,
    NamedTuple,
    Sequence,
    Tuple,
)

from .corpus import Document, NilCounts, TrainingSet, clean_text
from .kos import KnowledgeBase
from .pipeline import BRANCHES, LinkedMention

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 5)
MATCHING = "any"


def top_k_accuracy(
    predictions: Sequence[Sequence[str]],
    gold: Sequence[Collection[str]],
    k: int,
) -> float:
    """
    Fraction of mentions with any gold id among their first `k` predicted
    ids. Mentions without predictions count as misses.

    Arguments:
        predictions: Ranked ids per mention.
        gold: Gold id set per mention, aligned with `predictions`.
        k: Cut-off.
    """
    if len(predictions) != len(gold):
        raise ValueError(
            "{} predictions for {} gold mentions".format(len(predictions), len(gold))
        )
    if k < 1:
        raise ValueError("k must be at least 1")
    if not gold:
        return 0.0
    hits = sum(
        1
        for ranked, expected in zip(predictions, gold)
        if set(ranked[:k]) & set(expected)
    )
    return hits / len(gold)


class EvalReport(
    NamedTuple(
        "EvalReport",
        [
            ("name", str),
            ("n", int),
            ("accuracy", Dict[int, float]),
            ("nil_counts", NilCounts),
            ("branches", Dict[str, Tuple[int, float]]),
            ("matching", str),
        ],
    )
):
    """
    Attributes:
        name: Dataset name.
        n: Evaluated mentions.
        accuracy: k → top-k accuracy.
        nil_counts: Mentions removed before evaluation.
        branches: Pipeline branch → (mentions, top-1 accuracy).
        matching: How composite gold sets are scored.
    """

    def __new__(cls, name, n, accuracy, nil_counts=NilCounts(0, 0), branches=None):
        accuracy = OrderedDict(sorted(accuracy.items()))
        values = list(accuracy.values())
        if any(not 0.0 <= value <= 1.0 for value in values):
            raise ValueError("accuracy outside [0, 1]")
        if any(a > b for a, b in zip(values, values[1:])):
            raise ValueError("accuracy must not decrease with k")
        return super().__new__(
            cls, name, n, accuracy, nil_counts, dict(branches or {}), MATCHING
        )

    def top(self, k: int) -> float:
        return self.accuracy[k]


def _report(name, predictions, gold, ks, nil_counts, branches=None) -> EvalReport:
    accuracy = {k: top_k_accuracy(predictions, gold, k) for k in ks}
    report = EvalReport(name, len(gold), accuracy, nil_counts, branches)
    logger.info(
        "%s: %d mentions, %s",
        name or "evaluation",
        report.n,
        ", ".join("top-{} {:.4f}".format(k, v) for k, v in report.accuracy.items()),
    )
    return report


def evaluate_links(
    linked: Sequence[LinkedMention],
    ks: Sequence[int] = DEFAULT_KS,
    name: str = "",
    nil_counts: NilCounts = NilCounts(0, 0),
) -> EvalReport:
    """Scores linked mentions against their own gold ids, per branch too."""
    linked = [item for item in linked if item.mention.gold_ids]
    predictions = [item.ranked_ids for item in linked]
    gold = [item.mention.gold_ids for item in linked]

    grouped = defaultdict(list)
    for item in linked:
        grouped[item.decision_trace.branch].append(item)
    branches = OrderedDict()
    for branch in BRANCHES:
        members = grouped.get(branch)
        if members:
            branches[branch] = (
                len(members),
                top_k_accuracy(
                    [m.ranked_ids for m in members],
                    [m.mention.gold_ids for m in members],
                    1,
                ),
            )
    return _report(name, predictions, gold, ks, nil_counts, branches)


def evaluate_predictions(
    predictions: Mapping[Tuple[str, Tuple[int, int]], Sequence[str]],
    gold_docs: Iterable[Document],
    ks: Sequence[int] = DEFAULT_KS,
    name: str = "",
    nil_counts: NilCounts = NilCounts(0, 0),
) -> EvalReport:
    """
    Scores `(doc_id, span)` → ranked ids against gold documents; gold
    mentions without a prediction count as misses.
    """
    ranked, gold = [], []
    missing = 0
    for document in gold_docs:
        for mention in document.mentions:
            found = predictions.get((mention.doc_id, mention.span))
            if found is None:
                missing += 1
                found = []
            ranked.append(list(found))
            gold.append(mention.gold_ids)
    if missing:
        logger.warning("%d gold mentions have no prediction", missing)
    return _report(name, ranked, gold, ks, nil_counts)


# --------------------------------------------------------------- #
# Training overlap
# --------------------------------------------------------------- #


class OverlapReport(
    NamedTuple(
        "OverlapReport",
        [
            ("mentions", int),
            ("in_kos", int),
            ("in_training", int),
            ("exact", int),
            ("ambiguous", int),
            ("wrong_label", int),
        ],
    )
):
    """
    Attributes:
        mentions: Evaluated mentions.
        in_kos: Mentions whose text is a KOS name or synonym.
        in_training: Mentions whose text is a training string.
        exact: Of those, strings owning one label, the gold one.
        ambiguous: Strings owning several labels, the gold one among them.
        wrong_label: Training strings whose labels miss the gold id.
    """


def overlap_report(
    documents: Iterable[Document], training_set: TrainingSet, kb: KnowledgeBase
) -> OverlapReport:
    """How much of an evaluation set the training file and the KOS cover."""
    owners = defaultdict(set)
    for text, label in training_set.pairs():
        owners[clean_text(text)].add(kb.id_of(label))
    names = {clean_text(form) for concept in kb for form in concept.surface_forms}

    counts = Counter()
    for document in documents:
        for mention in document.mentions:
            counts["mentions"] += 1
            text = clean_text(mention.text)
            if text in names:
                counts["in_kos"] += 1
            labels = owners.get(text)
            if labels is None:
                continue
            counts["in_training"] += 1
            if not labels & set(mention.gold_ids):
                counts["wrong_label"] += 1
            elif len(labels) == 1:
                counts["exact"] += 1
            else:
                counts["ambiguous"] += 1
    return OverlapReport(*(counts[field] for field in OverlapReport._fields))


# --------------------------------------------------------------- #
# Tables
# --------------------------------------------------------------- #


def format_table(results: Mapping[str, Sequence[EvalReport]], k: int = 1) -> str:
    """
    Tab-separated top-`k` table: one row per method, one column per dataset
    (in first-seen order). Missing cells are empty.
    """
    datasets = []
    for reports in results.values():
        for report in reports:
            if report.name not in datasets:
                datasets.append(report.name)
    lines = ["\t".join(["method"] + datasets)]
    for method, reports in results.items():
        by_name = {report.name: report for report in reports}
        cells = [
            "{:.4f}".format(by_name[dataset].top(k)) if dataset in by_name else ""
            for dataset in datasets
        ]
        lines.append("\t".join([method] + cells))
    return "\n".join(lines) + "\n"


def format_report(report: EvalReport) -> str:
    """Tab-separated summary of one report; the value column is the dataset."""
    lines = ["\t".join(["metric", report.name or "dataset"])]
    lines.append("N\t{}".format(report.n))
    for k, value in report.accuracy.items():
        lines.append("top-{}\t{:.4f}".format(k, value))
    lines.append("no-id\t{}".format(report.nil_counts.no_id))
    lines.append("obsolete\t{}".format(report.nil_counts.obsolete))
    for branch, (count, value) in report.branches.items():
        lines.append("branch:{} (n={})\t{:.4f}".format(branch, count, value))
    lines.append("matching\t{}".format(report.matching))
    return "\n".join(lines) + "\n"
