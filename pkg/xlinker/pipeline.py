"""
The linking pipeline: abbreviation expansion, string and XMR candidate
generation, threshold routing and collective disambiguation.
"""
import json
import logging
from collections import OrderedDict, defaultdict
from typing import (
    Dict,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    TextIO,
    Tuple,
    Union,
)

from joblib import Parallel, delayed

from .abbrev import AbbreviationMap, detect_abbreviations, expand_mention
from .corpus import Document, Mention, iter_pubtator
from .exceptions import ParseError, XLinkerError
from .kos import KnowledgeBase
from .ppr import (
    DEFAULT_MAX_ITERS,
    DEFAULT_TELEPORT,
    DEFAULT_TOL,
    build_graph,
    coherence_scores,
    select,
)
from .strmatch import NameIndex, ScoredCandidate, build_name_index, match

logger = logging.getLogger(__name__)

# Ablation modes, from the bare XMR model to the full pipeline.
MODE_XMR = "xmr"
MODE_XMR_ABBREV = "xmr+abbrev"
MODE_XMR_ABBREV_SM = "xmr+abbrev+sm"
MODE_FULL = "x-linker"
MODES = OrderedDict(
    [
        # (abbreviations, string matcher, PPR)
        (MODE_XMR, (False, False, False)),
        (MODE_XMR_ABBREV, (True, False, False)),
        (MODE_XMR_ABBREV_SM, (True, True, False)),
        (MODE_FULL, (True, True, True)),
    ]
)

BRANCH_EXACT = "exact"
BRANCH_XMR = "xmr"
BRANCH_LOW_SCORE = "low-score"
BRANCH_NIL = "nil"
BRANCHES = (BRANCH_EXACT, BRANCH_XMR, BRANCH_LOW_SCORE, BRANCH_NIL)

FIRED_STRING_EXACT = "string-exact"
FIRED_XMR_EXACT = "xmr-exact"
FIRED_XMR_THRESHOLD = "xmr-threshold"
FIRED_LOW_SCORE = "low-score"

NIL_PREDICTION = "-"


class PipelineConfig(
    NamedTuple(
        "PipelineConfig",
        [
            ("threshold", float),
            ("beam", int),
            ("top_k", int),
            ("string_top_n", int),
            ("teleport", float),
            ("tol", float),
            ("max_iters", int),
            ("use_abbreviations", bool),
            ("use_string_matcher", bool),
            ("use_ppr", bool),
        ],
    )
):
    """
    Linking parameters.

    Arguments:
        threshold: XMR scores at or above it skip the string matcher's
            fallback candidate.
        beam: Tree nodes kept per level during XMR prediction.
        top_k: Candidates requested from XMR and kept in the ranked output.
        string_top_n: Candidates requested from the string matcher.
        teleport: PageRank restart probability.
        tol: PageRank L1 convergence tolerance.
        max_iters: PageRank iteration limit.
        use_abbreviations: Expand short forms before matching.
        use_string_matcher: Generate string-match candidates.
        use_ppr: Disambiguate with PageRank coherence instead of incoming
            scores.
    """

    def __new__(
        cls,
        threshold=0.1,
        beam=10,
        top_k=5,
        string_top_n=1,
        teleport=DEFAULT_TELEPORT,
        tol=DEFAULT_TOL,
        max_iters=DEFAULT_MAX_ITERS,
        use_abbreviations=True,
        use_string_matcher=True,
        use_ppr=True,
    ):
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if beam < 1 or top_k < 1 or string_top_n < 1 or max_iters < 1:
            raise ValueError("beam, top_k, string_top_n and max_iters must be positive")
        if not 0.0 < teleport < 1.0:
            raise ValueError("teleport must lie in (0, 1)")
        return super().__new__(
            cls,
            float(threshold),
            int(beam),
            int(top_k),
            int(string_top_n),
            float(teleport),
            float(tol),
            int(max_iters),
            bool(use_abbreviations),
            bool(use_string_matcher),
            bool(use_ppr),
        )

    @classmethod
    def for_mode(cls, mode: str = MODE_FULL, **kwargs) -> "PipelineConfig":
        """Config for one of `MODES`; other fields from `kwargs`."""
        try:
            abbreviations, string_matcher, ppr = MODES[mode]
        except KeyError:
            raise ValueError("unknown mode {!r}".format(mode)) from None
        return cls(
            use_abbreviations=abbreviations,
            use_string_matcher=string_matcher,
            use_ppr=ppr,
            **kwargs
        )

    @classmethod
    def from_config(cls, config) -> "PipelineConfig":
        """
        Reads upper-case attributes (`THRESHOLD`, `BEAM`, ...) of `config`.
        A `MODE` attribute sets the three `USE_*` switches and wins over them.
        """
        defaults = cls()
        values = {
            field: getattr(config, field.upper(), getattr(defaults, field))
            for field in cls._fields
        }
        mode = getattr(config, "MODE", None)
        if mode is None:
            return cls(**values)
        for field in ("use_abbreviations", "use_string_matcher", "use_ppr"):
            values.pop(field)
        return cls.for_mode(mode, **values)


class DecisionTrace(
    NamedTuple(
        "DecisionTrace",
        [
            ("branch", str),
            ("fired", Tuple[str, ...]),
            ("expanded_text", str),
            ("coherence", float),
        ],
    )
):
    """
    How a mention was resolved.

    Attributes:
        branch: `exact` when the selected candidate entered the list with a
            perfect score, `xmr` when it came through the threshold, else
            `low-score`; `nil` when there were no candidates.
        fired: Every routing rule that added candidates, in order.
        expanded_text: The mention after abbreviation expansion.
        coherence: Coherence of the selected candidate (0 without PPR).
    """


class LinkedMention(
    NamedTuple(
        "LinkedMention",
        [
            ("mention", Mention),
            ("prediction", Tuple[Tuple[str, float], ...]),
            ("decision_trace", DecisionTrace),
        ],
    )
):
    @property
    def predicted_id(self) -> Optional[str]:
        return self.prediction[0][0] if self.prediction else None

    @property
    def ranked_ids(self) -> List[str]:
        return [identifier for identifier, _ in self.prediction]

    @property
    def nil_candidate(self) -> bool:
        return not self.prediction


class CorpusLinks(
    NamedTuple(
        "CorpusLinks",
        [("linked", List[LinkedMention]), ("errors", List[Tuple[str, str]])],
    )
):
    """Linked mentions in corpus order and `(doc_id, message)` failures."""


# --------------------------------------------------------------- #
# Candidate routing
# --------------------------------------------------------------- #


def _dedupe(candidates: Iterable[ScoredCandidate]) -> List[ScoredCandidate]:
    best = OrderedDict()
    for candidate in candidates:
        current = best.get(candidate.concept_index)
        if current is None or candidate.score > current.score:
            best[candidate.concept_index] = candidate
    return list(best.values())


def candidate_list(
    string_matches: Sequence[ScoredCandidate],
    xmr_matches: Sequence[ScoredCandidate],
    cfg: PipelineConfig,
) -> Tuple[List[ScoredCandidate], Tuple[str, ...]]:
    """
    Builds a mention's candidate list from the two generators' top results.

    A perfect string match is always kept. A perfect XMR match, or one at or
    above `cfg.threshold`, is kept alone; below the threshold both tops are
    kept. Repeated concepts keep their highest score.

    Returns:
        The candidates and the names of the rules that fired.
    """
    string_top = string_matches[0] if string_matches else None
    xmr_top = xmr_matches[0] if xmr_matches else None
    candidates = []
    fired = []
    if string_top is not None and string_top.score == 1.0:
        candidates.append(string_top)
        fired.append(FIRED_STRING_EXACT)
    if xmr_top is not None and xmr_top.score == 1.0:
        candidates.append(xmr_top)
        fired.append(FIRED_XMR_EXACT)
    elif xmr_top is not None and xmr_top.score >= cfg.threshold:
        candidates.append(xmr_top)
        fired.append(FIRED_XMR_THRESHOLD)
    else:
        added = [c for c in (xmr_top, string_top) if c is not None]
        if added:
            candidates.extend(added)
            fired.append(FIRED_LOW_SCORE)
    return _dedupe(candidates), tuple(fired)


def _branch(selected: Optional[ScoredCandidate], fired: Sequence[str]) -> str:
    if selected is None:
        return BRANCH_NIL
    if selected.score == 1.0 and (
        FIRED_STRING_EXACT in fired or FIRED_XMR_EXACT in fired
    ):
        return BRANCH_EXACT
    if FIRED_XMR_THRESHOLD in fired:
        return BRANCH_XMR
    return BRANCH_LOW_SCORE


def _ranked(selected, pools, kb, top_k) -> Tuple[Tuple[str, float], ...]:
    """The selected candidate, then the rest of every pool by score."""
    if selected is None:
        return ()
    rest = _dedupe(c for pool in pools for c in pool)
    rest = [c for c in rest if c.concept_index != selected.concept_index]
    rest.sort(key=lambda c: (-c.score, c.concept_index))
    ranked = [selected] + rest
    return tuple((kb.id_of(c.concept_index), c.score) for c in ranked[:top_k])


# --------------------------------------------------------------- #
# Linking
# --------------------------------------------------------------- #


def link_document(
    doc: Document,
    model,
    kb: KnowledgeBase,
    index: NameIndex,
    cfg: Optional[PipelineConfig] = None,
    mentions: Optional[Sequence[Mention]] = None,
) -> List[LinkedMention]:
    """
    Links the mentions of one document.

    Arguments:
        doc: The document; its text scopes abbreviation detection.
        model: Anything with `predict(text, beam, top_k)` returning ranked
            `ScoredCandidate` lists, normally an `XmrModel`.
        kb: The KOS the model and index were built from.
        index: Name index over `kb`.
        cfg: Pipeline parameters.
        mentions: The mentions to link together; all of `doc`'s by default.

    Returns:
        One `LinkedMention` per mention, in order.
    """
    cfg = cfg or PipelineConfig()
    mentions = doc.mentions if mentions is None else mentions
    abbreviations = (
        detect_abbreviations(doc.text) if cfg.use_abbreviations else AbbreviationMap()
    )

    expanded, pools, candidates, fired = [], [], [], []
    for mention in mentions:
        long_form = expand_mention(mention.text, abbreviations)
        string_matches = (
            match(long_form, index, cfg.string_top_n) if cfg.use_string_matcher else []
        )
        xmr_matches = model.predict(long_form, cfg.beam, cfg.top_k)
        chosen, rules = candidate_list(string_matches, xmr_matches, cfg)
        expanded.append(long_form)
        pools.append((chosen, string_matches, xmr_matches))
        candidates.append(chosen)
        fired.append(rules)

    coherence = {}
    if cfg.use_ppr and any(candidates):
        graph = build_graph(candidates, kb)
        scores = coherence_scores(graph, kb, cfg.teleport, cfg.tol, cfg.max_iters)
        selected = select(graph, scores)
        for position, node in enumerate(graph.nodes):
            if selected.get(node.mention) is node.candidate:
                coherence[node.mention] = scores[position]
    else:
        selected = {
            position: max(options, key=lambda c: (c.score, -c.concept_index))
            for position, options in enumerate(candidates)
            if options
        }

    linked = []
    for position, mention in enumerate(mentions):
        choice = selected.get(position)
        if choice is None:
            logger.debug("No candidates for %r in %s", mention.text, doc.doc_id)
        trace = DecisionTrace(
            _branch(choice, fired[position]),
            fired[position],
            expanded[position],
            coherence.get(position, 0.0),
        )
        linked.append(
            LinkedMention(mention, _ranked(choice, pools[position], kb, cfg.top_k), trace)
        )
    return linked


class Linker:
    """
    Model, KOS, name index and configuration for one entity type.

    Arguments:
        model: The trained XMR model (or any object with its `predict`).
        kb: The KOS.
        index: Name index; built from `kb` when omitted.
        config: Pipeline parameters.
        entity_type: Mentions of other types are ignored; `None` links all.
    """

    def __init__(
        self,
        model,
        kb: KnowledgeBase,
        index: Optional[NameIndex] = None,
        config: Optional[PipelineConfig] = None,
        entity_type: Optional[str] = None,
    ):
        self.model = model
        self.kb = kb
        self.index = index if index is not None else build_name_index(kb)
        self.config = config or PipelineConfig()
        self.entity_type = entity_type

    def accepts(self, mention: Mention) -> bool:
        return self.entity_type is None or mention.entity_type == self.entity_type

    def link_document(
        self, doc: Document, mentions: Optional[Sequence[Mention]] = None
    ) -> List[LinkedMention]:
        if mentions is None:
            mentions = [m for m in doc.mentions if self.accepts(m)]
        return link_document(doc, self.model, self.kb, self.index, self.config, mentions)


def link_document_by_type(
    doc: Document, linkers: Mapping[str, Linker]
) -> List[LinkedMention]:
    """
    Links each entity type's mentions with its own linker, one graph per
    type. Mentions of types without a linker are skipped.
    """
    positions = defaultdict(list)
    for position, mention in enumerate(doc.mentions):
        positions[mention.entity_type].append(position)

    results = {}
    for entity_type, members in positions.items():
        linker = linkers.get(entity_type)
        if linker is None:
            logger.debug(
                "No linker for %d %s mentions in %s", len(members), entity_type, doc.doc_id
            )
            continue
        linked = linker.link_document(doc, [doc.mentions[p] for p in members])
        results.update(zip(members, linked))
    return [results[position] for position in sorted(results)]


def _link_one(doc, linkers):
    try:
        if isinstance(linkers, Linker):
            return linkers.link_document(doc), None
        return link_document_by_type(doc, linkers), None
    except (XLinkerError, ValueError) as error:
        logger.warning("Failed to link document %s: %s", doc.doc_id, error)
        return [], (doc.doc_id, str(error))


def link_corpus(
    docs: Sequence[Document],
    linkers: Union[Linker, Mapping[str, Linker]],
    n_jobs: int = 1,
    errors: Optional[List[ParseError]] = None,
) -> CorpusLinks:
    """
    Links every document independently, keeping corpus order.

    Arguments:
        docs: Parsed documents.
        linkers: One linker, or entity type → linker.
        n_jobs: joblib worker threads over documents.
        errors: Parse errors of documents already skipped while reading;
            they are reported alongside linking failures.
    """
    outcomes = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_link_one)(doc, linkers) for doc in docs
    )
    linked = []
    failures = [("-", str(error)) for error in (errors or [])]
    for mentions, failure in outcomes:
        linked.extend(mentions)
        if failure is not None:
            failures.append(failure)
    logger.info(
        "Linked %d mentions in %d documents (%d failures)",
        len(linked),
        len(docs),
        len(failures),
    )
    return CorpusLinks(linked, failures)


# --------------------------------------------------------------- #
# Output
# --------------------------------------------------------------- #


def write_predictions(
    documents: Sequence[Document], linked: Sequence[LinkedMention], stream: TextIO
) -> None:
    """
    Writes PubTator documents whose annotation lines carry two more columns:
    the predicted id (`-` when none) and the ranked ids joined by `|`.
    """
    by_doc = defaultdict(list)
    for item in linked:
        by_doc[item.mention.doc_id].append(item)
    for document in documents:
        stream.write("{}|t|{}\n".format(document.doc_id, document.title))
        stream.write("{}|a|{}\n".format(document.doc_id, document.abstract))
        for item in by_doc.get(document.doc_id, ()):
            mention = item.mention
            start, end = mention.span
            stream.write(
                "\t".join(
                    [
                        mention.doc_id,
                        str(start),
                        str(end),
                        mention.text,
                        mention.entity_type,
                        mention.raw_id,
                        item.predicted_id or NIL_PREDICTION,
                        "|".join(item.ranked_ids),
                    ]
                )
                + "\n"
            )
        stream.write("\n")


def read_predictions(
    lines: Iterable[str],
) -> Dict[Tuple[str, Tuple[int, int]], List[str]]:
    """
    Reads `write_predictions` output into `(doc_id, span)` → ranked ids.
    """
    predictions = {}
    for document in iter_pubtator(lines):
        for mention in document.mentions:
            if len(mention.extra) < 2:
                raise ParseError(
                    "annotation {}:{} has no prediction columns".format(
                        mention.doc_id, mention.span
                    )
                )
            ranked = [i for i in mention.extra[1].split("|") if i]
            if not ranked and mention.extra[0] != NIL_PREDICTION:
                ranked = [mention.extra[0]]
            predictions[(mention.doc_id, mention.span)] = ranked
    return predictions


def write_report(linked: Sequence[LinkedMention], stream: TextIO) -> None:
    """One JSON record per linked mention."""
    for item in linked:
        mention = item.mention
        record = {
            "doc_id": mention.doc_id,
            "span": list(mention.span) if mention.span else None,
            "text": mention.text,
            "entity_type": mention.entity_type,
            "expanded_text": item.decision_trace.expanded_text,
            "branch": item.decision_trace.branch,
            "fired": list(item.decision_trace.fired),
            "coherence": item.decision_trace.coherence,
            "candidates": [
                {"id": identifier, "score": score} for identifier, score in item.prediction
            ],
        }
        stream.write(json.dumps(record, sort_keys=True) + "\n")
