import io
import json

import pytest

from conftest import CONGENITAL, VASCULITIS
from xlinker.config import Config
from xlinker.corpus import parse_pubtator
from xlinker.exceptions import ParseError
from xlinker.pipeline import (
    BRANCH_EXACT,
    BRANCH_LOW_SCORE,
    BRANCH_NIL,
    BRANCH_XMR,
    FIRED_LOW_SCORE,
    FIRED_STRING_EXACT,
    FIRED_XMR_EXACT,
    FIRED_XMR_THRESHOLD,
    MODE_FULL,
    MODE_XMR,
    MODE_XMR_ABBREV_SM,
    Linker,
    PipelineConfig,
    candidate_list,
    link_corpus,
    link_document,
    link_document_by_type,
    read_predictions,
    write_predictions,
    write_report,
)
from xlinker.strmatch import EXACT_LOOKUP, STRING_MATCH, XMR, ScoredCandidate, build_name_index

# "vasculitic" at 0-10, "vasculitis" at 22-32.
MISSPELLING_DOC = [
    "7|t|vasculitic lesions in vasculitis",
    "7|a|",
    "7\t0\t10\tvasculitic\tDisease\tD014657",
    "7\t22\t32\tvasculitis\tDisease\tD014657",
    "",
]

IRIS_DOC = [
    "8|t|Immune reconstitution inflammatory syndrome (IRIS).",
    "8|a|",
    "8\t45\t49\tIRIS\tDisease\tD054019",
    "",
]


def document(lines):
    return parse_pubtator(lines)[0]


def linked_ids(linked):
    return [item.predicted_id for item in linked]


def sm(index, score):
    return ScoredCandidate(index, score, STRING_MATCH)


def xmr(index, score):
    return ScoredCandidate(index, score, EXACT_LOOKUP if score == 1.0 else XMR)


# --------------------------------------------------------------- #
# Candidate routing
# --------------------------------------------------------------- #


@pytest.mark.parametrize(
    "string_top, xmr_top, expected, fired",
    [
        ((1, 1.0), (1, 1.0), [1], (FIRED_STRING_EXACT, FIRED_XMR_EXACT)),
        ((1, 1.0), (2, 1.0), [1, 2], (FIRED_STRING_EXACT, FIRED_XMR_EXACT)),
        ((1, 1.0), (2, 0.4), [1, 2], (FIRED_STRING_EXACT, FIRED_XMR_THRESHOLD)),
        ((1, 0.8), (2, 0.4), [2], (FIRED_XMR_THRESHOLD,)),
        ((1, 0.8), (2, 0.1), [2], (FIRED_XMR_THRESHOLD,)),
        ((1, 0.8), (2, 0.05), [2, 1], (FIRED_LOW_SCORE,)),
        ((1, 0.8), (1, 0.05), [1], (FIRED_LOW_SCORE,)),
        ((1, 0.8), None, [1], (FIRED_LOW_SCORE,)),
        (None, (2, 0.05), [2], (FIRED_LOW_SCORE,)),
        (None, None, [], ()),
    ],
)
def test_candidate_list_routing(string_top, xmr_top, expected, fired):
    string_matches = [sm(*string_top)] if string_top else []
    xmr_matches = [xmr(*xmr_top)] if xmr_top else []

    candidates, rules = candidate_list(string_matches, xmr_matches, PipelineConfig())

    assert [c.concept_index for c in candidates] == expected
    assert rules == fired


def test_low_score_branch_keeps_the_best_score_per_concept():
    candidates, _ = candidate_list([sm(1, 0.8)], [xmr(1, 0.05)], PipelineConfig())

    assert candidates[0].score == 0.8
    assert candidates[0].source == STRING_MATCH


def test_raising_the_threshold_only_adds_the_string_candidate():
    string_matches = [sm(1, 0.7)]
    for xmr_score in (0.0, 0.05, 0.2, 0.5, 0.99, 1.0):
        xmr_matches = [xmr(2, xmr_score)]
        previous = None
        for threshold in (0.0, 0.1, 0.3, 0.6, 1.0):
            candidates, _ = candidate_list(
                string_matches, xmr_matches, PipelineConfig(threshold=threshold)
            )
            has_string = any(c.concept_index == 1 for c in candidates)
            if previous:
                assert has_string
            previous = has_string


# --------------------------------------------------------------- #
# Linking
# --------------------------------------------------------------- #


def test_misspelling_is_resolved_by_its_neighbour(medic_kb, fig2_model):
    doc = document(MISSPELLING_DOC)

    linked = link_document(doc, fig2_model, medic_kb, build_name_index(medic_kb))

    assert linked_ids(linked) == [VASCULITIS, VASCULITIS]
    first, second = linked
    assert first.decision_trace.branch == BRANCH_LOW_SCORE
    assert first.decision_trace.fired == (FIRED_LOW_SCORE,)
    assert first.decision_trace.coherence > 0.0
    assert first.prediction == ((VASCULITIS, 0.9), (CONGENITAL, 0.0964))
    assert second.decision_trace.branch == BRANCH_EXACT
    assert second.prediction[0] == (VASCULITIS, 1.0)


def test_xmr_alone_keeps_its_wrong_guess(medic_kb, fig2_model):
    config = PipelineConfig.for_mode(MODE_XMR)

    linked = link_document(
        document(MISSPELLING_DOC), fig2_model, medic_kb, build_name_index(medic_kb), config
    )

    assert linked_ids(linked) == [CONGENITAL, VASCULITIS]


def test_without_ppr_the_higher_incoming_score_wins(medic_kb, fig2_model):
    config = PipelineConfig.for_mode(MODE_XMR_ABBREV_SM)

    linked = link_document(
        document(MISSPELLING_DOC), fig2_model, medic_kb, build_name_index(medic_kb), config
    )

    assert linked_ids(linked) == [VASCULITIS, VASCULITIS]
    assert all(item.decision_trace.coherence == 0.0 for item in linked)


def test_threshold_branch(medic_kb, scripted_model):
    model = scripted_model(medic_kb, {"vasculitis": [(VASCULITIS, 0.5, XMR)]})
    doc = document(["1|t|vasculitis", "1|a|", "1\t0\t10\tvasculitis\tDisease\tD014657"])

    [item] = link_document(
        doc, model, medic_kb, build_name_index(medic_kb), PipelineConfig.for_mode(MODE_XMR)
    )

    assert item.decision_trace.branch == BRANCH_XMR
    assert item.decision_trace.fired == (FIRED_XMR_THRESHOLD,)
    assert item.prediction == ((VASCULITIS, 0.5),)


def test_mention_without_candidates_is_nil(medic_kb, scripted_model):
    doc = document(["1|t|zzz", "1|a|", "1\t0\t3\tzzz\tDisease\tD000000"])
    config = PipelineConfig.for_mode(MODE_XMR)

    [item] = link_document(doc, scripted_model(medic_kb), medic_kb, build_name_index(medic_kb), config)

    assert item.nil_candidate
    assert item.predicted_id is None
    assert item.decision_trace.branch == BRANCH_NIL
    assert item.decision_trace.fired == ()


def test_nil_mention_does_not_block_the_others(medic_kb, scripted_model):
    model = scripted_model(
        medic_kb, {"vasculitis": [(VASCULITIS, 1.0, EXACT_LOOKUP)], "zzz": []}
    )
    doc = document(
        [
            "1|t|zzz and vasculitis",
            "1|a|",
            "1\t0\t3\tzzz\tDisease\t-",
            "1\t8\t18\tvasculitis\tDisease\tD014657",
        ]
    )

    linked = link_document(
        doc, model, medic_kb, build_name_index(medic_kb), PipelineConfig(use_string_matcher=False)
    )

    assert linked_ids(linked) == [None, VASCULITIS]


def test_abbreviation_is_expanded_before_matching(medic_kb, scripted_model):
    linker = Linker(scripted_model(medic_kb), medic_kb)

    [item] = linker.link_document(document(IRIS_DOC))

    assert item.decision_trace.expanded_text == "Immune reconstitution inflammatory syndrome"
    assert item.predicted_id == "D054019"
    assert item.decision_trace.branch == BRANCH_EXACT
    assert item.prediction[0] == ("D054019", 1.0)


def test_exact_branch_always_carries_a_perfect_score(medic_kb, fig2_model):
    linked = link_document(document(MISSPELLING_DOC), fig2_model, medic_kb, build_name_index(medic_kb))

    for item in linked:
        if item.decision_trace.branch == BRANCH_EXACT:
            assert item.prediction[0][1] == 1.0


def test_ranked_output_is_truncated(medic_kb, scripted_model):
    model = scripted_model(
        medic_kb,
        {
            "angiopathy x": [
                ("D014652", 0.6, XMR),
                (VASCULITIS, 0.3, XMR),
                ("D056647", 0.2, XMR),
            ]
        },
    )
    doc = document(["1|t|angiopathy x", "1|a|", "1\t0\t12\tangiopathy x\tDisease\tD014652"])

    [item] = link_document(
        doc, model, medic_kb, build_name_index(medic_kb), PipelineConfig(top_k=2, use_ppr=False)
    )

    assert item.ranked_ids == ["D014652", VASCULITIS]


# --------------------------------------------------------------- #
# Corpus linking
# --------------------------------------------------------------- #


def test_empty_corpus(medic_kb, fig2_model):
    result = link_corpus([], Linker(fig2_model, medic_kb))

    assert result.linked == []
    assert result.errors == []


def test_identical_documents_link_identically(medic_kb, fig2_model):
    linker = Linker(fig2_model, medic_kb)
    docs = parse_pubtator(MISSPELLING_DOC + [line.replace("7", "9", 1) for line in MISSPELLING_DOC])

    result = link_corpus(docs, linker, n_jobs=2)

    first = [(m.prediction, m.decision_trace) for m in result.linked[:2]]
    second = [(m.prediction, m.decision_trace) for m in result.linked[2:]]
    assert first == second
    assert [m.mention.doc_id for m in result.linked] == ["7", "7", "9", "9"]


def test_failing_document_is_isolated(medic_kb, scripted_model):
    model = scripted_model(
        medic_kb, {"vasculitis": [(VASCULITIS, 1.0, EXACT_LOOKUP)]}, failing={"broken"}
    )
    docs = parse_pubtator(
        [
            "1|t|broken",
            "1|a|",
            "1\t0\t6\tbroken\tDisease\tD000000",
            "",
            "2|t|vasculitis",
            "2|a|",
            "2\t0\t10\tvasculitis\tDisease\tD014657",
        ]
    )

    result = link_corpus(docs, Linker(model, medic_kb))

    assert linked_ids(result.linked) == [VASCULITIS]
    assert [doc_id for doc_id, _ in result.errors] == ["1"]
    assert "broken" in result.errors[0][1]


def test_document_isolation(medic_kb, fig2_model):
    linker = Linker(fig2_model, medic_kb)
    alone = link_corpus(parse_pubtator(MISSPELLING_DOC), linker).linked
    other = ["3|t|vasculitis", "3|a|", "3\t0\t10\tvasculitis\tDisease\tD014657", ""]

    together = link_corpus(parse_pubtator(other + MISSPELLING_DOC), linker).linked

    assert [m.prediction for m in together[1:]] == [m.prediction for m in alone]


def test_parse_errors_are_reported(medic_kb, fig2_model):
    errors = []
    docs = parse_pubtator(
        MISSPELLING_DOC + ["4|t|short", "4|a|", "4\t0\t99\tshort\tDisease\tD1"], errors
    )

    result = link_corpus(docs, Linker(fig2_model, medic_kb), errors=errors)

    assert len(result.linked) == 2
    assert result.errors[0][0] == "-"
    assert "line 8" in result.errors[0][1]


def test_each_entity_type_gets_its_own_linker(medic_kb, tiny_kb, fig2_model, scripted_model):
    chemicals = Linker(scripted_model(tiny_kb, {"flu": [("D000002", 1.0, EXACT_LOOKUP)]}), tiny_kb)
    diseases = Linker(fig2_model, medic_kb)
    doc = document(
        [
            "5|t|vasculitis flu aspirin",
            "5|a|",
            "5\t0\t10\tvasculitis\tDisease\tD014657",
            "5\t11\t14\tflu\tChemical\tD000002",
            "5\t15\t22\taspirin\tDrug\tD000003",
        ]
    )

    linked = link_document_by_type(doc, {"Disease": diseases, "Chemical": chemicals})

    assert [(m.mention.text, m.predicted_id) for m in linked] == [
        ("vasculitis", VASCULITIS),
        ("flu", "D000002"),
    ]


def test_linker_filters_by_entity_type(medic_kb, fig2_model):
    doc = document(MISSPELLING_DOC[:4] + ["7\t11\t18\tlesions\tChemical\t-"])

    linked = Linker(fig2_model, medic_kb, entity_type="Disease").link_document(doc)

    assert [m.mention.text for m in linked] == ["vasculitic", "vasculitis"]


# --------------------------------------------------------------- #
# Output
# --------------------------------------------------------------- #


def test_predictions_round_trip(medic_kb, fig2_model, scripted_model):
    docs = parse_pubtator(MISSPELLING_DOC + ["1|t|zzz", "1|a|", "1\t0\t3\tzzz\tDisease\t-"])
    config = PipelineConfig(use_string_matcher=False)
    linked = link_corpus(docs, Linker(fig2_model, medic_kb, config=config)).linked
    stream = io.StringIO()

    write_predictions(docs, linked, stream)

    lines = stream.getvalue().splitlines()
    assert lines[2] == "7\t0\t10\tvasculitic\tDisease\tD014657\tD009358\tD009358"
    assert lines[-2] == "1\t0\t3\tzzz\tDisease\t-\t-\t"
    predictions = read_predictions(io.StringIO(stream.getvalue()))
    assert predictions[("7", (22, 32))] == [VASCULITIS]
    assert predictions[("1", (0, 3))] == []


def test_predictions_without_prediction_columns():
    with pytest.raises(ParseError):
        read_predictions(MISSPELLING_DOC)


def test_report_records(medic_kb, fig2_model):
    docs = parse_pubtator(MISSPELLING_DOC)
    linked = link_corpus(docs, Linker(fig2_model, medic_kb)).linked
    stream = io.StringIO()

    write_report(linked, stream)

    records = [json.loads(line) for line in stream.getvalue().splitlines()]
    assert [r["branch"] for r in records] == [BRANCH_LOW_SCORE, BRANCH_EXACT]
    assert records[0]["span"] == [0, 10]
    assert records[0]["candidates"][0] == {"id": VASCULITIS, "score": 0.9}
    assert records[1]["fired"] == [FIRED_STRING_EXACT, FIRED_XMR_EXACT]


# --------------------------------------------------------------- #
# Configuration
# --------------------------------------------------------------- #


@pytest.mark.parametrize(
    "kwargs",
    [{"threshold": -0.1}, {"threshold": 1.5}, {"beam": 0}, {"top_k": 0}, {"teleport": 1.0}],
)
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        PipelineConfig(**kwargs)


def test_unknown_mode():
    with pytest.raises(ValueError):
        PipelineConfig.for_mode("bm25")


def test_full_mode_is_the_default():
    assert PipelineConfig.for_mode(MODE_FULL) == PipelineConfig()


def test_config_from_attributes():
    config = Config()
    config["threshold"] = 0.3
    config["use-ppr"] = False

    pipeline = PipelineConfig.from_config(config)

    assert pipeline.threshold == 0.3
    assert pipeline.use_ppr is False
    assert pipeline.beam == PipelineConfig().beam


@pytest.mark.parametrize(
    "mode, switches",
    [
        (MODE_XMR, (False, False, False)),
        (MODE_XMR_ABBREV_SM, (True, True, False)),
        (MODE_FULL, (True, True, True)),
    ],
)
def test_config_mode_sets_the_switches(mode, switches):
    pipeline = PipelineConfig.from_config(Config(mode=mode, use_ppr=True, beam=3))

    assert (pipeline.use_abbreviations, pipeline.use_string_matcher, pipeline.use_ppr) == switches
    assert pipeline.beam == 3


def test_config_with_unknown_mode():
    with pytest.raises(ValueError):
        PipelineConfig.from_config(Config(mode="bm25"))
