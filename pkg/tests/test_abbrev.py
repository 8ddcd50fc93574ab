import pytest

from xlinker.abbrev import AbbreviationMap, detect_abbreviations, expand_mention

IRIS_TEXT = (
    "Patients developed immune reconstitution inflammatory syndrome (IRIS) "
    "after therapy. IRIS was treated with steroids."
)
IRIS_LONG = "immune reconstitution inflammatory syndrome"


def test_detects_iris():
    abbreviations = detect_abbreviations(IRIS_TEXT)

    assert dict(abbreviations) == {"IRIS": IRIS_LONG}


@pytest.mark.parametrize(
    "text",
    [
        "hello (world)",
        "no parentheses at all",
        "dose (5 mg) given",
        "see figure (A1)",
        "(empty window)",
    ],
)
def test_no_abbreviation(text):
    assert len(detect_abbreviations(text)) == 0


@pytest.mark.parametrize(
    "text, short_form, long_form",
    [
        ("heart failure (HF) is common", "HF", "heart failure"),
        ("acute lymphoblastic leukemia (ALL; n = 20)", "ALL", "acute lymphoblastic leukemia"),
        ("in the tumor necrosis factor (TNF) pathway", "TNF", "tumor necrosis factor"),
        ("patients with Parkinson's disease (PD)", "PD", "Parkinson's disease"),
    ],
)
def test_long_form_alignment(text, short_form, long_form):
    assert detect_abbreviations(text)[short_form] == long_form


def test_first_definition_wins():
    text = "heart failure (HF) and then hepatic fibrosis (HF)"

    assert detect_abbreviations(text)["HF"] == "heart failure"


@pytest.mark.parametrize(
    "mention, expected",
    [
        ("IRIS", IRIS_LONG),
        ("iris", IRIS_LONG),
        ("vasculitis", "vasculitis"),
        ("AL", "AL"),
        ("IRIS flare", "IRIS flare"),
    ],
)
def test_expand_mention(mention, expected):
    assert expand_mention(mention, detect_abbreviations(IRIS_TEXT)) == expected


def test_expansion_is_idempotent():
    abbreviations = detect_abbreviations(IRIS_TEXT)
    for mention in ("IRIS", "vasculitis", IRIS_LONG):
        once = expand_mention(mention, abbreviations)
        assert expand_mention(once, abbreviations) == once


def test_case_sensitive_match_preferred():
    abbreviations = AbbreviationMap({"Ca": "carcinoma", "CA": "cancer antigen"})

    assert abbreviations.expand("CA") == "cancer antigen"
    assert abbreviations.expand("Ca") == "carcinoma"
    assert abbreviations.expand("ca") == "carcinoma"


@pytest.mark.parametrize("pairs", [{"": "long"}, {"SAME": "SAME"}])
def test_invalid_pairs(pairs):
    with pytest.raises(ValueError):
        AbbreviationMap(pairs)


def test_maps_are_per_document():
    first = detect_abbreviations(IRIS_TEXT)
    second = detect_abbreviations("something else (SE) entirely")

    assert "IRIS" not in second
    assert "SE" not in first
