import gzip
from collections import Counter

import pytest

from xlinker.corpus import (
    PROVENANCE_KOS,
    PROVENANCE_KOS_PUBTATOR,
    NilCounts,
    TrainingInstance,
    TrainingSet,
    filter_nil_mentions,
    generate_training_set,
    iter_annotations,
    kos_training_instances,
    load_eval_dataset,
    merge_training_sets,
    open_text,
    parse_bioconcepts,
    parse_pubtator,
    read_exclusions,
    read_training_set,
    write_training_set,
)
from xlinker.exceptions import ParseError
from xlinker.kos import Concept, KnowledgeBase

SINGLE = [
    "100|t|Vasculitis in children",
    "100|a|A short abstract.",
    "100\t0\t10\tVasculitis\tDisease\tMESH:D014657",
    "",
]

# Document 1 is excluded. "flu" occurs 4 times (3 case variants in doc 2),
# "cold" twice (once through an alternate id), one id is obsolete and
# "grippe"/"the flu" tie at one occurrence each.
TRAINING_CORPUS = """1|t|Flu and grippe season
1|a|
1\t0\t3\tFlu\tDisease\tD000001
1\t8\t14\tgrippe\tDisease\tD000001

2|t|Flu flu FLU influenza grippe
2|a|
2\t0\t3\tFlu\tDisease\tD000001
2\t4\t7\tflu\tDisease\tD000001
2\t8\t11\tFLU\tDisease\tMESH:D000001
2\t12\t21\tinfluenza\tDisease\tD000001
2\t22\t28\tgrippe\tDisease\tD000001

3|t|flu influenza the flu cold Cold obsolete thing
3|a|
3\t0\t3\tflu\tDisease\tD000001
3\t4\t13\tinfluenza\tDisease\tD000001
3\t14\t21\tthe flu\tDisease\tD000001
3\t22\t26\tcold\tDisease\tD000002
3\t27\t31\tCold\tDisease\tC000002
3\t32\t46\tobsolete thing\tDisease\tD999999
3\t0\t3\tflu\tChemical\tD000001
"""


@pytest.fixture()
def flu_kb():
    return KnowledgeBase(
        [
            Concept("D000001", "Influenza", ["flu"]),
            Concept("D000002", "Common cold", ["cold"], (), ["C000002"]),
        ]
    )


def test_parse_single_document():
    documents = parse_pubtator(SINGLE)

    assert len(documents) == 1
    document = documents[0]
    assert document.doc_id == "100"
    assert document.text == "Vasculitis in children A short abstract."
    mention = document.mentions[0]
    assert mention.span == (0, 10)
    assert mention.text == "Vasculitis"
    assert mention.gold_ids == ("D014657",)
    assert mention.raw_id == "MESH:D014657"


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("MESH:D014657", ("D014657",)),
        ("D020300|D020521", ("D020300", "D020521")),
        ("MESH:D020300+MESH:D020521", ("D020300", "D020521")),
        ("-1", ("-1",)),
        ("-", ("-",)),
        ("OMIM:601518", ("601518",)),
    ],
)
def test_identifier_column(raw, expected):
    lines = SINGLE[:2] + ["100\t0\t10\tVasculitis\tDisease\t{}".format(raw)]

    assert parse_pubtator(lines)[0].mentions[0].gold_ids == expected


@pytest.mark.parametrize(
    "annotation, line_number",
    [
        ("100\t0\t10\tVasculitis", 3),
        ("100\t0\t10\tVasculitis\tDisease\tD1\ta\tb\tc", 3),
        ("200\t0\t10\tVasculitis\tDisease\tD014657", 3),
        ("100\t5\t2\tVasculitis\tDisease\tD014657", 3),
        ("100\t0\t999\tVasculitis\tDisease\tD014657", 3),
        ("100\tx\t10\tVasculitis\tDisease\tD014657", 3),
    ],
)
def test_malformed_annotation(annotation, line_number):
    with pytest.raises(ParseError) as excinfo:
        parse_pubtator(SINGLE[:2] + [annotation])

    assert excinfo.value.line_number == line_number


def test_lenient_parsing_skips_failed_document():
    lines = SINGLE + [
        "200|t|Broken",
        "200|a|",
        "200\t0\t999\tBroken\tDisease\tD1",
        "",
        "300|t|Fine",
        "300|a|",
        "300\t0\t4\tFine\tDisease\tD2",
    ]
    errors = []

    documents = parse_pubtator(lines, errors)

    assert [d.doc_id for d in documents] == ["100", "300"]
    assert len(errors) == 1
    assert errors[0].line_number == 7


def test_relation_lines_are_skipped():
    lines = SINGLE[:3] + ["100\tCID\tD000001\tD014657"]

    assert len(parse_pubtator(lines)[0].mentions) == 1


def test_training_set_generation_hand_computed(flu_kb):
    documents = parse_pubtator(TRAINING_CORPUS.splitlines())
    annotations = list(iter_annotations(documents, "Disease"))

    training_set = generate_training_set(annotations, flu_kb, {"1"}, cap=3)

    assert list(training_set) == [
        TrainingInstance("flu", 0, 4),
        TrainingInstance("influenza", 0, 2),
        TrainingInstance("grippe", 0, 1),
        TrainingInstance("cold", 1, 2),
    ]
    assert training_set.cap == 3


def test_excluded_documents_are_dropped_first(flu_kb):
    annotations = [
        ("1", "flu", "D000001"),
        ("1", "cold", "D000002"),
        ("2", "flu", "D000001"),
        ("2", "influenza", "D000001"),
        ("3", "cold", "D000002"),
    ]

    training_set = generate_training_set(annotations, flu_kb, {"1"})

    assert sum(i.frequency for i in training_set) == 3


def test_case_variants_collapse(flu_kb):
    training_set = generate_training_set(
        [("1", "Flu", "D000001"), ("2", "flu", "D000001")], flu_kb
    )

    assert training_set.pairs() == [("flu", 0)]


def test_cap_keeps_most_frequent_with_lexicographic_ties(flu_kb):
    frequencies = {"alpha": 9, "delta": 5, "beta": 5, "gamma": 3, "eps": 2, "zeta": 1}
    annotations = [
        (str(i), text, "D000001")
        for text, count in frequencies.items()
        for i in range(count)
    ]

    training_set = generate_training_set(annotations, flu_kb, cap=4)

    assert training_set.texts == ["alpha", "beta", "delta", "gamma"]


def test_generation_is_idempotent_and_monotone_in_cap(flu_kb):
    documents = parse_pubtator(TRAINING_CORPUS.splitlines())
    annotations = list(iter_annotations(documents))
    previous = None
    for cap in (1, 2, 3, 4, None):
        training_set = generate_training_set(annotations, flu_kb, cap=cap)
        again = generate_training_set(training_set.as_annotations(flu_kb), flu_kb, cap=cap)
        assert again == training_set
        assert all(text == text.lower() for text in training_set.texts)
        if previous is not None:
            assert not Counter(previous.pairs()) - Counter(training_set.pairs())
        previous = training_set


def test_empty_result_warns(flu_kb, caplog):
    training_set = generate_training_set([("1", "x", "D999999")], flu_kb)

    assert len(training_set) == 0
    assert "empty" in caplog.text


def test_kos_training_instances(tiny_kb):
    training_set = kos_training_instances(tiny_kb)

    assert len(training_set) == 6
    assert training_set.provenance == PROVENANCE_KOS
    assert ("influenza", 1) in training_set.pairs()


def test_kos_instances_keep_shared_synonyms():
    kb = KnowledgeBase([Concept("A", "Common cold", ["cold"]), Concept("B", "Cold", ["chill"])])

    pairs = kos_training_instances(kb).pairs()

    assert ("cold", 0) in pairs and ("cold", 1) in pairs


def test_training_set_rejects_duplicates_and_cap():
    with pytest.raises(ValueError):
        TrainingSet([TrainingInstance("flu", 0), TrainingInstance("flu", 0)])
    with pytest.raises(ValueError):
        TrainingSet([TrainingInstance("a", 0), TrainingInstance("b", 0)], cap=1)


def test_merge_adds_kos_names(flu_kb):
    pubtator = generate_training_set([("1", "grippe", "D000001"), ("2", "flu", "D000001")], flu_kb)

    merged = merge_training_sets(kos_training_instances(flu_kb), pubtator)

    assert merged.provenance == PROVENANCE_KOS_PUBTATOR
    assert merged.pairs() == [
        ("flu", 0),
        ("grippe", 0),
        ("influenza", 0),
        ("cold", 1),
        ("common cold", 1),
    ]


def test_training_file_round_trip(tmp_path, tiny_kb):
    training_set = kos_training_instances(tiny_kb)
    path = str(tmp_path / "train.tsv")

    write_training_set(training_set, path)

    assert open(path).readline() == "0\troot disease\n"
    assert read_training_set(path, tiny_kb) == training_set


@pytest.mark.parametrize("line", ["x\tflu", "0", "9\tflu"])
def test_training_file_errors(tmp_path, tiny_kb, line):
    path = tmp_path / "train.tsv"
    path.write_text("0\tflu\n" + line + "\n", encoding="utf-8")

    with pytest.raises(ParseError) as excinfo:
        read_training_set(str(path), tiny_kb)

    assert excinfo.value.line_number == 2


def test_parse_bioconcepts_gzip(tmp_path):
    path = str(tmp_path / "disease2pubtator3.gz")
    with gzip.open(path, "wt", encoding="utf-8") as f:
        f.write("1\tDisease\tMESH:D000001\tflu|Influenza\tPubTator3\n")
        f.write("2\tDisease\t-\tsomething\tPubTator3\n")
        f.write("3\tChemical\tMESH:D000009\taspirin\tPubTator3\n")

    with open_text(path) as f:
        triples = list(parse_bioconcepts(f, "Disease"))

    assert triples == [("1", "flu", "MESH:D000001"), ("1", "Influenza", "MESH:D000001")]


def test_read_exclusions(tmp_path):
    path = tmp_path / "test.txt"
    path.write_text("10|t|Title\n10\t0\t5\tTitle\tDisease\tD1\n\n11\n", encoding="utf-8")

    assert read_exclusions(str(path)) == {"10", "11"}


def test_nil_and_obsolete_mentions_are_removed(tmp_path, flu_kb):
    path = tmp_path / "gold.txt"
    path.write_text(
        "5|t|flu cold thing grippe\n"
        "5|a|\n"
        "5\t0\t3\tflu\tDisease\t-1\n"
        "5\t4\t8\tcold\tDisease\tD999999\n"
        "5\t9\t14\tthing\tDisease\t-\n"
        "5\t15\t21\tgrippe\tDisease\tMESH:D000001\n",
        encoding="utf-8",
    )

    documents = load_eval_dataset(str(path), flu_kb)

    assert [m.text for m in documents[0].mentions] == ["grippe"]
    with open(str(path)) as f:
        _, counts = filter_nil_mentions(parse_pubtator(f), flu_kb)
    assert counts == NilCounts(no_id=2, obsolete=1)


def test_alternate_gold_ids_are_remapped(flu_kb):
    lines = ["5|t|cold", "5|a|", "5\t0\t4\tcold\tDisease\tC000002"]

    documents, counts = filter_nil_mentions(parse_pubtator(lines), flu_kb)

    assert documents[0].mentions[0].gold_ids == ("D000002",)
    assert counts == NilCounts(0, 0)
