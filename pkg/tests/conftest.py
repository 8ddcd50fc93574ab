import numpy as np
import pytest

from xlinker.corpus import clean_text
from xlinker.kos import CTD_COLUMNS, Concept, KnowledgeBase
from xlinker.strmatch import XMR, ScoredCandidate

VASCULITIS = "D014657"
CONGENITAL = "D009358"

MEDIC_ROWS = [
    ("Vascular Diseases", "D014652", "", "", "", "", "", "angiopathy"),
    ("Vasculitis", VASCULITIS, "", "", "D014652", "", "", "angiitis"),
    ("Systemic Vasculitis", "D056647", "", "", VASCULITIS, "", "", ""),
    (
        "Congenital, Hereditary, and Neonatal Diseases and Abnormalities",
        CONGENITAL,
        "",
        "",
        "",
        "",
        "",
        "congenital disorders",
    ),
    ("Immune Reconstitution Inflammatory Syndrome", "D054019", "", "", "", "", "", ""),
]


def write_ctd(path, rows):
    with open(str(path), "w", encoding="utf-8") as f:
        f.write("# " + "\t".join(CTD_COLUMNS) + "\n")
        for row in rows:
            f.write("\t".join(row) + "\n")
    return str(path)


@pytest.fixture()
def tiny_kb():
    """A root with two children."""
    return KnowledgeBase(
        [
            Concept("D000001", "Root disease", ["root"]),
            Concept("D000002", "Influenza", ["flu"], ["D000001"]),
            Concept("D000003", "Common cold", ["cold"], ["D000001"]),
        ]
    )


@pytest.fixture()
def medic_kb(tmp_path):
    """A MEDIC fragment around vasculitis."""
    from xlinker.kos import load_kos

    return load_kos(write_ctd(tmp_path / "medic.tsv", MEDIC_ROWS))


@pytest.fixture()
def medic_path(tmp_path):
    return write_ctd(tmp_path / "medic.tsv", MEDIC_ROWS)


def random_word(rng, low=5, high=9):
    return "".join(rng.choice(list("abcdefghijklmnopqrstuvwxyz"), rng.integers(low, high)))


def synthetic_kb(concepts=200, synonyms=5, seed=0):
    """Concepts with unique random names and synonyms in a ternary tree."""
    rng = np.random.default_rng(seed)
    seen = set()

    def fresh():
        while True:
            text = "{} {}".format(random_word(rng), random_word(rng))
            if text not in seen:
                seen.add(text)
                return text

    rows = []
    for i in range(concepts):
        parents = ["S{:05d}".format((i - 1) // 3)] if i else []
        rows.append(
            Concept(
                "S{:05d}".format(i),
                fresh(),
                [fresh() for _ in range(synonyms)],
                parents,
            )
        )
    return KnowledgeBase(rows)


@pytest.fixture()
def synthetic_kb_factory():
    return synthetic_kb


class ScriptedModel:
    """
    Stands in for an `XmrModel`: returns fixed candidates per lowercased
    text.
    """

    def __init__(self, kb, script=None, failing=()):
        self.kb = kb
        self.script = {}
        for text, candidates in (script or {}).items():
            self.script[clean_text(text)] = [
                ScoredCandidate(kb.index_of(identifier), score, source)
                for identifier, score, source in candidates
            ]
        self.failing = set(failing)
        self.calls = []

    def predict(self, text, beam=10, top_k=10):
        from xlinker.exceptions import XLinkerError

        self.calls.append(text)
        if clean_text(text) in self.failing:
            raise XLinkerError("cannot score {!r}".format(text))
        return list(self.script.get(clean_text(text), []))[:top_k]


@pytest.fixture()
def scripted_model():
    return ScriptedModel


@pytest.fixture()
def fig2_model(medic_kb):
    """The low XMR score for the misspelling and the exact hit for the name."""
    return ScriptedModel(
        medic_kb,
        {
            "vasculitic": [(CONGENITAL, 0.0964, XMR)],
            "vasculitis": [(VASCULITIS, 1.0, "exact-lookup")],
        },
    )
