"""
Per-document abbreviation detection and whole-mention expansion.

Short forms are found in `long form (SF)` patterns and validated by
aligning the short form's characters, right to left, against the words
that precede the parenthesis.
"""
import re
from collections.abc import Mapping
from typing import Dict, Optional

PARENTHESIS = re.compile(r"\(([^()]+)\)")
WORD = re.compile(r"\S+")

MAX_SHORT_FORM_LENGTH = 10


def _is_short_form(candidate: str) -> bool:
    if not 2 <= len(candidate) <= MAX_SHORT_FORM_LENGTH:
        return False
    if len(candidate.split()) > 2:
        return False
    if not candidate[0].isalnum():
        return False
    return any(char.isalpha() for char in candidate)


def _best_long_form(short_form: str, window: str) -> Optional[str]:
    """
    Returns the shortest suffix of `window` that contains every
    alphanumeric character of `short_form` in order, its first character
    starting a word, or `None`.
    """
    s_index = len(short_form) - 1
    l_index = len(window) - 1
    while s_index >= 0:
        char = short_form[s_index].lower()
        if not char.isalnum():
            s_index -= 1
            continue
        while l_index >= 0 and (
            window[l_index].lower() != char
            or (
                s_index == 0
                and l_index > 0
                and window[l_index - 1].isalnum()
            )
        ):
            l_index -= 1
        if l_index < 0:
            return None
        l_index -= 1
        s_index -= 1
    start = window.rfind(" ", 0, l_index + 1) + 1
    return window[start:].strip()


class AbbreviationMap(Mapping):
    """
    Read-only short form → long form mapping for one document.
    """

    def __init__(self, pairs: Optional[Dict[str, str]] = None):
        self._pairs = {}
        for short_form, long_form in (pairs or {}).items():
            if not short_form or short_form == long_form:
                raise ValueError("invalid abbreviation pair {!r}".format(short_form))
            self._pairs[short_form] = long_form
        self._folded = {}
        for short_form, long_form in self._pairs.items():
            self._folded.setdefault(short_form.lower(), long_form)

    def __getitem__(self, short_form):
        return self._pairs[short_form]

    def __iter__(self):
        return iter(self._pairs)

    def __len__(self):
        return len(self._pairs)

    def __repr__(self):
        return "AbbreviationMap({!r})".format(self._pairs)

    def expand(self, mention_text: str) -> str:
        """
        Long form for a mention that is exactly a short form (case-sensitive
        first, then case-insensitive); otherwise the mention unchanged.
        """
        if mention_text in self._pairs:
            return self._pairs[mention_text]
        return self._folded.get(mention_text.lower(), mention_text)


def detect_abbreviations(text: str) -> AbbreviationMap:
    """
    Finds `long form (SF)` definitions in one document's text.

    The long form is searched among the min(|SF| + 5, 2·|SF|) words before
    the parenthesis; the first definition of a short form wins.
    """
    pairs = {}
    for match in PARENTHESIS.finditer(text):
        short_form = re.split(r"[;,]", match.group(1))[0].strip()
        if not _is_short_form(short_form) or short_form in pairs:
            continue
        max_words = min(len(short_form) + 5, 2 * len(short_form))
        words = WORD.findall(text[: match.start()])[-max_words:]
        if not words:
            continue
        long_form = _best_long_form(short_form, " ".join(words))
        if not long_form or len(long_form) <= len(short_form):
            continue
        if long_form.lower() == short_form.lower():
            continue
        pairs[short_form] = long_form
    return AbbreviationMap(pairs)


def expand_mention(mention_text: str, abbreviations: AbbreviationMap) -> str:
    return abbreviations.expand(mention_text)
