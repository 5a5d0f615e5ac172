"""Self-contained Porter (English) and Snowball-style German stemmers.

Keeping both in-package avoids an external model dependency in the
normalization cascade; all downstream golden values are frozen against
these implementations.
"""
from __future__ import annotations

__all__ = ["stem_word", "stem_english", "stem_german"]

# ---------------------------------------------------------------------------
# English: Porter stemmer
# ---------------------------------------------------------------------------

_EN_VOWELS = "aeiou"


def _en_is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _EN_VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _en_is_consonant(word, i - 1)
    return True


def _en_measure(stem: str) -> int:
    # number of vowel-consonant transitions: [C](VC)^m[V]
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _en_is_consonant(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _en_has_vowel(stem: str) -> bool:
    return any(not _en_is_consonant(stem, i) for i in range(len(stem)))


def _en_double_consonant(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _en_is_consonant(word, len(word) - 1)


def _en_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    if not _en_is_consonant(word, len(word) - 3):
        return False
    if _en_is_consonant(word, len(word) - 2):
        return False
    if not _en_is_consonant(word, len(word) - 1):
        return False
    return word[-1] not in "wxy"


_EN_STEP2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]

_EN_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_EN_STEP4 = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def stem_english(word: str) -> str:
    """Porter-stem a single lowercase token; tokens shorter than 3 pass through."""
    if len(word) <= 2:
        return word

    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]

    # step 1b
    if word.endswith("eed"):
        if _en_measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        flag = False
        if word.endswith("ed") and _en_has_vowel(word[:-2]):
            word = word[:-2]
            flag = True
        elif word.endswith("ing") and _en_has_vowel(word[:-3]):
            word = word[:-3]
            flag = True
        if flag:
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _en_double_consonant(word) and word[-1] not in "lsz":
                word = word[:-1]
            elif _en_measure(word) == 1 and _en_cvc(word):
                word += "e"

    # step 1c
    if word.endswith("y") and _en_has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # step 2
    for suffix, repl in _EN_STEP2:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _en_measure(stem) > 0:
                word = stem + repl
            break

    # step 3
    for suffix, repl in _EN_STEP3:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _en_measure(stem) > 0:
                word = stem + repl
            break

    # step 4
    for suffix in _EN_STEP4:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _en_measure(stem) > 1:
                if suffix == "ion" and (not stem or stem[-1] not in "st"):
                    continue
                word = stem
            break

    # step 5a
    if word.endswith("e"):
        stem = word[:-1]
        m = _en_measure(stem)
        if m > 1 or (m == 1 and not _en_cvc(stem)):
            word = stem

    # step 5b
    if _en_measure(word) > 1 and _en_double_consonant(word) and word.endswith("l"):
        word = word[:-1]

    return word


# ---------------------------------------------------------------------------
# German: Snowball stemmer
# ---------------------------------------------------------------------------

_DE_VOWELS = set("aeiouyäöü")
_DE_S_ENDING = set("bdfghklmnrt")
_DE_ST_ENDING = set("bdfghklmnt")


def _de_mark_protected(word: str) -> str:
    # u and y between vowels act as consonants; mark them uppercase
    chars = list(word)
    for i in range(1, len(word) - 1):
        if word[i] in "uy" and word[i - 1] in _DE_VOWELS and word[i + 1] in _DE_VOWELS:
            chars[i] = chars[i].upper()
    return "".join(chars)


def _de_regions(word: str) -> tuple[int, int]:
    def after_vowel_nonvowel(start: int) -> int:
        for i in range(start + 1, len(word)):
            if word[i] not in _DE_VOWELS and word[i - 1] in _DE_VOWELS:
                return i + 1
        return len(word)

    r1 = after_vowel_nonvowel(0)
    r2 = after_vowel_nonvowel(r1 - 1) if r1 < len(word) else len(word)
    # ensure at least 3 letters before R1
    return max(r1, 3), r2


def stem_german(word: str) -> str:
    """Snowball-stem a single lowercase German token (umlauts preserved)."""
    if len(word) <= 2:
        return word
    word = word.replace("ß", "ss")
    word = _de_mark_protected(word)
    r1, r2 = _de_regions(word)

    def in_r1(suffix: str) -> bool:
        return len(word) - len(suffix) >= r1

    def in_r2(suffix: str) -> bool:
        return len(word) - len(suffix) >= r2

    # step 1
    for suffix in ("ern", "em", "er", "en", "es", "e", "s"):
        if word.endswith(suffix):
            if suffix == "s":
                if in_r1("s") and len(word) >= 2 and word[-2] in _DE_S_ENDING:
                    word = word[:-1]
            elif in_r1(suffix):
                word = word[: -len(suffix)]
                if suffix in ("e", "en", "es") and word.endswith("niss"):
                    word = word[:-1]
            break

    # step 2 (regions stay fixed: deletions only shorten the tail)
    for suffix in ("est", "en", "er", "st"):
        if word.endswith(suffix):
            if suffix == "st":
                pos = len(word) - 2
                if in_r1("st") and pos >= 4 and word[pos - 1] in _DE_ST_ENDING:
                    word = word[:-2]
            elif in_r1(suffix):
                word = word[: -len(suffix)]
            break

    # step 3 (derivational suffixes)
    if word.endswith(("end", "ung")):
        if in_r2("ung"):
            word = word[:-3]
            if word.endswith("ig") and not word.endswith("eig") and in_r2("ig"):
                word = word[:-2]
    elif word.endswith(("isch", "ig", "ik")):
        suffix = "isch" if word.endswith("isch") else word[-2:]
        if in_r2(suffix) and not word[: -len(suffix)].endswith("e"):
            word = word[: -len(suffix)]
    elif word.endswith(("lich", "heit")):
        if in_r2("lich"):
            word = word[:-4]
            for pre in ("er", "en"):
                if word.endswith(pre) and in_r1(pre):
                    word = word[:-2]
                    break
    elif word.endswith("keit"):
        if in_r2("keit"):
            word = word[:-4]
            if word.endswith("lich") and in_r2("lich"):
                word = word[:-4]
            elif word.endswith("ig") and in_r2("ig"):
                word = word[:-2]

    return word.lower()


_STEMMERS = {"en": stem_english, "de": stem_german}


def stem_word(word: str, language: str) -> str:
    """Stem one token with the configured language's stemmer.

    Stemmers operate on lowercase input; mixed-case tokens are stemmed on
    their casefolded form only when already lowercase, otherwise returned
    unchanged (the cascade lowercases before it stems).
    """
    try:
        stemmer = _STEMMERS[language]
    except KeyError:
        raise ValueError(f"unsupported stemmer language: {language!r}") from None
    if word != word.lower():
        return word
    return stemmer(word)
