from __future__ import annotations

import random
import string

import pytest

from namegender.corpus import FrequencyTable, GenderCounts, NameType

VOWELS = "aeiou"
CONSONANTS = "".join(c for c in string.ascii_lowercase if c not in VOWELS)


def random_name(rng: random.Random, min_len: int = 2, max_len: int = 10) -> str:
    """A cleaning-safe lowercase name: alternating consonant/vowel."""
    length = rng.randint(min_len, max_len)
    chars = []
    for i in range(length):
        chars.append(rng.choice(CONSONANTS if i % 2 == 0 else VOWELS))
    return "".join(chars)


def random_table(
    rng: random.Random,
    source_id: str,
    n_names: int,
    max_count: int = 50,
    ambiguous_share: float = 0.3,
) -> FrequencyTable:
    entries: dict[str, GenderCounts] = {}
    while len(entries) < n_names:
        name = random_name(rng)
        if name in entries:
            continue
        if rng.random() < ambiguous_share:
            female = rng.randint(1, max_count)
            male = rng.randint(1, max_count)
        elif rng.random() < 0.5:
            female, male = rng.randint(1, max_count), 0
        else:
            female, male = 0, rng.randint(1, max_count)
        entries[name] = GenderCounts(female, male)
    return FrequencyTable(entries, NameType.FIRST, source_id)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240811)
