import random

import pytest

from blockscore import FitConfig, load_default_table, train


def synthetic_zh_corpus(n_lines=200, seed=7):
    """Deterministic "clean Chinese dev set": CJK text where every fifth
    line carries one Latin letter, the way real zh corpora mix in product
    names and abbreviations.  Retained blocks come out as exactly
    {Basic Latin, CJK Unified Ideographs}."""
    rng = random.Random(seed)
    cjk = [chr(c) for c in range(0x4E00, 0x4E00 + 400)]
    latin = "abcdefghijklmnopqrstuvwxyz"
    lines = []
    for i in range(n_lines):
        n = rng.randint(8, 30)
        chars = rng.choices(cjk, k=n)
        if i % 5 == 0:
            chars[rng.randrange(n)] = rng.choice(latin)
        lines.append("".join(chars))
    return lines


@pytest.fixture(scope="session")
def table():
    return load_default_table()


@pytest.fixture(scope="session")
def zh_corpus():
    return synthetic_zh_corpus()


@pytest.fixture(scope="session")
def zh_model(table, zh_corpus):
    return train(zh_corpus, table=table, cfg=FitConfig(seed=0))
