import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from llocs_io import Alternative, LineHypothesis, LlocsEntry  # noqa: E402

GT_LINE = "inde marien namen"

EXAMPLE_TEXTS = [
    "inide maricn namen",
    "inde maricn namen",
    "inde marien namen",
    "iade marien namen",
    "inde maricn namen",
]

# Per model: index of the degraded e/c character, its confidence and alternatives
EC_SLOT_READINGS = [
    (10, "c", 0.6683, [("e", 0.3840)]),
    (9, "c", 0.9327, [("e", 0.1977)]),
    (9, "e", 0.9991, []),
    (9, "e", 0.9802, [("c", 0.0756)]),
    (9, "c", 0.9031, [("e", 0.5007)]),
]

# The M4 'a' read for 'n'
M4_A_ENTRY = LlocsEntry("a", 126, 136, 0.9665, (
    Alternative("n", 0.4578),
    Alternative("r", 0.2365),
    Alternative("m", 0.0924),
    Alternative("k", 0.0832),
))


def hypothesis(text, model_id="", overrides=None, conf=0.99):
    """Hypothesis with fixed-width boxes; ``overrides`` maps index -> LlocsEntry."""
    overrides = overrides or {}
    entries = []
    for k, ch in enumerate(text):
        entry = overrides.get(k) or LlocsEntry(ch, 10 * k, 10 * k + 9, conf)
        entries.append(entry)
    return LineHypothesis(text, tuple(entries), model_id)


@pytest.fixture
def example_texts():
    return list(EXAMPLE_TEXTS)


@pytest.fixture
def example_hyps():
    """The five readings with llocs at the e/c slot and on M4's 'a'."""
    hyps = []
    for k, (text, (idx, ch, conf, alts)) in enumerate(zip(EXAMPLE_TEXTS, EC_SLOT_READINGS)):
        overrides = {
            idx: LlocsEntry(ch, 10 * idx, 10 * idx + 9, conf, tuple(Alternative(a, c) for a, c in alts))
        }
        if k == 3:
            overrides[1] = LlocsEntry("a", 10, 19, M4_A_ENTRY.conf, M4_A_ENTRY.alternatives)
        hyps.append(hypothesis(text, f"M{k + 1}", overrides))
    return hyps


def random_entry(rng, ch, x_start, alphabet):
    conf = int(rng.integers(100, 1_000_001)) / 1e6
    others = [a for a in alphabet if a != ch]
    n_alts = int(rng.integers(0, 4))
    picks = rng.choice(len(others), size=min(n_alts, len(others)), replace=False)
    alts = sorted(
        (Alternative(others[p], int(rng.integers(100, 1_000_001)) / 1e6) for p in picks),
        key=lambda a: -a.conf,
    )
    return LlocsEntry(ch, x_start, x_start + int(rng.integers(0, 12)), conf, tuple(alts))


def random_hypothesis(rng, alphabet, max_len=12, model_id=""):
    length = int(rng.integers(0, max_len + 1))
    text = "".join(alphabet[k] for k in rng.integers(len(alphabet), size=length))
    entries = []
    x = 0
    for ch in text:
        x += int(rng.integers(0, 8))
        entries.append(random_entry(rng, ch, x, alphabet))
    return LineHypothesis(text, tuple(entries), model_id)


@pytest.fixture
def make_random_hypothesis():
    return random_hypothesis


@pytest.fixture
def rng():
    return np.random.default_rng(20171)
