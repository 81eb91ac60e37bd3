"""
Synthetic OCR "models": a noisy channel over known GT lines that emits text plus
extended llocs, so alignment, voting and evaluation can run without an OCR engine.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigError
from llocs_io import CONF_DECIMALS, CONF_RESOLUTION, STORAGE_FLOOR, Alternative, LineHypothesis, LlocsEntry

logger = logging.getLogger(__name__)

DEFAULT_ALPHABET = "abcdefghijklmnopqrstuvwxyz"

# Synthetic glyph boxes are consecutive and this wide
CHAR_WIDTH = 10

# Lowest confidence a wrongly emitted character is given
MIN_ERROR_CONF = 0.5

N_ALTERNATIVES = 2

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class ErrorModel:
    """
    Per-character error channel.

    ``conf_correct`` is the confidence of every correctly kept character; the rest of its
    probability mass goes to alternatives. ``conf_noise`` is the probability that a
    substituted character keeps the truth only as a weak alternative instead of a strong one.
    """
    sub_rate: float = 0.0
    ins_rate: float = 0.0
    del_rate: float = 0.0
    confusions: Mapping[str, Tuple[Tuple[str, float], ...]] = field(default_factory=dict)
    conf_correct: float = 0.98
    conf_noise: float = 0.3
    alphabet: str = DEFAULT_ALPHABET

    def __post_init__(self):
        rates = (self.sub_rate, self.ins_rate, self.del_rate)
        if any(r < 0 for r in rates) or sum(rates) >= 1:
            raise ValueError(f"error rates must be >= 0 and sum below 1, got {rates}")
        if not 0 < self.conf_correct <= 1:
            raise ValueError(f"conf_correct must be in (0, 1], got {self.conf_correct}")
        if not 0 <= self.conf_noise <= 1:
            raise ValueError(f"conf_noise must be in [0, 1], got {self.conf_noise}")
        if len(set(self.alphabet)) < 2:
            raise ValueError("alphabet needs at least two distinct characters")
        for src, targets in self.confusions.items():
            for target, weight in targets:
                if target not in self.alphabet:
                    raise ValueError(f"confusion target {target!r} of {src!r} is not in the alphabet")
                if target == src or weight <= 0:
                    raise ValueError(f"invalid confusion {src!r} -> {target!r} (weight {weight})")

    @property
    def total_rate(self) -> float:
        return self.sub_rate + self.ins_rate + self.del_rate

    @classmethod
    def from_mapping(cls, section: Mapping[str, str]) -> "ErrorModel":
        """Build from the string values of a ``[model.<k>]`` config section."""
        known = {"sub_rate", "ins_rate", "del_rate", "confusions", "conf_correct", "conf_noise", "alphabet"}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"unknown error model keys: {sorted(unknown)}")
        try:
            kwargs = {k: float(section[k]) for k in ("sub_rate", "ins_rate", "del_rate", "conf_correct", "conf_noise") if k in section}
            if "alphabet" in section:
                kwargs["alphabet"] = section["alphabet"]
            if "confusions" in section:
                kwargs["confusions"] = parse_confusions(section["confusions"])
            return cls(**kwargs)
        except ValueError as e:
            raise ConfigError(f"invalid error model: {e}")


def parse_confusions(raw: str) -> Dict[str, Tuple[Tuple[str, float], ...]]:
    """
    Parse ``a:o=2,e=1; n:u,r`` into ``{"a": (("o", 2.0), ("e", 1.0)), "n": (("u", 1.0), ("r", 1.0))}``.
    A target without ``=weight`` weighs 1.
    """
    confusions: Dict[str, Tuple[Tuple[str, float], ...]] = {}
    for item in raw.split(";"):
        item = item.strip()
        if not item:
            continue
        src, sep, rest = item.partition(":")
        if not sep or len(src) != 1:
            raise ValueError(f"malformed confusion entry {item!r}")
        targets = []
        for t in rest.split(","):
            t = t.strip()
            target, _, weight = t.partition("=")
            if len(target) != 1:
                raise ValueError(f"malformed confusion target {t!r}")
            targets.append((target, float(weight) if weight else 1.0))
        confusions[src] = tuple(targets)
    return confusions


def _draw_substitute(rng: np.random.Generator, ch: str, model: ErrorModel) -> str:
    targets = model.confusions.get(ch)
    if targets:
        weights = np.array([w for _, w in targets], dtype=float)
        return targets[rng.choice(len(targets), p=weights / weights.sum())][0]
    pool = sorted(set(model.alphabet) - {ch})
    return pool[rng.integers(len(pool))]


def _spread(rng: np.random.Generator, top: str, mass: float, model: ErrorModel, exclude: Sequence[str]) -> List[Alternative]:
    """Distribute ``mass`` over up to N_ALTERNATIVES characters other than ``top``."""
    if mass <= 0:
        return []
    preferred = [t for t, _ in model.confusions.get(top, ()) if t not in exclude]
    rest = sorted(set(model.alphabet) - set(preferred) - set(exclude))
    pool = preferred + [rest[k] for k in rng.permutation(len(rest))]
    chosen = pool[:N_ALTERNATIVES]
    if not chosen:
        return []
    weights = rng.uniform(0.2, 1.0, size=len(chosen))
    confs = mass * weights / weights.sum()
    return [Alternative(ch, float(c)) for ch, c in zip(chosen, confs)]


def _quantize(conf: float, alternatives: Sequence[Alternative]) -> Tuple[float, Tuple[Alternative, ...]]:
    """
    Round an entry to CONF_DECIMALS so it survives a write/read cycle unchanged.

    ``conf`` keeps its rounded value; the largest kept alternative absorbs the rounding
    error and any mass of alternatives below STORAGE_FLOOR, so the entry still sums to 1.
    """
    conf = max(round(conf, CONF_DECIMALS), CONF_RESOLUTION)
    remainder = round(1.0 - conf, CONF_DECIMALS)
    ranked = sorted(alternatives, key=lambda a: -a.conf)
    if remainder < STORAGE_FLOOR or not ranked:
        return conf, ()
    kept = [a for a in ranked if round(a.conf, CONF_DECIMALS) >= STORAGE_FLOOR] or ranked[:1]
    confs = [round(a.conf, CONF_DECIMALS) for a in kept]
    confs[0] = round(remainder - math.fsum(confs[1:]), CONF_DECIMALS)
    quantized = [Alternative(a.char, c) for a, c in zip(kept, confs)]
    quantized.sort(key=lambda a: -a.conf)
    return conf, tuple(quantized)


def _entry(rng: np.random.Generator, pos: int, top: str, model: ErrorModel, truth: Optional[str] = None, correct: bool = True) -> LlocsEntry:
    if correct:
        conf = model.conf_correct
    else:
        conf = float(rng.uniform(min(MIN_ERROR_CONF, model.conf_correct), model.conf_correct))
    remainder = 1.0 - conf

    alternatives: List[Alternative] = []
    if truth is not None and truth != top and remainder > 0:
        if rng.random() < model.conf_noise:
            share = rng.uniform(0.05, 0.3)
        else:
            share = rng.uniform(0.6, 0.95)
        truth_conf = remainder * share
        others = _spread(rng, top, remainder - truth_conf, model, exclude=[top, truth])
        if not others:
            truth_conf = remainder
        alternatives.append(Alternative(truth, float(truth_conf)))
        alternatives += others
    else:
        alternatives += _spread(rng, top, remainder, model, exclude=[top])

    conf, quantized = _quantize(conf, alternatives)
    x_start = pos * CHAR_WIDTH
    return LlocsEntry(top, x_start, x_start + CHAR_WIDTH - 1, conf, quantized)


def simulate_model_line(gt: str, model: ErrorModel, seed: SeedLike, model_id: str = "") -> LineHypothesis:
    """
    Pass one GT line through the error channel.

    Per GT character: delete with ``del_rate``, substitute with ``sub_rate`` (the truth
    stays among the alternatives), otherwise keep; after each position insert a random
    alphabet character with ``ins_rate``. Deterministic for a given seed.
    """
    if not gt:
        raise ValueError("simulate_model_line needs a non-empty GT line")
    rng = np.random.default_rng(seed)
    alphabet = sorted(set(model.alphabet))

    entries: List[LlocsEntry] = []
    for ch in gt:
        u = rng.random()
        if u < model.del_rate:
            pass
        elif u < model.del_rate + model.sub_rate:
            sub = _draw_substitute(rng, ch, model)
            entries.append(_entry(rng, len(entries), sub, model, truth=ch, correct=False))
        else:
            entries.append(_entry(rng, len(entries), ch, model))

        if rng.random() < model.ins_rate:
            extra = alphabet[rng.integers(len(alphabet))]
            entries.append(_entry(rng, len(entries), extra, model, correct=False))

    return LineHypothesis("".join(e.char for e in entries), tuple(entries), model_id)


def line_seed(base_seed: int, model_index: int, line_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, model_index, line_index])


def simulate_ensemble(
    gt_lines: Sequence[str],
    models: Sequence[ErrorModel],
    base_seed: int,
    line_offset: int = 0,
    model_ids: Optional[Sequence[str]] = None,
    model_offset: int = 0,
) -> List[List[LineHypothesis]]:
    """
    Run every model over every GT line.

    :param line_offset: Added to the line index when deriving seeds, so disjoint line sets
        (fold test lines, evaluation lines) get independent draws
    :param model_offset: Added to the model index when deriving seeds
    :return: One hypothesis corpus per model, in line order
    """
    if not models:
        raise ValueError("simulate_ensemble needs at least one model")
    if base_seed < 0:
        raise ValueError(f"base_seed must be non-negative, got {base_seed}")
    if model_ids is None:
        model_ids = [f"M{k + 1}" for k in range(len(models))]

    corpora = []
    for i, (model, mid) in enumerate(zip(models, model_ids)):
        corpora.append([
            simulate_model_line(gt, model, line_seed(base_seed, model_offset + i, line_offset + k), mid)
            for k, gt in enumerate(gt_lines)
        ])
    return corpora


def generate_gt_lines(
    n_lines: int,
    seed: int,
    alphabet: str = DEFAULT_ALPHABET,
    line_length: int = 40,
) -> List[str]:
    """Pseudo-text GT: random words of 2-9 characters separated by single spaces."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x67]))
    letters = sorted(set(alphabet) - {" "})
    lines = []
    for _ in range(n_lines):
        words: List[str] = []
        while sum(len(w) + 1 for w in words) < line_length:
            size = int(rng.integers(2, 10))
            words.append("".join(letters[k] for k in rng.integers(len(letters), size=size)))
        lines.append(" ".join(words))
    return lines
