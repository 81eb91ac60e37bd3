"""
Resolve the disagreement regions of aligned OCR readings.

Every region first gets a length vote (modal substring length, shorter wins ties);
inputs of any other length are discarded. The survivors are then compared slot by
slot, either by plain majority or by summing the confidences of the recognized
characters and of their alternatives above a threshold.
"""
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from alignment import AlignedSet, Disagreement, RegionInput, align_many, extract_disagreements
from llocs_io import LineHypothesis, LlocsEntry

logger = logging.getLogger(__name__)

MODES = ("majority", "confidence")

# Confidence assumed for characters delivered without llocs
MISSING_LLOCS_CONF = 1.0


@dataclass(frozen=True)
class VoteConfig:
    mode: str = "confidence"
    alt_threshold: float = 0.01
    rec_only: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"Unknown vote mode {self.mode!r}, expected one of {MODES}")
        if not 0.0 <= self.alt_threshold < 1.0:
            raise ValueError(f"alt_threshold must be in [0, 1), got {self.alt_threshold}")


@dataclass(frozen=True)
class RegionVote:
    region_id: int
    chosen: str
    length: int
    survivors: Tuple[int, ...]
    slot_scores: Tuple[Dict[str, float], ...]


@dataclass(frozen=True)
class VoteResult:
    text: str
    per_region: Tuple[RegionVote, ...] = ()
    warnings: Tuple[str, ...] = ()
    aligned: Optional[AlignedSet] = None
    regions: Tuple[Disagreement, ...] = ()


def vote_length(candidate_lengths: Iterable[int]) -> int:
    """Modal length; among tied modal lengths the shortest."""
    counts = Counter(candidate_lengths)
    if not counts:
        raise ValueError("length vote needs at least one candidate")
    top = max(counts.values())
    return min(length for length, c in counts.items() if c == top)


def sum_candidate_confidences(
    slot_entries: Sequence[Tuple[LlocsEntry, int]],
    cfg: VoteConfig,
) -> Dict[str, float]:
    """
    Sum, per character, the confidence of every entry's recognized character and
    (unless ``cfg.rec_only``) of its alternatives strictly above ``cfg.alt_threshold``.

    :param slot_entries: (entry, input id) pairs of the surviving inputs at one slot
    :return: Mapping character -> confidence sum
    """
    contributions: Dict[str, List[float]] = defaultdict(list)
    for entry, _ in slot_entries:
        contributions[entry.char].append(entry.conf)
        if cfg.rec_only:
            continue
        for alt in entry.alternatives:
            if alt.conf > cfg.alt_threshold:
                contributions[alt.char].append(alt.conf)
    # fsum is exactly rounded, so the sums do not depend on input order
    return {ch: math.fsum(vals) for ch, vals in contributions.items()}


def _slot_entry(inp: RegionInput, k: int) -> LlocsEntry:
    if inp.entries:
        return inp.entries[k]
    return LlocsEntry(inp.text[k], 0, 0, MISSING_LLOCS_CONF)


def _pick(scores: Dict[str, float], support: Counter) -> str:
    return max(scores, key=lambda ch: (scores[ch], support[ch], -ord(ch)))


def resolve_region(region: Disagreement, cfg: VoteConfig) -> RegionVote:
    """Length vote followed by per-slot character selection; keeps the per-slot scores."""
    if not region.per_input:
        raise ValueError(f"region {region.id} has no inputs")

    length = vote_length(len(inp.text) for inp in region.per_input)
    survivors = tuple(k for k, inp in enumerate(region.per_input) if len(inp.text) == length)

    chosen: List[str] = []
    slot_scores: List[Dict[str, float]] = []
    for slot in range(length):
        support = Counter(region.per_input[k].text[slot] for k in survivors)
        if cfg.mode == "majority":
            scores = {ch: float(c) for ch, c in support.items()}
        else:
            scores = sum_candidate_confidences(
                [(_slot_entry(region.per_input[k], slot), k) for k in survivors], cfg
            )
        chosen.append(_pick(scores, support))
        slot_scores.append(scores)

    return RegionVote(region.id, "".join(chosen), length, survivors, tuple(slot_scores))


def vote_region(region: Disagreement, cfg: VoteConfig) -> str:
    return resolve_region(region, cfg).chosen


def vote_line(hyps: Sequence[LineHypothesis], cfg: VoteConfig) -> VoteResult:
    """
    Align the hypotheses of one line, vote every disagreement region and splice the
    winners between the unanimous columns.

    In confidence mode an input without llocs counts as confidence 1.0 with no
    alternatives; a warning is recorded for it.
    """
    if not hyps:
        raise ValueError("vote_line needs at least one hypothesis")
    if len(hyps) == 1:
        return VoteResult(hyps[0].text)

    warnings: List[str] = []
    if cfg.mode == "confidence":
        for k, h in enumerate(hyps):
            if not h.has_llocs:
                msg = f"{h.model_id or f'input {k + 1}'}: missing llocs, using confidence {MISSING_LLOCS_CONF} without alternatives"
                logger.warning(msg)
                warnings.append(msg)

    aligned = align_many(hyps)
    regions = extract_disagreements(aligned, hyps)
    votes = [resolve_region(reg, cfg) for reg in regions]

    by_start = {reg.col_span[0]: (reg, vote) for reg, vote in zip(regions, votes)}
    pieces: List[str] = []
    col = 0
    while col < aligned.n_cols:
        hit = by_start.get(col)
        if hit is not None:
            pieces.append(hit[1].chosen)
            col = hit[0].col_span[1]
        else:
            pieces.append(aligned.rows[0][col])
            col += 1

    return VoteResult("".join(pieces), tuple(votes), tuple(warnings), aligned, tuple(regions))


def vote_corpus(
    per_line_hyps: Sequence[Sequence[LineHypothesis]],
    cfg: VoteConfig,
    workers: int = 1,
) -> List[VoteResult]:
    """
    Vote every line. With ``workers > 1`` lines are spread over a process pool; the
    result order always follows the line order.
    """
    fn = partial(vote_line, cfg=cfg)
    if workers <= 1 or len(per_line_hyps) < 2:
        return [fn(hyps) for hyps in per_line_hyps]

    chunksize = max(1, len(per_line_hyps) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, per_line_hyps, chunksize=chunksize))
