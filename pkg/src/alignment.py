"""
Column alignment of N readings of the same line and extraction of the regions where
they disagree.

Multi-alignment is pivot based: the reading closest to all others (summed edit
distance) becomes the reference, every other reading is aligned to it pairwise, and
insertions against the pivot become shared gap columns in all rows.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from evaluation import edit_distance
from llocs_io import LineHypothesis, LlocsEntry

logger = logging.getLogger(__name__)

# Gap symbol. Text characters are always 1-char strings, so None cannot collide with a glyph.
GAP = None

Row = Tuple[Optional[str], ...]


@dataclass(frozen=True)
class AlignedSet:
    """
    N gap-padded rows with identical column count.

    ``col_to_index[r]`` maps every non-gap column of row ``r`` to the index of that
    character in the r-th input text.
    """
    rows: Tuple[Row, ...]
    col_to_index: Tuple[Dict[int, int], ...]

    @property
    def n_cols(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def is_unanimous(self, col: int) -> bool:
        first = self.rows[0][col]
        return all(row[col] == first for row in self.rows[1:])

    def row_text(self, r: int) -> str:
        return "".join(ch for ch in self.rows[r] if ch is not GAP)


@dataclass(frozen=True)
class RegionInput:
    """What one input contributes to a disagreement region."""
    text: str
    entries: Tuple[LlocsEntry, ...]
    model_id: str = ""


@dataclass(frozen=True)
class Disagreement:
    id: int
    col_span: Tuple[int, int]
    per_input: Tuple[RegionInput, ...]


def _build_set(rows: List[List[Optional[str]]]) -> AlignedSet:
    frozen_rows = tuple(tuple(r) for r in rows)
    col_maps = []
    for row in frozen_rows:
        mapping: Dict[int, int] = {}
        for col, ch in enumerate(row):
            if ch is not GAP:
                mapping[col] = len(mapping)
        col_maps.append(mapping)
    return AlignedSet(frozen_rows, tuple(col_maps))


def _pair_columns(a: str, b: str) -> List[Tuple[Optional[int], Optional[int]]]:
    """
    Minimal edit-cost alignment of ``a`` against ``b`` as (index in a, index in b) columns.

    Trace-back prefers match, then substitution, then deletion (gap in b), then
    insertion (gap in a).
    """
    m, n = len(a), len(b)
    dist = np.zeros((m + 1, n + 1), dtype=np.int32)
    dist[:, 0] = np.arange(m + 1)
    dist[0, :] = np.arange(n + 1)

    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            dist[i, j] = min(
                dist[i - 1, j - 1] + cost,
                dist[i - 1, j] + 1,
                dist[i, j - 1] + 1,
            )

    cols: List[Tuple[Optional[int], Optional[int]]] = []
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            same = a[i - 1] == b[j - 1]
            if same and dist[i, j] == dist[i - 1, j - 1]:
                cols.append((i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
            if not same and dist[i, j] == dist[i - 1, j - 1] + 1:
                cols.append((i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            cols.append((i - 1, None))
            i -= 1
        else:
            cols.append((None, j - 1))
            j -= 1

    cols.reverse()
    return cols


def align_pair(a: str, b: str) -> AlignedSet:
    """
    Align two strings with unit insert/delete/substitute costs.

    :param a: First string (row 0)
    :param b: Second string (row 1)
    :return: Two-row AlignedSet
    """
    rows: List[List[Optional[str]]] = [[], []]
    for ia, ib in _pair_columns(a, b):
        rows[0].append(a[ia] if ia is not None else GAP)
        rows[1].append(b[ib] if ib is not None else GAP)
    return _build_set(rows)


def alignment_cost(aset: AlignedSet) -> int:
    """Number of columns where the two rows of a pairwise alignment differ."""
    top, bottom = aset.rows
    return sum(1 for x, y in zip(top, bottom) if x != y)


def choose_pivot(texts: Sequence[str]) -> int:
    """
    Index of the text with the smallest summed edit distance to all others.

    Ties go to the shorter text, then the lexicographically smaller text, then the lower
    index; equal texts therefore always produce the same pivot string.
    """
    sums = [sum(edit_distance(t, other) for other in texts) for t in texts]
    return min(range(len(texts)), key=lambda k: (sums[k], len(texts[k]), texts[k], k))


def align_texts(texts: Sequence[str]) -> AlignedSet:
    if not texts:
        raise ValueError("Cannot align an empty list of texts.")

    pivot_idx = choose_pivot(texts)
    pivot = texts[pivot_idx]
    n_slots = len(pivot) + 1
    logger.debug("Pivot %d of %d: %r", pivot_idx, len(texts), pivot)

    # Per input: characters inserted before each pivot position, and the character (or
    # gap) standing against each pivot character.
    inserted: List[List[List[str]]] = []
    against: List[List[Optional[str]]] = []
    for k, text in enumerate(texts):
        ins = [[] for _ in range(n_slots)]
        opp: List[Optional[str]] = [GAP] * len(pivot)
        if k == pivot_idx:
            opp = list(pivot)
        else:
            slot = 0
            for ip, it in _pair_columns(pivot, text):
                if ip is None:
                    ins[slot].append(text[it])
                else:
                    opp[ip] = text[it] if it is not None else GAP
                    slot = ip + 1
        inserted.append(ins)
        against.append(opp)

    widths = [max(len(ins[slot]) for ins in inserted) for slot in range(n_slots)]

    rows: List[List[Optional[str]]] = [[] for _ in texts]
    for slot in range(n_slots):
        for offset in range(widths[slot]):
            for k, row in enumerate(rows):
                ins = inserted[k][slot]
                row.append(ins[offset] if offset < len(ins) else GAP)
        if slot < len(pivot):
            for k, row in enumerate(rows):
                row.append(against[k][slot])

    return _build_set(rows)


def align_many(hyps: Sequence[LineHypothesis]) -> AlignedSet:
    """
    Align N hypotheses of one line into equal-width columns.

    :param hyps: Non-empty list of hypotheses
    :return: AlignedSet with one row per hypothesis, in input order
    """
    return align_texts([h.text for h in hyps])


def extract_disagreements(aset: AlignedSet, hyps: Sequence[LineHypothesis]) -> List[Disagreement]:
    """
    Merge adjacent non-unanimous columns into regions, numbered from 1 left to right.
    Each region carries every input's substring and the matching llocs slice.
    """
    if len(hyps) != len(aset.rows):
        raise ValueError(f"AlignedSet has {len(aset.rows)} rows but {len(hyps)} hypotheses were given.")

    spans: List[Tuple[int, int]] = []
    start = None
    for col in range(aset.n_cols):
        if aset.is_unanimous(col):
            if start is not None:
                spans.append((start, col))
                start = None
        elif start is None:
            start = col
    if start is not None:
        spans.append((start, aset.n_cols))

    regions = []
    for region_id, (lo, hi) in enumerate(spans, start=1):
        per_input = []
        for r, hyp in enumerate(hyps):
            idx = [aset.col_to_index[r][c] for c in range(lo, hi) if c in aset.col_to_index[r]]
            text = "".join(hyp.text[i] for i in idx)
            entries = tuple(hyp.entries[i] for i in idx) if hyp.entries else ()
            per_input.append(RegionInput(text, entries, hyp.model_id))
        regions.append(Disagreement(region_id, (lo, hi), tuple(per_input)))
    return regions


def render_alignment(
    aset: AlignedSet,
    regions: Sequence[Disagreement],
    labels: Optional[Sequence[str]] = None,
    header: bool = False,
) -> str:
    """
    Render ``i{1}de mari{2}n namen`` followed by one listing line per region,
    e.g. ``{1}: M1{ni}, M2{n}, M3{n}, M4{a}, M5{n}``.

    :param labels: Input labels for the listing lines (default M1..MN)
    :param header: Prefix ``Aligned: `` and add a rule line under the aligned text
    """
    if labels is None:
        labels = [f"M{k + 1}" for k in range(len(aset.rows))]

    by_start = {reg.col_span[0]: reg for reg in regions}
    pieces: List[str] = []
    col = 0
    while col < aset.n_cols:
        reg = by_start.get(col)
        if reg is not None:
            pieces.append(f"{{{reg.id}}}")
            col = reg.col_span[1]
        else:
            pieces.append(aset.rows[0][col] or "")
            col += 1

    aligned = "".join(pieces)
    lines = [f"Aligned: {aligned}" if header else aligned]
    if header and regions:
        lines.append("-" * len(lines[0]))
    for reg in regions:
        listing = ", ".join(f"{label}{{{inp.text}}}" for label, inp in zip(labels, reg.per_input))
        lines.append(f"{{{reg.id}}}: {listing}")
    return "\n".join(lines)
