"""
Allocation of GT lines to N folds and the leave-one-fold-out train/test splits.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from evaluation import corpus_cer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldSplit:
    fold: int
    train: Tuple[int, ...]
    test: Tuple[int, ...]


@dataclass(frozen=True)
class FoldPlan:
    """
    ``assignment`` maps every planned line id to its fold (0-based). ``splits[f]`` trains
    on all lines outside fold f and tests on fold f, minus ``train_extra`` test lines
    moved over to training.
    """
    n_folds: int
    assignment: Dict[int, int]
    splits: Tuple[FoldSplit, ...]
    train_extra: int = 0

    def fold_members(self, fold: int) -> List[int]:
        return sorted(line for line, f in self.assignment.items() if f == fold)


def make_fold_plan(
    n_lines: int,
    n_folds: int,
    shuffle_seed: Optional[int] = None,
    train_extra: int = 0,
    held_out: Iterable[int] = (),
) -> FoldPlan:
    """
    Split line ids ``0..n_lines-1`` (minus ``held_out``) into ``n_folds`` contiguous
    blocks; fold sizes differ by at most one, earlier folds take the remainder.

    :param n_lines: Number of GT lines in the pool
    :param n_folds: Number of folds N
    :param shuffle_seed: Permute the lines with this seed before blocking
    :param train_extra: Test lines (lowest ids first) moved to training in every split
    :param held_out: Line ids reserved for evaluation and left out of the plan
    """
    held = set(held_out)
    lines = [i for i in range(n_lines) if i not in held]

    if n_folds < 2:
        raise ValueError(f"n_folds must be at least 2, got {n_folds}")
    if len(lines) < n_folds:
        raise ValueError(f"{len(lines)} lines cannot fill {n_folds} folds")

    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(lines))
        lines = [lines[k] for k in order]

    base, remainder = divmod(len(lines), n_folds)
    smallest = base
    if train_extra < 0 or train_extra >= smallest:
        raise ValueError(f"train_extra must be in [0, {smallest}), got {train_extra}")

    assignment: Dict[int, int] = {}
    pos = 0
    for fold in range(n_folds):
        size = base + (1 if fold < remainder else 0)
        for line in lines[pos:pos + size]:
            assignment[line] = fold
        pos += size

    logger.debug("Fold plan: %d lines, %d folds, train_extra=%d", len(assignment), n_folds, train_extra)
    return FoldPlan(n_folds, assignment, _build_splits(assignment, n_folds, train_extra), train_extra)


def _build_splits(assignment: Dict[int, int], n_folds: int, train_extra: int) -> Tuple[FoldSplit, ...]:
    all_lines = sorted(assignment)
    splits = []
    for fold in range(n_folds):
        test = [line for line in all_lines if assignment[line] == fold]
        moved = set(test[:train_extra])
        splits.append(FoldSplit(
            fold,
            tuple(line for line in all_lines if assignment[line] != fold or line in moved),
            tuple(line for line in test if line not in moved),
        ))
    return tuple(splits)


def select_best_model(
    test_gt: Sequence[str],
    per_model_test_preds: Sequence[Sequence[str]],
) -> int:
    """Index of the model with the lowest corpus CER on the test fold; ties go to the lower index."""
    if not per_model_test_preds:
        raise ValueError("select_best_model needs at least one model")
    cers = [corpus_cer(test_gt, preds).cer for preds in per_model_test_preds]
    return min(range(len(cers)), key=lambda k: (cers[k], k))


def format_fold_plan(plan: FoldPlan) -> str:
    return "".join(f"{line}\t{fold}\n" for line, fold in sorted(plan.assignment.items()))


def parse_fold_plan(raw: str, train_extra: int = 0) -> FoldPlan:
    """Rebuild a plan from its ``line_id TAB fold_id`` text form."""
    assignment: Dict[int, int] = {}
    for line_no, record in enumerate(raw.splitlines(), start=1):
        if not record.strip():
            continue
        try:
            line_id, fold_id = (int(x) for x in record.split("\t"))
        except ValueError:
            raise ValueError(f"line {line_no}: expected 'line_id<TAB>fold_id', got {record!r}")
        assignment[line_id] = fold_id

    n_folds = max(assignment.values()) + 1 if assignment else 0
    return FoldPlan(n_folds, assignment, _build_splits(assignment, n_folds, train_extra), train_extra)
