import pytest

from evaluation import compute_cer
from folds import format_fold_plan, make_fold_plan, parse_fold_plan, select_best_model


@pytest.mark.parametrize("n_lines, n_folds, train_size, test_size", [
    (150, 5, 120, 30),
    (250, 5, 200, 50),
    (250, 10, 225, 25),
    (5, 5, 4, 1),
])
def test_fold_arithmetic(n_lines, n_folds, train_size, test_size):
    plan = make_fold_plan(n_lines, n_folds)
    assert len(plan.splits) == n_folds
    for split in plan.splits:
        assert len(split.train) == train_size
        assert len(split.test) == test_size


def test_train_extra_matches_ten_fold_training():
    plan = make_fold_plan(250, 5, train_extra=25)
    for split in plan.splits:
        assert len(split.train) == 225
        assert len(split.test) == 25
        # the moved lines come from the own fold
        assert set(plan.fold_members(split.fold)) - set(split.test) <= set(split.train)


def test_remainder_goes_to_earliest_folds():
    plan = make_fold_plan(12, 5)
    assert [len(plan.fold_members(f)) for f in range(5)] == [3, 3, 2, 2, 2]
    assert plan.fold_members(0) == [0, 1, 2]


def test_partition_randomized(rng):
    for _ in range(200):
        n_folds = int(rng.integers(2, 12))
        n_lines = int(rng.integers(n_folds, 300))
        seed = int(rng.integers(0, 1000)) if rng.random() < 0.5 else None
        plan = make_fold_plan(n_lines, n_folds, shuffle_seed=seed)

        assert sorted(plan.assignment) == list(range(n_lines))
        sizes = [len(plan.fold_members(f)) for f in range(n_folds)]
        assert max(sizes) - min(sizes) <= 1
        for split in plan.splits:
            assert not set(split.train) & set(split.test)
            assert len(split.train) + len(split.test) == n_lines
            assert set(split.test) == set(plan.fold_members(split.fold))


def test_shuffle_is_deterministic():
    a = make_fold_plan(100, 5, shuffle_seed=3)
    b = make_fold_plan(100, 5, shuffle_seed=3)
    assert a == b
    assert a.assignment != make_fold_plan(100, 5).assignment


def test_held_out_lines_are_left_out():
    plan = make_fold_plan(20, 4, held_out=range(15, 20))
    assert sorted(plan.assignment) == list(range(15))
    for split in plan.splits:
        assert max(split.train + split.test) < 15


@pytest.mark.parametrize("n_lines, n_folds, train_extra", [
    (10, 1, 0),
    (3, 5, 0),
    (250, 5, 50),
    (250, 5, -1),
])
def test_invalid_arguments(n_lines, n_folds, train_extra):
    with pytest.raises(ValueError):
        make_fold_plan(n_lines, n_folds, train_extra=train_extra)


def test_select_best_model():
    gt = ["a" * 1000] * 10
    cers = [0.0393, 0.0332, 0.0407, 0.0361, 0.0341]
    preds = [[("b" * round(c * 1000) + "a" * 1000)[:1000]] * 10 for c in cers]
    assert select_best_model(gt, preds) == 1
    assert compute_cer(gt[0], preds[1][0]) == pytest.approx(0.033)


def test_select_best_model_ties_and_stability():
    gt = ["inde marien namen"]
    preds = [["inde maricn namen"], ["iade marien namen"]]
    assert select_best_model(gt, preds) == 0
    assert select_best_model(gt, preds + [["xxxx"]]) == 0
    assert select_best_model(gt, [["xxxx"]] + preds) == 1


def test_select_best_model_needs_models():
    with pytest.raises(ValueError):
        select_best_model(["a"], [])


def test_fold_plan_text_form():
    plan = make_fold_plan(7, 3, shuffle_seed=1, train_extra=1)
    raw = format_fold_plan(plan)
    assert raw.splitlines()[0].split("\t")[0] == "0"
    assert parse_fold_plan(raw, train_extra=1) == plan


def test_parse_fold_plan_rejects_garbage():
    with pytest.raises(ValueError, match="line 2"):
        parse_fold_plan("0\t0\nfoo\n")
