import csv
import json

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from errors import DegenerateTableError, VotingDataError
from evaluation import (
    CSV_FIELDS,
    chi_square_errors,
    compute_cer,
    corpus_cer,
    edit_distance,
    ensemble_report,
    format_report_table,
    improvement_rate,
    write_report_csv,
    write_report_meta,
)

# Errors per 10,000 characters of the five models of the 1476 book, and of confidence voting
BOOK_1476_ERRORS = [393, 332, 407, 361, 341]
BOOK_1476_VOTED = 182


def naive_distance(a, b):
    dist = np.zeros((len(a) + 1, len(b) + 1), dtype=int)
    dist[:, 0] = range(len(a) + 1)
    dist[0, :] = range(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            dist[i, j] = min(
                dist[i - 1, j] + 1,
                dist[i, j - 1] + 1,
                dist[i - 1, j - 1] + (a[i - 1] != b[j - 1]),
            )
    return int(dist[-1, -1])


def random_text(rng, alphabet="abcd", max_len=12):
    return "".join(alphabet[k] for k in rng.integers(len(alphabet), size=int(rng.integers(0, max_len + 1))))


def corpus_with_errors(n_errors, n_lines=100, width=100):
    """``n_lines`` lines of ``width`` 'a's with ``n_errors`` substitutions spread from the top."""
    lines = []
    for _ in range(n_lines):
        e = min(width, n_errors)
        lines.append("b" * e + "a" * (width - e))
        n_errors -= e
    return lines


@pytest.fixture
def book_1476():
    gt = ["a" * 100] * 100
    models = [corpus_with_errors(e) for e in BOOK_1476_ERRORS]
    return gt, models, corpus_with_errors(BOOK_1476_VOTED)


@pytest.mark.parametrize("a, b, expected", [
    ("", "abc", 3),
    ("abc", "abc", 0),
    ("kitten", "sitting", 3),
])
def test_edit_distance_examples(a, b, expected):
    assert edit_distance(a, b) == expected


def test_edit_distance_is_metric(rng):
    for _ in range(300):
        a, b, c = (random_text(rng) for _ in range(3))
        d_ab = edit_distance(a, b)
        assert d_ab == naive_distance(a, b)
        assert (d_ab == 0) == (a == b)
        assert d_ab == edit_distance(b, a)
        assert edit_distance(a, c) <= d_ab + edit_distance(b, c)


def test_compute_cer_examples():
    assert compute_cer("inde marien namen", "iade marien namen") == pytest.approx(1 / 17)
    assert compute_cer("abc", "abc") == 0
    assert compute_cer("ab", "") == 1.0


def test_compute_cer_empty_gt():
    with pytest.raises(VotingDataError, match="undefined CER"):
        compute_cer("", "a")


def test_corpus_cer_is_micro_average():
    gt = ["a" * 10, "b" * 10]
    pred = ["a" * 9 + "x", "b" * 7 + "xyz"]
    report = corpus_cer(gt, pred)
    assert report.per_line == ((1, 10), (3, 10))
    assert report.cer == pytest.approx(0.2)


def test_corpus_cer_single_line_matches_compute_cer():
    assert corpus_cer(["inde marien namen"], ["inde maricn namen"]).cer == compute_cer("inde marien namen", "inde maricn namen")


def test_corpus_cer_length_mismatch():
    with pytest.raises(VotingDataError, match="mismatch"):
        corpus_cer(["a", "b"], ["a"])


def test_improvement_rate_examples():
    assert improvement_rate(0.0332, 0.0182) == pytest.approx(0.452, abs=1e-3)
    assert improvement_rate(0.03668, 0.0182) == pytest.approx(0.504, abs=1e-3)
    assert improvement_rate(0.05, 0.05) == 0


def test_improvement_rate_zero_base():
    with pytest.raises(ValueError):
        improvement_rate(0.0, 0.0)


def test_improvement_rate_antitone():
    voted = np.linspace(0.0, 0.1, 21)
    rates = [improvement_rate(0.04, v) for v in voted]
    assert all(x > y for x, y in zip(rates, rates[1:]))


def test_chi_square_examples():
    sig = chi_square_errors(100, 10000, 50, 10000)
    assert sig.statistic == pytest.approx(16.79, abs=0.01)
    assert sig.p_value == pytest.approx(4.2e-5, rel=0.05)
    assert sig.significant()

    sig = chi_square_errors(30, 1000, 15, 1000)
    assert sig.statistic == pytest.approx(5.12, abs=0.01)
    assert sig.p_value == pytest.approx(0.024, abs=1e-3)
    assert not sig.significant()


def test_chi_square_equal_proportions():
    sig = chi_square_errors(40, 1000, 40, 1000)
    assert sig.statistic == 0
    assert sig.p_value == 1


def test_chi_square_p_value_falls_as_gap_widens():
    results = [chi_square_errors(100, 10000, err_b, 10000) for err_b in range(100, 0, -1)]
    stats = [r.statistic for r in results]
    p_values = [r.p_value for r in results]
    assert all(a < b for a, b in zip(stats, stats[1:]))
    assert all(a > b for a, b in zip(p_values, p_values[1:]))
    assert p_values[0] == 1
    assert 0 < p_values[-1] < 1e-15


def test_chi_square_matches_scipy(rng):
    for _ in range(200):
        n_a, n_b = (int(x) for x in rng.integers(50, 5000, size=2))
        err_a = int(rng.integers(1, n_a))
        err_b = int(rng.integers(1, n_b))
        ours = chi_square_errors(err_a, n_a, err_b, n_b)
        stat, p, _, _ = chi2_contingency([[err_a, n_a - err_a], [err_b, n_b - err_b]], correction=False)
        assert ours.statistic == pytest.approx(stat, rel=1e-9)
        assert ours.p_value == pytest.approx(p, rel=1e-6, abs=1e-300)
        swapped = chi_square_errors(err_b, n_b, err_a, n_a)
        assert swapped.statistic == pytest.approx(ours.statistic, rel=1e-12)


def test_chi_square_degenerate_table():
    with pytest.raises(DegenerateTableError):
        chi_square_errors(0, 1000, 0, 1000)
    with pytest.raises(ValueError):
        chi_square_errors(5, 4, 1, 10)


def test_ensemble_report_1476(book_1476):
    gt, models, voted = book_1476
    report = ensemble_report(gt, models, voted)
    row = report.voted_rows[0]

    assert report.best_cer == pytest.approx(0.0332)
    assert report.avg_cer == pytest.approx(0.03668)
    assert report.worst_cer == pytest.approx(0.0407)
    assert row.cer == pytest.approx(0.0182)
    assert round(row.improvement_best, 2) == 0.45
    assert round(row.improvement_avg, 2) == 0.50
    assert round(row.improvement_worst, 2) == 0.55
    assert row.p < 0.001
    assert report.vs_average["voted"].significant()


def test_ensemble_report_several_voted_outputs(book_1476):
    gt, models, voted = book_1476
    report = ensemble_report(gt, models, {"vote_majority": corpus_with_errors(250), "vote_confidence": voted})
    assert [r.model_id for r in report.rows] == ["M1", "M2", "M3", "M4", "M5", "vote_majority", "vote_confidence"]
    assert report.voted_rows[0].cer > report.voted_rows[1].cer


def test_ensemble_report_all_correct():
    gt = ["abc", "de"]
    report = ensemble_report(gt, [gt, gt], gt)
    row = report.voted_rows[0]
    assert report.best_cer == report.worst_cer == 0
    assert row.improvement_best is None
    assert row.chi2 is None
    assert report.vs_average["voted"] is None
    assert "n/a" in format_report_table(report)


def test_ensemble_report_single_model():
    gt = ["inde marien namen"]
    pred = ["inde maricn namen"]
    row = ensemble_report(gt, [pred], pred).voted_rows[0]
    assert row.improvement_best == 0
    assert row.improvement_avg == 0


def test_report_writers(book_1476, tmp_path):
    gt, models, voted = book_1476
    report = ensemble_report(gt, models, voted)

    write_report_csv(report, tmp_path / "report.csv")
    with open(tmp_path / "report.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == CSV_FIELDS
    assert rows[0]["improvement_best"] == "n/a"
    assert rows[-1]["model_id"] == "voted"
    assert float(rows[-1]["cer"]) == pytest.approx(0.0182)

    write_report_meta(report, tmp_path / "meta.json", extra={"n_folds": 5})
    meta = json.loads((tmp_path / "meta.json").read_text(encoding="utf-8"))
    assert meta["significance_unit"] == "characters"
    assert meta["n_folds"] == 5
    assert meta["totals"]["voted"] == {"errors": 182, "chars": 10000}
