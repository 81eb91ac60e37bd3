import pytest

from conftest import M4_A_ENTRY, random_hypothesis
from errors import LlocsFormatError, VotingDataError
from llocs_io import (
    Alternative,
    LineHypothesis,
    LlocsEntry,
    parse_llocs,
    read_hypothesis,
    write_hypothesis,
    write_llocs,
)

M4_A_RECORD = "a\t126\t136\t0.9665\tn=0.4578;r=0.2365;m=0.0924;k=0.0832\n"

# Alphabet with every character that needs escaping
ESCAPE_ALPHABET = ["a", "b", " ", "\t", "\\", ";", "=", "\n", "ä", "ſ"]


def test_parse_record_with_alternatives():
    hyp = parse_llocs(M4_A_RECORD, model_id="M4")
    assert hyp.text == "a"
    assert hyp.model_id == "M4"
    assert hyp.entries == (M4_A_ENTRY,)


def test_write_record_with_alternatives():
    assert write_llocs(LineHypothesis("a", (M4_A_ENTRY,))) == M4_A_RECORD


def test_empty_document():
    hyp = parse_llocs("")
    assert hyp.text == ""
    assert hyp.entries == ()
    assert write_llocs(hyp) == ""


def test_confidence_out_of_range():
    with pytest.raises(LlocsFormatError, match="confidence out of range"):
        parse_llocs("a\t0\t5\t1.2\t\n")


def test_alternative_confidence_out_of_range():
    with pytest.raises(LlocsFormatError, match="line 2"):
        parse_llocs("a\t0\t5\t0.9\t\nb\t6\t9\t0.9\tc=0\n")


def test_malformed_record_reports_line():
    with pytest.raises(LlocsFormatError) as exc:
        parse_llocs("a\t0\t5\t0.9\t\nb\t6\t0.9\t\n")
    assert exc.value.line_no == 2


def test_non_monotone_x_start():
    with pytest.raises(LlocsFormatError, match="x_start"):
        parse_llocs("a\t10\t15\t0.9\t\nb\t5\t9\t0.9\t\n")


def test_alternative_duplicating_top_char_rejected():
    with pytest.raises(LlocsFormatError, match="duplicates"):
        parse_llocs("a\t0\t5\t0.9\ta=0.05\n")


def test_alternatives_sorted_on_parse():
    hyp = parse_llocs("a\t0\t5\t0.9\tb=0.01;c=0.05\n")
    assert [a.char for a in hyp.entries[0].alternatives] == ["c", "b"]


def test_tab_character_is_escaped():
    hyp = LineHypothesis("x\ty", (
        LlocsEntry("x", 0, 4, 0.9),
        LlocsEntry("\t", 5, 9, 0.8, (Alternative(";", 0.1),)),
        LlocsEntry("y", 10, 14, 0.7),
    ))
    raw = write_llocs(hyp)
    assert raw.splitlines()[1] == "\\t\t5\t9\t0.8\t\\;=0.1"
    assert parse_llocs(raw) == hyp


def test_confidence_rendering_trims_zeros():
    raw = write_llocs(LineHypothesis("a", (LlocsEntry("a", 0, 1, 1.0, (Alternative("b", 0.25),)),)))
    assert raw == "a\t0\t1\t1\tb=0.25\n"


@pytest.mark.parametrize("conf", [4e-7, 1e-9])
def test_tiny_confidence_written_as_smallest_positive_value(conf):
    raw = write_llocs(LineHypothesis("a", (LlocsEntry("a", 0, 1, conf),)))
    assert raw == "a\t0\t1\t0.000001\t\n"
    assert parse_llocs(raw).entries[0].conf == pytest.approx(1e-6)


def test_alternatives_below_storage_floor_dropped():
    entry = LlocsEntry("a", 0, 1, 0.99, (Alternative("b", 0.009), Alternative("c", 0.00005)))
    assert write_llocs(LineHypothesis("a", (entry,))) == "a\t0\t1\t0.99\tb=0.009\n"


def test_text_cross_check():
    with pytest.raises(LlocsFormatError, match="text file"):
        parse_llocs(M4_A_RECORD, text="n")


def test_hypothesis_invariants():
    with pytest.raises(VotingDataError):
        LineHypothesis("ab", (LlocsEntry("a", 0, 1, 0.9),))
    with pytest.raises(VotingDataError):
        LineHypothesis("ab", (LlocsEntry("a", 5, 6, 0.9), LlocsEntry("b", 0, 1, 0.9)))
    with pytest.raises(VotingDataError):
        LlocsEntry("a", 5, 4, 0.9)


def test_round_trip_randomized(rng):
    for _ in range(1000):
        hyp = random_hypothesis(rng, ESCAPE_ALPHABET, max_len=10)
        assert parse_llocs(write_llocs(hyp)) == hyp


def test_file_convention(tmp_path):
    hyp = LineHypothesis("a", (M4_A_ENTRY,), "M4")
    write_hypothesis(hyp, tmp_path / "M4" / "0001")
    assert (tmp_path / "M4" / "0001.txt").read_text(encoding="utf-8") == "a\n"
    assert read_hypothesis(tmp_path / "M4" / "0001.txt", model_id="M4") == hyp


def test_missing_llocs_file_gives_text_only(tmp_path):
    (tmp_path / "0001.txt").write_text("inde\n", encoding="utf-8")
    hyp = read_hypothesis(tmp_path / "0001.txt")
    assert hyp.text == "inde"
    assert hyp.entries == ()
    assert not hyp.has_llocs
