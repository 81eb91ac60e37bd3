"""
Extended llocs records: one recognized character per line with its pixel span,
confidence and the alternative characters the recognizer also considered.

Record grammar (UTF-8, newline separated):

    <char> TAB <x_start> TAB <x_end> TAB <conf> TAB <alts>

``<alts>`` holds zero or more ``<char>=<conf>`` items joined by ``;``. Characters
are escaped as ``\\t``, ``\\n``, ``\\\\``, ``\\;`` and ``\\=``. Confidences are
fractions in (0, 1], never percentages.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from errors import LlocsFormatError, VotingDataError

logger = logging.getLogger(__name__)

# Writers may drop alternatives below this; voting only looks above 1%
STORAGE_FLOOR = 0.0001

# Confidences are written with this many decimals
CONF_DECIMALS = 6
CONF_RESOLUTION = 10.0 ** -CONF_DECIMALS

_ESCAPES = {"\t": "\\t", "\n": "\\n", "\\": "\\\\", ";": "\\;", "=": "\\="}
_UNESCAPES = {"t": "\t", "n": "\n", "\\": "\\", ";": ";", "=": "="}


@dataclass(frozen=True)
class Alternative:
    char: str
    conf: float

    def __post_init__(self):
        if len(self.char) != 1:
            raise VotingDataError(f"Alternative must be a single character, got {self.char!r}")
        if not 0.0 < self.conf <= 1.0:
            raise VotingDataError(f"confidence out of range: {self.conf!r}")


@dataclass(frozen=True)
class LlocsEntry:
    """
    One recognized character.

    :param char: Most likely character at this position
    :param x_start: Pixel column where the glyph starts
    :param x_end: Pixel column where the glyph ends
    :param conf: Confidence of ``char``
    :param alternatives: Other candidates, sorted by descending confidence
    """
    char: str
    x_start: int
    x_end: int
    conf: float
    alternatives: Tuple[Alternative, ...] = ()

    def __post_init__(self):
        if len(self.char) != 1:
            raise VotingDataError(f"llocs char must be a single character, got {self.char!r}")
        if self.x_start < 0 or self.x_start > self.x_end:
            raise VotingDataError(f"invalid pixel span {self.x_start}..{self.x_end}")
        if not 0.0 < self.conf <= 1.0:
            raise VotingDataError(f"confidence out of range: {self.conf!r}")

        seen = set()
        for alt in self.alternatives:
            if alt.char == self.char:
                raise VotingDataError(f"alternative duplicates the recognized character {self.char!r}")
            if alt.char in seen:
                raise VotingDataError(f"duplicate alternative {alt.char!r}")
            seen.add(alt.char)

        confs = [a.conf for a in self.alternatives]
        if any(a < b for a, b in zip(confs, confs[1:])):
            raise VotingDataError("alternatives must be sorted by descending confidence")


@dataclass(frozen=True)
class LineHypothesis:
    """
    One model's reading of one text line.

    ``entries`` is empty when the model delivered plain text without llocs;
    otherwise it holds exactly one entry per character of ``text``.
    """
    text: str
    entries: Tuple[LlocsEntry, ...] = ()
    model_id: str = ""

    def __post_init__(self):
        if not self.entries:
            return
        if "".join(e.char for e in self.entries) != self.text:
            raise VotingDataError(f"llocs characters do not spell the line text {self.text!r}")
        starts = [e.x_start for e in self.entries]
        if any(a > b for a, b in zip(starts, starts[1:])):
            raise VotingDataError("llocs entries must be non-decreasing in x_start")

    @property
    def has_llocs(self) -> bool:
        return bool(self.entries) or not self.text


def escape_char(ch: str) -> str:
    return _ESCAPES.get(ch, ch)


def _unescape(field: str, line_no: int) -> str:
    out: List[str] = []
    i = 0
    while i < len(field):
        ch = field[i]
        if ch == "\\":
            if i + 1 >= len(field) or field[i + 1] not in _UNESCAPES:
                raise LlocsFormatError(f"bad escape sequence in {field!r}", line_no)
            out.append(_UNESCAPES[field[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _split_unescaped(field: str, sep: str) -> List[str]:
    """Split on ``sep`` where it is not preceded by an escaping backslash."""
    parts: List[str] = []
    cur: List[str] = []
    i = 0
    while i < len(field):
        ch = field[i]
        if ch == "\\" and i + 1 < len(field):
            cur.append(field[i:i + 2])
            i += 2
            continue
        if ch == sep:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    parts.append("".join(cur))
    return parts


def _parse_conf(raw: str, line_no: int) -> float:
    try:
        conf = float(raw)
    except ValueError:
        raise LlocsFormatError(f"confidence is not a number: {raw!r}", line_no)
    if not 0.0 < conf <= 1.0:
        raise LlocsFormatError(f"confidence out of range: {raw}", line_no)
    return conf


def _parse_int(raw: str, what: str, line_no: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise LlocsFormatError(f"{what} is not an integer: {raw!r}", line_no)


def _parse_record(record: str, line_no: int) -> LlocsEntry:
    fields = record.split("\t")
    if len(fields) != 5:
        raise LlocsFormatError(f"expected 5 tab-separated fields, got {len(fields)}", line_no)

    char_raw, xs_raw, xe_raw, conf_raw, alts_raw = fields
    char = _unescape(char_raw, line_no)
    if len(char) != 1:
        raise LlocsFormatError(f"char field must hold one character, got {char!r}", line_no)

    x_start = _parse_int(xs_raw, "x_start", line_no)
    x_end = _parse_int(xe_raw, "x_end", line_no)
    if x_start < 0 or x_start > x_end:
        raise LlocsFormatError(f"invalid pixel span {x_start}..{x_end}", line_no)
    conf = _parse_conf(conf_raw, line_no)

    alternatives: List[Alternative] = []
    if alts_raw:
        for item in _split_unescaped(alts_raw, ";"):
            pieces = _split_unescaped(item, "=")
            if len(pieces) != 2:
                raise LlocsFormatError(f"malformed alternative {item!r}", line_no)
            alt_char = _unescape(pieces[0], line_no)
            if len(alt_char) != 1:
                raise LlocsFormatError(f"alternative must be one character, got {alt_char!r}", line_no)
            if alt_char == char:
                raise LlocsFormatError(f"alternative duplicates the recognized character {char!r}", line_no)
            alternatives.append(Alternative(alt_char, _parse_conf(pieces[1], line_no)))

    alternatives.sort(key=lambda a: -a.conf)
    try:
        return LlocsEntry(char, x_start, x_end, conf, tuple(alternatives))
    except VotingDataError as e:
        raise LlocsFormatError(str(e), line_no)


def parse_llocs(raw: str, model_id: str = "", text: Optional[str] = None) -> LineHypothesis:
    """
    Parse an extended llocs document into a LineHypothesis.

    :param raw: Document contents
    :param model_id: Label of the model that produced the line
    :param text: Optional companion text to cross-check against the records
    :raises LlocsFormatError: On malformed records, non-monotone x_start or out-of-range confidences
    """
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    entries: List[LlocsEntry] = []
    for line_no, record in enumerate(lines, start=1):
        entry = _parse_record(record.rstrip("\r"), line_no)
        if entries and entry.x_start < entries[-1].x_start:
            raise LlocsFormatError(
                f"x_start {entry.x_start} is smaller than the previous {entries[-1].x_start}", line_no
            )
        entries.append(entry)

    spelled = "".join(e.char for e in entries)
    if text is not None and text != spelled:
        raise LlocsFormatError(f"llocs spell {spelled!r} but the text file says {text!r}")
    return LineHypothesis(spelled, tuple(entries), model_id)


def format_conf(conf: float) -> str:
    """Shortest decimal form at CONF_DECIMALS; positive values never render below CONF_RESOLUTION."""
    return f"{max(conf, CONF_RESOLUTION):.{CONF_DECIMALS}f}".rstrip("0").rstrip(".")


def write_llocs(hyp: LineHypothesis) -> str:
    records = []
    for e in hyp.entries:
        alts = ";".join(
            f"{escape_char(a.char)}={format_conf(a.conf)}"
            for a in e.alternatives
            if a.conf >= STORAGE_FLOOR
        )
        records.append(f"{escape_char(e.char)}\t{e.x_start}\t{e.x_end}\t{format_conf(e.conf)}\t{alts}\n")
    return "".join(records)


def read_hypothesis(
    txt_path: Union[str, Path],
    llocs_path: Union[str, Path, None] = None,
    model_id: str = "",
) -> LineHypothesis:
    """
    Read one line following the ``0001.txt`` / ``0001.llocs`` convention.

    A missing llocs file yields a text-only hypothesis (no entries).
    """
    txt_path = Path(txt_path)
    text = txt_path.read_text(encoding="utf-8").rstrip("\r\n")
    llocs_path = Path(llocs_path) if llocs_path is not None else txt_path.with_suffix(".llocs")

    if not llocs_path.exists():
        logger.debug("No llocs next to %s", txt_path)
        return LineHypothesis(text, (), model_id)

    raw = llocs_path.read_text(encoding="utf-8")
    try:
        return parse_llocs(raw, model_id=model_id, text=text)
    except LlocsFormatError as e:
        raise LlocsFormatError(f"{llocs_path}: {e}")


def write_hypothesis(hyp: LineHypothesis, stem: Union[str, Path]) -> None:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".txt").write_text(hyp.text + "\n", encoding="utf-8")
    if hyp.entries:
        stem.with_suffix(".llocs").write_text(write_llocs(hyp), encoding="utf-8")


def strip_llocs(hyps: Sequence[LineHypothesis]) -> List[LineHypothesis]:
    """Text-only copies, as delivered by an engine without confidence output."""
    return [LineHypothesis(h.text, (), h.model_id) for h in hyps]
