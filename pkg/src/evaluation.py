"""
Edit distance, character error rates, improvement of a voted output over single
models, and the chi-square test on error counts.
"""
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import Levenshtein
from scipy.special import erfc

from errors import DegenerateTableError, VotingDataError

logger = logging.getLogger(__name__)

SIGNIFICANCE_UNIT = "characters"
SIGNIFICANCE_LEVEL = 0.001

CSV_FIELDS = ["model_id", "cer", "improvement_best", "improvement_avg", "improvement_worst", "chi2", "p"]


@dataclass(frozen=True)
class CerReport:
    per_line: Tuple[Tuple[int, int], ...]
    total_errors: int
    total_chars: int

    @property
    def cer(self) -> float:
        return self.total_errors / self.total_chars


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float

    def significant(self, level: float = SIGNIFICANCE_LEVEL) -> bool:
        return self.p_value < level


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit costs."""
    return Levenshtein.distance(a, b)


def compute_cer(gt: str, pred: str) -> float:
    if not gt:
        raise VotingDataError("undefined CER: empty ground truth")
    return edit_distance(gt, pred) / len(gt)


def corpus_cer(gt_lines: Sequence[str], pred_lines: Sequence[str]) -> CerReport:
    """
    Micro-averaged CER: total errors over total GT characters.

    :raises VotingDataError: On a line count mismatch or an empty GT line
    """
    if len(gt_lines) != len(pred_lines):
        raise VotingDataError(f"line count mismatch: {len(gt_lines)} GT lines vs {len(pred_lines)} predictions")

    per_line = []
    for k, (gt, pred) in enumerate(zip(gt_lines, pred_lines)):
        if not gt:
            raise VotingDataError(f"undefined CER: GT line {k} is empty")
        per_line.append((edit_distance(gt, pred), len(gt)))

    if not per_line:
        raise VotingDataError("undefined CER: no lines")

    return CerReport(
        per_line=tuple(per_line),
        total_errors=sum(e for e, _ in per_line),
        total_chars=sum(n for _, n in per_line),
    )


def improvement_rate(base_cer: float, voted_cer: float) -> float:
    if base_cer <= 0:
        raise ValueError("improvement rate is undefined for a base CER of 0")
    return (base_cer - voted_cer) / base_cer


def chi_square_errors(err_a: int, n_a: int, err_b: int, n_b: int) -> SignificanceResult:
    """
    2x2 chi-square test (errors vs correct characters, no continuity correction, 1 dof).

    :param err_a: Error count of group a
    :param n_a: Number of characters of group a
    :param err_b: Error count of group b
    :param n_b: Number of characters of group b
    :raises DegenerateTableError: When the error or the correct column is empty
    """
    for err, n in ((err_a, n_a), (err_b, n_b)):
        if n <= 0 or not 0 <= err <= n:
            raise ValueError(f"invalid error count {err} of {n}")

    a, b = err_a, n_a - err_a
    c, d = err_b, n_b - err_b
    margins = (a + b) * (c + d) * (a + c) * (b + d)
    if margins == 0:
        raise DegenerateTableError(f"degenerate contingency table [[{a}, {b}], [{c}, {d}]]")

    total = a + b + c + d
    statistic = total * (a * d - b * c) ** 2 / margins
    p_value = float(erfc(math.sqrt(statistic / 2.0)))
    return SignificanceResult(statistic, p_value)


@dataclass(frozen=True)
class ReportRow:
    model_id: str
    cer: float
    errors: int
    chars: int
    improvement_best: Optional[float] = None
    improvement_avg: Optional[float] = None
    improvement_worst: Optional[float] = None
    chi2: Optional[float] = None
    p: Optional[float] = None
    voted: bool = False


@dataclass
class EnsembleReport:
    rows: List[ReportRow]
    best_cer: float
    avg_cer: float
    worst_cer: float
    vs_average: Dict[str, Optional[SignificanceResult]] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    significance_unit: str = SIGNIFICANCE_UNIT

    @property
    def model_rows(self) -> List[ReportRow]:
        return [r for r in self.rows if not r.voted]

    @property
    def voted_rows(self) -> List[ReportRow]:
        return [r for r in self.rows if r.voted]


def _safe_improvement(base: float, voted: float) -> Optional[float]:
    return improvement_rate(base, voted) if base > 0 else None


def _safe_chi(err_a: int, n_a: int, err_b: int, n_b: int) -> Optional[SignificanceResult]:
    try:
        return chi_square_errors(err_a, n_a, err_b, n_b)
    except DegenerateTableError as e:
        logger.info("No chi-square result: %s", e)
        return None


def ensemble_report(
    gt: Sequence[str],
    per_model_preds: Sequence[Sequence[str]],
    voted_preds: Union[Sequence[str], Mapping[str, Sequence[str]]],
    model_ids: Optional[Sequence[str]] = None,
) -> EnsembleReport:
    """
    CER of every single model and every voted output, with the improvement of each voted
    output over the best, average and worst model and its chi-square test against the
    best model. Significance against the average model is kept in ``vs_average``.

    :param gt: GT lines
    :param per_model_preds: Per model, one prediction per GT line
    :param voted_preds: Voted predictions, or a mapping label -> predictions
    :param model_ids: Labels for the models (default M1..MN)
    """
    if not per_model_preds:
        raise VotingDataError("ensemble report needs at least one model")
    if model_ids is None:
        model_ids = [f"M{k + 1}" for k in range(len(per_model_preds))]
    if isinstance(voted_preds, Mapping):
        voted = dict(voted_preds)
    else:
        voted = {"voted": voted_preds}

    model_reports = [corpus_cer(gt, preds) for preds in per_model_preds]
    rows = [
        ReportRow(mid, rep.cer, rep.total_errors, rep.total_chars)
        for mid, rep in zip(model_ids, model_reports)
    ]

    cers = [rep.cer for rep in model_reports]
    best_idx = min(range(len(cers)), key=lambda k: (cers[k], k))
    best, worst = cers[best_idx], max(cers)
    avg = sum(cers) / len(cers)
    n_chars = model_reports[0].total_chars
    avg_errors = round(sum(rep.total_errors for rep in model_reports) / len(model_reports))

    vs_average: Dict[str, Optional[SignificanceResult]] = {}
    for label, preds in voted.items():
        rep = corpus_cer(gt, preds)
        sig = _safe_chi(rep.total_errors, rep.total_chars, model_reports[best_idx].total_errors, n_chars)
        rows.append(ReportRow(
            model_id=label,
            cer=rep.cer,
            errors=rep.total_errors,
            chars=rep.total_chars,
            improvement_best=_safe_improvement(best, rep.cer),
            improvement_avg=_safe_improvement(avg, rep.cer),
            improvement_worst=_safe_improvement(worst, rep.cer),
            chi2=sig.statistic if sig else None,
            p=sig.p_value if sig else None,
            voted=True,
        ))
        vs_average[label] = _safe_chi(rep.total_errors, rep.total_chars, avg_errors, n_chars)

    return EnsembleReport(rows, best, avg, worst, vs_average)


def _fmt(value: Optional[float], spec: str) -> str:
    return "n/a" if value is None else format(value, spec)


def format_report_table(report: EnsembleReport) -> str:
    header = f"{'model':<12} {'CER':>8} {'best':>7} {'avg':>7} {'worst':>7} {'chi2':>10} {'p':>10}"
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(
            f"{r.model_id:<12} {r.cer:>8.2%} "
            f"{_fmt(r.improvement_best, '.0%'):>7} {_fmt(r.improvement_avg, '.0%'):>7} "
            f"{_fmt(r.improvement_worst, '.0%'):>7} {_fmt(r.chi2, '.2f'):>10} {_fmt(r.p, '.2e'):>10}"
        )
    lines.append("-" * len(header))
    lines.append(f"single models: best {report.best_cer:.2%}, avg {report.avg_cer:.2%}, worst {report.worst_cer:.2%}")
    for label, sig in report.vs_average.items():
        if sig is None:
            lines.append(f"{label} vs average model: n/a")
        else:
            verdict = "significant" if sig.significant() else "not significant"
            lines.append(
                f"{label} vs average model: chi2={sig.statistic:.2f} p={sig.p_value:.2e} "
                f"({verdict} at {SIGNIFICANCE_LEVEL}, unit: {report.significance_unit})"
            )
    for w in report.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def write_report_csv(report: EnsembleReport, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in report.rows:
            writer.writerow({
                "model_id": r.model_id,
                "cer": f"{r.cer:.6f}",
                "improvement_best": _fmt(r.improvement_best, ".4f"),
                "improvement_avg": _fmt(r.improvement_avg, ".4f"),
                "improvement_worst": _fmt(r.improvement_worst, ".4f"),
                "chi2": _fmt(r.chi2, ".4f"),
                "p": _fmt(r.p, ".4e"),
            })


def write_report_meta(report: EnsembleReport, path: Union[str, Path], extra: Optional[dict] = None) -> None:
    meta = {
        "significance_unit": report.significance_unit,
        "significance_level": SIGNIFICANCE_LEVEL,
        "chi2_reference": "best single model",
        "best_cer": round(report.best_cer, 6),
        "avg_cer": round(report.avg_cer, 6),
        "worst_cer": round(report.worst_cer, 6),
        "vs_average_model": {
            label: None if sig is None else {"chi2": round(sig.statistic, 6), "p": float(f"{sig.p_value:.6e}")}
            for label, sig in report.vs_average.items()
        },
        "totals": {r.model_id: {"errors": r.errors, "chars": r.chars} for r in report.rows},
        "warnings": report.warnings,
    }
    if extra:
        meta.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, ensure_ascii=False, sort_keys=True)
        f.write("\n")
