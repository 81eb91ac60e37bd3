"""
End-to-end workflow: fold planning, per-fold models (external trainer or synthetic
channel), best-model selection on each fold's test lines, voting over the held-out
evaluation lines and the ensemble report.
"""
import csv
import logging
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from alignment import render_alignment
from errors import ExternalCommandError, VotingDataError
from evaluation import (
    EnsembleReport,
    corpus_cer,
    ensemble_report,
    format_report_table,
    write_report_csv,
    write_report_meta,
)
from folds import FoldPlan, format_fold_plan, make_fold_plan, select_best_model
from llocs_io import LineHypothesis, read_hypothesis, write_hypothesis
from pipeline_config import PipelineConfig
from synth import ErrorModel, generate_gt_lines, line_seed, simulate_ensemble, simulate_model_line
from voting import VoteConfig, VoteResult, vote_corpus

logger = logging.getLogger(__name__)

# Synthetic training candidates scale their fold's error rates by a factor in this range
CANDIDATE_RATE_RANGE = (0.75, 1.25)


@dataclass
class PipelineOutcome:
    report: EnsembleReport
    plan: FoldPlan
    eval_gt: List[str]
    per_model: List[List[LineHypothesis]]
    votes: Dict[str, List[VoteResult]]
    primary: str
    paths: Dict[str, Path] = field(default_factory=dict)

    @property
    def voted_texts(self) -> List[str]:
        return [v.text for v in self.votes[self.primary]]


def read_gt_file(path: Path, n_lines: Optional[int] = None) -> List[str]:
    """Non-empty GT lines of a file; the first ``n_lines`` of them, or all when None."""
    lines = [ln.rstrip("\r\n") for ln in path.read_text(encoding="utf-8").split("\n")]
    lines = [ln for ln in lines if ln]
    if n_lines is None:
        return lines
    if len(lines) < n_lines:
        raise VotingDataError(f"{path} holds {len(lines)} GT lines, {n_lines} requested")
    return lines[:n_lines]


def load_gt(cfg: PipelineConfig) -> Tuple[List[str], List[str]]:
    """GT pool for the folds and held-out evaluation GT."""
    if cfg.gt_file is not None:
        pool = read_gt_file(cfg.gt_file, cfg.n_lines)
    else:
        pool = generate_gt_lines(cfg.n_lines, cfg.base_seed, line_length=cfg.line_length)
    if cfg.eval_gt_file is not None:
        held_out = read_gt_file(cfg.eval_gt_file, cfg.n_eval_lines)
    else:
        held_out = generate_gt_lines(cfg.n_eval_lines, cfg.base_seed + 1, line_length=cfg.line_length)
    return pool, held_out


def candidate_model(model: ErrorModel, base_seed: int, candidate_index: int) -> ErrorModel:
    """A synthetic training outcome: the fold's error model with rescaled rates."""
    rng = np.random.default_rng(np.random.SeedSequence([base_seed, candidate_index, 0x63]))
    factor = float(rng.uniform(*CANDIDATE_RATE_RANGE))
    return replace(
        model,
        sub_rate=model.sub_rate * factor,
        ins_rate=model.ins_rate * factor,
        del_rate=model.del_rate * factor,
    )


def _synth_fold_models(
    cfg: PipelineConfig, plan: FoldPlan, pool: Sequence[str], eval_gt: Sequence[str]
) -> Tuple[List[List[LineHypothesis]], List[dict]]:
    per_model: List[List[LineHypothesis]] = []
    selection: List[dict] = []
    for split, model in zip(plan.splits, cfg.fold_models()):
        test_gt = [pool[i] for i in split.test]
        candidates = []
        test_preds = []
        for c in range(cfg.candidates_per_fold):
            index = split.fold * cfg.candidates_per_fold + c
            cand = candidate_model(model, cfg.base_seed, index)
            candidates.append((index, cand))
            test_preds.append([
                simulate_model_line(pool[i], cand, line_seed(cfg.base_seed, index, i)).text for i in split.test
            ])

        best = select_best_model(test_gt, test_preds)
        for c, preds in enumerate(test_preds):
            selection.append({
                "fold": split.fold + 1,
                "candidate": c + 1,
                "test_cer": f"{corpus_cer(test_gt, preds).cer:.6f}",
                "chosen": int(c == best),
            })

        index, cand = candidates[best]
        mid = f"M{split.fold + 1}"
        per_model.append(simulate_ensemble(
            eval_gt, [cand], cfg.base_seed, line_offset=len(pool), model_ids=[mid], model_offset=index
        )[0])
        logger.info("Fold %d: candidate %d of %d selected", split.fold + 1, best + 1, cfg.candidates_per_fold)
    return per_model, selection


def _write_lines(path: Path, rows: Sequence[Tuple[int, str]]) -> None:
    path.write_text("".join(f"{i}\t{text}\n" for i, text in rows), encoding="utf-8")


def run_external(command: Sequence[str]) -> None:
    """
    Run one trainer invocation in the current working directory; a non-zero exit status
    raises ExternalCommandError.
    """
    logger.info("Running: %s", " ".join(command))
    proc = subprocess.run(list(command))
    if proc.returncode != 0:
        raise ExternalCommandError(command, proc.returncode)


def _trainer_fold_models(
    cfg: PipelineConfig, plan: FoldPlan, pool: Sequence[str], eval_gt: Sequence[str]
) -> Tuple[List[List[LineHypothesis]], List[dict]]:
    """
    Invoke the trainer command once per fold. The template may use ``{fold}``, ``{train}``,
    ``{test}``, ``{eval}`` and ``{out}``; list files hold ``line_id TAB text`` rows.

    The command must leave one directory per trained candidate under ``{out}``, each with
    ``test/<line_id>.txt`` for the fold's test lines and ``eval/<k>.txt`` (+ ``.llocs``) for
    the evaluation lines, ids zero-padded to four digits.
    The command runs in the caller's working directory.
    """
    # paths handed to the trainer are absolute
    root = cfg.output_dir.resolve() / "training"
    jobs = []
    for split in plan.splits:
        fold_dir = root / f"fold_{split.fold + 1}"
        out_dir = fold_dir / "models"
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_lines(fold_dir / "train.txt", [(i, pool[i]) for i in split.train])
        _write_lines(fold_dir / "test.txt", [(i, pool[i]) for i in split.test])
        _write_lines(fold_dir / "eval.txt", list(enumerate(eval_gt)))
        command = [
            part.format(
                fold=split.fold + 1,
                train=fold_dir / "train.txt",
                test=fold_dir / "test.txt",
                eval=fold_dir / "eval.txt",
                out=out_dir,
            )
            for part in shlex.split(cfg.trainer_command)
        ]
        jobs.append((split, out_dir, command))

    with ThreadPoolExecutor(max_workers=cfg.trainer_workers) as pool_exec:
        # list() re-raises the first failure
        list(pool_exec.map(lambda job: run_external(job[2]), jobs))

    per_model: List[List[LineHypothesis]] = []
    selection: List[dict] = []
    for split, out_dir, _ in jobs:
        cand_dirs = sorted(p for p in out_dir.iterdir() if p.is_dir())
        if not cand_dirs:
            raise VotingDataError(f"Trainer produced no model directories in {out_dir}")

        test_gt = [pool[i] for i in split.test]
        test_preds = []
        for cand in cand_dirs:
            try:
                test_preds.append([
                    read_hypothesis(cand / "test" / f"{i:04d}.txt").text for i in split.test
                ])
            except FileNotFoundError as e:
                raise VotingDataError(f"Missing trainer output: {e.filename}")

        best = select_best_model(test_gt, test_preds)
        for c, (cand, preds) in enumerate(zip(cand_dirs, test_preds)):
            selection.append({
                "fold": split.fold + 1,
                "candidate": cand.name,
                "test_cer": f"{corpus_cer(test_gt, preds).cer:.6f}",
                "chosen": int(c == best),
            })

        mid = f"M{split.fold + 1}"
        try:
            per_model.append([
                read_hypothesis(cand_dirs[best] / "eval" / f"{k:04d}.txt", model_id=mid)
                for k in range(len(eval_gt))
            ])
        except FileNotFoundError as e:
            raise VotingDataError(f"Missing trainer output: {e.filename}")
        logger.info("Fold %d: %s selected", split.fold + 1, cand_dirs[best].name)
    return per_model, selection


def run_pipeline(cfg: PipelineConfig) -> PipelineOutcome:
    """
    Run the whole workflow and write its report files into ``cfg.output_dir``.

    Outputs depend only on the config (and base_seed); nothing time-dependent is written.
    """
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    pool, eval_gt = load_gt(cfg)
    plan = make_fold_plan(len(pool), cfg.n_folds, cfg.shuffle_seed, cfg.train_extra)
    paths = {"folds": out / "folds.tsv"}
    paths["folds"].write_text(format_fold_plan(plan), encoding="utf-8")

    if cfg.uses_trainer:
        per_model, selection = _trainer_fold_models(cfg, plan, pool, eval_gt)
    else:
        per_model, selection = _synth_fold_models(cfg, plan, pool, eval_gt)

    paths["selection"] = out / "selection.csv"
    with open(paths["selection"], "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["fold", "candidate", "test_cer", "chosen"])
        writer.writeheader()
        writer.writerows(selection)

    for corpus in per_model:
        for k, hyp in enumerate(corpus):
            write_hypothesis(hyp, out / "hypotheses" / hyp.model_id / f"{k:04d}")

    per_line = [list(line) for line in zip(*per_model)]
    configs = {
        "vote_majority": VoteConfig("majority"),
        "vote_confidence": VoteConfig("confidence", cfg.vote.alt_threshold, cfg.vote.rec_only),
    }
    primary = f"vote_{cfg.vote.mode}"
    votes = {label: vote_corpus(per_line, vcfg, cfg.workers) for label, vcfg in configs.items()}

    model_ids = [corpus[0].model_id if corpus else f"M{k + 1}" for k, corpus in enumerate(per_model)]
    report = ensemble_report(
        eval_gt,
        [[h.text for h in corpus] for corpus in per_model],
        {label: [v.text for v in results] for label, results in votes.items()},
        model_ids=model_ids,
    )
    for k, result in enumerate(votes[primary]):
        report.warnings.extend(f"line {k}: {w}" for w in result.warnings)

    paths["voted"] = out / "voted.txt"
    paths["voted"].write_text("".join(v.text + "\n" for v in votes[primary]), encoding="utf-8")

    paths["alignments"] = out / "alignments.txt"
    blocks = []
    for k, result in enumerate(votes[primary]):
        if result.regions:
            blocks.append(f"# line {k}\n{render_alignment(result.aligned, result.regions, model_ids)}\n")
    paths["alignments"].write_text("".join(blocks), encoding="utf-8")

    paths["report"] = out / "report.txt"
    paths["report"].write_text(format_report_table(report), encoding="utf-8")
    paths["report_csv"] = out / "report.csv"
    write_report_csv(report, paths["report_csv"])
    paths["report_meta"] = out / "report_meta.json"
    write_report_meta(report, paths["report_meta"], extra={
        "primary_vote": primary,
        "n_folds": cfg.n_folds,
        "n_lines": len(pool),
        "n_eval_lines": len(eval_gt),
        "train_extra": cfg.train_extra,
        "base_seed": cfg.base_seed,
        "source": "trainer" if cfg.uses_trainer else "synth",
    })

    return PipelineOutcome(report, plan, eval_gt, per_model, votes, primary, paths)
