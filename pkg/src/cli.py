"""
Command-line front end.

    python src/cli.py folds --n-lines 150 --n-folds 5
    python src/cli.py align m1/0001.txt m2/0001.txt m3/0001.txt
    python src/cli.py vote --mode confidence m1 m2 m3 m4 m5 --out voted.txt
    python src/cli.py eval --gt gt.txt --pred m1.txt --pred m2.txt --voted confidence=voted.txt
    python src/cli.py simulate --n-lines 100 --models 5 --out data/synth
    python src/cli.py pipeline --config pipeline.ini

Exit codes: 0 success, 1 usage error, 2 data error, 3 external command failure.
"""
import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from alignment import align_many, extract_disagreements, render_alignment
from errors import (
    EXIT_DATA,
    EXIT_EXTERNAL,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    ExternalCommandError,
    VotingDataError,
)
from evaluation import ensemble_report, format_report_table, write_report_csv, write_report_meta
from folds import format_fold_plan, make_fold_plan
from llocs_io import LineHypothesis, read_hypothesis, strip_llocs, write_hypothesis
from pipeline import read_gt_file, run_pipeline
from pipeline_config import DEFAULT_ERROR_MODEL, load_config
from synth import ErrorModel, generate_gt_lines, simulate_ensemble
from voting import MODES, VoteConfig, vote_corpus, vote_line

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _read_lines(path: Path) -> List[str]:
    """Prediction lines; unlike GT files, empty lines are kept (a model may read nothing)."""
    lines = [ln.rstrip("\r") for ln in path.read_text(encoding="utf-8").split("\n")]
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _load_hyps(paths: Sequence[str]) -> List[LineHypothesis]:
    hyps = []
    for k, p in enumerate(paths):
        path = Path(p)
        if not path.exists():
            raise FileNotFoundError(f"Missing hypothesis file: {path}")
        hyps.append(read_hypothesis(path, model_id=f"M{k + 1}"))
    return hyps


def _load_hyp_dirs(dirs: Sequence[Path]) -> List[List[LineHypothesis]]:
    """Per line, the hypotheses of every directory; all directories must hold the same line files."""
    stems = [sorted(p.stem for p in d.glob("*.txt")) for d in dirs]
    if any(s != stems[0] for s in stems[1:]):
        raise VotingDataError("hypothesis directories hold different line files")
    return [
        [read_hypothesis(d / f"{stem}.txt", model_id=f"M{k + 1}") for k, d in enumerate(dirs)]
        for stem in stems[0]
    ]


def cmd_folds(args) -> int:
    plan = make_fold_plan(args.n_lines, args.n_folds, args.seed, args.train_extra)
    text = format_fold_plan(plan)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"Wrote: {args.out}")
    else:
        sys.stdout.write(text)
    for split in plan.splits:
        logger.info("fold %d: train %d / test %d", split.fold + 1, len(split.train), len(split.test))
    return EXIT_OK


def cmd_align(args) -> int:
    hyps = _load_hyps(args.files)
    aligned = align_many(hyps)
    regions = extract_disagreements(aligned, hyps)
    print(render_alignment(aligned, regions, header=args.header))
    return EXIT_OK


def cmd_vote(args) -> int:
    cfg = VoteConfig(args.mode, args.alt_threshold, args.rec_only)
    paths = [Path(p) for p in args.inputs]

    if all(p.is_dir() for p in paths):
        per_line = _load_hyp_dirs(paths)
        if args.text_only:
            per_line = [strip_llocs(hyps) for hyps in per_line]
        results = vote_corpus(per_line, cfg, args.workers)
    else:
        hyps = _load_hyps(args.inputs)
        results = [vote_line(strip_llocs(hyps) if args.text_only else hyps, cfg)]

    text = "".join(r.text + "\n" for r in results)
    for k, r in enumerate(results):
        for w in r.warnings:
            logger.warning("line %d: %s", k, w)
        if args.show_regions:
            for region in r.per_region:
                logger.info("line %d region {%d}: %r from inputs %s", k, region.region_id, region.chosen,
                            [i + 1 for i in region.survivors])

    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"Wrote: {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    gt = read_gt_file(Path(args.gt))
    preds = [_read_lines(Path(p)) for p in args.pred]

    voted = {}
    for item in args.voted:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = "voted", item
        voted[label] = _read_lines(Path(path))

    report = ensemble_report(gt, preds, voted, model_ids=[Path(p).stem for p in args.pred])
    print(format_report_table(report), end="")
    if args.csv:
        write_report_csv(report, args.csv)
        print(f"Wrote: {args.csv}")
    if args.meta:
        write_report_meta(report, args.meta)
        print(f"Wrote: {args.meta}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.config:
        models = list(load_config(args.config).fold_models())
    else:
        model = ErrorModel(
            sub_rate=args.sub_rate if args.sub_rate is not None else DEFAULT_ERROR_MODEL.sub_rate,
            ins_rate=args.ins_rate if args.ins_rate is not None else DEFAULT_ERROR_MODEL.ins_rate,
            del_rate=args.del_rate if args.del_rate is not None else DEFAULT_ERROR_MODEL.del_rate,
        )
        models = [model] * args.models

    if args.gt:
        gt = read_gt_file(Path(args.gt))
    else:
        gt = generate_gt_lines(args.n_lines, args.seed, line_length=args.line_length)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gt.txt").write_text("".join(line + "\n" for line in gt), encoding="utf-8")

    corpora = simulate_ensemble(gt, models, args.seed)
    for corpus in corpora:
        for k, hyp in enumerate(corpus):
            write_hypothesis(hyp, out / hyp.model_id / f"{k:04d}")
        (out / f"{corpus[0].model_id}.txt").write_text("".join(h.text + "\n" for h in corpus), encoding="utf-8")

    print(f"Wrote {len(corpora)} x {len(gt)} lines to {out}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    overrides = {
        "n_folds": args.n_folds,
        "n_lines": args.n_lines,
        "n_eval_lines": args.n_eval_lines,
        "mode": args.mode,
        "alt_threshold": args.alt_threshold,
        "rec_only": True if args.rec_only else None,
        "base_seed": args.seed,
        "shuffle_seed": args.shuffle_seed,
        "train_extra": args.train_extra,
        "workers": args.workers,
        "output_dir": Path(args.out) if args.out else None,
        "trainer_command": args.trainer_command,
    }
    cfg = load_config(args.config, overrides)

    started = time.perf_counter()
    outcome = run_pipeline(cfg)
    elapsed = time.perf_counter() - started

    print(format_report_table(outcome.report), end="")
    for name, path in outcome.paths.items():
        print(f"Wrote: {path}")
    print(f"Elapsed: {elapsed:.1f}s")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(description="Cross-fold OCR ensemble voting: folds, alignment, voting, evaluation.")
    ap.add_argument("--verbose", action="store_true", help="Debug logging.")
    ap.add_argument("--quiet", action="store_true", help="Only warnings and errors.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("folds", help="Emit a fold plan as 'line_id<TAB>fold_id' rows.")
    p.add_argument("--n-lines", type=int, required=True)
    p.add_argument("--n-folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=None, help="Shuffle lines with this seed before blocking.")
    p.add_argument("--train-extra", type=int, default=0,
                   help="Test lines moved to training per split (the '5+' scheme).")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("align", help="Render the alignment of one line's hypothesis files.")
    p.add_argument("files", nargs="+", help="Hypothesis .txt files (an adjacent .llocs is optional).")
    p.add_argument("--header", action="store_true", help="Prefix 'Aligned: ' and add a rule line.")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("vote", help="Combine hypotheses of one line (files) or of a corpus (directories).")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--mode", choices=MODES, default="confidence")
    p.add_argument("--alt-threshold", type=float, default=0.01)
    p.add_argument("--rec-only", action="store_true", help="Ignore alternatives in confidence mode.")
    p.add_argument("--text-only", action="store_true", help="Ignore .llocs files, as for an engine without confidence output.")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--show-regions", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("eval", help="CER, improvement and chi-square report.")
    p.add_argument("--gt", required=True, help="One GT line per line.")
    p.add_argument("--pred", action="append", required=True, help="Single-model predictions (repeatable).")
    p.add_argument("--voted", action="append", required=True, help="[label=]path of voted predictions (repeatable).")
    p.add_argument("--csv", default=None)
    p.add_argument("--meta", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="Write synthetic model outputs (text + llocs) for GT lines.")
    p.add_argument("--gt", default=None, help="GT file; generated when omitted.")
    p.add_argument("--n-lines", type=int, default=100)
    p.add_argument("--line-length", type=int, default=40)
    p.add_argument("--models", type=int, default=5)
    p.add_argument("--sub-rate", type=float, default=None)
    p.add_argument("--ins-rate", type=float, default=None)
    p.add_argument("--del-rate", type=float, default=None)
    p.add_argument("--config", default=None, help="Read [model.<k>] sections from this config.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="End-to-end run: folds, models, voting, report.")
    p.add_argument("--config", default=None)
    p.add_argument("--n-folds", type=int, default=None)
    p.add_argument("--n-lines", type=int, default=None)
    p.add_argument("--n-eval-lines", type=int, default=None)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--alt-threshold", type=float, default=None)
    p.add_argument("--rec-only", action="store_true")
    p.add_argument("--seed", type=int, default=None, help="base_seed")
    p.add_argument("--shuffle-seed", type=int, default=None)
    p.add_argument("--train-extra", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--trainer-command", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pipeline)

    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except (VotingDataError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_DATA
    except ExternalCommandError as e:
        logger.error("%s", e)
        return EXIT_EXTERNAL
    except ValueError as e:
        # remaining precondition violations come from command-line values
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
