import argparse
import configparser
import csv
import json
import subprocess
import sys
from pathlib import Path

"""
Runs the end-to-end pipeline for a grid of line counts, fold counts and seeds, the way the
lines/folds experiments sweep them. Each run goes through `src/cli.py pipeline`; one row per
run is appended to data/trial_results.csv.
"""

root = Path(__file__).resolve().parent

cli_script = root / "src" / "cli.py"


def run(script: Path, extra_args=None):
    extra_args = extra_args or []
    if not script.exists():
        raise FileNotFoundError(f"Missing script: {script}")

    print(f"\n--- Running: {script.relative_to(root)} {' '.join(extra_args)} ---")
    cmd = [sys.executable, str(script)] + extra_args
    return subprocess.run(
        cmd,
        cwd=str(root),
        check=True,
        text=True,
        capture_output=True,
    )


def config_model_count(config_path: Path) -> int:
    """Number of [model.<k>] sections in a pipeline config."""
    parser = configparser.ConfigParser()
    if not parser.read(config_path, encoding="utf-8"):
        raise FileNotFoundError(f"Missing config: {config_path}")
    return sum(1 for s in parser.sections() if s.startswith("model."))


def unsupported_fold_counts(n_models: int, fold_counts) -> list:
    """Fold counts a config with `n_models` error models cannot drive (it needs 0, 1 or one per fold)."""
    return [n for n in fold_counts if n_models not in (0, 1, n)]


def matched_train_extra(n_lines: int, n_folds: int, match_folds: int) -> int:
    """
    Test lines to move into training so N folds train on as many lines as `match_folds`
    folds would (250 lines, 5 folds matched to 10: 200 -> 225 training lines).
    """
    return n_lines // n_folds - n_lines // match_folds


def read_run_summary(out_dir: Path) -> dict:
    with open(out_dir / "report_meta.json", "r", encoding="utf-8") as f:
        meta = json.load(f)
    with open(out_dir / "report.csv", "r", encoding="utf-8", newline="") as f:
        rows = {r["model_id"]: r for r in csv.DictReader(f)}

    summary = {
        "best_cer": meta["best_cer"],
        "avg_cer": meta["avg_cer"],
        "worst_cer": meta["worst_cer"],
    }
    for label in ("vote_majority", "vote_confidence"):
        row = rows.get(label, {})
        summary[f"{label}_cer"] = row.get("cer", "n/a")
        summary[f"{label}_improvement_avg"] = row.get("improvement_avg", "n/a")
    return summary


def main():
    ap = argparse.ArgumentParser(
        description="Sweep the cross-fold training + voting pipeline."
    )

    ap.add_argument("--config", default=None,
                    help="Pipeline config file forwarded to every run; its [model.<k>] sections "
                         "must number 0, 1 or exactly each swept fold count.")
    ap.add_argument("--trials", type=int, default=1,
                    help="Number of seeds per grid point (default: 1).")
    ap.add_argument("--lines", type=int, nargs="+", default=[150],
                    help="GT pool sizes to sweep, e.g. 60 100 150 250 500 1000.")
    ap.add_argument("--folds", type=int, nargs="+", default=[5],
                    help="Fold counts to sweep, e.g. 5 10.")
    ap.add_argument("--match-folds", type=int, default=None,
                    help="Move test lines to training so every run trains like this many folds ('5+').")
    ap.add_argument("--eval-lines", type=int, default=None,
                    help="Forward --n-eval-lines to the pipeline.")
    ap.add_argument("--mode", choices=["majority", "confidence"], default=None,
                    help="Forward --mode to the pipeline.")

    args = ap.parse_args()

    config_path = None
    if args.config:
        config_path = Path(args.config).resolve()
        if not config_path.exists():
            ap.error(f"Missing config: {config_path}")
        n_models = config_model_count(config_path)
        bad = unsupported_fold_counts(n_models, args.folds)
        if bad:
            ap.error(f"{config_path.name} defines {n_models} error models; it cannot run --folds {' '.join(map(str, bad))}")

    results_path = root / "data" / "trial_results.csv"
    results_path.parent.mkdir(parents=True, exist_ok=True)

    fieldnames = [
        "trial_id",
        "seed",
        "n_lines",
        "n_folds",
        "train_extra",
        "best_cer",
        "avg_cer",
        "worst_cer",
        "vote_majority_cer",
        "vote_majority_improvement_avg",
        "vote_confidence_cer",
        "vote_confidence_improvement_avg",
    ]

    new_file = not results_path.exists()
    csv_f = open(results_path, "a", newline="", encoding="utf-8")
    writer = csv.DictWriter(csv_f, fieldnames=fieldnames)

    if new_file:
        writer.writeheader()

    trial_id = 0
    for n_lines in args.lines:
        for n_folds in args.folds:
            train_extra = 0
            if args.match_folds:
                train_extra = matched_train_extra(n_lines, n_folds, args.match_folds)

            for t in range(args.trials):
                print(f"\n===== RUN {trial_id + 1}: {n_folds} folds x {n_lines} lines, seed {t} =====")
                out_dir = root / "data" / "runs" / f"{n_folds}x{n_lines}_te{train_extra}_seed{t}"

                pipeline_args = [
                    "pipeline",
                    "--n-lines", str(n_lines),
                    "--n-folds", str(n_folds),
                    "--train-extra", str(train_extra),
                    "--seed", str(t),
                    "--out", str(out_dir),
                ]
                if args.config:
                    pipeline_args += ["--config", str(config_path)]
                if args.eval_lines:
                    pipeline_args += ["--n-eval-lines", str(args.eval_lines)]
                if args.mode:
                    pipeline_args += ["--mode", args.mode]

                res = run(cli_script, pipeline_args)
                print(res.stdout or "")

                row = {
                    "trial_id": trial_id,
                    "seed": t,
                    "n_lines": n_lines,
                    "n_folds": n_folds,
                    "train_extra": train_extra,
                }
                row.update(read_run_summary(out_dir))
                writer.writerow(row)
                csv_f.flush()
                trial_id += 1

    csv_f.close()
    print(f"\nWrote trial summary: {results_path}")
    print("Pipeline completed successfully.")


if __name__ == "__main__":
    main()
