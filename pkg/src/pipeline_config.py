"""
Pipeline configuration: defaults, the key-value config file and validation.

Config file (INI style, read with configparser):

    [pipeline]
    n_folds = 5
    n_lines = 150
    n_eval_lines = 500
    mode = confidence
    base_seed = 7

    [model.1]
    sub_rate = 0.02
    confusions = e:c=3,o; n:u
"""
import configparser
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from errors import ConfigError
from synth import ErrorModel
from voting import VoteConfig

logger = logging.getLogger(__name__)

DEFAULT_N_FOLDS = 5
DEFAULT_N_LINES = 150
DEFAULT_N_EVAL_LINES = 500
DEFAULT_LINE_LENGTH = 40
DEFAULT_CANDIDATES_PER_FOLD = 3
DEFAULT_OUTPUT_DIR = Path("data") / "run"

# Roughly 3% CER per synthetic model
DEFAULT_ERROR_MODEL = ErrorModel(sub_rate=0.02, ins_rate=0.005, del_rate=0.005)

_INT_KEYS = ("n_folds", "n_lines", "n_eval_lines", "line_length", "base_seed", "shuffle_seed",
             "train_extra", "candidates_per_fold", "workers", "trainer_workers")
_PATH_KEYS = ("output_dir", "gt_file", "eval_gt_file")
_VOTE_KEYS = ("mode", "alt_threshold", "rec_only")


@dataclass(frozen=True)
class PipelineConfig:
    n_folds: int = DEFAULT_N_FOLDS
    n_lines: int = DEFAULT_N_LINES
    n_eval_lines: int = DEFAULT_N_EVAL_LINES
    line_length: int = DEFAULT_LINE_LENGTH
    vote: VoteConfig = field(default_factory=VoteConfig)
    models: Tuple[ErrorModel, ...] = ()
    base_seed: int = 0
    shuffle_seed: Optional[int] = None
    train_extra: int = 0
    candidates_per_fold: int = DEFAULT_CANDIDATES_PER_FOLD
    workers: int = 1
    output_dir: Path = DEFAULT_OUTPUT_DIR
    gt_file: Optional[Path] = None
    eval_gt_file: Optional[Path] = None
    trainer_command: Optional[str] = None
    trainer_workers: int = 1

    @property
    def uses_trainer(self) -> bool:
        return bool(self.trainer_command)

    def fold_models(self) -> Tuple[ErrorModel, ...]:
        """One synthetic error model per fold."""
        if not self.models:
            return (DEFAULT_ERROR_MODEL,) * self.n_folds
        if len(self.models) == 1:
            return self.models * self.n_folds
        return self.models

    def validate(self) -> "PipelineConfig":
        if self.n_folds < 2:
            raise ConfigError(f"n_folds must be at least 2, got {self.n_folds}")
        if self.n_lines < self.n_folds:
            raise ConfigError(f"n_lines ({self.n_lines}) must be at least n_folds ({self.n_folds})")
        if self.n_eval_lines < 1:
            raise ConfigError("n_eval_lines must be positive")
        if self.candidates_per_fold < 1 or self.workers < 1 or self.trainer_workers < 1:
            raise ConfigError("candidates_per_fold, workers and trainer_workers must be positive")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be non-negative")
        if self.models and len(self.models) not in (1, self.n_folds):
            raise ConfigError(f"expected 1 or {self.n_folds} error models, got {len(self.models)}")
        if self.uses_trainer and (self.gt_file is None or self.eval_gt_file is None):
            raise ConfigError("trainer_command needs gt_file and eval_gt_file")
        for p in (self.gt_file, self.eval_gt_file):
            if p is not None and not p.exists():
                raise ConfigError(f"Missing input file: {p}")
        return self


def _convert(key: str, value: str) -> Any:
    if key in _INT_KEYS:
        return int(value)
    if key in _PATH_KEYS:
        return Path(value)
    if key == "alt_threshold":
        return float(value)
    if key == "rec_only":
        return value.strip().lower() in ("1", "true", "yes", "on")
    return value


def build_config(values: Mapping[str, Any], models: Tuple[ErrorModel, ...] = ()) -> PipelineConfig:
    """Assemble a validated PipelineConfig from already-typed values."""
    vote_kwargs = {k: values[k] for k in _VOTE_KEYS if values.get(k) is not None}
    rest = {k: v for k, v in values.items() if k not in _VOTE_KEYS and v is not None}
    try:
        cfg = PipelineConfig(vote=VoteConfig(**vote_kwargs), models=models, **rest)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e))
    return cfg.validate()


def load_config(path: Union[str, Path, None] = None, overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """
    Read the ``[pipeline]`` and ``[model.<k>]`` sections of a config file and apply
    overrides (e.g. CLI flags; ``None`` values are ignored).

    :raises ConfigError: On unknown keys, unparsable values or failed validation
    """
    values: Dict[str, Any] = {}
    models = []

    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Missing config file: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}")

        known = set(_INT_KEYS) | set(_PATH_KEYS) | set(_VOTE_KEYS) | {"trainer_command"}
        if parser.has_section("pipeline"):
            for key, raw in parser.items("pipeline"):
                if key not in known:
                    raise ConfigError(f"{path}: unknown pipeline key {key!r}")
                try:
                    values[key] = _convert(key, raw)
                except ValueError:
                    raise ConfigError(f"{path}: bad value for {key}: {raw!r}")

        model_sections = sorted(
            (s for s in parser.sections() if s.startswith("model.")),
            key=lambda s: (len(s), s),
        )
        for section in model_sections:
            models.append(ErrorModel.from_mapping(dict(parser.items(section))))
        logger.info("Loaded %s (%d error models)", path, len(models))

    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    return build_config(values, tuple(models))
