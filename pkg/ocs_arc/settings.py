# ocs_arc/settings.py
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .selection_runtime.utils import ConfigError

# -------------------------
# Pydantic models (typed)
# -------------------------

Probability = Annotated[float, Field(gt=0.0, lt=1.0)]
Bound = Union[float, str]


def _listify(v: Any) -> Any:
    if v is None or isinstance(v, (list, tuple)):
        return v
    return [v]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ExperimentConf(_Section):
    name: str = "default"


class CsvConf(_Section):
    path: Optional[str] = None
    target: Optional[str] = None
    threshold_column: Optional[str] = None
    features: Optional[List[str]] = None


class DataConf(_Section):
    source: Literal["synthetic", "bivariate", "csv"] = "synthetic"
    setting: List[Literal[1, 2]] = Field(default_factory=lambda: [1], min_length=1)
    sigma: List[Annotated[float, Field(ge=0.0)]] = Field(default_factory=lambda: [1.0], min_length=1)
    threshold: float = 0.0
    csv: CsvConf = CsvConf()

    @field_validator("setting", "sigma", mode="before")
    @classmethod
    def sweep_as_list(cls, v: Any) -> Any:
        return _listify(v)


class SplitConf(_Section):
    n_train: Annotated[int, Field(ge=1)] = 1000
    n_cal: List[Annotated[int, Field(ge=1)]] = Field(default_factory=lambda: [1000], min_length=1)
    n_test: Annotated[int, Field(ge=1)] = 600

    @field_validator("n_cal", mode="before")
    @classmethod
    def sweep_as_list(cls, v: Any) -> Any:
        return _listify(v)


class ModelConf(_Section):
    kind: Literal["boosted_trees", "boosted_classifier", "ridge", "logistic"] = "boosted_trees"
    n_trees: Annotated[int, Field(ge=0)] = 100
    max_depth: Annotated[int, Field(ge=0)] = 3
    learning_rate: Annotated[float, Field(ge=0.0, le=1.0)] = 0.1
    min_samples_leaf: Annotated[int, Field(ge=1)] = 5
    l2: Annotated[float, Field(ge=0.0)] = 1.0


class RegionConf(_Section):
    lower: List[Bound]
    upper: List[Bound]
    representative: Optional[List[float]] = None


class SelectionConf(_Section):
    methods: List[Literal["ocs_arc", "ob", "repeated_cs", "mocs_arc"]] = Field(
        default_factory=lambda: ["ocs_arc"], min_length=1
    )
    scores: List[Literal["clip", "res", "regional"]] = Field(
        default_factory=lambda: ["clip"], min_length=1
    )
    q: List[Probability] = Field(default_factory=lambda: [0.1], min_length=1)
    r: List[Probability] = Field(default_factory=lambda: [0.99], min_length=1)
    clip_constant: Annotated[float, Field(ge=0.0)] = 1000.0
    region: Optional[RegionConf] = None

    @field_validator("methods", "scores", "q", "r", mode="before")
    @classmethod
    def sweep_as_list(cls, v: Any) -> Any:
        return _listify(v)


class EvaluationConf(_Section):
    checkpoints: List[Annotated[int, Field(ge=1)]] = Field(
        default_factory=lambda: [100, 200, 300], min_length=1
    )
    replicates: Annotated[int, Field(ge=1)] = 300
    base_seed: Annotated[int, Field(ge=0)] = 0

    @field_validator("checkpoints", mode="before")
    @classmethod
    def sweep_as_list(cls, v: Any) -> Any:
        return _listify(v)


class OutputConf(_Section):
    dir: str = "runs/default"
    trajectories: bool = False


class RuntimeConf(_Section):
    workers: Annotated[int, Field(ge=1)] = 1


class LoggingConf(_Section):
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    json_lines: bool = Field(default=False, alias="json")


class ExperimentConfig(_Section):
    experiment: ExperimentConf = ExperimentConf()
    data: DataConf = DataConf()
    split: SplitConf = SplitConf()
    model: ModelConf = ModelConf()
    selection: SelectionConf = SelectionConf()
    evaluation: EvaluationConf = EvaluationConf()
    output: OutputConf = OutputConf()
    runtime: RuntimeConf = RuntimeConf()
    logging: LoggingConf = LoggingConf()

    def echo(self) -> Dict[str, Any]:
        """Plain-JSON view used in the run manifest."""
        return self.model_dump(mode="json", by_alias=True)


# -------------------------
# Validation
# -------------------------


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def _loc(loc) -> str:
    return ".".join(str(p) for p in loc if not isinstance(p, int)) or "<root>"


def _region_bounds(region: RegionConf) -> List[Diagnostic]:
    from .selection_runtime.multivariate import _parse_bound

    out: List[Diagnostic] = []
    try:
        lo = [_parse_bound(v) for v in region.lower]
        hi = [_parse_bound(v) for v in region.upper]
    except ValueError as e:
        return [Diagnostic("selection.region", f"bounds must be numbers or +/-inf: {e}")]
    if len(lo) != len(hi) or not lo:
        out.append(Diagnostic("selection.region", "lower and upper must be non-empty and of equal length"))
    elif any(math.isnan(a) or math.isnan(b) or a > b for a, b in zip(lo, hi)):
        out.append(Diagnostic("selection.region", "every lower bound must be <= its upper bound"))
    if region.representative is not None and len(region.representative) != len(lo):
        out.append(Diagnostic("selection.region.representative", "length must match the bounds"))
    return out


def _cross_checks(cfg: ExperimentConfig) -> List[Diagnostic]:
    out: List[Diagnostic] = []
    methods, scores = cfg.selection.methods, cfg.selection.scores
    multivariate = "mocs_arc" in methods

    if multivariate and scores != ["regional"]:
        out.append(Diagnostic("selection.scores", "mocs_arc runs with the regional score only"))
    if "regional" in scores and any(m != "mocs_arc" for m in methods):
        out.append(Diagnostic("selection.methods", "the regional score is only defined for mocs_arc"))
    if multivariate:
        if cfg.selection.region is None:
            out.append(Diagnostic("selection.region", "mocs_arc needs a target region"))
        else:
            out.extend(_region_bounds(cfg.selection.region))
            if cfg.data.source == "bivariate" and len(cfg.selection.region.lower) != 2:
                out.append(Diagnostic("selection.region", "bivariate data needs a 2-dimensional region"))
        if cfg.data.source != "bivariate":
            out.append(Diagnostic("data.source", "mocs_arc needs vector responses (source: bivariate)"))
        if cfg.model.kind in ("boosted_classifier", "logistic"):
            out.append(Diagnostic("model.kind", "mocs_arc needs a regression model"))
    elif cfg.data.source == "bivariate":
        out.append(Diagnostic("data.source", "bivariate data is only used by mocs_arc"))

    if cfg.data.source == "csv":
        if not cfg.data.csv.path:
            out.append(Diagnostic("data.csv.path", "required when data.source is csv"))
        if not cfg.data.csv.target:
            out.append(Diagnostic("data.csv.target", "required when data.source is csv"))

    bad = [t for t in cfg.evaluation.checkpoints if t > cfg.split.n_test]
    if bad:
        out.append(Diagnostic("evaluation.checkpoints", f"{bad} exceed split.n_test={cfg.split.n_test}"))
    return out


def validate_config(raw: Union[Dict[str, Any], ExperimentConfig]) -> List[Diagnostic]:
    """Every problem with a config; an empty list means it is valid."""
    if isinstance(raw, ExperimentConfig):
        cfg = raw
    else:
        try:
            cfg = ExperimentConfig.model_validate(raw)
        except ValidationError as e:
            return [Diagnostic(_loc(err["loc"]), err["msg"]) for err in e.errors()]
    return _cross_checks(cfg)


def parse_config(raw: Dict[str, Any]) -> ExperimentConfig:
    diagnostics = validate_config(raw)
    if diagnostics:
        raise ConfigError(
            "invalid config: " + "; ".join(str(d) for d in diagnostics), diagnostics
        )
    return ExperimentConfig.model_validate(raw)


# -------------------------
# Experiment grid
# -------------------------


def _num(v: float) -> str:
    return f"{v:g}"


@dataclass(frozen=True)
class ExperimentCell:
    source: str
    setting: Optional[int]
    sigma: Optional[float]
    n_cal: int
    q: float
    r: float

    @property
    def experiment_id(self) -> str:
        if self.source == "synthetic":
            head = f"s{self.setting}-sigma{_num(self.sigma)}"
        elif self.source == "bivariate":
            head = f"biv-sigma{_num(self.sigma)}"
        else:
            head = "csv"
        return f"{head}-ncal{self.n_cal}-q{_num(self.q)}-r{_num(self.r)}"


def expand_grid(cfg: ExperimentConfig) -> List[ExperimentCell]:
    """Cartesian product of the sweepable fields, in a fixed order."""
    source = cfg.data.source
    settings: List[Optional[int]] = list(cfg.data.setting) if source == "synthetic" else [None]
    sigmas: List[Optional[float]] = list(cfg.data.sigma) if source != "csv" else [None]
    cells = [
        ExperimentCell(source, s, sg, n_cal, q, r)
        for s, sg, n_cal, q, r in itertools.product(
            settings, sigmas, cfg.split.n_cal, cfg.selection.q, cfg.selection.r
        )
    ]
    ids = [c.experiment_id for c in cells]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate values in a sweep list produce identical experiment ids")
    return cells
