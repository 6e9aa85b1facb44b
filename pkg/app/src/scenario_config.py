# scenario_config.py
import json
import re
import tomllib
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.src.errors import ConfigIoError, ConfigParseError, ConfigValidationError
from app.src.operators import ProblemSpec
from app.src.utils.files import infer_config_format

Verdict = Literal["homeomorphism", "fold_down", "fold_up", "non_simple", "inconclusive"]

# ---------------------------
# Models
# ---------------------------

class NonlinearitySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["nemitskii", "nonlocal", "vertical_sine", "zero"] = "nemitskii"
    a: float = 5.0
    b: float = 15.0
    kappa: float = Field(1.0, gt=0)
    matrix: Optional[list[list[float]]] = None
    weight: Optional[Union[float, list[float]]] = None
    matrix_path: Optional[Path] = None
    weight_path: Optional[Path] = None

    @model_validator(mode="after")
    def _check_profile(self) -> "NonlinearitySpec":
        if self.kind in ("nemitskii", "nonlocal") and not self.a < self.b:
            raise ValueError(f"slopes must satisfy a < b, got a = {self.a}, b = {self.b}")
        if self.kind == "nonlocal" and self.matrix is None and self.matrix_path is None:
            raise ValueError("nonlocal maps need `matrix` or `matrix_path`")
        return self


class FormSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["m_form", "r_form"] = "m_form"
    # m-form: centre override; r-form: the Cayley parameter (required)
    gamma: Optional[float] = None

    @model_validator(mode="after")
    def _check_gamma(self) -> "FormSpec":
        if self.kind == "r_form" and (self.gamma is None or self.gamma <= 0):
            raise ValueError("r_form needs a positive gamma")
        return self


class RunSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_min: float = -50.0
    t_max: float = 50.0
    nt: int = Field(512, ge=32)
    tol: float = Field(1e-8, gt=0)
    slice_tol: float = Field(1e-9, gt=0)
    refine_tol: float = Field(1e-8, gt=0)
    seed: int = Field(0, ge=0)
    samples: int = Field(200, ge=1)

    anchor: Optional[list[float]] = None
    targets: list[list[float]] = []
    height_offsets: list[float] = []
    random_targets: int = Field(0, ge=0)
    target_scale: float = Field(1.0, gt=0)
    degree_targets: int = Field(0, ge=0)
    require_stable_window: bool = True

    expect: Optional[Verdict] = None
    expected_counts: list[int] = []
    count_mode: Literal["exact", "at_least"] = "exact"
    require_hypotheses: bool = True
    oracle: bool = False
    oracle_grid: int = Field(7, ge=2)
    oracle_box: float = Field(20.0, gt=0)

    @model_validator(mode="after")
    def _check_window(self) -> "RunSpec":
        if not self.t_min < self.t_max:
            raise ValueError(f"t_min = {self.t_min} must be below t_max = {self.t_max}")
        return self


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    description: str = ""
    operator: ProblemSpec
    nonlinearity: NonlinearitySpec = NonlinearitySpec()
    form: FormSpec = FormSpec()
    run: RunSpec = RunSpec()
    output: Optional[Path] = None

    def nonlocal_matrix(self) -> np.ndarray:
        spec = self.nonlinearity
        if spec.matrix is not None:
            return np.asarray(spec.matrix, dtype=float)
        return _load_array(spec.matrix_path, ndmin=2)

    def nonlocal_weight(self, rows: int) -> np.ndarray:
        spec = self.nonlinearity
        if spec.weight_path is not None:
            return _load_array(spec.weight_path, ndmin=1)
        if spec.weight is None:
            return np.ones(rows)
        if isinstance(spec.weight, list):
            return np.asarray(spec.weight, dtype=float)
        return np.full(rows, float(spec.weight))


def _load_array(path: Path, ndmin: int) -> np.ndarray:
    delimiter = "," if path.suffix.lower() == ".csv" else None
    return np.loadtxt(path, delimiter=delimiter, ndmin=ndmin)


# ---------------------------
# Loading
# ---------------------------

_TOML_POSITION = re.compile(r"\(at line (\d+), column (\d+)\)")


def _parse(text: str, fmt: str) -> dict[str, Any]:
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigParseError(e.msg, line=e.lineno, column=e.colno) from e
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            match = _TOML_POSITION.search(str(e))
            message = _TOML_POSITION.sub("", str(e)).strip()
            if match:
                raise ConfigParseError(message, line=int(match.group(1)), column=int(match.group(2))) from e
            raise ConfigParseError(message) from e
    if not isinstance(data, dict):
        raise ConfigParseError("top level must be a table of sections")
    return data


def _dotted(loc: tuple) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def validate_config(data: dict[str, Any], base_dir: Optional[Path] = None) -> ScenarioConfig:
    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        problems = [f"{_dotted(err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigValidationError(problems) from e

    if base_dir is None:
        return config
    spec = config.nonlinearity
    resolved = {}
    problems = []
    for key in ("matrix_path", "weight_path"):
        path = getattr(spec, key)
        if path is None:
            continue
        if not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            problems.append(f"nonlinearity.{key}: file not found: {path}")
        resolved[key] = path
    if problems:
        raise ConfigValidationError(problems)
    if resolved:
        config = config.model_copy(update={"nonlinearity": spec.model_copy(update=resolved)})
    return config


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read a TOML (or JSON) scenario file; every invalid key is named in the error."""
    path = Path(path)
    fmt = infer_config_format(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigIoError(f"cannot read {path}: {e}") from e
    return validate_config(_parse(text, fmt), base_dir=path.parent)


def apply_overrides(config: ScenarioConfig, output: Optional[Path] = None, **run_overrides) -> ScenarioConfig:
    """Command-line values replace config values; None means "not given"."""
    updates = {k: v for k, v in run_overrides.items() if v is not None}
    data = config.model_dump()
    data["run"].update(updates)
    if output is not None:
        data["output"] = output
    return validate_config(data)
