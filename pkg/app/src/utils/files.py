import math
from pathlib import Path
from typing import Any

import numpy as np

from app.src.errors import ConfigIoError


def infer_config_format(path: Path) -> str:
    ext = Path(path).suffix.lower()
    fmt = {".toml": "toml", ".json": "json"}.get(ext)
    if fmt is None:
        raise ConfigIoError(f"unsupported config extension {ext or '<none>'}; use .toml or .json")
    return fmt


def format_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return f"{float(x):.17g}"


def to_jsonable(value: Any) -> Any:
    """numpy values to builtins; non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value
