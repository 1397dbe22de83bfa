from __future__ import annotations

"""
Atomic output helpers.

Every file the runner produces (summary CSV, trajectory CSVs, run
manifest, saved models) goes through `atomic_write_bytes`: write to a
temp file in the target directory, fsync, `os.replace`, fsync the
directory. A crashed run therefore leaves either the previous file or
the complete new one, never a truncated CSV.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Optional, Union

import pandas as pd


JsonDict = Dict[str, Any]
PathLike = Union[str, Path]


def _ensure_dir(p: Path) -> None:
    p.mkdir(parents=True, exist_ok=True)


def _fsync_dir(dir_path: Path) -> None:
    try:
        fd = os.open(str(dir_path), os.O_DIRECTORY)
        try:
            os.fsync(fd)
        finally:
            os.close(fd)
    except Exception:
        pass


def canonical_json_bytes(obj: JsonDict) -> bytes:
    # sorted keys + fixed separators so identical runs give identical bytes
    return (
        json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2, default=_json_default) + "\n"
    ).encode("utf-8")


def _json_default(o: Any) -> Any:
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    path = Path(path)
    _ensure_dir(path.parent)

    fd, tmp_name = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=str(path.parent))
    tmp_path = Path(tmp_name)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())

        os.replace(str(tmp_path), str(path))
        _fsync_dir(path.parent)
    finally:
        try:
            if tmp_path.exists():
                tmp_path.unlink()
        except Exception:
            pass
    return path


def write_json(path: PathLike, obj: JsonDict) -> Path:
    return atomic_write_bytes(path, canonical_json_bytes(obj))


def read_json(path: PathLike) -> Optional[JsonDict]:
    path = Path(path)
    if not path.exists():
        return None
    try:
        obj = json.loads(path.read_bytes().decode("utf-8"))
    except Exception:
        return None
    return obj if isinstance(obj, dict) else None


def write_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    """Write a DataFrame as CSV (no index, fixed float format) atomically."""
    text = frame.to_csv(index=False, float_format="%.10g", lineterminator="\n")
    return atomic_write_bytes(path, text.encode("utf-8"))
