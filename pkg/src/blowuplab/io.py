"""CSV, JSON and Markdown artifacts.

CSV files start with one ``# {json}`` metadata line and a column header;
numbers are written with 17 significant digits so that reading them back
reproduces every double exactly.
"""
from __future__ import annotations

import hashlib
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .profiles import ModelParams
from .simvars import SelfSimFrame

__all__ = [
    "to_jsonable",
    "write_csv",
    "read_csv",
    "write_json",
    "write_markdown",
    "write_report",
    "write_frame",
    "read_frame",
    "write_frames",
    "sha256_file",
]


def to_jsonable(obj):
    """Plain-Python copy of ``obj``; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return str(obj)


def _dumps(obj, indent=None) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=indent)


def write_csv(path, columns, rows, meta: dict | None = None) -> Path:
    rows = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    buf = _io.StringIO()
    buf.write("# " + _dumps(meta or {}) + "\n")
    buf.write(",".join(columns) + "\n")
    np.savetxt(buf, rows, fmt="%.17g", delimiter=",")
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`write_csv`: ``(meta, columns, rows)``."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing metadata line")
        meta = json.loads(first[2:])
        columns = fh.readline().strip().split(",")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    return meta, columns, rows.reshape(-1, len(columns))


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(_dumps(obj, indent=2) + "\n")
    return path


def _md_lines(obj, depth=0):
    pad = "  " * depth
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not _flat_list(v):
                yield f"{pad}- **{k}**:"
                yield from _md_lines(v, depth + 1)
            else:
                yield f"{pad}- **{k}**: {_short(v)}"
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            if isinstance(v, (dict, list)) and not _flat_list(v):
                yield f"{pad}- [{i}]"
                yield from _md_lines(v, depth + 1)
            else:
                yield f"{pad}- {_short(v)}"


def _flat_list(v):
    return isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v)


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def write_markdown(path, title: str, report: dict) -> Path:
    body = "\n".join(_md_lines(to_jsonable(report)))
    path = Path(path)
    path.write_text(f"# {title}\n\n{body}\n")
    return path


def write_report(stem, title: str, report: dict) -> tuple[Path, Path]:
    """``stem.json`` for machines and ``stem.md`` for people."""
    stem = Path(stem)
    return write_json(stem.with_suffix(".json"), report), write_markdown(stem.with_suffix(".md"), title, report)


def write_frame(path, frame: SelfSimFrame) -> Path:
    meta = {"N": frame.params.N, "p": frame.params.p, "s": frame.s, "radius": frame.radius}
    return write_csv(path, ["y", "w", "ws"], np.column_stack([frame.grid, frame.w, frame.ws]), meta)


def read_frame(path) -> SelfSimFrame:
    meta, cols, rows = read_csv(path)
    if cols != ["y", "w", "ws"]:
        raise ValueError(f"{path}: not a frame file")
    params = ModelParams(meta["N"], meta["p"])
    return SelfSimFrame(rows[:, 0], rows[:, 1], rows[:, 2], float(meta["s"]), params, float(meta.get("radius", 1.0)))


def write_frames(directory, frames, prefix: str = "frame") -> Path:
    """One CSV per frame plus ``index.json`` listing ``(file, s)``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for k, fr in enumerate(frames):
        name = f"{prefix}_{k:05d}.csv"
        write_frame(directory / name, fr)
        index.append({"file": name, "s": fr.s})
    return write_json(directory / "index.json", {"frames": index})


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
