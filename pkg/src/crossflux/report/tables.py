"""
CSV and JSON writers and readers for branches, states and summaries.

Floats are written in scientific notation with 17 significant digits so that
stored states re-certify exactly when read back.
"""

import csv
import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from ..errors import CrossfluxError, SizeMismatchError
from ..types import Branch, Grid, StateVector

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BRANCH_COLUMNS = ("id", "j_origin", "s", "d2", "l2_u", "l2_v", "sup_u", "sup_v", "ratio_defect",
                  "stability_index", "fold_count")
_FLOAT_COLUMNS = ("s", "d2", "l2_u", "l2_v", "sup_u", "sup_v", "ratio_defect")
_STATE_HEADER = re.compile(r"^#\s*n=(\d+)\s+L=(\S+)\s+x_left=(\S+)\s*$")


def format_float(value: Any) -> str:
    if value is None:
        return ""
    return f"{float(value):.16e}"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_rows_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str], path: PathLike) -> Path:
    """Write dict rows with fixed column order; missing values become empty cells."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(column)) for column in columns])
    return path


def branch_rows(branch: Branch) -> List[Dict[str, Any]]:
    rows = []
    for point in branch.points:
        rows.append({
            "id": branch.id,
            "j_origin": branch.origin.tag,
            "s": point.s,
            "d2": point.d2,
            "l2_u": point.norms.l2_u,
            "l2_v": point.norms.l2_v,
            "sup_u": point.norms.sup_u,
            "sup_v": point.norms.sup_v,
            "ratio_defect": point.ratio_defect,
            "stability_index": point.stability_index,
            "fold_count": branch.fold_count,
        })
    return rows


def write_branch_csv(branch: Branch, path: PathLike) -> Path:
    return write_rows_csv(branch_rows(branch), BRANCH_COLUMNS, path)


def read_branch_csv(path: PathLike) -> List[Dict[str, Any]]:
    """
    Read a branch CSV back into typed rows.

    Raises:
        CrossfluxError: If columns are missing or a value does not parse
    """
    rows = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in BRANCH_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise CrossfluxError(f"{path}: missing columns {', '.join(missing)}")
        for number, raw in enumerate(reader, start=2):
            try:
                row: Dict[str, Any] = {"id": raw["id"], "j_origin": raw["j_origin"]}
                for column in _FLOAT_COLUMNS:
                    row[column] = float(raw[column])
                row["stability_index"] = int(raw["stability_index"]) if raw["stability_index"] else None
                row["fold_count"] = int(raw["fold_count"])
            except (TypeError, ValueError) as e:
                raise CrossfluxError(f"{path}:{number}: {e}") from e
            rows.append(row)
    return rows


def write_state_csv(state: StateVector, grid: Grid, path: PathLike) -> Path:
    """Write x, u, v columns under a ``# n=.. L=.. x_left=..`` header line."""
    if state.n != grid.n:
        raise SizeMismatchError(f"State has {state.n} nodes but the grid has {grid.n}")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# n={grid.n} L={grid.length!r} x_left={grid.x_left!r}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("x", "u", "v"))
        for x, u, v in zip(grid.nodes, state.u, state.v):
            writer.writerow((format_float(x), format_float(u), format_float(v)))
    return path


def read_state_csv(path: PathLike) -> Tuple[StateVector, Grid]:
    """
    Read a state CSV written by ``write_state_csv``.

    Raises:
        CrossfluxError: If the header line is malformed
        SizeMismatchError: If the row count disagrees with the header
    """
    with open(path, encoding="utf-8", newline="") as f:
        header = _STATE_HEADER.match(f.readline().strip())
        if header is None:
            raise CrossfluxError(f"{path}: missing '# n=.. L=.. x_left=..' header")
        grid = Grid(n=int(header.group(1)), length=float(header.group(2)), x_left=float(header.group(3)))
        reader = csv.DictReader(f)
        values = [(float(r["u"]), float(r["v"])) for r in reader]
    if len(values) != grid.n:
        raise SizeMismatchError(f"{path}: header says n={grid.n}, found {len(values)} rows")
    data = np.array(values)
    return StateVector(data[:, 0], data[:, 1]), grid


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if hasattr(value, "value") and not isinstance(value, (str, int, bool)):
        return value.value
    return value


def write_json(data: Any, path: PathLike) -> Path:
    """Write JSON with sorted keys; non-finite floats become null and enums their values."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def stored_branches(directory: PathLike, pattern: str = "*.csv") -> Iterable[Path]:
    """Branch CSV files below ``directory`` in sorted order."""
    return sorted(p for p in Path(directory).rglob(pattern) if p.is_file() and _looks_like_branch(p))


def _looks_like_branch(path: Path) -> bool:
    try:
        with open(path, encoding="utf-8") as f:
            return f.readline().strip() == ",".join(BRANCH_COLUMNS)
    except (OSError, UnicodeDecodeError):
        return False
