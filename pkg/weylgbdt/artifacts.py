"""
Output artifacts: JSON documents written atomically and CSV profile tables.
"""
from __future__ import annotations

import csv
import json
import math
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

POTENTIAL_HEADER = ("x", "u_re", "u_im", "min_eig_S", "identity_residual")
SOLUTION_HEADER = ("x", "y", "psi1_re", "psi1_im", "psi2_re", "psi2_im")


def _default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def dumps_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, default=_default, allow_nan=False) + "\n"


def atomic_write_json(path: Path, payload: Dict[str, Any]) -> None:
    text = dumps_json(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_fd: Optional[int] = None
    tmp_path: Optional[Path] = None
    try:
        tmp_fd, tmp_path_str = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=str(path.parent))
        tmp_path = Path(tmp_path_str)
        with os.fdopen(tmp_fd, "w", encoding="utf-8") as f:
            tmp_fd = None
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(str(tmp_path), str(path))
    finally:
        if tmp_fd is not None:
            try:
                os.close(tmp_fd)
            except Exception:
                pass
        if tmp_path is not None and tmp_path.exists():
            try:
                tmp_path.unlink(missing_ok=True)
            except Exception:
                pass


def emit_json(payload: Dict[str, Any], out: Optional[Path] = None) -> None:
    if out is None:
        sys.stdout.write(dumps_json(payload))
        sys.stdout.flush()
    else:
        atomic_write_json(out, payload)


def fmt(value: Union[float, int]) -> str:
    v = float(value)
    if math.isnan(v):
        return "nan"
    if v == 0:
        return "0"
    return format(v, ".12g")


@contextmanager
def csv_sink(out: Optional[Path] = None) -> Iterator["csv._writer"]:
    """CSV writer on stdout or on `out`; the file only appears once writing completed."""
    if out is None:
        yield csv.writer(sys.stdout, lineterminator="\n")
        sys.stdout.flush()
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=out.name + ".", suffix=".tmp", dir=str(out.parent))
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            yield csv.writer(f, lineterminator="\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, str(out))
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_rows(writer, header: Sequence[str], rows: Iterable[Sequence[float]]) -> int:
    writer.writerow(header)
    count = 0
    for row in rows:
        writer.writerow([fmt(v) for v in row])
        count += 1
    return count
