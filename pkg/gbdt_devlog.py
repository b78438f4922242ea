"""
Opt-in JSONL event log for weyl-gbdt runs.

One file per UTC day under ~/.weyl-gbdt/devlogs/. Every event carries the id of the
process that wrote it, so interleaved runs on the same day can be told apart.
Writing is best effort: a full disk or a read-only HOME never fails a computation.
"""
from __future__ import annotations

import datetime
import json
import os
import time
import uuid
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import numpy as np

T = TypeVar("T")

RETENTION_DAYS = 90
RUN_ID = uuid.uuid4().hex[:12]
_PREFIX = "gbdt-"


def _today() -> datetime.date:
    return datetime.datetime.now(datetime.timezone.utc).date()


def devlog_dir() -> Path:
    home = os.environ.get("HOME") or str(Path.home())
    return Path(home).expanduser() / ".weyl-gbdt" / "devlogs"


def devlog_path(day: Optional[datetime.date] = None) -> Path:
    return devlog_dir() / f"{_PREFIX}{(day or _today()).isoformat()}.jsonl"


def prune_devlogs(days: int = RETENTION_DAYS) -> int:
    """Delete day files older than `days`, judged by the date in the name. Returns the count."""
    removed = 0
    cutoff = _today() - datetime.timedelta(days=days)
    try:
        files = list(devlog_dir().glob(f"{_PREFIX}*.jsonl"))
    except OSError:
        return 0
    for p in files:
        try:
            day = datetime.date.fromisoformat(p.stem[len(_PREFIX):])
        except ValueError:
            continue
        if day < cutoff:
            try:
                p.unlink()
                removed += 1
            except OSError:
                continue
    return removed


def _jsonable(value: Any) -> Any:
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return np.stack((value.real, value.imag), axis=-1).tolist()
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return repr(value)


def log_event(devlog: Optional[Path], event: str, data: dict[str, Any]) -> None:
    if not devlog:
        return
    payload = {
        "ts": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="milliseconds"),
        "run": RUN_ID,
        "event": event,
        **data,
    }
    try:
        line = json.dumps(payload, default=_jsonable)
        devlog.parent.mkdir(parents=True, exist_ok=True)
        with open(devlog, "a", encoding="utf-8") as f:
            f.write(line + "\n")
    except (OSError, TypeError, ValueError):
        return


def run_stage(
    name: str,
    fn: Callable[[], T],
    *,
    devlog: Optional[Path] = None,
    context: Optional[dict[str, Any]] = None,
) -> T:
    """
    Run one computation stage (validation, profile sampling, integration, report)
    and record start/end/exception events with wall time into the devlog.
    The stage's own exceptions propagate unchanged.
    """
    ctx = dict(context or {})
    log_event(devlog, "stage_start", {"stage": name, **ctx})
    started = time.perf_counter()
    try:
        result = fn()
    except Exception as e:
        log_event(
            devlog,
            "stage_exception",
            {
                "stage": name,
                **ctx,
                "error": str(e),
                "error_type": type(e).__name__,
                "elapsed_s": round(time.perf_counter() - started, 6),
            },
        )
        raise
    log_event(devlog, "stage_end", {"stage": name, **ctx, "elapsed_s": round(time.perf_counter() - started, 6)})
    return result
