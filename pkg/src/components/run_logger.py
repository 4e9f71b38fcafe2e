from __future__ import annotations
import json
import time
from pathlib import Path
from typing import Any, Optional


class RunLogger:
    """Timestamped run events flushed to ``run_<id>.json`` after every event.

    Logs live outside artifact directories so that artifacts stay
    reproducible while the log keeps wall-clock times.
    """

    def __init__(self, log_dir: Path, run_id: str, enabled: bool = True):
        self.enabled = enabled
        self.run_id = run_id
        self._log_path = Path(log_dir) / f"run_{run_id}.json"
        self._entries: list[dict] = []
        if enabled:
            self._log_path.parent.mkdir(parents=True, exist_ok=True)

    def log_event(self, event_type: str, data: Optional[dict[str, Any]] = None) -> None:
        self._entries.append({"timestamp": time.time(), "event_type": event_type,
                              "data": data or {}})
        self._flush()

    def log_run_start(self, command: str, config: dict) -> None:
        self.log_event("run_start", {"command": command, "config": config})

    def log_train_step(self, step: int, record: dict) -> None:
        self.log_event("train_step", {"step": step, **record})

    def log_run_end(self, status: str, summary: Optional[dict] = None) -> None:
        self.log_event("run_end", {"status": status, **(summary or {})})

    @property
    def entries(self) -> list[dict]:
        return list(self._entries)

    def events(self, event_type: str) -> list[dict]:
        return [e for e in self._entries if e["event_type"] == event_type]

    def get_log_path(self) -> Path:
        return self._log_path

    def _flush(self) -> None:
        if not self.enabled:
            return
        try:
            with open(self._log_path, "w", encoding="utf-8") as f:
                json.dump(self._entries, f, indent=2, ensure_ascii=False, default=str)
        except OSError:
            pass


def create_run_logger(log_dir: Optional[Path], run_id: str) -> RunLogger:
    """Logger writing under ``log_dir``; a ``None`` directory keeps events in memory only."""
    if log_dir is None:
        return RunLogger(Path("."), run_id, enabled=False)
    return RunLogger(log_dir, run_id)
