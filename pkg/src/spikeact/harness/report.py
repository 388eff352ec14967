"""Atomic output writing and per-stage wall-clock timing."""

from __future__ import annotations

import os
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path

from ..errors import StageError


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class StageTimer:
    """Collects ``(stage, seconds)`` records; :meth:`stage` also tags errors.

    ``details`` holds time spent inside a stage (for instance flow inside
    prep); it is reported but not added to the total.
    """

    def __init__(self):
        self.records: list[tuple[str, float]] = []
        self.details: list[tuple[str, float]] = []

    def add(self, name: str, seconds: float) -> None:
        self.details.append((name, seconds))

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            raise StageError(name, e) from e
        finally:
            self.records.append((name, time.perf_counter() - start))

    def total(self) -> float:
        return sum(s for _, s in self.records)

    def to_text(self) -> str:
        lines = [f"{name}\t{sec:.3f}" for name, sec in self.records]
        lines += [f"  {name}\t{sec:.3f}" for name, sec in self.details]
        lines.append(f"total\t{self.total():.3f}")
        return "\n".join(lines) + "\n"
