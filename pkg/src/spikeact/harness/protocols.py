"""Dataset manifests and train/test splitting protocols.

A manifest is a tab-separated text file with one sequence per line::

    path<TAB>label<TAB>subject

``path`` is relative to the manifest's directory unless absolute and
``subject`` is the subject tag (for instance ``person11_d1``). Blank lines and
lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

from ..errors import FormatError, IngestionError
from ..tensor import parse_subject_tag

KTH_TRAIN_SUBJECTS = ("11", "12", "13", "14", "15", "16", "17", "18")
KTH_TEST_SUBJECTS = ("02", "03", "05", "06", "07", "08", "09", "10", "22")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    subject: str

    @property
    def subject_id(self) -> str:
        return parse_subject_tag(self.subject)[0]


Manifest = list[ManifestEntry]


def read_manifest(path, root=None) -> Manifest:
    """Parse a manifest; relative paths resolve against ``root`` or the file's dir."""
    path = Path(path)
    base = Path(root) if root is not None else path.parent
    try:
        text = path.read_text()
    except OSError as e:
        raise IngestionError(f"cannot read manifest {path}: {e}") from None
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{n}: expected 3 tab-separated fields, got {len(parts)}")
        p, label, subject = (s.strip() for s in parts)
        full = Path(p) if Path(p).is_absolute() else base / p
        out.append(ManifestEntry(str(full), label, subject))
    return out


def format_manifest(entries: Sequence[ManifestEntry], root=None) -> str:
    lines = []
    for e in entries:
        p = Path(e.path)
        if root is not None:
            try:
                p = p.relative_to(root)
            except ValueError:
                pass
        lines.append(f"{p.as_posix()}\t{e.label}\t{e.subject}")
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class KthSplit:
    train_subjects: tuple[str, ...] = KTH_TRAIN_SUBJECTS
    test_subjects: tuple[str, ...] = KTH_TEST_SUBJECTS

    def __post_init__(self):
        if set(self.train_subjects) & set(self.test_subjects):
            raise ValueError("train and test subject lists overlap")


@dataclass(frozen=True)
class LeaveOneOut:
    held_out: str | None = None  # None: only usable through protocol_folds


@dataclass(frozen=True)
class FixedSplit:
    train: tuple[ManifestEntry, ...]
    test: tuple[ManifestEntry, ...]


Protocol = Union[KthSplit, LeaveOneOut, FixedSplit]


def _subjects(entries: Sequence[ManifestEntry]) -> list[str]:
    return sorted({e.subject_id for e in entries})


def split_dataset(manifest: Sequence[ManifestEntry], p: Protocol) -> tuple[Manifest, Manifest]:
    """Split ``manifest`` into (train, test) under protocol ``p``."""
    if isinstance(p, FixedSplit):
        train, test = list(p.train), list(p.test)
        overlap = set(_subjects(train)) & set(_subjects(test))
        if overlap:
            raise ValueError(f"fixed split shares subjects between train and test: {sorted(overlap)}")
        return train, test
    if isinstance(p, KthSplit):
        train = [e for e in manifest if e.subject_id in p.train_subjects]
        test = [e for e in manifest if e.subject_id in p.test_subjects]
        dropped = sorted({e.subject_id for e in manifest} - set(p.train_subjects) - set(p.test_subjects))
        if dropped:
            warnings.warn(f"subjects outside the split lists are excluded: {', '.join(dropped)}", stacklevel=2)
        return train, test
    if isinstance(p, LeaveOneOut):
        if p.held_out is None:
            raise ValueError("LeaveOneOut needs a held-out subject; use protocol_folds for all folds")
        if p.held_out not in _subjects(manifest):
            raise ValueError(f"held-out subject {p.held_out!r} is not in the manifest")
        train = [e for e in manifest if e.subject_id != p.held_out]
        test = [e for e in manifest if e.subject_id == p.held_out]
        return train, test
    raise TypeError(f"unknown protocol {p!r}")


def protocol_folds(manifest: Sequence[ManifestEntry], p: Protocol) -> list[tuple[Manifest, Manifest]]:
    """All (train, test) folds: one per subject for leave-one-out, else one."""
    if isinstance(p, LeaveOneOut) and p.held_out is None:
        return [split_dataset(manifest, LeaveOneOut(s)) for s in _subjects(manifest)]
    return [split_dataset(manifest, p)]
