"""Dataset manifest: a CSV with header ``image,ground_truth,kind``."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

HEADER = ("image", "ground_truth", "kind")
KINDS = ("mask", "points")


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    ground_truth: str
    kind: str
    base_dir: Path

    @property
    def image_path(self) -> Path:
        return self.base_dir / self.image

    @property
    def ground_truth_path(self) -> Path:
        return self.base_dir / self.ground_truth


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    base_dir: Path

    def __len__(self) -> int:
        return len(self.entries)


def read_manifest(path, check_files: bool = True) -> Manifest:
    """Parse and validate a manifest; paths resolve relative to its directory."""
    path = Path(path)
    base = path.parent
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(c.strip() for c in rows[0]) != HEADER:
        raise ManifestError(f"{path}: header must be {','.join(HEADER)}")
    problems = []
    entries = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            problems.append(f"line {lineno}: expected 3 fields, got {len(row)}")
            continue
        image, gt, kind = (c.strip() for c in row)
        entry = ManifestEntry(image, gt, kind, base)
        if kind not in KINDS:
            problems.append(f"line {lineno}: kind must be one of {KINDS}, got {kind!r}")
        if image in seen:
            problems.append(f"line {lineno}: duplicate image {image!r}")
        seen.add(image)
        if check_files:
            if not entry.image_path.is_file():
                problems.append(f"line {lineno}: missing image {entry.image_path}")
            if not entry.ground_truth_path.is_file():
                problems.append(f"line {lineno}: missing ground truth {entry.ground_truth_path}")
        entries.append(entry)
    if problems:
        raise ManifestError(f"{path}: invalid manifest", problems)
    if not entries:
        raise ManifestError(f"{path}: manifest has no entries")
    return Manifest(tuple(entries), base)


def write_manifest(path, rows) -> None:
    """Write ``(image, ground_truth, kind)`` rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        w.writerows(rows)
