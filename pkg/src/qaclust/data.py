"""CSV ingestion and synthetic Gaussian-blob generation."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

__all__ = ["DataError", "load_dataset", "blob_centers", "make_blobs", "gen_synthetic"]


class DataError(ValueError):
    pass


def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        return None


def load_dataset(path, format="csv"):
    """Read a numeric comma-separated file into an ``(n, d)`` float array.

    A first line containing any non-numeric cell is taken as a header and
    skipped.  Ragged rows and non-finite values are rejected with the
    1-based row and column of the offending cell.
    """
    if format != "csv":
        raise DataError(f"unsupported data format {format!r}")
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if rows and any(_parse_float(cell) is None for cell in rows[0]):
        start = 1
    else:
        start = 0
    if len(rows) <= start:
        raise DataError(f"{path}: no data rows")
    width = len(rows[start])
    out = np.empty((len(rows) - start, width))
    for r, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise DataError(f"{path}: row {r} has {len(row)} columns, expected {width}")
        for c, cell in enumerate(row, start=1):
            v = _parse_float(cell)
            if v is None:
                raise DataError(f"{path}: row {r}, column {c}: not a number: {cell!r}")
            if not math.isfinite(v):
                raise DataError(f"{path}: row {r}, column {c}: non-finite value {cell.strip()!r}")
            out[r - start - 1, c - 1] = v
    return out


def blob_centers(blobs, separation, dim=2):
    """Centres on a square grid (first two axes) with the given spacing."""
    side = math.ceil(math.sqrt(blobs))
    centers = np.zeros((blobs, dim))
    for b in range(blobs):
        row, col = divmod(b, side)
        centers[b, 0] = col * separation
        if dim > 1:
            centers[b, 1] = row * separation
    return centers


def make_blobs(blobs, per_blob, separation, seed, dim=2):
    """Unit-variance isotropic Gaussian blobs; returns ``(X, true_labels)``."""
    if blobs < 1 or per_blob < 1 or dim < 1:
        raise DataError("blobs, per_blob and dim must be >= 1")
    if not (separation >= 0 and math.isfinite(separation)):
        raise DataError("separation must be finite and >= 0")
    rng = np.random.default_rng(seed)
    centers = blob_centers(blobs, separation, dim)
    X = np.concatenate([c + rng.standard_normal((per_blob, dim)) for c in centers])
    return X, np.repeat(np.arange(blobs), per_blob)


def gen_synthetic(path, blobs=4, per_blob=100, separation=8.0, seed=0, dim=2):
    """Write :func:`make_blobs` output to ``path`` as CSV with an ``x0,x1,...`` header."""
    X, _ = make_blobs(blobs, per_blob, separation, seed, dim)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(dim)])
        for row in X:
            w.writerow([repr(float(v)) for v in row])
    return X
