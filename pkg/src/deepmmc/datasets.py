"""Dataset loading and generation: numeric CSV, IDX image files, blobs."""

from __future__ import annotations

import csv
import struct

import numpy as np

from .numeric import BINARY, CONTINUOUS, DataMatrix, remap_labels

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# Floats are written with 17 significant digits, enough for an exact
# float64 round trip.
CSV_FLOAT_FORMAT = "%.17g"


class DataFormatError(ValueError):
    """A data file does not match its declared format."""


def _parse_label_column(label_column, width: int):
    if label_column is None or label_column == "none":
        return None
    if label_column == "last":
        return width - 1
    idx = int(label_column)
    if not -width <= idx < width:
        raise DataFormatError(f"label column {idx} outside the {width} columns")
    return idx % width


def load_csv(path, label_column="last") -> DataMatrix:
    """Numeric CSV with an optional single header line.

    label_column is "last", a 0-based column index, or None for unlabeled
    data.  Labels are remapped to dense 1..K in first-occurrence order.
    feature_kind is "binary" when every feature is exactly 0 or 1.
    """
    rows: list[list[float]] = []
    width = None
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            cells = [cell.strip() for cell in record]
            if not any(cells):
                continue
            try:
                parsed = [float(cell) for cell in cells]
            except ValueError:
                if lineno == 1:
                    continue  # header line
                raise DataFormatError(f"{path}:{lineno}: non-numeric cell") from None
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width} columns, got {len(parsed)}"
                )
            rows.append(parsed)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    col = _parse_label_column(label_column, table.shape[1])
    if col is None:
        values, labels = table, None
    else:
        if table.shape[1] < 2:
            raise DataFormatError(f"{path}: need at least one feature column")
        labels = remap_labels(table[:, col])
        values = np.delete(table, col, axis=1)
    kind = BINARY if np.isin(values, (0.0, 1.0)).all() else CONTINUOUS
    return DataMatrix(values, labels=labels, feature_kind=kind)


def save_csv(x: DataMatrix, path) -> None:
    """Write values (and labels, as a final column) for an exact round trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for idx in range(x.n):
            row = [CSV_FLOAT_FORMAT % v for v in x.values[idx]]
            if x.labels is not None:
                row.append(str(int(x.labels[idx])))
            writer.writerow(row)


def load_idx(images_path, labels_path, limit=None, rng=None) -> DataMatrix:
    """MNIST-style IDX pair: big-endian images (magic 0x803) and labels
    (magic 0x801).

    Pixels are scaled to [0, 1] and flattened row-major; the result is
    binary-kind (Bernoulli expectations).  With limit set, a uniform
    subsample of that many rows is drawn with rng (original order kept).
    Parsing is atomic: any malformed input raises before a matrix exists.
    """
    with open(images_path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise DataFormatError(f"{images_path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{images_path}: bad magic 0x{magic:08x}")
    expected = 16 + count * rows * cols
    if len(blob) < expected:
        raise DataFormatError(
            f"{images_path}: expected {expected} bytes, got {len(blob)}"
        )
    pixels = np.frombuffer(blob[16:expected], dtype=np.uint8)

    with open(labels_path, "rb") as fh:
        lblob = fh.read()
    if len(lblob) < 8:
        raise DataFormatError(f"{labels_path}: truncated header")
    lmagic, lcount = struct.unpack(">II", lblob[:8])
    if lmagic != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{labels_path}: bad magic 0x{lmagic:08x}")
    if lcount != count:
        raise DataFormatError(
            f"label count {lcount} does not match image count {count}"
        )
    if len(lblob) < 8 + count:
        raise DataFormatError(f"{labels_path}: truncated labels")
    raw_labels = np.frombuffer(lblob[8 : 8 + count], dtype=np.uint8)

    values = pixels.reshape(count, rows * cols).astype(float) / 255.0
    if limit is not None and limit < count:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        if rng is None:
            raise ValueError("subsampling needs an rng")
        keep = np.sort(rng.choice(count, size=limit, replace=False))
        values = values[keep]
        raw_labels = raw_labels[keep]
    return DataMatrix(values, labels=remap_labels(raw_labels), feature_kind=BINARY)


def write_idx(images, labels, images_path, labels_path) -> None:
    """Write uint8 images (N x rows x cols) and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.shape != (images.shape[0],):
        raise ValueError("expected N x rows x cols images and N labels")
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        fh.write(labels.tobytes())


def gaussian_blobs(n: int, centers, std: float, rng) -> DataMatrix:
    """n points split as evenly as possible across isotropic Gaussian blobs.

    Rows are shuffled; labels are the 1-based blob ids.
    """
    centers = np.asarray(centers, dtype=float)
    if centers.ndim != 2 or centers.shape[0] < 1:
        raise ValueError("centers must be K x D")
    k = centers.shape[0]
    if n < k:
        raise ValueError("need at least one point per blob")
    counts = np.full(k, n // k)
    counts[: n % k] += 1
    values = np.vstack([
        centers[c] + std * rng.standard_normal((counts[c], centers.shape[1]))
        for c in range(k)
    ])
    labels = np.repeat(np.arange(1, k + 1), counts)
    order = rng.permutation(n)
    return DataMatrix(values[order], labels=labels[order], feature_kind=CONTINUOUS)
