"""On-disk formats: labelled CSV datasets, hex-float checkpoints and PPM rasters."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .toy import SurfaceRaster


class FormatError(ValueError):
    pass


@dataclass
class Dataset:
    """Features [N, D] and dense labels; ``label_names[k]`` is the file's label for class k."""

    x: np.ndarray
    y: np.ndarray
    label_names: tuple

    @property
    def num_classes(self) -> int:
        return len(self.label_names)


# --- datasets --------------------------------------------------------------------

def load_dataset_csv(path: str) -> Dataset:
    """Header ``x1,...,xD,label``; labels are reindexed densely in order of first appearance."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    dim = len(header) - 1
    if dim < 1 or header[-1] != "label" or header[:-1] != [f"x{i + 1}" for i in range(dim)]:
        raise FormatError(f"{path} row 1: expected header x1,...,xD,label, got {','.join(header)}")
    feats, raw_labels = [], []
    for rownum, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise FormatError(f"{path} row {rownum}: expected {dim + 1} fields, got {len(row)}")
        try:
            values = [float(v) for v in row[:-1]]
        except ValueError:
            raise FormatError(f"{path} row {rownum}: non-numeric feature in {row[:-1]}") from None
        if not np.all(np.isfinite(values)):
            raise FormatError(f"{path} row {rownum}: non-finite feature")
        label = row[-1].strip()
        if not label:
            raise FormatError(f"{path} row {rownum}: empty label")
        feats.append(values)
        raw_labels.append(label)
    if not feats:
        raise FormatError(f"{path}: no samples")
    names = tuple(dict.fromkeys(raw_labels))
    index = {n: k for k, n in enumerate(names)}
    return Dataset(np.array(feats, dtype=np.float64), np.array([index[n] for n in raw_labels]), names)


def save_dataset_csv(x, y, path: str, label_names=None) -> None:
    """Write features with 17 significant digits so loading restores every value exactly."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError(f"expected [N, D] features and N labels, got {x.shape} and {y.shape}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join([f"x{i + 1}" for i in range(x.shape[1])] + ["label"]) + "\n")
        for row, label in zip(x, y):
            name = label_names[int(label)] if label_names is not None else int(label)
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{name}\n")


# --- checkpoints -----------------------------------------------------------------

def save_checkpoint(params: dict, path: str) -> None:
    """One line per array: ``name shape v1 v2 ...`` with shape as ``d1xd2`` and hex-float values."""
    lines = []
    for name in sorted(params):
        if not name or any(c.isspace() for c in name):
            raise FormatError(f"array name {name!r} must be nonempty without whitespace")
        arr = np.asarray(params[name], dtype=np.float64)
        shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
        lines.append(" ".join([name, shape] + [float(v).hex() for v in arr.ravel()]) + "\n")
    with open(path, "w", encoding="ascii") as fh:
        fh.writelines(lines)


def load_checkpoint(path: str) -> dict:
    params = {}
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            name = parts[0]
            if len(parts) < 2:
                raise FormatError(f"{path} line {lineno}: array {name!r} has no shape")
            try:
                shape = () if parts[1] == "scalar" else tuple(int(d) for d in parts[1].split("x"))
                values = [float.fromhex(v) for v in parts[2:]]
            except ValueError:
                raise FormatError(f"{path} line {lineno}: array {name!r} is corrupt") from None
            if any(d < 0 for d in shape) or len(values) != int(np.prod(shape, dtype=np.int64)):
                raise FormatError(f"{path} line {lineno}: array {name!r} has {len(values)} values "
                                  f"for shape {parts[1]}")
            if name in params:
                raise FormatError(f"{path} line {lineno}: array {name!r} appears twice")
            params[name] = np.array(values, dtype=np.float64).reshape(shape)
    return params


def flatten_stores(stores: dict) -> dict:
    """{"g": {"W0": ..}, ..} -> {"g.W0": ..}; None stores are skipped."""
    return {f"{prefix}.{k}": v for prefix, store in stores.items() if store is not None for k, v in store.items()}


def split_stores(flat: dict) -> dict:
    out = {}
    for key, value in flat.items():
        prefix, sep, name = key.partition(".")
        if not sep:
            raise FormatError(f"array name {key!r} has no store prefix")
        out.setdefault(prefix, {})[name] = value
    return out


# --- rasters ---------------------------------------------------------------------

DEFAULT_PALETTE = {0: (31, 119, 180), 1: (255, 127, 14), 2: (44, 160, 44), 3: (214, 39, 40),
                   4: (148, 103, 189), 5: (140, 86, 75), 6: (227, 119, 194), 7: (127, 127, 127)}
TIE_COLOR = (0, 0, 0)


def write_raster_ppm(raster: SurfaceRaster, path: str, palette=None, tie_color=TIE_COLOR) -> str:
    """Plain PPM, top row first (highest y), plus ``<stem>.scores.csv`` with the raw scores.

    Returns the path of the scores file.
    """
    palette = DEFAULT_PALETTE if palette is None else palette
    colors = dict(palette)
    colors[-1] = tuple(tie_color)
    unmapped = sorted(set(np.unique(raster.classes).tolist()) - set(colors))
    if unmapped:
        raise ValueError(f"no palette color for class id(s) {unmapped}")
    h, w = raster.classes.shape
    out = [f"P3\n{w} {h}\n255\n"]
    for j in range(h - 1, -1, -1):
        out.append(" ".join("%d %d %d" % colors[int(c)] for c in raster.classes[j]) + "\n")
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("".join(out))
    scores_path = os.path.splitext(path)[0] + ".scores.csv"
    with open(scores_path, "w", encoding="ascii", newline="") as fh:
        for j in range(h - 1, -1, -1):
            fh.write(",".join(f"{v:.17g}" for v in raster.scores[j]) + "\n")
    return scores_path
