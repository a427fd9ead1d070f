"""ASCII XYZ point files and the CSV outputs of the command-line tools."""

from __future__ import annotations

import csv
import warnings

import numpy as np

from .cloud import OrientedPointCloud
from .errors import InvalidInputError

CURVATURE_HEADER = ["id", "x", "y", "z", "K", "H", "k1", "k2",
                    "d1x", "d1y", "d1z", "d2x", "d2y", "d2z", "asym", "flag"]
REPORT_HEADER = ["method", "surface", "n", "k", "sigma2", "mse_matrix", "mse_K", "mse_H",
                 "seconds", "seed", "trial", "agg"]
TRUTH_HEADER = ["id", "x", "y", "z", "nx", "ny", "nz", "K", "H", "k1", "k2"]

_NORMAL_TOL = 1e-3


class XyzFormatError(InvalidInputError):
    pass


def _fmt(v) -> str:
    return format(float(v), ".17g")


def read_xyz(path) -> OrientedPointCloud:
    """Parse a whitespace-separated XYZ file with 3 or 6 columns.

    Blank lines and lines starting with ``#`` are skipped. Normals are
    renormalised; a warning is issued if any was off unit length by more
    than ``1e-3``.
    """
    rows = []
    arity = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) not in (3, 6):
                raise XyzFormatError(f"{path}:{lineno}: expected 3 or 6 fields, got {len(fields)}")
            if arity is None:
                arity = len(fields)
            elif len(fields) != arity:
                raise XyzFormatError(f"{path}:{lineno}: mixed 3- and 6-field lines")
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise XyzFormatError(f"{path}:{lineno}: non-numeric field in {text!r}") from None
    if not rows:
        raise XyzFormatError(f"{path}: no points")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise XyzFormatError(f"{path}: non-finite values")
    if arity == 3:
        return OrientedPointCloud(data)
    normals = data[:, 3:]
    norms = np.linalg.norm(normals, axis=1)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise XyzFormatError(f"{path}: zero normal on point {bad}")
    if np.any(np.abs(norms - 1.0) > _NORMAL_TOL):
        warnings.warn(f"{path}: normals were not unit length; renormalised", RuntimeWarning, stacklevel=2)
    return OrientedPointCloud(data[:, :3], normals / norms[:, None])


def write_xyz(cloud: OrientedPointCloud, path) -> None:
    data = cloud.positions if cloud.normals is None else np.hstack([cloud.positions, cloud.normals])
    with open(path, "w", encoding="utf-8") as fh:
        for row in data:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def write_curvature_csv(field, cloud: OrientedPointCloud, path, flags=None) -> None:
    """One row per point in :data:`CURVATURE_HEADER` order.

    ``flags`` overrides ``field.flags`` (e.g. to add normal-estimation bits).
    """
    if len(field) != len(cloud):
        raise InvalidInputError("curvature field and cloud differ in length")
    flags = field.flags if flags is None else flags
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVATURE_HEADER)
        for i in range(len(cloud)):
            vals = [*cloud.positions[i], field.K[i], field.H[i], field.k1[i], field.k2[i],
                    *field.dir1[i], *field.dir2[i], field.asym[i]]
            w.writerow([i, *(_fmt(v) for v in vals), int(flags[i])])


def read_curvature_csv(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[: len(CURVATURE_HEADER)] != CURVATURE_HEADER:
            raise InvalidInputError(f"{path}: not a curvature CSV")
        rows = [r for r in reader if r]
    if not rows:
        raise InvalidInputError(f"{path}: no rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError:
        raise InvalidInputError(f"{path}: non-numeric entries") from None
    return {name: data[:, j] for j, name in enumerate(CURVATURE_HEADER)}


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return _fmt(v)
    return v


def write_report_csv(reports, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in reports:
            w.writerow([_csv_value(getattr(r, name)) for name in REPORT_HEADER])


def write_truth_csv(sample, path) -> None:
    c = sample.cloud
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for i in range(len(c)):
            vals = [*c.positions[i], *c.normals[i], sample.true_K[i], sample.true_H[i],
                    sample.true_k1[i], sample.true_k2[i]]
            w.writerow([i, *(_fmt(v) for v in vals)])


def write_member_map(result, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point_id", "cluster_id"])
        for i, cid in enumerate(result.member_map):
            w.writerow([i, int(cid)])

