"""Point cloud container shared by every estimator."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class OrientedPointCloud:
    """``n`` positions with optional per-point unit normals.

    Both arrays are copied to float64 on construction. Normals must match
    the positions in length and be unit length to within ``1e-6``.
    """

    positions: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise InvalidInputError(f"positions must have shape (n, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise InvalidInputError("positions contain non-finite coordinates")
        object.__setattr__(self, "positions", pos)
        if self.normals is not None:
            nrm = np.array(self.normals, dtype=float)
            if nrm.shape != pos.shape:
                raise InvalidInputError(
                    f"normals shape {nrm.shape} does not match positions {pos.shape}"
                )
            if not np.all(np.isfinite(nrm)):
                raise InvalidInputError("normals contain non-finite components")
            if np.any(np.abs(np.linalg.norm(nrm, axis=1) - 1.0) > 1e-6):
                raise InvalidInputError("normals must be unit length")
            object.__setattr__(self, "normals", nrm)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def oriented(self) -> bool:
        return self.normals is not None

    def with_normals(self, normals) -> "OrientedPointCloud":
        return replace(self, normals=normals)

    def subset(self, ids) -> "OrientedPointCloud":
        ids = np.asarray(ids)
        nrm = None if self.normals is None else self.normals[ids]
        return OrientedPointCloud(self.positions[ids], nrm)
