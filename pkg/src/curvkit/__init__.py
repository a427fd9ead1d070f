"""Direct curvature estimation for oriented point clouds."""

from .cloud import OrientedPointCloud
from .errors import CurvkitError, DegenerateNeighborhoodError, InvalidInputError
from .geometry import (
    CurvatureSet,
    TangentFrame,
    build_tangent_frame,
    curvatures_from_weingarten,
    project_to_frame,
)
from .normals import estimate_normals_pca, orient_neighbors
from .quadratic import ParaboloidFit, curvatures_from_fit, quadratic_field, quadratic_fit_at
from .spatial import NeighborList, SpatialIndex, build_index, k_nearest
from .surfaces import add_gaussian_noise, make_surface, sample_surface
from .wme import (
    CurvatureField,
    WeingartenEstimate,
    assemble_design,
    estimate_at,
    estimate_field,
    solve_weingarten,
)

__version__ = "0.1.0"
