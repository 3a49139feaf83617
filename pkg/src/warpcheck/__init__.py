"""Numerical checks for curvature-dimension conditions on warped products."""

import os as _os

# BLAS pools are sized at import, so the cap must be in place before numpy loads
_threads = _os.environ.get("WARPCHECK_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)
# the system TBB is too old for numba; skip probing it
_os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from .analysis import check_fK_concavity, compute_KF, pythagorean_residual  # noqa: E402
from .bochner import TensorFunction, be_inequality, dimension_identity, gamma2_terms  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .fiber import FiberSpace, RCDAttestation, fiber_distance, fiber_spectrum  # noqa: E402
from .geometry import (ProductSet, WarpedProduct, brunn_minkowski_check, distance,  # noqa: E402
                       geodesic_2d, grid_geodesic, mcp_check, midpoint)
from .kernel import sigma, sigma_kappa, sin_kappa, cos_kappa, tau  # noqa: E402
from .scenario import Scenario, bundled, load_scenario  # noqa: E402
from .schrodinger import assemble, schrodinger_transform, spectrum  # noqa: E402
from .verdict import classify_rcd  # noqa: E402
from .warp import BaseSpace, WarpFunction  # noqa: E402

__version__ = "0.1.0"
