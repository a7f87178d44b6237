"""Concentrated vortices in the lake equations: solver, particle transport and diagnostics."""

__version__ = "0.1.0"

from .lake import LakeError, LakeSpec, Profile, Shape, build_lake  # noqa: E402
from .elliptic import SolverError, assemble, solve_stream, green_kernel  # noqa: E402
from .blob import Blob, init_blob, deposit, total_circulation  # noqa: E402
from .transport import simulate, step, boundary_guard  # noqa: E402

__all__ = ["LakeError", "LakeSpec", "Profile", "Shape", "build_lake", "SolverError", "assemble",
           "solve_stream", "green_kernel", "Blob", "init_blob", "deposit", "total_circulation",
           "simulate", "step", "boundary_guard", "__version__"]
