"""Particle swarm optimization guided by a Gaussian-process surrogate."""

__version__ = "0.1.0"

from .benchfns import BenchSpec, make_function, make_spec, random_rotation  # noqa: E402
from .core import Domain, Objective  # noqa: E402
from .gp import GpModel, KernelParams, fit_hyperparams, posterior, surrogate_argmin  # noqa: E402
from .memory import MemoryConfig  # noqa: E402
from .optimizer import PsoParams, RunConfig, RunRecord, run, run_bo_baseline  # noqa: E402
from .stats import welch_one_sided  # noqa: E402

__all__ = [
    "BenchSpec", "Domain", "GpModel", "KernelParams", "MemoryConfig", "Objective", "PsoParams",
    "RunConfig", "RunRecord", "fit_hyperparams", "make_function", "make_spec", "posterior",
    "random_rotation", "run", "run_bo_baseline", "surrogate_argmin", "welch_one_sided",
]
