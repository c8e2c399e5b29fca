"""Benchmark objectives with optional shift, rotation and value offset.

A wrapped function evaluates ``raw(R @ (x - shift)) + offset``. Shifts and
rotations are drawn from a seeded generator instead of read from data
files, so results are comparable between algorithms here but not to
published absolute numbers.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ConfigurationError, Domain, Objective, make_rng

SCHWEFEL_CONST = 418.9829
SCHWEFEL_ARGMAX = 420.968746  # argmax of z*sin(sqrt|z|) on [0, 500]


class UnknownFunction(ConfigurationError):
    pass


def sphere(z):
    return float(np.dot(z, z))


def elliptic(z):
    d = z.size
    if d == 1:
        return float(z[0] ** 2)
    w = 1e6 ** (np.arange(d) / (d - 1))
    return float(np.dot(w, z * z))


def bent_cigar(z):
    return float(z[0] ** 2 + 1e6 * np.dot(z[1:], z[1:]))


def discus(z):
    return float(1e6 * z[0] ** 2 + np.dot(z[1:], z[1:]))


def diff_powers(z):
    d = z.size
    expo = 2.0 + (4.0 * np.arange(d) / (d - 1) if d > 1 else np.zeros(1))
    return float(np.sqrt(np.sum(np.abs(z) ** expo)))


def rosenbrock(z):
    return float(np.sum(100.0 * (z[:-1] ** 2 - z[1:]) ** 2 + (z[:-1] - 1.0) ** 2))


def schaffer_f7(z):
    s = np.sqrt(z[:-1] ** 2 + z[1:] ** 2)
    t = np.sqrt(s) * (1.0 + np.sin(50.0 * s**0.2) ** 2)
    return float((np.sum(t) / (z.size - 1)) ** 2)


def ackley(z):
    d = z.size
    return float(-20.0 * np.exp(-0.2 * np.sqrt(np.dot(z, z) / d))
                 - np.exp(np.sum(np.cos(2.0 * np.pi * z)) / d) + 20.0 + math.e)


def griewank(z):
    i = np.arange(1, z.size + 1)
    return float(np.dot(z, z) / 4000.0 - np.prod(np.cos(z / np.sqrt(i))) + 1.0)


def rastrigin(z):
    return float(np.sum(z * z - 10.0 * np.cos(2.0 * np.pi * z) + 10.0))


def schwefel(z):
    return float(SCHWEFEL_CONST * z.size - np.sum(z * np.sin(np.sqrt(np.abs(z)))))


def expanded_schaffer_f6(z):
    x, y = z, np.roll(z, -1)
    r2 = x * x + y * y
    return float(np.sum(0.5 + (np.sin(np.sqrt(r2)) ** 2 - 0.5) / (1.0 + 0.001 * r2) ** 2))


@dataclass(frozen=True)
class _Entry:
    func: object
    bounds: tuple
    optimum: float  # per-coordinate location of the raw minimum
    min_dim: int = 1


REGISTRY = {
    "sphere": _Entry(sphere, (-100.0, 100.0), 0.0),
    "elliptic": _Entry(elliptic, (-100.0, 100.0), 0.0),
    "bent_cigar": _Entry(bent_cigar, (-100.0, 100.0), 0.0),
    "discus": _Entry(discus, (-100.0, 100.0), 0.0),
    "diff_powers": _Entry(diff_powers, (-100.0, 100.0), 0.0),
    "rosenbrock": _Entry(rosenbrock, (-100.0, 100.0), 1.0, min_dim=2),
    "schaffer_f7": _Entry(schaffer_f7, (-100.0, 100.0), 0.0, min_dim=2),
    "ackley": _Entry(ackley, (-100.0, 100.0), 0.0),
    "griewank": _Entry(griewank, (-100.0, 100.0), 0.0),
    "rastrigin": _Entry(rastrigin, (-100.0, 100.0), 0.0),
    "schwefel": _Entry(schwefel, (-500.0, 500.0), SCHWEFEL_ARGMAX),
    "expanded_schaffer_f6": _Entry(expanded_schaffer_f6, (-100.0, 100.0), 0.0),
}

DOMAIN_PRESETS = {"cec": (-100.0, 100.0), "small": (-5.0, 5.0), "wide": (-600.0, 600.0)}


def function_names():
    return sorted(REGISTRY)


def _entry(name):
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownFunction(f"unknown function {name!r}; known: {', '.join(function_names())}") from None


def random_rotation(rng, dim):
    """Orthogonal matrix with determinant +1 from a QR-orthonormalized Gaussian matrix."""
    rng = make_rng(rng)
    if dim < 1:
        raise ValueError("dimension must be positive")
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass(frozen=True)
class BenchSpec:
    name: str
    dim: int
    domain: Optional[Domain] = None
    shift: Optional[np.ndarray] = None
    rotation: Optional[np.ndarray] = None
    offset: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        entry = _entry(self.name)
        if self.dim < entry.min_dim:
            raise ConfigurationError(f"{self.name} needs dimension >= {entry.min_dim}")
        if self.domain is None:
            object.__setattr__(self, "domain", Domain.cube(*entry.bounds, self.dim))
        elif self.domain.dim != self.dim:
            raise ConfigurationError("domain dimension does not match dim")
        if self.shift is not None:
            shift = np.asarray(self.shift, dtype=float)
            if shift.shape != (self.dim,):
                raise ConfigurationError("shift has the wrong length")
            object.__setattr__(self, "shift", shift)
        if self.rotation is not None:
            rot = np.asarray(self.rotation, dtype=float)
            if rot.shape != (self.dim, self.dim):
                raise ConfigurationError("rotation has the wrong shape")
            if not np.allclose(rot @ rot.T, np.eye(self.dim), atol=1e-10):
                raise ConfigurationError("rotation is not orthogonal")
            object.__setattr__(self, "rotation", rot)
        if not self.label:
            object.__setattr__(self, "label", self.name)

    @property
    def optimum_position(self):
        """Location of the wrapped minimum (may lie outside the domain for rosenbrock/schwefel)."""
        z = np.full(self.dim, _entry(self.name).optimum)
        if self.rotation is not None:
            z = self.rotation.T @ z
        return z if self.shift is None else z + self.shift


def make_spec(name, dim, seed=None, shifted=False, rotated=False, offset=0.0, bounds=None, label=None):
    """Build a ``BenchSpec`` with seeded synthetic shift (inner 80% of the box) and rotation."""
    entry = _entry(name)
    if isinstance(bounds, str):
        bounds = DOMAIN_PRESETS[bounds]
    domain = Domain.cube(*(bounds or entry.bounds), dim)
    rng = make_rng(np.random.SeedSequence(seed) if seed is not None else None)
    shift = rotation = None
    if shifted:
        center = 0.5 * (domain.lower + domain.upper)
        shift = center + 0.8 * (rng.random(dim) - 0.5) * domain.width
    if rotated:
        rotation = random_rotation(rng, dim)
    return BenchSpec(name, dim, domain, shift, rotation, float(offset), label or name)


def make_function(spec):
    """Objective evaluating ``raw(R @ (x - shift)) + offset``."""
    raw = _entry(spec.name).func
    shift, rot, offset = spec.shift, spec.rotation, spec.offset

    def f(x):
        z = x if shift is None else x - shift
        if rot is not None:
            z = rot @ z
        return raw(z) + offset

    return Objective(f, spec.dim, name=spec.label)
