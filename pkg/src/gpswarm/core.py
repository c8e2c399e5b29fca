"""Domain types, objective wrapper, seeded randomness and small vector helpers."""

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid user-supplied configuration."""


class BudgetExhausted(Exception):
    """Raised when an optimizer asks for an evaluation beyond its budget."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ConfigurationError("lower and upper must be 1-D vectors of equal length")
        if lower.size < 1:
            raise ConfigurationError("domain dimension must be at least 1")
        if not np.all(lower < upper):
            raise ConfigurationError("lower must be strictly below upper on every axis")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, low, high, dim):
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self):
        return self.lower.size

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def diameter(self):
        return float(np.linalg.norm(self.width))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


class Objective:
    """Deterministic scalar function of a D-vector that counts its calls.

    Parameters
    ----------
    func : callable
        Maps a 1-D float array of length ``dimension`` to a float.
    dimension : int
        Input dimension.
    name : str, optional
        Label used in reports.
    """

    def __init__(self, func, dimension, name="objective"):
        if dimension < 1:
            raise ConfigurationError("dimension must be positive")
        self._func = func
        self.dimension = int(dimension)
        self.name = name
        self.eval_count = 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected a vector of length {self.dimension}, got shape {x.shape}")
        self.eval_count += 1
        return float(self._func(x))

    def __repr__(self):
        return f"Objective({self.name!r}, dimension={self.dimension}, eval_count={self.eval_count})"


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_value: float
    value: float

    def offer(self, x, fx, ties_replace=False):
        """Record an evaluation at ``x`` and update the personal best.

        The best is replaced on strict improvement, or on ties as well when
        ``ties_replace`` is set (relocated particles).
        """
        self.position = x
        self.value = fx
        if fx < self.best_value or (ties_replace and fx == self.best_value):
            self.best_position = x.copy()
            self.best_value = fx


@dataclass
class SwarmState:
    """Mutable swarm owned by a single run.

    ``memory`` holds ``(index, point, value)`` triples where ``index`` is the
    evaluation number that produced the point, so duplicates at distinct
    evaluations stay distinct.
    """

    particles: list
    global_best_position: np.ndarray
    global_best_value: float
    memory: list = field(default_factory=list)
    iteration: int = 0
    # evaluation index of each particle's current position
    position_index: list = field(default_factory=list)

    @property
    def n_par(self):
        return len(self.particles)

    def refresh_global_best(self):
        best = min(self.particles, key=lambda p: p.best_value)
        if best.best_value <= self.global_best_value:
            self.global_best_value = best.best_value
            self.global_best_position = best.best_position.copy()


def make_rng(seed):
    """Return a PCG64 generator; ``seed`` may be an int or a ``SeedSequence``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def split_rng(seed, n):
    """Derive ``n`` independent generators from one seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [make_rng(child) for child in ss.spawn(n)]


def uniform_in_domain(rng, domain):
    return domain.lower + domain.width * rng.random(domain.dim)


RADIUS_LAWS = ("volume", "linear")


def sample_hypersphere(rng, center, radius, radius_law="volume"):
    """Draw a point from the closed ball ``|x - center| <= radius``.

    The direction is a normalised Gaussian vector. With ``radius_law="volume"``
    the distance from the centre is ``radius * u**(1/D)`` (uniform in the ball);
    with ``"linear"`` it is ``radius * u`` (uniform radius, denser near the
    centre). Both consume the same draws.
    """
    if radius_law not in RADIUS_LAWS:
        raise ValueError(f"unknown radius_law {radius_law!r}")
    center = np.asarray(center, dtype=float)
    dim = center.size
    direction = rng.standard_normal(dim)
    u = rng.random()
    norm = np.linalg.norm(direction)
    if radius <= 0.0 or norm == 0.0:
        return center.copy()
    r = u ** (1.0 / dim) if radius_law == "volume" else u
    return center + direction * (radius * r / norm)


def clamp_to_domain(x, v, domain):
    """Clamp ``x`` to the box; violated axes get their velocity set to ``-0.5 * v``."""
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    low = x < domain.lower
    high = x > domain.upper
    out = low | high
    x[low] = domain.lower[low]
    x[high] = domain.upper[high]
    v[out] = -0.5 * v[out]
    return x, v
