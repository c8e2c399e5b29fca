"""Greedy retention of surprising observations for the surrogate's training set."""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import ConfigurationError

DEFAULT_RHO = 1.15  # two-sided 75% normal interval half-width
CAP_PER_PARTICLE = 25


class Observation(NamedTuple):
    index: int  # evaluation number; unique per objective call
    point: np.ndarray
    value: float


@dataclass(frozen=True)
class MemoryConfig:
    rho: float = DEFAULT_RHO
    cap: Optional[int] = None  # None -> CAP_PER_PARTICLE * n_par

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigurationError("rho must be positive")
        if self.cap is not None and self.cap < 1:
            raise ConfigurationError("cap must be a positive integer")

    def resolved_cap(self, n_par):
        cap = CAP_PER_PARTICLE * n_par if self.cap is None else self.cap
        if cap < n_par:
            raise ConfigurationError(f"memory cap {cap} is smaller than the swarm size {n_par}")
        return cap


def _as_observations(batch):
    out = []
    for k, item in enumerate(batch):
        if isinstance(item, Observation):
            out.append(item)
        else:
            point, value = item
            out.append(Observation(-1 - k, np.asarray(point, dtype=float), float(value)))
    return out


def surprise(model, batch):
    """``|f(x) - mean(x)| / sd(x)`` per observation; zero-width intervals give inf (or 0 on exact hits)."""
    batch = _as_observations(batch)
    if not batch:
        return np.empty(0)
    mean, var = model.predict(np.array([o.point for o in batch]))
    resid = np.abs(np.array([o.value for o in batch]) - mean)
    sd = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = resid / sd
    z[(sd == 0) & (resid == 0)] = 0.0
    z[(sd == 0) & (resid > 0)] = np.inf
    return z


def select_informative(model, cfg, batch):
    """Observations whose value falls outside ``mean +- rho * sd`` of the model."""
    batch = _as_observations(batch)
    if not batch:
        return []
    mean, var = model.predict(np.array([o.point for o in batch]))
    half = cfg.rho * np.sqrt(var)
    values = np.array([o.value for o in batch])
    outside = (values < mean - half) | (values > mean + half)
    return [o for o, keep in zip(batch, outside) if keep]


def evict_least_surprising(model, memory, cap):
    """Drop the ``len(memory) - cap`` entries with the smallest surprise; order of survivors kept."""
    excess = len(memory) - cap
    if excess <= 0:
        return list(memory)
    z = surprise(model, memory)
    # stable: among equal surprise the older entry goes first
    drop = set(np.argsort(z, kind="stable")[:excess].tolist())
    return [o for k, o in enumerate(memory) if k not in drop]


def current_observations(state):
    return [Observation(idx, p.position, p.value)
            for idx, p in zip(state.position_index, state.particles)]


def update_memory(state, model, cfg):
    """Add informative current particle evaluations to ``state.memory`` and enforce the cap.

    Recent particle positions are not stored here; the caller feeds them to
    the next fit alongside the memory.
    """
    known = {o.index for o in state.memory}
    fresh = [o for o in current_observations(state) if o.index not in known]
    memory = list(state.memory) + select_informative(model, cfg, fresh)
    state.memory = evict_least_surprising(model, memory, cfg.resolved_cap(state.n_par))
    return state


def training_set(memory, recent):
    """Union of memory and recent observations by evaluation index, memory first."""
    seen = set()
    out = []
    for o in list(memory) + list(recent):
        if o.index not in seen:
            seen.add(o.index)
            out.append(o)
    return out
