import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpswarm.core import ConfigurationError, Particle, SwarmState
from gpswarm.gp import GpModel, KernelParams
from gpswarm.memory import (DEFAULT_RHO, MemoryConfig, Observation, current_observations,
                            evict_least_surprising, select_informative, surprise, training_set, update_memory)


def _model(seed=0, n=6, dim=1, nugget=0.05):
    rng = np.random.default_rng(seed)
    X = rng.random((n, dim))
    y = np.sin(5 * X.sum(axis=1))
    return GpModel(KernelParams(1.0, 0.1, nugget, 0.3), mean_offset=float(y.mean())).fit(X, y)


def brute_force_selection(model, rho, batch):
    keep = []
    for x, fx in batch:
        mean, var = model.predict(np.atleast_2d(x))
        lo = mean[0] - rho * np.sqrt(var[0])
        hi = mean[0] + rho * np.sqrt(var[0])
        if not lo <= fx <= hi:
            keep.append((x, fx))
    return keep


def test_config_validation():
    assert MemoryConfig().rho == DEFAULT_RHO == 1.15
    with pytest.raises(ConfigurationError):
        MemoryConfig(rho=0)
    with pytest.raises(ConfigurationError):
        MemoryConfig(cap=0)
    with pytest.raises(ConfigurationError):
        MemoryConfig(cap=5).resolved_cap(10)
    assert MemoryConfig().resolved_cap(4) == 100


def test_value_at_mean_is_excluded():
    m = _model()
    x = np.array([0.37])
    mu = m.predict([x], return_var=False)[0]
    assert select_informative(m, MemoryConfig(), [(x, mu)]) == []


def test_zero_width_interval_includes_any_deviation():
    X = np.array([[0.2]])
    m = GpModel(KernelParams(1.0, 0.0, 0.0, 0.5)).fit(X, [1.0])
    assert m.predict(X)[1][0] == 0.0
    out = select_informative(m, MemoryConfig(), [(X[0], 1.0 + 1e-9)])
    assert len(out) == 1
    assert surprise(m, [(X[0], 1.0 + 1e-9)])[0] == np.inf
    assert surprise(m, [(X[0], 1.0)])[0] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_selection_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    m = _model(seed)
    batch = [(rng.random(1), float(rng.normal(0, 1.5))) for _ in range(12)]
    got = select_informative(m, MemoryConfig(), batch)
    want = brute_force_selection(m, 1.15, batch)
    assert [float(o.value) for o in got] == [v for _, v in want]


def _state(points, values, start_index=0):
    parts = [Particle(np.array(p, float), np.zeros(len(p)), np.array(p, float), v, v)
             for p, v in zip(points, values)]
    k = int(np.argmin(values))
    return SwarmState(parts, parts[k].position.copy(), values[k],
                      position_index=list(range(start_index + 1, start_index + 1 + len(parts))))


def test_memory_unchanged_when_everything_is_predicted():
    m = _model()
    pts = np.random.default_rng(1).random((4, 1))
    state = _state(pts, list(m.predict(pts, return_var=False)), start_index=100)
    state.memory = [Observation(1, np.zeros(1), 0.0)]
    update_memory(state, m, MemoryConfig())
    assert [o.index for o in state.memory] == [1]


def test_update_memory_adds_surprises_once():
    m = _model()
    pts = np.random.default_rng(1).random((4, 1))
    state = _state(pts, [50.0, 60.0, 70.0, 80.0], start_index=100)
    update_memory(state, m, MemoryConfig())
    assert [o.index for o in state.memory] == [101, 102, 103, 104]
    update_memory(state, m, MemoryConfig())
    assert len(state.memory) == 4


def test_eviction_drops_least_surprising():
    m = _model()
    rng = np.random.default_rng(3)
    mem = [Observation(k, rng.random(1), float(rng.normal(0, 2))) for k in range(20)]
    kept = evict_least_surprising(m, mem, 15)
    assert len(kept) == 15
    z = dict(zip([o.index for o in mem], surprise(m, mem)))
    kept_ids = {o.index for o in kept}
    dropped = [z[o.index] for o in mem if o.index not in kept_ids]
    assert max(dropped) <= min(z[i] for i in kept_ids)
    # survivors keep their original order
    assert [o.index for o in kept] == sorted(kept_ids)
    assert evict_least_surprising(m, mem, 30) == mem


def test_update_memory_enforces_cap():
    m = _model()
    pts = np.random.default_rng(1).random((4, 1))
    state = _state(pts, [50.0, 60.0, 70.0, 80.0], start_index=100)
    state.memory = [Observation(k, np.array([k / 10]), 0.0) for k in range(6)]
    update_memory(state, m, MemoryConfig(cap=5))
    assert len(state.memory) == 5
    assert {101, 102, 103, 104} <= {o.index for o in state.memory}


def test_training_set_union_by_index():
    a = Observation(1, np.zeros(1), 0.0)
    b = Observation(2, np.zeros(1), 0.0)  # same coordinates, different evaluation
    c = Observation(3, np.ones(1), 1.0)
    assert [o.index for o in training_set([a, b], [b, c])] == [1, 2, 3]


def test_current_observations_follow_position_index():
    state = _state([[0.0], [1.0]], [3.0, 4.0], start_index=10)
    obs = current_observations(state)
    assert [(o.index, o.value) for o in obs] == [(11, 3.0), (12, 4.0)]
