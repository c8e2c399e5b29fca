"""Particle swarm optimizers with an optional Gaussian-process guide, and a sequential BO baseline.

Variants
--------
opso, spso2011
    Plain swarms without a surrogate.
a1, a2, a3
    Componentwise-uniform velocity update with an extra pull towards the
    minimum of the surrogate mean.
b
    The worst particle jumps to the surrogate-mean minimum; the others
    take SPSO2011 steps.
c1, c2
    As ``b``, but the jump target minimizes the lower confidence bound
    (c1) or maximizes the posterior standard deviation (c2).
bo
    Sequential Bayesian optimization with an LCB acquisition.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .core import (RADIUS_LAWS, BudgetExhausted, ConfigurationError, Particle, SwarmState, clamp_to_domain,
                   sample_hypersphere, split_rng, uniform_in_domain)
from .gp import (AcquisitionKind, FactorizationFailure, FitFailure, GpModel, acquisition_values,
                 fit_hyperparams, surrogate_argmin)
from .memory import (MemoryConfig, Observation, current_observations, select_informative,
                     evict_least_surprising, training_set, update_memory)

log = logging.getLogger(__name__)

VARIANTS = ("opso", "spso2011", "a1", "a2", "a3", "b", "c1", "c2", "bo")
GP_VARIANTS = frozenset({"a1", "a2", "a3", "b", "c1", "c2"})
C2_SCAN_POINTS = 64
INIT_VELOCITY_SCALE = 0.1
BO_CANDIDATES = 8

_SPSO_W = 1.0 / (2.0 * math.log(2.0))
_SPSO_C = 0.5 + math.log(2.0)
PRESETS = {
    # Kennedy & Eberhart's original constants; inertia 1 is the literal update
    "opso": dict(omega=1.0, phi_p=2.0, phi_g=2.0),
    "spso2011": dict(omega=_SPSO_W, phi_p=_SPSO_C, phi_g=_SPSO_C),
    "a1": dict(omega=0.42, phi_p=1.2, phi_g=1.2, phi_h=0.75),
    "a2": dict(omega=0.42, phi_p=1.55, phi_g=0.75, phi_h=0.75),
    "a3": dict(omega=0.42, phi_p=0.75, phi_g=1.55, phi_h=0.75),
    "b": dict(omega=0.42, phi_p=1.55, phi_g=1.55),
    "c1": dict(omega=0.42, phi_p=1.55, phi_g=1.55),
    "c2": dict(omega=0.42, phi_p=1.55, phi_g=1.55),
    "bo": dict(omega=0.0, phi_p=0.0, phi_g=0.0),
}


@dataclass(frozen=True)
class PsoParams:
    variant: str
    omega: float
    phi_p: float
    phi_g: float
    phi_h: float = 0.0
    n_par: int = 50
    # "componentwise" or "sphere" (heuristic pull folded into the SPSO2011 centre)
    heuristic_geometry: str = "componentwise"
    # radius law of the SPSO2011 ball; "volume" is uniform in the ball and diverges for D >= 5
    ball: str = "linear"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; known: {', '.join(VARIANTS)}")
        if self.n_par < 1:
            raise ConfigurationError("n_par must be positive")
        if min(self.phi_p, self.phi_g, self.phi_h) < 0:
            raise ConfigurationError("acceleration weights must be non-negative")
        if self.heuristic_geometry not in ("componentwise", "sphere"):
            raise ConfigurationError(f"unknown heuristic_geometry {self.heuristic_geometry!r}")
        if self.ball not in RADIUS_LAWS:
            raise ConfigurationError(f"unknown ball {self.ball!r}; known: {', '.join(RADIUS_LAWS)}")

    @classmethod
    def preset(cls, variant, n_par=50, **overrides):
        variant = variant.lower()
        if variant not in PRESETS:
            raise ConfigurationError(f"unknown variant {variant!r}; known: {', '.join(VARIANTS)}")
        kw = dict(PRESETS[variant])
        kw.update(overrides)
        return cls(variant=variant, n_par=n_par, **kw)

    @property
    def uses_gp(self):
        return self.variant in GP_VARIANTS


@dataclass(frozen=True)
class RunConfig:
    budget: int
    seed: int = 0
    memory_cfg: MemoryConfig = field(default_factory=MemoryConfig)
    refit_every: int = 5
    record_every: Optional[int] = None  # None -> 1 up to 10**4 evaluations, else 10
    fit_restarts: int = 10
    warm_start: bool = True  # add the previous kernel parameters as an extra MLE start

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigurationError("budget must be positive")
        if self.refit_every < 1:
            raise ConfigurationError("refit_every must be positive")
        if self.fit_restarts < 1:
            raise ConfigurationError("fit_restarts must be positive")
        if self.record_every is not None and self.record_every < 1:
            raise ConfigurationError("record_every must be positive")

    @property
    def trace_step(self):
        if self.record_every is not None:
            return self.record_every
        return 1 if self.budget <= 10_000 else 10


@dataclass
class RunRecord:
    """Outcome of one optimizer run.

    The trace lists ``(evaluations, best_so_far, elapsed_seconds)`` every
    ``record_every`` evaluations plus the final evaluation.
    """

    variant: str
    function: str
    seed: int
    budget: int
    evaluations: list
    best_so_far: list
    elapsed: list
    best_value: float
    best_position: np.ndarray
    n_evals: int
    wall_time: float
    diagnostics: list = field(default_factory=list)

    def summary(self):
        return {
            "variant": self.variant,
            "function": self.function,
            "seed": self.seed,
            "budget": self.budget,
            "n_evals": self.n_evals,
            "best_value": self.best_value,
            "best_position": [float(v) for v in self.best_position],
            "wall_time_s": self.wall_time,
            "iterations": len(self.diagnostics),
            "total_jitter": int(sum(d.get("jitter", 0) for d in self.diagnostics)),
            "fit_failures": int(sum(bool(d.get("fit_failed")) for d in self.diagnostics)),
        }


class Evaluator:
    """Budgeted objective calls with an incumbent trace.

    Calling returns ``(value, index)`` where ``index`` is the 1-based
    evaluation number. Raises ``BudgetExhausted`` once ``budget`` calls
    have been made.
    """

    def __init__(self, objective, budget, record_every=1):
        self.objective = objective
        self.budget = budget
        self.record_every = record_every
        self.used = 0
        self.best_value = math.inf
        self.best_position = None
        self.evaluations = []
        self.best_so_far = []
        self.elapsed = []
        self._t0 = time.perf_counter()

    @property
    def remaining(self):
        return self.budget - self.used

    def __call__(self, x):
        if self.used >= self.budget:
            raise BudgetExhausted(f"budget of {self.budget} evaluations exhausted")
        fx = self.objective(x)
        self.used += 1
        if fx < self.best_value or self.best_position is None:
            self.best_value = fx
            self.best_position = np.array(x, dtype=float)
        if self.used % self.record_every == 0:
            self._record()
        return fx, self.used

    def _record(self):
        self.evaluations.append(self.used)
        self.best_so_far.append(self.best_value)
        self.elapsed.append(time.perf_counter() - self._t0)

    def finish(self):
        if self.used and (not self.evaluations or self.evaluations[-1] != self.used):
            self._record()
        return time.perf_counter() - self._t0


# -- kinematics -------------------------------------------------------------

def _move(state, j, x_new, v_new, domain, evaluate, ties_replace=False):
    x_new, v_new = clamp_to_domain(x_new, v_new, domain)
    fx, idx = evaluate(x_new)
    part = state.particles[j]
    part.velocity = v_new
    part.offer(x_new, fx, ties_replace=ties_replace)
    state.position_index[j] = idx


def _finish_sweep(state):
    state.refresh_global_best()
    state.iteration += 1


def _componentwise_velocity(part, g, params, rng, h=None):
    x = part.position
    dim = x.size
    rp = rng.random(dim)
    rg = rng.random(dim)
    v = params.omega * part.velocity + params.phi_p * rp * (part.best_position - x) \
        + params.phi_g * rg * (g - x)
    if h is not None and params.phi_h != 0.0:
        rh = rng.random(dim)
        v = v + params.phi_h * rh * (h - x)
    return v


def spso_centre(x, p, g, phi_p, phi_g):
    """Centre of gravity of the SPSO2011 attraction sphere."""
    if np.array_equal(p, g):
        return x + phi_p * (p - x) / 2.0
    return x + (phi_p * (p - x) + phi_g * (g - x)) / 3.0


def _spso_velocity(part, g, params, rng, h=None):
    x = part.position
    if h is not None and params.phi_h != 0.0:
        centre = x + (params.phi_p * (part.best_position - x) + params.phi_g * (g - x)
                      + params.phi_h * (h - x)) / 4.0
    else:
        centre = spso_centre(x, part.best_position, g, params.phi_p, params.phi_g)
    y = sample_hypersphere(rng, centre, float(np.linalg.norm(centre - x)), params.ball)
    return params.omega * part.velocity + (y - x)


def step_opso(state, params, rng, evaluate, domain):
    """One synchronous sweep of the original componentwise-uniform update with inertia."""
    g = state.global_best_position.copy()
    try:
        for j, part in enumerate(state.particles):
            v = _componentwise_velocity(part, g, params, rng)
            _move(state, j, part.position + v, v, domain, evaluate)
    finally:
        _finish_sweep(state)
    return state


def step_spso2011(state, params, rng, evaluate, domain, skip=()):
    """One sweep of SPSO2011: ``v' = w v + (y - x)`` with ``y`` drawn from a ball about the centre."""
    g = state.global_best_position.copy()
    try:
        for j, part in enumerate(state.particles):
            if j in skip:
                continue
            v = _spso_velocity(part, g, params, rng)
            _move(state, j, part.position + v, v, domain, evaluate)
    finally:
        _finish_sweep(state)
    return state


def heuristic_target(model, domain, state):
    return surrogate_argmin(model, domain, AcquisitionKind.MEAN, state.global_best_position)


def step_variant_a(state, params, rng, model, evaluate, domain, h=None):
    """Velocity update with an extra heuristic pull towards the surrogate-mean minimum ``h``."""
    if h is None:
        h = heuristic_target(model, domain, state)
    g = state.global_best_position.copy()
    velocity = _spso_velocity if params.heuristic_geometry == "sphere" else _componentwise_velocity
    try:
        for j, part in enumerate(state.particles):
            v = velocity(part, g, params, rng, h=h)
            _move(state, j, part.position + v, v, domain, evaluate)
    finally:
        _finish_sweep(state)
    return state


def worst_particle(state):
    """Index of the particle with the highest current objective value (first on ties)."""
    return int(np.argmax([p.value for p in state.particles]))


def _relocating_step(state, params, rng, target, evaluate, domain):
    j_star = worst_particle(state)
    g = state.global_best_position.copy()
    try:
        for j, part in enumerate(state.particles):
            if j == j_star:
                v = rng.standard_normal(part.position.size)
                x_new = np.clip(target, domain.lower, domain.upper)
                fx, idx = evaluate(x_new)
                part.velocity = v
                part.offer(x_new, fx, ties_replace=True)
                state.position_index[j] = idx
            else:
                v = _spso_velocity(part, g, params, rng)
                _move(state, j, part.position + v, v, domain, evaluate)
    finally:
        _finish_sweep(state)
    return j_star


def step_variant_b(state, params, rng, model, evaluate, domain, target=None):
    """Worst particle jumps to the surrogate-mean minimum; the rest take SPSO2011 steps."""
    if target is None:
        target = surrogate_argmin(model, domain, AcquisitionKind.MEAN, state.global_best_position)
    _relocating_step(state, params, rng, target, evaluate, domain)
    return state


def exploration_target(model, domain, state, kind, scan_rng):
    if kind == "c1":
        return surrogate_argmin(model, domain, AcquisitionKind.LCB, state.global_best_position)
    if kind != "c2":
        raise ValueError(f"kind must be 'c1' or 'c2', got {kind!r}")
    scan = qmc.Sobol(domain.dim, scramble=True, seed=scan_rng).random(C2_SCAN_POINTS)
    scan = domain.lower + scan * domain.width
    sd = model.std(scan)
    start = scan[int(np.argmax(sd))]
    return surrogate_argmin(model, domain, AcquisitionKind.MAXVAR, start)


def step_variant_c(state, params, rng, model, kind, evaluate, domain, scan_rng=None, target=None):
    """Worst particle jumps to the LCB minimum (``c1``) or the max-uncertainty point (``c2``)."""
    if target is None:
        target = exploration_target(model, domain, state, kind, rng if scan_rng is None else scan_rng)
    _relocating_step(state, params, rng, target, evaluate, domain)
    return state


# -- driver -----------------------------------------------------------------

def init_swarm(rng, domain, n_par, evaluate):
    particles = []
    index = []
    for _ in range(n_par):
        x = uniform_in_domain(rng, domain)
        v = rng.standard_normal(domain.dim) * (INIT_VELOCITY_SCALE * domain.width)
        fx, idx = evaluate(x)
        particles.append(Particle(x, v, x.copy(), fx, fx))
        index.append(idx)
    best = min(particles, key=lambda p: p.best_value)
    state = SwarmState(particles, best.best_position.copy(), best.best_value, position_index=index)
    state.memory = current_observations(state)
    return state


class _Surrogate:
    """Kernel parameters carried across iterations with periodic refits."""

    def __init__(self, run_cfg, domain, rng):
        self.cfg = run_cfg
        self.domain = domain
        self.rng = rng
        self.params = None
        self.calls = 0

    def model(self, observations, diag):
        X = np.array([o.point for o in observations])
        y = np.array([o.value for o in observations])
        diag["train_size"] = len(y)
        refit = self.params is None or self.calls % self.cfg.refit_every == 0
        self.calls += 1
        if refit and len(y) >= 2:
            extra = (self.params,) if (self.cfg.warm_start and self.params is not None) else ()
            try:
                self.params = fit_hyperparams(self.rng, X, y, self.cfg.fit_restarts,
                                              diameter=self.domain.diameter, extra_starts=extra)
                diag["refit"] = True
            except FitFailure as exc:
                log.warning("kernel fit failed, keeping previous parameters: %s", exc)
                diag["fit_failed"] = True
        if self.params is None:
            diag["fit_failed"] = True
            return None
        try:
            model = GpModel(self.params, mean_offset=float(np.mean(y))).fit(X, y)
        except FactorizationFailure as exc:
            log.warning("posterior factorization failed: %s", exc)
            diag["fit_failed"] = True
            return None
        diag["jitter"] = model.jitter_count
        return model


def run(objective, domain, params, run_cfg, function_name=None, observer=None):
    """Optimize ``objective`` over ``domain`` until the evaluation budget is spent.

    GP variants refit their surrogate each iteration on the memory plus the
    current particle positions, re-estimating kernel parameters every
    ``run_cfg.refit_every`` iterations. A failed surrogate degrades that
    iteration to a plain swarm step (OPSO kinematics for the ``a`` variants,
    SPSO2011 for ``b``/``c``).

    ``observer(state, evaluations_used)``, if given, is called after
    initialization and after every iteration. It must not touch the
    run's random streams.

    Returns
    -------
    RunRecord
    """
    if params.variant == "bo":
        return run_bo_baseline(objective, domain, run_cfg, function_name=function_name)
    if run_cfg.budget < params.n_par:
        raise ConfigurationError(f"budget {run_cfg.budget} is smaller than the swarm ({params.n_par})")
    if objective.dimension != domain.dim:
        raise ConfigurationError("objective and domain dimensions differ")
    move_rng, gp_rng = split_rng(np.random.SeedSequence(run_cfg.seed), 2)
    ev = Evaluator(objective, run_cfg.budget, run_cfg.trace_step)
    state = init_swarm(move_rng, domain, params.n_par, ev)
    surrogate = _Surrogate(run_cfg, domain, gp_rng) if params.uses_gp else None
    mem_cfg = run_cfg.memory_cfg
    mem_cfg.resolved_cap(params.n_par)
    diagnostics = []
    if observer is not None:
        observer(state, ev.used)

    while ev.remaining > 0:
        diag = {"iteration": state.iteration + 1}
        model = None
        if surrogate is not None:
            obs = training_set(state.memory, current_observations(state))
            model = surrogate.model(obs, diag)
        try:
            _dispatch(state, params, move_rng, gp_rng, model, ev, domain, diag)
        except BudgetExhausted:
            pass
        if model is not None:
            update_memory(state, model, mem_cfg)
        diag["memory"] = len(state.memory)
        diag["evals"] = ev.used
        diagnostics.append(diag)
        if observer is not None:
            observer(state, ev.used)

    wall = ev.finish()
    return RunRecord(
        variant=params.variant, function=function_name or objective.name, seed=run_cfg.seed,
        budget=run_cfg.budget, evaluations=ev.evaluations, best_so_far=ev.best_so_far,
        elapsed=ev.elapsed, best_value=ev.best_value, best_position=ev.best_position,
        n_evals=ev.used, wall_time=wall, diagnostics=diagnostics)


def _dispatch(state, params, rng, gp_rng, model, ev, domain, diag):
    variant = params.variant
    if variant == "opso":
        return step_opso(state, params, rng, ev, domain)
    if variant == "spso2011":
        return step_spso2011(state, params, rng, ev, domain)
    if variant in ("a1", "a2", "a3"):
        if model is None:
            return step_opso(state, params, rng, ev, domain)
        h = heuristic_target(model, domain, state)
        diag["target"] = h.tolist()
        return step_variant_a(state, params, rng, model, ev, domain, h=h)
    if model is None:
        return step_spso2011(state, params, rng, ev, domain)
    if variant == "b":
        target = heuristic_target(model, domain, state)
        diag["target"] = target.tolist()
        return step_variant_b(state, params, rng, model, ev, domain, target=target)
    target = exploration_target(model, domain, state, variant, gp_rng)
    diag["target"] = target.tolist()
    return step_variant_c(state, params, rng, model, variant, ev, domain, target=target)


def run_bo_baseline(objective, domain, run_cfg, n_init=None, function_name=None):
    """Sequential GP optimization minimizing the lower confidence bound.

    The initial design has ``2 D + 1`` uniform points. Each step fits the GP
    on the retained memory plus the most recent ``n_init`` observations and
    evaluates the best LCB minimizer found from the incumbent and
    ``BO_CANDIDATES`` seeded uniform starts.
    """
    dim = domain.dim
    n_init = 2 * dim + 1 if n_init is None else n_init
    if run_cfg.budget < n_init:
        raise ConfigurationError(f"budget {run_cfg.budget} is smaller than the initial design ({n_init})")
    if objective.dimension != dim:
        raise ConfigurationError("objective and domain dimensions differ")
    design_rng, gp_rng = split_rng(np.random.SeedSequence(run_cfg.seed), 2)
    ev = Evaluator(objective, run_cfg.budget, run_cfg.trace_step)
    history = []
    for _ in range(n_init):
        x = uniform_in_domain(design_rng, domain)
        fx, idx = ev(x)
        history.append(Observation(idx, x, fx))
    memory = list(history)
    cap = run_cfg.memory_cfg.resolved_cap(n_init)
    surrogate = _Surrogate(run_cfg, domain, gp_rng)
    diagnostics = []
    while ev.remaining > 0:
        diag = {"iteration": len(diagnostics) + 1}
        obs = training_set(memory, history[-n_init:])
        model = surrogate.model(obs, diag)
        if model is None:
            x_next = uniform_in_domain(design_rng, domain)
        else:
            starts = [ev.best_position] + [uniform_in_domain(design_rng, domain)
                                           for _ in range(BO_CANDIDATES)]
            cands = [surrogate_argmin(model, domain, AcquisitionKind.LCB, s) for s in starts]
            scores = acquisition_values(model, np.array(cands), AcquisitionKind.LCB)
            x_next = cands[int(np.argmin(scores))]
        fx, idx = ev(x_next)
        new = Observation(idx, np.asarray(x_next, dtype=float), fx)
        history.append(new)
        if model is not None:
            memory = evict_least_surprising(
                model, memory + select_informative(model, run_cfg.memory_cfg, [new]), cap)
        diag["memory"] = len(memory)
        diag["evals"] = ev.used
        diagnostics.append(diag)
    wall = ev.finish()
    return RunRecord(
        variant="bo", function=function_name or objective.name, seed=run_cfg.seed,
        budget=run_cfg.budget, evaluations=ev.evaluations, best_so_far=ev.best_so_far,
        elapsed=ev.elapsed, best_value=ev.best_value, best_position=ev.best_position,
        n_evals=ev.used, wall_time=wall, diagnostics=diagnostics)


def run_config_dict(run_cfg):
    d = asdict(run_cfg)
    d["memory_cfg"] = asdict(run_cfg.memory_cfg)
    return d
