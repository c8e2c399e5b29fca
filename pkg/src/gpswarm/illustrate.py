"""Snapshot dumps of a small C1 run on 2-D Ackley for external plotting."""

import csv
import json
from pathlib import Path

import numpy as np

from .benchfns import make_function, make_spec
from .core import make_rng
from .gp import AcquisitionKind, GpModel, acquisition_values, fit_hyperparams
from .harness import emit_convergence_data, fmt
from .memory import current_observations, training_set
from .optimizer import PsoParams, RunConfig, exploration_target, run

SNAPSHOT_ITERATIONS = (0, 6, 18)
N_PAR = 10
GRID = 64


def _grid_csv(path, xs, values):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([fmt(x) for x in xs])
        for row in values:
            w.writerow([fmt(v) for v in row])


class _Snapshotter:
    def __init__(self, out_dir, objective, domain, seed, iterations, grid, restarts):
        self.out = Path(out_dir)
        self.objective = objective
        self.domain = domain
        self.seed = seed
        self.iterations = set(iterations)
        self.xs = np.linspace(domain.lower[0], domain.upper[0], grid)
        self.ys = np.linspace(domain.lower[1], domain.upper[1], grid)
        gx, gy = np.meshgrid(self.xs, self.ys)
        self.points = np.column_stack([gx.ravel(), gy.ravel()])
        self.shape = gx.shape
        self.restarts = restarts
        self.written = []

    def __call__(self, state, used):
        it = state.iteration
        if it not in self.iterations:
            return
        d = self.out / f"iter_{it:02d}"
        d.mkdir(parents=True, exist_ok=True)
        obs = training_set(state.memory, current_observations(state))
        X = np.array([o.point for o in obs])
        y = np.array([o.value for o in obs])
        rng = make_rng(np.random.SeedSequence([self.seed, it]))
        params = fit_hyperparams(rng, X, y, self.restarts, diameter=self.domain.diameter)
        model = GpModel(params, mean_offset=float(np.mean(y))).fit(X, y)
        mean, var = model.predict(self.points)
        acq = acquisition_values(model, self.points, AcquisitionKind.LCB)
        target = exploration_target(model, self.domain, state, "c1", None)
        # bypass the call counter so the run bookkeeping is untouched
        raw = np.array([self.objective._func(p) for p in self.points])
        for name, values in (("objective", raw), ("mean", mean), ("variance", var), ("acquisition", acq)):
            _grid_csv(d / f"grid_{name}.csv", self.xs, values.reshape(self.shape))
        with open(d / "particles.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "value", "best_x", "best_y", "best_value"])
            for p in state.particles:
                w.writerow([fmt(p.position[0]), fmt(p.position[1]), fmt(p.value),
                            fmt(p.best_position[0]), fmt(p.best_position[1]), fmt(p.best_value)])
        meta = {
            "iteration": it,
            "evaluations": used,
            "incumbent_value": state.global_best_value,
            "incumbent_position": state.global_best_position.tolist(),
            "exploration_target": target.tolist(),
            "kernel": {"amp": params.amp, "bias": params.bias, "nugget": params.nugget,
                       "length": params.length},
            "training_points": len(y),
            "grid_x": self.xs.tolist(),
            "grid_y": self.ys.tolist(),
            "grid_layout": "rows follow grid_y ascending, columns follow grid_x (the header row)",
        }
        with open(d / "snapshot.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
        self.written.append(d)


def illustrate(out_dir, seed=0, seeds=1, iterations=SNAPSHOT_ITERATIONS, refit_every=5,
               fit_restarts=10, grid=GRID):
    """Run C1 with 10 particles on 2-D Ackley over ``[-5, 5]^2``.

    Snapshots are written for the first seed only, one directory per entry
    of ``iterations``. Every seed ``seed, seed + 1, ...`` is run for
    ``10 * (1 + max(iterations))`` evaluations and its final value is
    listed in ``runs.csv``; all traces go to ``traces.csv``.

    Returns the list of ``RunRecord``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = make_spec("ackley", 2, bounds="small")
    params = PsoParams.preset("c1", n_par=N_PAR)
    budget = N_PAR * (1 + max(iterations))
    records = []
    for k in range(seeds):
        s = seed + k
        objective = make_function(spec)
        observer = None
        if k == 0:
            observer = _Snapshotter(out, objective, spec.domain, s, iterations, grid, fit_restarts)
        cfg = RunConfig(budget=budget, seed=s, refit_every=refit_every, fit_restarts=fit_restarts,
                        record_every=1)
        records.append(run(objective, spec.domain, params, cfg, function_name="ackley2d",
                           observer=observer))
    with open(out / "runs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "best_value", "n_evals", "best_x", "best_y"])
        for rec in records:
            w.writerow([rec.seed, fmt(rec.best_value), rec.n_evals,
                        fmt(rec.best_position[0]), fmt(rec.best_position[1])])
    emit_convergence_data(records, out / "traces.csv")
    return records
