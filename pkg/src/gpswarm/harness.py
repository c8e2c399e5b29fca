"""Multi-run experiments: seeding, parallel execution, summaries, significance tests and CSV output."""

import csv
import hashlib
import json
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .benchfns import make_function
from .core import ConfigurationError
from .memory import MemoryConfig
from .optimizer import RunConfig, run
from .stats import DegenerateSamples, welch_one_sided

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ["function", "variant", "min", "median", "mean", "max", "sd", "mean_runtime_s"]
SIGNIFICANCE_FIELDS = ["function", "reference", "other", "t", "p", "significant_5pct"]
TRACE_FIELDS = ["function", "variant", "seed", "evaluations", "best_so_far", "elapsed_seconds"]
MEDIAN_FIELDS = ["function", "variant", "evaluations", "median_best_so_far"]
RUN_FIELDS = ["function", "variant", "run", "seed", "best_value", "n_evals", "wall_time_s"]
ALPHA = 0.05


class MissingCell(ValueError):
    """A (function, variant) cell of the result grid has no completed runs."""


def fmt(x):
    """Ten significant digits, ``.`` decimal separator."""
    return format(float(x), ".10g")


def derive_seed(base_seed, function, variant, run_index):
    """64-bit seed from the base seed, function label, variant name and run index.

    Keyed on names rather than grid positions, so adding, removing or
    reordering grid entries leaves every other run untouched.
    """
    key = f"{int(base_seed)}|{function}|{variant}|{int(run_index)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


@dataclass
class Experiment:
    functions: list  # of BenchSpec
    variants: list  # of PsoParams
    runs: int = 20
    budget_per_dim: int = 100
    base_seed: int = 0
    refit_every: int = 5
    fit_restarts: int = 10
    memory_cap: Optional[int] = None
    rho: float = 1.15
    reference_variant: Optional[str] = None
    pooled_variance: bool = False
    record_every: Optional[int] = None

    def __post_init__(self):
        if not self.functions:
            raise ConfigurationError("experiment has an empty function list")
        if not self.variants:
            raise ConfigurationError("experiment has an empty variant list")
        if self.runs < 1 or self.budget_per_dim < 1:
            raise ConfigurationError("runs and budget_per_dim must be positive")
        labels = [f.label for f in self.functions]
        if len(set(labels)) != len(labels):
            raise ConfigurationError("function labels must be unique")
        names = [v.variant for v in self.variants]
        if len(set(names)) != len(names):
            raise ConfigurationError("variants must be unique")
        if self.reference_variant is not None and self.reference_variant not in names:
            raise ConfigurationError(f"reference variant {self.reference_variant!r} is not in the variant list")

    def run_config(self, spec, seed):
        return RunConfig(
            budget=self.budget_per_dim * spec.dim, seed=seed,
            memory_cfg=MemoryConfig(rho=self.rho, cap=self.memory_cap),
            refit_every=self.refit_every, record_every=self.record_every,
            fit_restarts=self.fit_restarts)

    def tasks(self):
        for fi, spec in enumerate(self.functions):
            for vi, params in enumerate(self.variants):
                for r in range(self.runs):
                    seed = derive_seed(self.base_seed, spec.label, params.variant, r)
                    yield (fi, vi, r), spec, params, self.run_config(spec, seed)

    def manifest(self):
        return {
            "library": "gpswarm",
            "version": __version__,
            "runs": self.runs,
            "budget_per_dim": self.budget_per_dim,
            "base_seed": self.base_seed,
            "refit_every": self.refit_every,
            "fit_restarts": self.fit_restarts,
            "memory_cap": self.memory_cap,
            "rho": self.rho,
            "reference_variant": self.reference_variant,
            "pooled_variance": self.pooled_variance,
            "record_every": self.record_every,
            "functions": [_spec_dict(s) for s in self.functions],
            "variants": [asdict(v) for v in self.variants],
            "seeds": [{"function": spec.label, "variant": params.variant, "run": key[2], "seed": cfg.seed}
                      for key, spec, params, cfg in self.tasks()],
        }


def _spec_dict(spec):
    return {
        "name": spec.name,
        "label": spec.label,
        "dim": spec.dim,
        "lower": spec.domain.lower.tolist(),
        "upper": spec.domain.upper.tolist(),
        "shift": None if spec.shift is None else spec.shift.tolist(),
        "rotation": None if spec.rotation is None else spec.rotation.tolist(),
        "offset": spec.offset,
    }


@dataclass
class SummaryRow:
    function: str
    variant: str
    min: float
    median: float
    mean: float
    max: float
    sd: float
    mean_runtime: float

    @classmethod
    def from_values(cls, function, variant, values, runtimes):
        values = [float(v) for v in values]
        return cls(function, variant, min(values), statistics.median(values), statistics.fmean(values),
                   max(values), statistics.stdev(values) if len(values) > 1 else 0.0,
                   statistics.fmean(runtimes))

    def csv_row(self):
        return [self.function, self.variant, fmt(self.min), fmt(self.median), fmt(self.mean),
                fmt(self.max), fmt(self.sd), fmt(self.mean_runtime)]


@dataclass
class ExperimentResult:
    summary: list
    records: list  # RunRecord, sorted by (function, variant, run)
    run_keys: list  # (function label, variant, run index) per record
    failures: list = field(default_factory=list)
    complete: bool = True


def _execute(spec, params, cfg):
    return run(make_function(spec), spec.domain, params, cfg, function_name=spec.label)


def run_experiment(e, parallelism=1, progress=None):
    """Run every (function, variant, run) triple and aggregate final best values.

    Runs execute on a process pool of size ``parallelism`` (inline when 1).
    Results are sorted by grid position before aggregation, so output does
    not depend on completion order. A failing run is reported in
    ``failures`` and the remaining runs still count. On ``KeyboardInterrupt``
    the completed runs are returned with ``complete=False``.
    """
    tasks = list(e.tasks())
    done = {}
    failures = []
    complete = True

    def collect(key, spec, params, fn):
        try:
            done[key] = fn()
        except Exception as exc:  # noqa: BLE001 - reported, never aborts the grid
            log.error("run %s/%s/%d failed: %s", spec.label, params.variant, key[2], exc)
            failures.append({"function": spec.label, "variant": params.variant, "run": key[2],
                             "error": f"{type(exc).__name__}: {exc}"})
        if progress is not None:
            progress(len(done) + len(failures), len(tasks))

    try:
        if parallelism <= 1:
            for key, spec, params, cfg in tasks:
                collect(key, spec, params, lambda: _execute(spec, params, cfg))
        else:
            with ProcessPoolExecutor(max_workers=parallelism) as pool:
                futures = {pool.submit(_execute, spec, params, cfg): (key, spec, params)
                           for key, spec, params, cfg in tasks}
                try:
                    for fut in as_completed(futures):
                        key, spec, params = futures[fut]
                        collect(key, spec, params, fut.result)
                except KeyboardInterrupt:
                    for fut in futures:
                        fut.cancel()
                    raise
    except KeyboardInterrupt:
        complete = False
        log.warning("interrupted; keeping %d completed runs", len(done))

    keys = sorted(done)
    records = [done[k] for k in keys]
    run_keys = [(e.functions[k[0]].label, e.variants[k[1]].variant, k[2]) for k in keys]
    failures.sort(key=lambda f: (f["function"], f["variant"], f["run"]))
    summary = []
    for fi, spec in enumerate(e.functions):
        for vi, params in enumerate(e.variants):
            cell = [done[k] for k in keys if k[0] == fi and k[1] == vi]
            if cell:
                summary.append(SummaryRow.from_values(spec.label, params.variant,
                                                      [r.best_value for r in cell],
                                                      [r.wall_time for r in cell]))
    return ExperimentResult(summary, records, run_keys, failures, complete)


def final_values(records, run_keys=None):
    """``{(function, variant): [best values in run order]}``."""
    out = {}
    for k, rec in enumerate(records):
        function, variant = (run_keys[k][0], run_keys[k][1]) if run_keys else (rec.function, rec.variant)
        out.setdefault((function, variant), []).append(rec.best_value)
    return out


@dataclass
class SignificanceRow:
    function: str
    reference: str
    other: str
    t: float
    p: float

    @property
    def significant(self):
        return self.p < ALPHA

    def csv_row(self):
        return [self.function, self.reference, self.other, fmt(self.t), fmt(self.p),
                "true" if self.significant else "false"]


def significance_table(values, reference_variant, others=None, functions=None, pooled=False):
    """One-sided tests of ``mean(reference) < mean(other)`` per function.

    Parameters
    ----------
    values : dict
        ``{(function, variant): sequence of final values}``.
    reference_variant : str
    others : list of str, optional
        Variants to test against; defaults to every variant except the reference.
    functions : list of str, optional
        Defaults to every function in ``values`` in first-seen order.

    Raises
    ------
    MissingCell
        A requested (function, variant) cell has no values.
    """
    if functions is None:
        functions = list(dict.fromkeys(f for f, _ in values))
    if others is None:
        others = [v for v in dict.fromkeys(v for _, v in values) if v != reference_variant]
    rows = []
    for function in functions:
        ref = values.get((function, reference_variant))
        if not ref:
            raise MissingCell(f"no runs for ({function}, {reference_variant})")
        for other in others:
            sample = values.get((function, other))
            if not sample:
                raise MissingCell(f"no runs for ({function}, {other})")
            try:
                t, p = welch_one_sided(ref, sample, pooled=pooled)
            except DegenerateSamples:
                t, p = 0.0, 0.5
            rows.append(SignificanceRow(function, reference_variant, other, t, p))
    return rows


def _write_csv(path, header, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_summary(rows, path):
    return _write_csv(path, SUMMARY_FIELDS, [r.csv_row() for r in rows])


def write_significance(rows, path):
    return _write_csv(path, SIGNIFICANCE_FIELDS, [r.csv_row() for r in rows])


def write_runs(records, run_keys, path):
    rows = [[f, v, r, rec.seed, fmt(rec.best_value), rec.n_evals, fmt(rec.wall_time)]
            for (f, v, r), rec in zip(run_keys, records)]
    return _write_csv(path, RUN_FIELDS, rows)


def median_series(records):
    """Per-variant median of best-so-far across runs at every shared trace point."""
    by_variant = {}
    for rec in records:
        by_variant.setdefault(rec.variant, []).append(rec)
    out = {}
    for variant, recs in by_variant.items():
        common = set(recs[0].evaluations)
        for rec in recs[1:]:
            common &= set(rec.evaluations)
        series = []
        for k in sorted(common):
            vals = [rec.best_so_far[rec.evaluations.index(k)] for rec in recs]
            series.append((k, statistics.median(vals)))
        out[variant] = series
    return out


def emit_convergence_data(records, path):
    """Write the long-format trace CSV and ``<stem>_median.csv`` beside it.

    Returns the pair of written paths.
    """
    records = list(records)
    functions = {rec.function for rec in records}
    if len(functions) > 1:
        raise ValueError(f"records mix functions: {sorted(functions)}")
    rows = []
    for rec in records:
        for k, best, t in zip(rec.evaluations, rec.best_so_far, rec.elapsed):
            rows.append([rec.function, rec.variant, rec.seed, k, fmt(best), fmt(t)])
    path = Path(path)
    trace = _write_csv(path, TRACE_FIELDS, rows)
    med_rows = [[rec_fn, variant, k, fmt(m)]
                for rec_fn in functions
                for variant, series in median_series(records).items()
                for k, m in series]
    median = _write_csv(path.with_name(path.stem + "_median.csv"), MEDIAN_FIELDS, med_rows)
    return trace, median


def write_experiment(e, result, out_dir, write_traces=True):
    """Persist summary, per-run, significance, trace CSVs and the JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"summary": write_summary(result.summary, out / "summary.csv"),
             "runs": write_runs(result.records, result.run_keys, out / "runs.csv")}
    if e.reference_variant is not None and result.records:
        values = final_values(result.records, result.run_keys)
        functions = [s.label for s in e.functions if (s.label, e.reference_variant) in values]
        others = [v.variant for v in e.variants if v.variant != e.reference_variant]
        try:
            rows = significance_table(values, e.reference_variant, others, functions, e.pooled_variance)
            paths["significance"] = write_significance(rows, out / "significance.csv")
        except MissingCell as exc:
            log.warning("significance table skipped: %s", exc)
    if write_traces:
        for spec in e.functions:
            recs = [r for r, k in zip(result.records, result.run_keys) if k[0] == spec.label]
            if recs:
                emit_convergence_data(recs, out / "traces" / f"{_safe(spec.label)}.csv")
    manifest = e.manifest()
    manifest["complete"] = result.complete
    manifest["failures"] = result.failures
    manifest["completed_runs"] = len(result.records)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    paths["manifest"] = out / "manifest.json"
    return paths


def _safe(label):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


def default_parallelism():
    env = os.environ.get("GPSWARM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"GPSWARM_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigurationError("GPSWARM_THREADS must be positive")
        return n
    return None


def load_summary(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))

