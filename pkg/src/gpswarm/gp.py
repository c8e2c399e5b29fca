"""Gaussian-process surrogate with a squared-exponential + bias + white-noise kernel.

Covariance between two evaluations with indices ``i`` and ``j``::

    K = amp**2 * exp(-|x_i - x_j|**2 / length**2) + bias**2 + nugget**2 * [i == j]

The white-noise term is keyed on evaluation identity, never on coordinate
equality, so repeated coordinates at different evaluations remain two
distinct (correlated but not identical) observations. Query points are
always treated as new indices.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .core import make_rng

JITTER_START = 1e-10
JITTER_MAX = 1e-6
LCB_KAPPA = 1.6
REL_TOL = 1e-6
XATOL_LOG = 1e-3  # simplex size in log-parameter space
# log-uniform restart ranges, as multiples of the target std (amplitudes) and
# of the domain diameter (length scale)
AMP_RANGE = (1e-2, 1e2)
BIAS_RANGE = (1e-6, 10.0)
NUGGET_RANGE = (1e-6, 1.0)
LENGTH_RANGE = (1e-2, 1.0)


class FactorizationFailure(ArithmeticError):
    """Gram matrix not positive definite even after maximum jitter."""


class FitFailure(RuntimeError):
    """Every likelihood restart failed to factorize."""


class NotFitted(RuntimeError):
    pass


class AcquisitionKind(str, enum.Enum):
    MEAN = "mean"
    LCB = "lcb"
    MAXVAR = "maxvar"


@dataclass(frozen=True)
class KernelParams:
    amp: float
    bias: float
    nugget: float
    length: float

    def __post_init__(self):
        vals = (self.amp, self.bias, self.nugget, self.length)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"kernel parameters must be finite: {vals}")
        if self.amp <= 0 or self.length <= 0 or self.bias < 0 or self.nugget < 0:
            raise ValueError(f"invalid kernel parameters: {vals}")

    def as_log(self):
        return np.log([self.amp, self.bias, self.nugget, self.length])

    @classmethod
    def from_log(cls, theta):
        amp, bias, nugget, length = np.exp(np.asarray(theta, dtype=float))
        return cls(float(amp), float(bias), float(nugget), float(length))

    def scaled(self, factor):
        """Amplitudes multiplied by ``factor``; length scale unchanged."""
        return KernelParams(self.amp * factor, self.bias * factor, self.nugget * factor, self.length)

    @property
    def prior_variance(self):
        return self.amp**2 + self.bias**2 + self.nugget**2


def kernel(p, x, y, same_index=False):
    """Covariance of two points; ``same_index`` says whether they are one evaluation."""
    d2 = float(np.sum((np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2))
    k = p.amp**2 * math.exp(-d2 / p.length**2) + p.bias**2
    if same_index:
        k += p.nugget**2
    return k


def _sqdist(X, Y):
    return cdist(np.atleast_2d(X), np.atleast_2d(Y), "sqeuclidean")


def _gram_from_sqdist(p, d2):
    K = p.amp**2 * np.exp(-d2 / p.length**2) + p.bias**2
    K[np.diag_indices_from(K)] += p.nugget**2
    return K


def gram(p, X):
    """Training Gram matrix ``K(X, X)`` with the nugget on the diagonal."""
    return _gram_from_sqdist(p, _sqdist(X, X))


def cross_covariance(p, A, B):
    """``K(A, B)`` for distinct evaluation sets (no nugget)."""
    return p.amp**2 * np.exp(-_sqdist(A, B) / p.length**2) + p.bias**2


def cholesky_jitter(K):
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Returns ``(L, n_jitter)`` where ``n_jitter`` counts jitter applications.
    Jitter is relative to the mean diagonal.
    """
    L, info = lapack.dpotrf(K, lower=1, clean=1)
    if info == 0:
        return L, 0
    scale = float(np.mean(np.diag(K)))
    if not math.isfinite(scale) or scale <= 0:
        raise FactorizationFailure("Gram matrix has a non-positive diagonal")
    jitter = JITTER_START
    tries = 0
    while jitter <= JITTER_MAX * (1 + 1e-9):
        tries += 1
        Kj = K.copy()
        Kj[np.diag_indices_from(Kj)] += jitter * scale
        L, info = lapack.dpotrf(Kj, lower=1, clean=1)
        if info == 0:
            return L, tries
        jitter *= 10.0
    raise FactorizationFailure(f"Gram matrix not positive definite after jitter {JITTER_MAX:g}")


def _lml_from_chol(L, y):
    a = solve_triangular(L, y, lower=True, check_finite=False)
    return -0.5 * float(a @ a) - float(np.sum(np.log(np.diag(L))))


def log_marginal_likelihood(p, X, y):
    """``-y'K^{-1}y / 2 - log det K / 2`` with the constant term dropped (zero prior mean)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) != len(y) or len(y) < 1:
        raise ValueError("X and y must be non-empty and of equal length")
    L, _ = cholesky_jitter(gram(p, X))
    return _lml_from_chol(L, y)


class GpModel:
    """GP posterior for fixed kernel parameters.

    Parameters
    ----------
    params : KernelParams
    mean_offset : float
        Constant prior mean. It is zero on standardized targets; callers
        working in raw units pass the target mean.
    """

    def __init__(self, params, mean_offset=0.0):
        self.params = params
        self.mean_offset = float(mean_offset)
        self.train_x = None
        self.train_y = None
        self.chol = None
        self.alpha = None
        self.jitter_count = 0

    @property
    def fitted(self):
        return self.chol is not None

    @property
    def n_train(self):
        return 0 if self.train_x is None else len(self.train_x)

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        if len(X) != len(y) or len(y) < 1:
            raise ValueError("need at least one training point and matching targets")
        L, self.jitter_count = cholesky_jitter(gram(self.params, X))
        self.train_x = X
        self.train_y = y
        self.chol = L
        resid = y - self.mean_offset
        self.alpha = solve_triangular(L.T, solve_triangular(L, resid, lower=True, check_finite=False),
                                      lower=False, check_finite=False)
        return self

    def predict(self, Y, return_var=True):
        if not self.fitted:
            raise NotFitted("GP model has no training data")
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        Ks = cross_covariance(self.params, Y, self.train_x)
        mean = self.mean_offset + Ks @ self.alpha
        if not return_var:
            return mean
        v = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = self.params.prior_variance - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def std(self, Y):
        return np.sqrt(self.predict(Y)[1])

    def log_marginal_likelihood(self):
        if not self.fitted:
            raise NotFitted("GP model has no training data")
        return _lml_from_chol(self.chol, self.train_y - self.mean_offset)


def posterior(model, Y):
    """Posterior mean and variance at the rows of ``Y``."""
    return model.predict(Y)


def _restart_bounds(diameter):
    return np.log(np.array([AMP_RANGE, BIAS_RANGE, NUGGET_RANGE,
                            (LENGTH_RANGE[0] * diameter, LENGTH_RANGE[1] * diameter)]))


def fit_hyperparams(rng, X, y, restarts=10, diameter=None, extra_starts=(), return_info=False):
    """Maximum-likelihood kernel parameters from restarted simplex searches.

    Targets are standardized before the search and the returned amplitudes
    are scaled back to raw units. Each restart draws a log-uniform start
    from the restart ranges and runs a bounded Nelder-Mead in log-parameter
    space. ``extra_starts`` (raw-unit ``KernelParams``) are searched after
    the random restarts. Ties keep the first-found optimum.

    Raises
    ------
    FitFailure
        If no restart produced a factorizable Gram matrix.
    """
    rng = make_rng(rng)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) < 2 or len(X) != len(y):
        raise ValueError("fit_hyperparams needs at least two points")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    shift = float(np.mean(y))
    scale = float(np.std(y))
    if not scale > 0:
        scale = 1.0
    ys = (y - shift) / scale
    if diameter is None:
        diameter = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0))) or 1.0
    bounds = _restart_bounds(diameter)
    neg_d2 = -_sqdist(X, X)
    buf = np.empty_like(neg_d2)
    diag = np.arange(len(ys)) * (len(ys) + 1)
    n_fail = 0

    def neg_lml(theta):
        nonlocal n_fail, buf
        a1, a2, a3, rho = np.exp(theta)
        np.multiply(neg_d2, 1.0 / (rho * rho), out=buf)
        np.exp(buf, out=buf)
        buf *= a1 * a1
        buf += a2 * a2
        buf.flat[diag] += a3 * a3
        L, info = lapack.dpotrf(buf, lower=1, clean=0)
        if info != 0:
            try:
                L, _ = cholesky_jitter(buf)
            except FactorizationFailure:
                n_fail += 1
                return np.inf
        a, _ = lapack.dtrtrs(L, ys, lower=1)
        return 0.5 * float(a @ a) + float(np.sum(np.log(L.flat[diag])))

    starts = [bounds[:, 0] + (bounds[:, 1] - bounds[:, 0]) * rng.random(4) for _ in range(restarts)]
    for p in extra_starts:
        starts.append(np.clip(p.scaled(1.0 / scale).as_log(), bounds[:, 0], bounds[:, 1]))

    best_theta, best_val = None, np.inf
    for theta0 in starts:
        f0 = neg_lml(theta0)
        fatol = REL_TOL * max(1.0, abs(f0)) if np.isfinite(f0) else REL_TOL
        res = minimize(neg_lml, theta0, method="Nelder-Mead", bounds=bounds,
                       options={"maxiter": 200 * 4, "xatol": XATOL_LOG, "fatol": fatol})
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = res.x, float(res.fun)
    if best_theta is None:
        raise FitFailure(f"all {len(starts)} likelihood restarts failed to factorize")
    params = KernelParams.from_log(best_theta).scaled(scale)
    if return_info:
        return params, {"neg_lml_standardized": best_val, "failed_evals": n_fail,
                        "shift": shift, "scale": scale}
    return params


def acquisition_values(model, Y, acq):
    """Acquisition surface to be minimized at the rows of ``Y``."""
    acq = AcquisitionKind(acq)
    if acq is AcquisitionKind.MEAN:
        return model.predict(Y, return_var=False)
    mean, var = model.predict(Y)
    sd = np.sqrt(var)
    if acq is AcquisitionKind.LCB:
        return mean - LCB_KAPPA * sd
    return -sd


def surrogate_argmin(model, domain, acq, start, initial_step=0.05):
    """Local simplex minimization of an acquisition surface from ``start``.

    ``initial_step`` sizes the starting simplex as a fraction of each domain
    width (pointing inward at the upper face). The result is clamped to the
    domain.
    """
    if not model.fitted:
        raise NotFitted("GP model has no training data")
    acq = AcquisitionKind(acq)
    start = np.clip(np.asarray(start, dtype=float), domain.lower, domain.upper)
    dim = domain.dim
    simplex = np.tile(start, (dim + 1, 1))
    step = initial_step * domain.width
    for i in range(dim):
        up = start[i] + step[i]
        simplex[i + 1, i] = up if up <= domain.upper[i] else start[i] - step[i]

    def f(x):
        return float(acquisition_values(model, x[None, :], acq)[0])

    res = minimize(f, start, method="Nelder-Mead",
                   bounds=list(zip(domain.lower, domain.upper)),
                   options={"maxiter": 200 * dim, "xatol": 1e-6 * domain.diameter,
                            "fatol": 1e-6, "initial_simplex": simplex})
    x = np.clip(res.x, domain.lower, domain.upper)
    # a simplex search may end on a vertex worse than its start
    if f(x) > f(start):
        return start
    return x
