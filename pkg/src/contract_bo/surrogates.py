"""Zero-mean Gaussian-process regression over contract designs.

Two kernel families are provided:

* ``"se_product"``: ``s2 * prod_d exp(-d_d^2 / (2 l_d^2))``, used for the
  principal objective and the harvester IR slacks.
* ``"matern_product_const"``: ``s2 * c * prod_d matern52(d_d / l_d)``, used for
  the binary feasibility indicator.

Inputs are always the normalized pair ``(alpha, n_added / max_added)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.special import ndtr

from .core import ConfigurationError, DesignPoint, encode

KINDS = ("se_product", "matern_product_const")
LOG_LENGTHSCALE_BOUNDS = (math.log(0.05), math.log(5.0))
JITTER_START = 1e-10
JITTER_MAX = 1e-6


class NumericalError(RuntimeError):
    """Kernel matrix could not be factorized even after jitter escalation."""


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "se_product"
    lengthscales: tuple[float, ...] = (1.0, 1.0)
    signal_variance: float = 1.0
    constant_value: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}")
        ls = tuple(float(v) for v in self.lengthscales)
        if any(not (v > 0.0) for v in ls):
            raise ConfigurationError(f"lengthscales must be positive, got {ls}")
        if not self.signal_variance > 0.0:
            raise ConfigurationError("signal_variance must be positive")
        if not self.constant_value > 0.0:
            raise ConfigurationError("constant_value must be positive")
        object.__setattr__(self, "lengthscales", ls)

    @property
    def prior_variance(self) -> float:
        if self.kind == "se_product":
            return self.signal_variance
        return self.signal_variance * self.constant_value

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lengthscales": list(self.lengthscales),
            "signal_variance": self.signal_variance,
            "constant_value": self.constant_value,
        }


def _matern52(r):
    s = math.sqrt(5.0) * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def kernel_matrix(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Cross-covariance between rows of ``X`` and ``Y`` (already normalized)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    ls = np.asarray(spec.lengthscales)
    diff = (X[:, None, :] - Y[None, :, :]) / ls
    if spec.kind == "se_product":
        # exp of a sum equals the product of per-dimension exponentials
        return spec.signal_variance * np.exp(-0.5 * np.sum(diff * diff, axis=-1))
    k = np.prod(_matern52(np.abs(diff)), axis=-1)
    return spec.signal_variance * spec.constant_value * k


def kernel_eval(spec: KernelSpec, x: DesignPoint, y: DesignPoint, max_added: int = 1) -> float:
    X = encode([x], max_added)
    Y = encode([y], max_added)
    return float(kernel_matrix(spec, X, Y)[0, 0])


@dataclass(frozen=True)
class Dataset:
    points: tuple[DesignPoint, ...] = ()
    targets: tuple[float, ...] = ()
    noise_variance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if len(self.points) != len(self.targets):
            raise ConfigurationError("points and targets must have equal length")
        if self.noise_variance < 0:
            raise ConfigurationError("noise_variance must be non-negative")
        if self.noise_variance == 0 and len(set(self.points)) != len(self.points):
            raise ConfigurationError("duplicate design points require positive noise")

    def __len__(self):
        return len(self.points)

    def to_dict(self) -> dict:
        return {
            "points": [p.as_list() for p in self.points],
            "targets": list(self.targets),
            "noise_variance": self.noise_variance,
        }


@dataclass(frozen=True)
class GPPosterior:
    """Predictive mean and variance; fields may be scalars or equal-shape arrays."""

    mean: float | np.ndarray
    variance: float | np.ndarray

    @property
    def std(self):
        return np.sqrt(self.variance)


def _cholesky_with_jitter(K: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(K, lower=True)
    except linalg.LinAlgError:
        pass
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return linalg.cholesky(K + jitter * np.eye(len(K)), lower=True)
        except linalg.LinAlgError:
            jitter *= 10.0
    cond = np.linalg.cond(K) if len(K) else 0.0
    raise NumericalError(
        f"kernel matrix not positive definite after jitter {JITTER_MAX:g} (condition number {cond:.3g})"
    )


@dataclass(frozen=True)
class FittedGP:
    """An immutable fitted model. Build it with :func:`fit`."""

    data: Dataset
    spec: KernelSpec
    max_added: int
    standardize: bool
    y_mean: float
    y_std: float
    X: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def predict_arrays(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(Xq)
        prior = np.full(len(Xq), self.spec.prior_variance)
        if len(self.data) == 0:
            return np.zeros(len(Xq)), prior
        Ks = kernel_matrix(self.spec, self.X, Xq)
        mean = Ks.T @ self.weights
        v = linalg.solve_triangular(self.chol, Ks, lower=True)
        var = prior - np.sum(v * v, axis=0)
        var = np.maximum(var, 0.0)
        return mean * self.y_std + self.y_mean, var * self.y_std**2

    def predict_many(self, points: Sequence[DesignPoint]) -> GPPosterior:
        mean, var = self.predict_arrays(encode(points, self.max_added))
        return GPPosterior(mean, var)

    def predict(self, x: DesignPoint) -> GPPosterior:
        mean, var = self.predict_arrays(encode([x], self.max_added))
        return GPPosterior(float(mean[0]), float(var[0]))

    def log_marginal_likelihood(self) -> float:
        return _log_marginal(self.chol, self.weights, self._scaled_targets())

    def _scaled_targets(self) -> np.ndarray:
        return (np.asarray(self.data.targets) - self.y_mean) / self.y_std

    def to_dict(self) -> dict:
        return {
            "kernel": self.spec.to_dict(),
            "dataset": self.data.to_dict(),
            "max_added": self.max_added,
            "standardize": self.standardize,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedGP":
        spec = KernelSpec(**{**d["kernel"], "lengthscales": tuple(d["kernel"]["lengthscales"])})
        ds = d["dataset"]
        data = Dataset(
            tuple(DesignPoint(a, n) for a, n in ds["points"]), tuple(ds["targets"]), ds["noise_variance"]
        )
        return fit(data, spec, max_added=d["max_added"], standardize=d["standardize"])

    @classmethod
    def from_json(cls, text: str) -> "FittedGP":
        return cls.from_dict(json.loads(text))


def _log_marginal(L: np.ndarray, w: np.ndarray, y: np.ndarray) -> float:
    n = len(y)
    return float(-0.5 * y @ w - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi))


def _factorize(spec: KernelSpec, X: np.ndarray, y: np.ndarray, noise: float):
    K = kernel_matrix(spec, X, X) + noise * np.eye(len(X))
    L = _cholesky_with_jitter(K)
    w = linalg.cho_solve((L, True), y)
    return L, w


def _kernel_and_grads(spec: KernelSpec, X: np.ndarray):
    """Gram matrix and its derivatives with respect to each log-lengthscale."""
    ls = np.asarray(spec.lengthscales)
    r = np.abs(X[:, None, :] - X[None, :, :]) / ls
    if spec.kind == "se_product":
        K = spec.signal_variance * np.exp(-0.5 * np.sum(r * r, axis=-1))
        return K, [K * r[..., d] ** 2 for d in range(X.shape[1])]
    s = math.sqrt(5.0) * r
    factors = (1.0 + s + s * s / 3.0) * np.exp(-s)
    dfactors = (5.0 / 3.0) * r * r * (1.0 + s) * np.exp(-s)
    scale = spec.signal_variance * spec.constant_value
    K = scale * np.prod(factors, axis=-1)
    grads = []
    for d in range(X.shape[1]):
        others = np.prod(np.delete(factors, d, axis=-1), axis=-1)
        grads.append(scale * others * dfactors[..., d])
    return K, grads


def _optimize_lengthscales(spec, X, y, noise, restarts, rng) -> KernelSpec:
    lo, hi = LOG_LENGTHSCALE_BOUNDS
    dim = X.shape[1]
    n = len(y)

    def nll_and_grad(theta):
        trial = replace(spec, lengthscales=tuple(np.exp(theta)))
        K, dK = _kernel_and_grads(trial, X)
        try:
            L = _cholesky_with_jitter(K + noise * np.eye(n))
        except NumericalError:
            return 1e10, np.zeros(dim)
        w = linalg.cho_solve((L, True), y)
        Kinv = linalg.cho_solve((L, True), np.eye(n))
        inner = np.outer(w, w) - Kinv
        grad = np.array([-0.5 * np.sum(inner * g) for g in dK])
        return -_log_marginal(L, w, y), grad

    starts = [np.zeros(dim)] + [rng.uniform(lo, hi, size=dim) for _ in range(restarts - 1)]
    best_theta, best_val = None, np.inf
    for x0 in starts:
        res = optimize.minimize(nll_and_grad, x0, jac=True, method="L-BFGS-B", bounds=[(lo, hi)] * dim)
        if res.fun < best_val:
            best_theta, best_val = res.x, res.fun
    return replace(spec, lengthscales=tuple(float(v) for v in np.exp(best_theta)))


def fit(
    data: Dataset,
    spec: KernelSpec,
    *,
    max_added: int = 1,
    standardize: bool = False,
    optimize_hyperparameters: bool = False,
    restarts: int = 8,
    seed: int = 0,
) -> FittedGP:
    """Fit an exact zero-mean GP to ``data``.

    With ``standardize`` the targets are shifted and scaled to zero mean and
    unit variance before fitting; predictions are mapped back to the original
    units and ``noise_variance`` is interpreted on the standardized scale.
    With ``optimize_hyperparameters`` the lengthscales maximize the log
    marginal likelihood over ``restarts`` L-BFGS-B starts.
    """
    X = encode(data.points, max_added)
    y = np.asarray(data.targets, dtype=float)
    y_mean, y_std = 0.0, 1.0
    if standardize and len(y) > 0:
        y_mean = float(y.mean())
        sd = float(y.std())
        y_std = sd if sd > 1e-12 else 1.0
    ys = (y - y_mean) / y_std
    if len(y) == 0:
        empty = np.zeros((0, 0))
        return FittedGP(data, spec, max_added, standardize, y_mean, y_std, X, empty, np.zeros(0))
    if optimize_hyperparameters and len(y) >= 2:
        rng = np.random.default_rng(seed)
        spec = _optimize_lengthscales(spec, X, ys, data.noise_variance, restarts, rng)
    L, w = _factorize(spec, X, ys, data.noise_variance)
    return FittedGP(data, spec, max_added, standardize, y_mean, y_std, X, L, w)


def probability_of_feasibility_post(post: GPPosterior, threshold: float = 0.0):
    """``P(f >= threshold)`` under a Gaussian posterior (vectorized)."""
    mean = np.asarray(post.mean, dtype=float)
    var = np.asarray(post.variance, dtype=float)
    sd = np.sqrt(np.maximum(var, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (mean - threshold) / sd
    p = np.where(sd > 0, ndtr(z), (mean >= threshold).astype(float))
    return float(p) if p.ndim == 0 else p


def probability_of_feasibility(gp: FittedGP, x: DesignPoint, threshold: float = 0.0) -> float:
    return probability_of_feasibility_post(gp.predict(x), threshold)
