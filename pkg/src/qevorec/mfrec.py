"""Latent-factor recommender trained by full-batch gradient descent.

A rating is modelled as the dot product of a row parameter vector and a
column feature vector. The objective is half the squared residual over the
known cells plus (lambda/2) times the squared Frobenius norms of both factor
tables; both tables are updated simultaneously from the same iterate.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import ArgumentError
from .rng import TRAIN, Rng

CONVERGED = "converged"
MAX_ITERS = "max-iters"
DIVERGED = "diverged"
DIVERGENCE_RUN = 10


@dataclass(frozen=True)
class TrainConfig:
    f: int = 20
    lam: float = 0.1
    alpha: float = 0.005
    max_iters: int = 2000
    rel_tol: float = 1e-7
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.f < 1:
            raise ArgumentError("latent dimension f must be >= 1")
        if self.lam < 0:
            raise ArgumentError("lambda must be >= 0")
        if not self.alpha > 0:
            raise ArgumentError("alpha must be > 0")
        if self.max_iters < 0:
            raise ArgumentError("max_iters must be >= 0")
        if self.rel_tol < 0 or self.init_scale < 0:
            raise ArgumentError("rel_tol and init_scale must be >= 0")

    def to_json(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass
class TrainTrace:
    objective: list = field(default_factory=list)
    iterations: int = 0
    stop_reason: str = MAX_ITERS

    def summary(self):
        obj = self.objective
        return {
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "initial_objective": obj[0] if obj else None,
            "final_objective": obj[-1] if obj else None,
        }


@dataclass
class FactorModel:
    theta: np.ndarray
    x: np.ndarray
    config: Optional[TrainConfig] = None
    trace: Optional[TrainTrace] = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.theta.ndim != 2 or self.x.ndim != 2 or self.theta.shape[1] != self.x.shape[1]:
            raise ArgumentError(f"inconsistent factor shapes {self.theta.shape} and {self.x.shape}")

    @property
    def f(self) -> int:
        return self.theta.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.theta.shape[0], self.x.shape[0]

    def predict_all(self) -> np.ndarray:
        return self.theta @ self.x.T

    def to_json(self):
        return {
            "f": self.f,
            "n_s": self.shape[0],
            "n_u": self.shape[1],
            "theta": self.theta.tolist(),
            "x": self.x.tolist(),
            "config": self.config.to_json() if self.config else None,
            "trace_summary": self.trace.summary() if self.trace else None,
        }

    @classmethod
    def from_json(cls, d):
        cfg = TrainConfig.from_json(d["config"]) if d.get("config") else None
        theta = np.asarray(d["theta"], dtype=float).reshape(d["n_s"], d["f"])
        x = np.asarray(d["x"], dtype=float).reshape(d["n_u"], d["f"])
        return cls(theta, x, cfg)


def _known_cells(db):
    ratings = np.asarray(db.ratings, dtype=float)
    mask = np.asarray(db.known_mask, dtype=bool)
    rows, cols = np.nonzero(mask)
    return rows.astype(np.int64), cols.astype(np.int64), np.ascontiguousarray(ratings[rows, cols])


def _check_shapes(model, db):
    if model.shape != tuple(np.shape(db.ratings)):
        raise ArgumentError(f"model shape {model.shape} does not match database {np.shape(db.ratings)}")


def objective(model: FactorModel, db, lam: float) -> float:
    """Regularized squared-error objective J over the known cells."""
    _check_shapes(model, db)
    rows, cols, vals = _known_cells(db)
    resid = np.einsum("kl,kl->k", model.theta[rows], model.x[cols]) - vals
    reg = np.sum(model.theta**2) + np.sum(model.x**2)
    return float(0.5 * np.dot(resid, resid) + 0.5 * lam * reg)


def gradients(model: FactorModel, db, lam: float) -> tuple[np.ndarray, np.ndarray]:
    _check_shapes(model, db)
    rows, cols, vals = _known_cells(db)
    _, gt, gx = kernels.mf_gradients(model.theta, model.x, rows, cols, vals, float(lam))
    return gt, gx


def init_model(n_s: int, n_u: int, cfg: TrainConfig) -> FactorModel:
    rng = Rng(cfg.seed, (TRAIN,))
    s = cfg.init_scale
    theta = rng.uniform((n_s, cfg.f), -s, s)
    x = rng.child(1).uniform((n_u, cfg.f), -s, s)
    return FactorModel(theta, x, cfg)


def train(db, cfg: TrainConfig = TrainConfig()) -> tuple[FactorModel, TrainTrace]:
    """Fit the factor tables to the known cells of ``db``.

    Stops after ``cfg.max_iters`` updates, when the relative objective change
    drops below ``cfg.rel_tol``, or (flagged, not raised) after 10 consecutive
    objective increases or a non-finite objective.
    """
    rows, cols, vals = _known_cells(db)
    if rows.size == 0:
        raise ArgumentError("training needs at least one known cell in the database")
    if not np.all(np.isfinite(vals)):
        raise ArgumentError("known cells must be finite")
    n_s, n_u = np.shape(db.ratings)
    model = init_model(n_s, n_u, cfg)
    theta, x = model.theta, model.x
    trace = TrainTrace()
    lam, alpha = float(cfg.lam), float(cfg.alpha)
    ups = 0
    for k in range(cfg.max_iters + 1):
        obj, gt, gx = kernels.mf_gradients(theta, x, rows, cols, vals, lam)
        obj = float(obj)
        if not np.isfinite(obj):
            trace.stop_reason = DIVERGED
            break
        trace.objective.append(obj)
        if k > 0:
            prev = trace.objective[-2]
            if abs(obj - prev) <= cfg.rel_tol * max(prev, 1e-12):
                trace.stop_reason = CONVERGED
                break
            ups = ups + 1 if obj > prev else 0
            if ups >= DIVERGENCE_RUN:
                trace.stop_reason = DIVERGED
                break
        if k == cfg.max_iters:
            trace.stop_reason = MAX_ITERS
            break
        theta = theta - alpha * gt
        x = x - alpha * gx
        trace.iterations = k + 1
    model = FactorModel(theta, x, cfg, trace)
    return model, trace


def predict(model: FactorModel, i: int, j: int) -> float:
    n_s, n_u = model.shape
    if not (0 <= i < n_s and 0 <= j < n_u):
        raise ArgumentError(f"cell ({i}, {j}) outside model of shape {model.shape}")
    return float(np.dot(model.theta[i], model.x[j]))


def predict_cells(model: FactorModel, rows, cols) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    return np.einsum("kl,kl->k", model.theta[rows], model.x[cols])


def rms_deviation(predicted, actual) -> float:
    """Root-mean-square deviation between aligned cell lists."""
    p = np.asarray(predicted, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.size != a.size:
        raise ArgumentError(f"length mismatch: {p.size} predictions vs {a.size} actual values")
    if p.size == 0:
        raise ArgumentError("rms deviation of empty cell lists")
    with np.errstate(over="ignore"):  # a diverged model scores inf
        return float(np.sqrt(np.mean((a - p) ** 2)))


def scaled_rms(predicted, actual) -> tuple[float, bool]:
    """RMS divided by sqrt(m), m the largest value in either list.

    Returns ``(value, degenerate)``; when m <= 1e-9 the unscaled RMS is
    returned with ``degenerate=True``.
    """
    delta = rms_deviation(predicted, actual)
    m = max(float(np.max(predicted)), float(np.max(actual)))
    if m <= 1e-9:
        return delta, True
    return float(delta / np.sqrt(m)), False
