"""L2-regularized hinge-loss linear SVM trained by dual coordinate descent.

The binary solver maximizes the dual

    D(alpha) = sum_i alpha_i - 1/2 * || sum_i alpha_i y_i x_i ||^2
    subject to 0 <= alpha_i <= C

by sweeping the examples in a seeded random permutation each outer iteration
and applying the exact single-variable update

    alpha_i <- clip(alpha_i - G_i / (x_i . x_i), 0, C),  G_i = y_i (w . x_i) - 1

with w maintained incrementally. Training stops once a sweep's maximal
projected-gradient violation is within tolerance AND a no-update verification
pass over the settled iterate confirms the bound, so a converged model always
satisfies the KKT tolerance at its final state.

Multiclass is one-vs-rest with lexicographically ordered classes. Sparse
(`SparseVector`) and dense (1-D numpy) examples are both accepted; dot
products dispatch on the representation. No shrinking heuristic is used:
determinism and auditability win at this scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .textfeat import SparseVector
from .util import read_json, write_json


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    tolerance: float = 1e-3
    max_outer_iters: int = 1000
    seed: int = 42
    bias: bool = True

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise DataError(f"C must be positive, got {self.C}")
        if not self.tolerance > 0:
            raise DataError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_outer_iters < 1:
            raise DataError(f"max_outer_iters must be >= 1, got {self.max_outer_iters}")

    def to_json_dict(self) -> dict:
        return {
            "C": self.C, "tolerance": self.tolerance,
            "max_outer_iters": self.max_outer_iters,
            "seed": self.seed, "bias": self.bias,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TrainConfig":
        return cls(
            C=doc["C"], tolerance=doc["tolerance"],
            max_outer_iters=doc["max_outer_iters"],
            seed=doc["seed"], bias=doc["bias"],
        )


class _Rows:
    """Training examples behind a uniform dot/axpy interface.

    Dense examples are stacked into one matrix; sparse examples keep their
    (indices, values) arrays. The optional bias feature is an implicit
    trailing coordinate of value 1.0, never materialized.
    """

    def __init__(self, X: Sequence, bias: bool) -> None:
        if isinstance(X, np.ndarray) and X.ndim == 2:
            examples: list = list(X)
        else:
            examples = list(X)
        if not examples:
            raise DataError("training set must contain at least one example")
        self.n = len(examples)
        self.bias = bias
        self._sparse: list[tuple[np.ndarray, np.ndarray]] | None = None
        self._dense: np.ndarray | None = None

        if all(isinstance(x, SparseVector) for x in examples):
            dims = {x.dimension for x in examples}
            if len(dims) != 1:
                raise DataError(f"inconsistent feature dimensions: {sorted(dims)}")
            self.dim = dims.pop()
            rows = []
            for x in examples:
                idx = np.fromiter((i for i, _ in x.entries), dtype=np.int64, count=len(x.entries))
                val = np.fromiter((v for _, v in x.entries), dtype=np.float64, count=len(x.entries))
                if not np.all(np.isfinite(val)):
                    raise DataError("non-finite feature values")
                rows.append((idx, val))
            self._sparse = rows
            norms = np.array([float(v @ v) for _, v in rows])
        else:
            dense = []
            for x in examples:
                arr = x.to_dense() if isinstance(x, SparseVector) else np.asarray(x, dtype=np.float64)
                if arr.ndim != 1:
                    raise DataError("dense examples must be 1-D vectors")
                dense.append(arr)
            dims = {len(a) for a in dense}
            if len(dims) != 1:
                raise DataError(f"inconsistent feature dimensions: {sorted(dims)}")
            self.dim = dims.pop()
            matrix = np.vstack(dense) if self.dim > 0 else np.zeros((self.n, 0))
            if not np.all(np.isfinite(matrix)):
                raise DataError("non-finite feature values")
            self._dense = matrix
            norms = np.einsum("ij,ij->i", matrix, matrix)
        self.sqnorms = norms + (1.0 if bias else 0.0)

    def dot(self, i: int, w: np.ndarray) -> float:
        if self._dense is not None:
            value = float(self._dense[i] @ w[: self.dim])
        else:
            idx, val = self._sparse[i]  # type: ignore[index]
            value = float(val @ w[idx]) if len(idx) else 0.0
        if self.bias:
            value += w[self.dim]
        return value

    def axpy(self, i: int, coef: float, w: np.ndarray) -> None:
        if self._dense is not None:
            w[: self.dim] += coef * self._dense[i]
        else:
            idx, val = self._sparse[i]  # type: ignore[index]
            w[idx] += coef * val
        if self.bias:
            w[self.dim] += coef


@dataclass
class BinaryModel:
    """One trained binary separator plus its solver state."""

    weights: np.ndarray
    dual_vars: np.ndarray
    converged: bool
    final_gap: float
    n_sweeps: int
    objective_path: tuple[float, ...]
    bias: bool
    dim: int

    def dual_objective(self) -> float:
        return float(self.dual_vars.sum() - 0.5 * (self.weights @ self.weights))


def _max_violation(rows: _Rows, y: np.ndarray, alpha: np.ndarray,
                   w: np.ndarray, C: float) -> float:
    worst = 0.0
    for i in range(rows.n):
        g = y[i] * rows.dot(i, w) - 1.0
        a = alpha[i]
        if a <= 0.0:
            pg = g if g < 0.0 else 0.0
        elif a >= C:
            pg = g if g > 0.0 else 0.0
        else:
            pg = g
        worst = max(worst, abs(pg))
    return worst


def _train_binary_rows(rows: _Rows, y: np.ndarray, cfg: TrainConfig) -> BinaryModel:
    n = rows.n
    C = cfg.C
    w = np.zeros(rows.dim + (1 if cfg.bias else 0), dtype=np.float64)
    alpha = np.zeros(n, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    objective_path: list[float] = []
    converged = False
    final_gap = np.inf
    sweeps = 0

    for _ in range(cfg.max_outer_iters):
        order = rng.permutation(n)
        max_viol = 0.0
        for i in order:
            g = y[i] * rows.dot(i, w) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = g if g < 0.0 else 0.0
            elif a >= C:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if pg != 0.0:
                viol = -pg if pg < 0.0 else pg
                if viol > max_viol:
                    max_viol = viol
                q = rows.sqnorms[i]
                if q > 0.0:
                    new_a = a - g / q
                    if new_a < 0.0:
                        new_a = 0.0
                    elif new_a > C:
                        new_a = C
                else:
                    # Zero example: the dual is linear in this coordinate.
                    new_a = C if g < 0.0 else 0.0
                if new_a != a:
                    alpha[i] = new_a
                    rows.axpy(i, (new_a - a) * y[i], w)
        sweeps += 1
        objective_path.append(float(alpha.sum() - 0.5 * (w @ w)))
        final_gap = max_viol
        if max_viol <= cfg.tolerance:
            settled = _max_violation(rows, y, alpha, w, C)
            if settled <= cfg.tolerance:
                converged = True
                final_gap = settled
                break

    return BinaryModel(
        weights=w, dual_vars=alpha, converged=converged,
        final_gap=float(final_gap), n_sweeps=sweeps,
        objective_path=tuple(objective_path), bias=cfg.bias, dim=rows.dim,
    )


def _check_labels_binary(y: Sequence[int], n: int) -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if arr.shape != (n,):
        raise DataError(f"expected {n} labels, got shape {arr.shape}")
    if not np.all(np.isin(arr, (-1.0, 1.0))):
        raise DataError("binary labels must be +1 or -1")
    return arr


def train_binary(X: Sequence, y: Sequence[int], cfg: TrainConfig = TrainConfig()) -> BinaryModel:
    rows = _Rows(X, cfg.bias)
    labels = _check_labels_binary(y, rows.n)
    return _train_binary_rows(rows, labels, cfg)


def decision_value(model: BinaryModel, x) -> float:
    if isinstance(x, SparseVector):
        if x.dimension != model.dim:
            raise DataError(f"dimension mismatch: model {model.dim}, input {x.dimension}")
        value = sum(v * model.weights[i] for i, v in x.entries)
    else:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape != (model.dim,):
            raise DataError(f"dimension mismatch: model {model.dim}, input {arr.shape}")
        value = float(arr @ model.weights[: model.dim])
    if model.bias:
        value += model.weights[model.dim]
    return float(value)


@dataclass
class TrainedModel:
    """One-vs-rest ensemble: one binary model per class, shared dimension."""

    classes: tuple[str, ...]
    models: dict[str, BinaryModel]
    dim: int
    bias: bool
    config: TrainConfig
    priors: dict[str, float]


def train_multiclass(X: Sequence, y: Sequence[str], cfg: TrainConfig = TrainConfig()) -> TrainedModel:
    rows = _Rows(X, cfg.bias)
    labels = list(y)
    if len(labels) != rows.n:
        raise DataError(f"expected {rows.n} labels, got {len(labels)}")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise DataError(f"training requires >= 2 distinct classes, got {classes}")
    models = {}
    for cls in classes:
        binary_y = np.array([1.0 if lab == cls else -1.0 for lab in labels])
        models[cls] = _train_binary_rows(rows, binary_y, cfg)
    priors = {cls: labels.count(cls) / len(labels) for cls in classes}
    return TrainedModel(
        classes=classes, models=models, dim=rows.dim, bias=cfg.bias,
        config=cfg, priors=priors,
    )


def predict(model: TrainedModel, x) -> tuple[str, dict[str, float]]:
    """Argmax of per-class decision values; ties go to the class with the
    larger training prior, then lexicographically first."""
    scores = {cls: decision_value(model.models[cls], x) for cls in model.classes}
    best_score = max(scores.values())
    tied = [cls for cls in model.classes if scores[cls] == best_score]
    if len(tied) > 1:
        best_prior = max(model.priors[cls] for cls in tied)
        tied = [cls for cls in tied if model.priors[cls] == best_prior]
    return min(tied), scores


def model_to_json(model: TrainedModel) -> dict:
    return {
        "classes": list(model.classes),
        "dim": model.dim,
        "bias": model.bias,
        "config": model.config.to_json_dict(),
        "priors": {c: model.priors[c] for c in model.classes},
        "models": {
            c: {
                "weights": [float(v) for v in model.models[c].weights],
                "converged": model.models[c].converged,
                "final_gap": model.models[c].final_gap,
                "n_sweeps": model.models[c].n_sweeps,
            }
            for c in model.classes
        },
    }


def model_from_json(doc: dict) -> TrainedModel:
    try:
        cfg = TrainConfig.from_json_dict(doc["config"])
        classes = tuple(doc["classes"])
        models = {}
        for cls in classes:
            m = doc["models"][cls]
            models[cls] = BinaryModel(
                weights=np.asarray(m["weights"], dtype=np.float64),
                dual_vars=np.zeros(0),
                converged=m["converged"], final_gap=m["final_gap"],
                n_sweeps=m["n_sweeps"], objective_path=(),
                bias=doc["bias"], dim=doc["dim"],
            )
        return TrainedModel(
            classes=classes, models=models, dim=doc["dim"], bias=doc["bias"],
            config=cfg, priors={c: doc["priors"][c] for c in classes},
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed model document: {exc}") from None


def save_model(model: TrainedModel, path: str | Path) -> None:
    write_json(path, model_to_json(model))


def load_model(path: str | Path) -> TrainedModel:
    try:
        doc = read_json(path)
    except OSError as exc:
        raise DataError(f"unreadable model file {path}: {exc}") from None
    return model_from_json(doc)
