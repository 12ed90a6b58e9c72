"""Kernel functions, Gram matrices and kernel ridge regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg


@dataclass(frozen=True)
class KernelSpec:
    """``polynomial`` (projective) or ``gaussian`` (radial) kernel."""

    kind: str
    degree: int = 1
    offset: float = 0.0
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError(f"degree must be an integer >= 1, got {self.degree}")
            if not self.offset >= 0:
                raise ValueError(f"offset must be >= 0, got {self.offset}")
        elif self.kind == "gaussian":
            if not self.bandwidth > 0:
                raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def polynomial(cls, degree: int = 1, offset: float = 0.0) -> "KernelSpec":
        return cls("polynomial", degree=degree, offset=offset)

    @classmethod
    def gaussian(cls, bandwidth: float = 1.0) -> "KernelSpec":
        return cls("gaussian", bandwidth=bandwidth)


def _as_points(data) -> np.ndarray:
    try:
        x = np.array(data, dtype=float)
    except ValueError as exc:
        raise ValueError("ragged data: all points must have the same dimension") from exc
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("data must be a nonempty list of equal-length vectors")
    return x


def _cross(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if spec.kind == "polynomial":
        return (x @ y.T + spec.offset) ** spec.degree
    # explicit differences keep k(x, x) == 1 exactly
    sq = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-sq / (2.0 * spec.bandwidth**2))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {y.size}")
    return float(_cross(spec, x[None, :], y[None, :])[0, 0])


def gram_matrix(spec: KernelSpec, data) -> np.ndarray:
    """Symmetric Gram matrix ``K[i, j] = k(x_i, x_j)``."""
    x = _as_points(data)
    k = _cross(spec, x, x)
    return (k + k.T) / 2.0


def is_psd(k: np.ndarray, rel_tol: float = 1e-8) -> bool:
    """Symmetric to the bit and smallest eigenvalue >= -rel_tol * largest."""
    if not np.array_equal(k, k.T):
        return False
    w = np.linalg.eigvalsh(k)
    return bool(w[0] >= -rel_tol * max(w[-1], 0.0))


@dataclass
class RidgeModel:
    spec: KernelSpec
    inputs: np.ndarray
    alpha: np.ndarray
    gamma: float

    def predict(self, x) -> np.ndarray:
        x = _as_points(x)
        if x.shape[1] != self.inputs.shape[1]:
            raise ValueError(f"dimension mismatch: {x.shape[1]} vs {self.inputs.shape[1]}")
        return _cross(self.spec, x, self.inputs) @ self.alpha


def ridge_fit(spec: KernelSpec, inputs, targets, gamma: float) -> RidgeModel:
    """Solve ``(K + gamma I) alpha = y`` by Cholesky factorization."""
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    x = _as_points(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    if y.size != x.shape[0]:
        raise ValueError(f"{x.shape[0]} inputs but {y.size} targets")
    k = gram_matrix(spec, x)
    k[np.diag_indices_from(k)] += gamma
    alpha = linalg.solve(k, y, assume_a="pos")
    return RidgeModel(spec, x, alpha, gamma)


def ridge_predict(model: RidgeModel, x):
    """Prediction at one point (returns a float) or at a batch of points."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1 and arr.size == model.inputs.shape[1]:
        return float(model.predict(arr[None, :])[0])
    return model.predict(arr)
