"""Low-rank recovery: stable PCA, robust PCA and masked robust completion.

All three problems are solved with an inexact augmented Lagrange multiplier
(ALM) loop that alternates singular value thresholding for the low-rank part
with entrywise soft thresholding for the sparse part.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class NumericalError(RuntimeError):
    """Raised when a linear-algebra kernel fails (e.g. SVD does not converge)."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the inexact ALM solver.

    ``lam`` and ``mu_growth`` default to ``None`` and are resolved per problem:
    ``1/sqrt(max(M, N))`` and 1.5 for fully observed data,
    ``1/sqrt(p * max(M, N) / 2)`` and 1.1 when only a fraction ``p`` of the
    entries is observed.
    """

    lam: Optional[float] = None
    epsilon: float = 0.0
    mu_init: Optional[float] = None
    mu_growth: Optional[float] = None
    max_iters: int = 1000
    rel_tol: float = 1e-7

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.mu_init is not None and not self.mu_init > 0:
            raise ValueError(f"mu_init must be > 0, got {self.mu_init}")
        if self.mu_growth is not None and not self.mu_growth > 1:
            raise ValueError(f"mu_growth must be > 1, got {self.mu_growth}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")


@dataclass
class Decomposition:
    X: np.ndarray
    A: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    residual_trace: list = field(default_factory=list)
    lam: float = float("nan")

    def objective(self, lam: Optional[float] = None) -> float:
        lam = self.lam if lam is None else lam
        return nuclear_norm(self.X) + lam * float(np.abs(self.A).sum())


def nuclear_norm(m: np.ndarray) -> float:
    return float(np.linalg.svd(m, compute_uv=False).sum())


def soft_threshold(m, tau: float) -> np.ndarray:
    """Entrywise shrinkage ``sign(m) * max(|m| - tau, 0)``."""
    if tau < 0:
        raise ValueError(f"threshold must be >= 0, got {tau}")
    m = np.asarray(m, dtype=float)
    return np.sign(m) * np.maximum(np.abs(m) - tau, 0.0)


def svt(m, tau: float) -> np.ndarray:
    """Singular value thresholding: the proximal map of ``tau * ||.||_*``."""
    if tau < 0:
        raise ValueError(f"threshold must be >= 0, got {tau}")
    m = np.asarray(m, dtype=float)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    return (u[:, :k] * s[:k]) @ vt[:k]


def mask_from_indices(shape, indices) -> np.ndarray:
    """Boolean mask from an iterable of ``(row, col)`` pairs.

    Raises ``ValueError`` on out-of-range or duplicate indices.
    """
    mask = np.zeros(shape, dtype=bool)
    idx = np.asarray(list(indices), dtype=int).reshape(-1, 2)
    if idx.size:
        rows, cols = idx[:, 0], idx[:, 1]
        if (rows < 0).any() or (rows >= shape[0]).any() or (cols < 0).any() or (cols >= shape[1]).any():
            raise ValueError(f"mask index out of range for shape {shape}")
        flat = rows * shape[1] + cols
        if np.unique(flat).size != flat.size:
            raise ValueError("duplicate index in mask")
        mask[rows, cols] = True
    return mask


def _as_mask(m: np.ndarray, omega) -> np.ndarray:
    if isinstance(omega, np.ndarray) and omega.dtype == bool:
        if omega.shape != m.shape:
            raise ValueError(f"mask shape {omega.shape} does not match matrix shape {m.shape}")
        return omega
    return mask_from_indices(m.shape, omega)


def project_omega(m, omega) -> np.ndarray:
    """Keep the entries on the observation set, zero the rest.

    ``omega`` is either a boolean array of the same shape or an iterable of
    ``(row, col)`` pairs.
    """
    m = np.asarray(m, dtype=float)
    return np.where(_as_mask(m, omega), m, 0.0)


def default_lambda(shape, observed_fraction: float = 1.0) -> float:
    n = max(shape)
    if observed_fraction >= 1.0:
        return 1.0 / np.sqrt(n)
    # sparser sampling needs a larger l1 weight to keep A from eating the signal
    return 1.0 / np.sqrt(0.5 * observed_fraction * n)


def _inexact_alm(d: np.ndarray, mask: np.ndarray, cfg: SolverConfig, sparse: bool) -> Decomposition:
    full = bool(mask.all())
    lam = cfg.lam if cfg.lam is not None else default_lambda(d.shape, float(mask.mean()))
    growth = cfg.mu_growth if cfg.mu_growth is not None else (1.5 if full else 1.1)

    d = np.where(mask, d, 0.0)
    zeros = np.zeros_like(d)
    norm_fro = float(np.linalg.norm(d))
    if norm_fro == 0.0:
        return Decomposition(zeros, zeros.copy(), 0, 0.0, True, [], lam)

    norm_two = float(np.linalg.norm(d, 2))
    dual_scale = max(norm_two, np.abs(d).max() / lam) if sparse else norm_two
    z = d / dual_scale
    mu = cfg.mu_init if cfg.mu_init is not None else 1.25 / norm_two
    tol = cfg.rel_tol * norm_fro
    eps = cfg.epsilon

    x, a, e = zeros.copy(), zeros.copy(), zeros.copy()
    trace = []
    for k in range(1, cfg.max_iters + 1):
        x_prev = x
        if sparse:
            a = np.where(mask, soft_threshold(d - x - e + z / mu, lam / mu), 0.0)
        x = svt(d - a - e + z / mu, 1.0 / mu)
        if not full:
            e = np.where(mask, 0.0, d - x - a + z / mu)
        r = d - x - a - e
        res = float(np.linalg.norm(r))
        trace.append(res)
        if not np.isfinite(res):
            raise NumericalError(f"ALM diverged at iteration {k}")
        z = z + mu * r
        mu *= growth
        if eps > 0 and res <= eps:
            return Decomposition(x, a, k, res, True, trace, lam)
        # missing entries: the residual alone stops too early, X must also settle
        settled = full or np.linalg.norm(x - x_prev) <= cfg.rel_tol * max(np.linalg.norm(x), 1e-300)
        if res <= tol and settled:
            return Decomposition(x, a, k, res, True, trace, lam)
    return Decomposition(x, a, cfg.max_iters, trace[-1], False, trace, lam)


def robust_pca(y, config: SolverConfig = SolverConfig()) -> Decomposition:
    """Split ``y`` into low-rank ``X`` and sparse ``A`` with ``||y - X - A||_F <= eps``."""
    y = np.asarray(y, dtype=float)
    if not np.isfinite(y).all():
        raise ValueError("sensing matrix has non-finite entries")
    return _inexact_alm(y, np.ones(y.shape, dtype=bool), config, sparse=True)


def robust_completion(y_observed, omega, config: SolverConfig = SolverConfig()) -> Decomposition:
    """Robust PCA with feasibility measured on the observed entries only.

    Off-mask entries of ``X`` are the completion estimate; ``A`` is zero off
    the mask.
    """
    y = np.asarray(y_observed, dtype=float)
    mask = _as_mask(y, omega)
    if not mask.any():
        raise ValueError("observation mask is empty")
    if not np.isfinite(y[mask]).all():
        raise ValueError("observed entries must be finite")
    return _inexact_alm(y, mask, config, sparse=True)


def stable_pca(y, config: SolverConfig = SolverConfig()) -> Decomposition:
    """Minimum nuclear norm ``X`` with ``||y - X||_F <= epsilon``.

    Runs the equality-constrained ALM and stops at the first iterate inside the
    epsilon ball; ``X = 0`` is tried before any iteration. With ``epsilon = 0``
    the feasible set is ``{y}`` and ``y`` is returned as is.
    """
    y = np.asarray(y, dtype=float)
    if not np.isfinite(y).all():
        raise ValueError("sensing matrix has non-finite entries")
    zeros = np.zeros_like(y)
    eps = config.epsilon
    if eps == 0.0:
        return Decomposition(y.copy(), zeros, 0, 0.0, True, [0.0])
    norm_fro = float(np.linalg.norm(y))
    if norm_fro <= eps:
        return Decomposition(zeros, zeros.copy(), 0, norm_fro, True, [norm_fro])

    # stop on the epsilon ball only, never on the relative tolerance
    cfg = replace(config, rel_tol=min(config.rel_tol, eps / norm_fro), mu_growth=config.mu_growth or 1.5)
    dec = _inexact_alm(y, np.ones(y.shape, dtype=bool), cfg, sparse=False)
    dec.converged = dec.final_residual <= eps * (1 + config.rel_tol)
    dec.A = zeros
    dec.lam = 0.0
    return dec
