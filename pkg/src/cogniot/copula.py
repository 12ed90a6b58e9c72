"""Copula-based fusion of heterogeneous sensor data.

Joint distributions are assembled from per-sensor marginals and a copula:
``F(z) = C(F_1(z_1), ..., F_N(z_N))`` and, for densities,
``f(z) = prod_n f_n(z_n) * c(F_1(z_1), ..., F_N(z_N))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats

_BOUNDARY = 1e-12
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MarginalModel:
    """A univariate marginal: ``gaussian``, ``exponential`` or ``empirical``.

    Build empirical marginals with :func:`fit_empirical_marginal`.
    """

    kind: str
    mean: float = 0.0
    std: float = 1.0
    rate: float = 1.0
    samples: tuple = ()
    bandwidth: float = 0.0

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.std > 0:
                raise ValueError(f"gaussian std must be > 0, got {self.std}")
        elif self.kind == "exponential":
            if not self.rate > 0:
                raise ValueError(f"exponential rate must be > 0, got {self.rate}")
        elif self.kind == "empirical":
            if len(self.samples) < 2:
                raise ValueError("empirical marginal needs at least 2 samples")
            if list(self.samples) != sorted(self.samples):
                raise ValueError("empirical samples must be sorted")
            if not self.bandwidth > 0:
                raise ValueError("empirical bandwidth must be > 0")
        else:
            raise ValueError(f"unknown marginal kind {self.kind!r}")

    @classmethod
    def gaussian(cls, mean: float = 0.0, std: float = 1.0) -> "MarginalModel":
        return cls("gaussian", mean=mean, std=std)

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "MarginalModel":
        return cls("exponential", rate=rate)

    def cdf(self, z: float) -> float:
        return eval_marginal_cdf(self, z)

    def pdf(self, z: float) -> float:
        return math.exp(self.logpdf(z))

    def logpdf(self, z: float) -> float:
        z = float(z)
        if self.kind == "gaussian":
            t = (z - self.mean) / self.std
            return -0.5 * t * t - _LOG_SQRT_2PI - math.log(self.std)
        if self.kind == "exponential":
            return math.log(self.rate) - self.rate * z if z >= 0 else -math.inf
        xs = np.asarray(self.samples)
        h = self.bandwidth
        terms = stats.norm.logpdf((z - xs) / h) - math.log(h)
        return float(np.logaddexp.reduce(terms) - math.log(xs.size))


def eval_marginal_cdf(model: MarginalModel, z: float) -> float:
    """Marginal cdf value in [0, 1].

    The empirical kind returns ``rank / (n + 1)`` clamped to
    ``[1/(n+1), n/(n+1)]`` so downstream normal quantiles stay finite.
    """
    if model.kind == "gaussian":
        return float(special.ndtr((z - model.mean) / model.std))
    if model.kind == "exponential":
        return -math.expm1(-model.rate * z) if z > 0 else 0.0
    n = len(model.samples)
    rank = int(np.searchsorted(model.samples, z, side="right"))
    return min(max(rank, 1), n) / (n + 1)


def fit_empirical_marginal(samples: Sequence[float]) -> MarginalModel:
    """Empirical marginal with a Gaussian KDE density (Silverman bandwidth)."""
    xs = np.sort(np.asarray(samples, dtype=float))
    if xs.size < 2:
        raise ValueError(f"need at least 2 samples, got {xs.size}")
    n = xs.size
    std = float(xs.std(ddof=1))
    iqr = float(np.subtract(*np.percentile(xs, [75, 25])))
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    if spread == 0.0:
        # degenerate sample: keep the density finite around the atom
        spread = 1e-3 * max(1.0, abs(float(xs[0])))
    h = 0.9 * spread * n ** (-0.2)
    return MarginalModel("empirical", samples=tuple(xs.tolist()), bandwidth=h)


@dataclass(frozen=True)
class CopulaModel:
    """``independence`` or ``gaussian`` copula of dimension ``dim``."""

    kind: str
    dim: int
    correlation: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("copula dimension must be >= 1")
        if self.kind == "independence":
            return
        if self.kind != "gaussian":
            raise ValueError(f"unknown copula kind {self.kind!r}")
        r = np.array(self.correlation, dtype=float)
        if r.shape != (self.dim, self.dim):
            raise ValueError(f"correlation must be {self.dim}x{self.dim}, got {r.shape}")
        if not np.array_equal(r, r.T):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(r), 1.0, rtol=0, atol=1e-12):
            raise ValueError("correlation matrix must have unit diagonal")
        if np.abs(r).max() > 1.0:
            raise ValueError("correlation entries must lie in [-1, 1]")
        if np.linalg.eigvalsh(r).min() < -1e-10:
            raise ValueError("correlation matrix is not positive semi-definite")
        r.setflags(write=False)
        object.__setattr__(self, "correlation", r)
        # density terms reused on every evaluation (None when r is singular)
        sign, logdet = np.linalg.slogdet(r)
        precision = np.linalg.inv(r) - np.eye(self.dim) if sign > 0 else None
        object.__setattr__(self, "_logdet", float(logdet))
        object.__setattr__(self, "_precision_minus_identity", precision)

    @classmethod
    def independence(cls, dim: int) -> "CopulaModel":
        return cls("independence", dim)

    @classmethod
    def gaussian(cls, correlation) -> "CopulaModel":
        r = np.asarray(correlation, dtype=float)
        return cls("gaussian", r.shape[0], r)

    @classmethod
    def bivariate_gaussian(cls, rho: float) -> "CopulaModel":
        return cls.gaussian([[1.0, rho], [rho, 1.0]])

    def cdf(self, u) -> float:
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if (u == 0).any():
            return 0.0
        if self.kind == "independence":
            return float(np.prod(u))
        if self.dim == 1:
            return float(u[0])
        q = special.ndtri(u)
        mvn = stats.multivariate_normal(mean=np.zeros(self.dim), cov=self.correlation, allow_singular=True)
        return float(np.clip(mvn.cdf(q), 0.0, 1.0))

    def log_density(self, u) -> float:
        u = np.clip(np.asarray(u, dtype=float), _BOUNDARY, 1.0 - _BOUNDARY)
        if self.kind == "independence":
            return 0.0
        if self._precision_minus_identity is None:
            raise ValueError("gaussian copula density needs a positive definite correlation")
        q = special.ndtri(u)
        return float(-0.5 * self._logdet - 0.5 * (q @ self._precision_minus_identity @ q))


def _check_dims(copula: CopulaModel, marginals: Sequence[MarginalModel], z) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if not (copula.dim == len(marginals) == z.size):
        raise ValueError(
            f"dimension mismatch: copula {copula.dim}, marginals {len(marginals)}, sample {z.size}"
        )
    return z


def copula_density(copula: CopulaModel, u) -> float:
    """Copula density ``c(u)``; boundary values are moved inward by 1e-12."""
    u = np.asarray(u, dtype=float).ravel()
    if u.size != copula.dim:
        raise ValueError(f"dimension mismatch: copula {copula.dim}, point {u.size}")
    if copula.kind == "independence":
        return 1.0
    return math.exp(copula.log_density(u))


def joint_cdf(copula: CopulaModel, marginals: Sequence[MarginalModel], z) -> float:
    z = _check_dims(copula, marginals, z)
    u = [eval_marginal_cdf(m, zi) for m, zi in zip(marginals, z)]
    return copula.cdf(u)


def log_joint_pdf(copula: CopulaModel, marginals: Sequence[MarginalModel], z) -> float:
    z = _check_dims(copula, marginals, z)
    log_fp = sum(m.logpdf(zi) for m, zi in zip(marginals, z))
    if log_fp == -math.inf:
        return -math.inf
    u = [eval_marginal_cdf(m, zi) for m, zi in zip(marginals, z)]
    return log_fp + copula.log_density(u)


def joint_pdf(copula: CopulaModel, marginals: Sequence[MarginalModel], z) -> float:
    """Product of marginal pdfs reweighted by the copula density."""
    z = _check_dims(copula, marginals, z)
    if copula.kind == "independence":
        return float(np.prod([m.pdf(zi) for m, zi in zip(marginals, z)]))
    return math.exp(log_joint_pdf(copula, marginals, z))


def log_likelihood_ratio(h0, h1, z) -> float:
    """``log f_1(z) - log f_0(z)`` for hypotheses given as ``(copula, marginals)``."""
    l0 = log_joint_pdf(h0[0], h0[1], z)
    l1 = log_joint_pdf(h1[0], h1[1], z)
    if l0 == -math.inf and l1 == -math.inf:
        raise ValueError("undefined ratio: joint pdf is zero under both hypotheses")
    return l1 - l0
