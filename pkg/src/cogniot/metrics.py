"""Quality scores for data (QoD), information (QoI) and experience (QoE).

Every score is normalized to [0, 1] with 1 the best case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence


def _values(record) -> tuple:
    # astuple deep-copies, which dominates the cost on flat records
    return tuple(getattr(record, name) for name in record.__dataclass_fields__)


def _check_unit(record) -> None:
    for name in record.__dataclass_fields__:
        v = getattr(record, name)
        if not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {v!r}")


@dataclass(frozen=True)
class QoDRecord:
    accuracy: float
    truthfulness: float
    completeness: float
    up_to_dateness: float

    def __post_init__(self):
        _check_unit(self)


@dataclass(frozen=True)
class QoIRecord:
    """Quantity, precision, recall, accuracy, detail, timeliness, validity."""

    Q: float
    P: float
    R: float
    A: float
    D: float
    T: float
    V: float

    def __post_init__(self):
        _check_unit(self)


@dataclass(frozen=True)
class ResourceCost:
    """Efficiency scores of the cost dimension."""

    device_utilization: float
    computational: float
    energy: float
    storage: float

    def __post_init__(self):
        _check_unit(self)


@dataclass(frozen=True)
class ProvisioningLevels:
    access: float
    communication: float
    computation: float
    application: float
    weights: tuple = (0.25, 0.25, 0.25, 0.25)

    def __post_init__(self):
        for name in ("access", "communication", "computation", "application"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        w = tuple(float(x) for x in self.weights)
        if len(w) != 4 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights must be 4 nonnegative numbers summing to 1, got {self.weights!r}")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class QoEMapping:
    """Provisioning-to-experience curve: ``linear``, ``sigmoid`` or ``step``."""

    kind: str = "linear"
    center: float = 0.5
    steepness: float = 10.0
    threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in ("linear", "sigmoid", "step"):
            raise ValueError(f"unknown QoE mapping {self.kind!r}")
        if self.kind == "sigmoid":
            if not 0.0 <= self.center <= 1.0:
                raise ValueError("sigmoid center must lie in [0, 1]")
            if not self.steepness > 0:
                raise ValueError("sigmoid steepness must be > 0")
        if self.kind == "step" and not 0.0 <= self.threshold <= 1.0:
            raise ValueError("step threshold must lie in [0, 1]")


def qoi_score(r: QoIRecord) -> float:
    return math.prod(_values(r))


def qod_score(r: QoDRecord) -> float:
    """Geometric mean of the four data-quality factors."""
    vals = _values(r)
    if min(vals) == 0.0:
        return 0.0
    return min(math.prod(vals) ** 0.25, 1.0)


def timeliness(delay: float, scale: float) -> float:
    """``1 / (1 + delay / scale)``; exactly 1 at zero delay."""
    if delay < 0:
        raise ValueError(f"delay must be >= 0, got {delay}")
    if not scale > 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    if delay == 0:
        return 1.0
    return 1.0 / (1.0 + delay / scale)


def completeness(collected: float, required: float) -> float:
    if not required > 0:
        raise ValueError(f"required amount must be > 0, got {required}")
    if collected < 0:
        raise ValueError(f"collected amount must be >= 0, got {collected}")
    return min(collected / required, 1.0)


def provisioning_level(p: ProvisioningLevels) -> float:
    levels = (p.access, p.communication, p.computation, p.application)
    return min(sum(w * v for w, v in zip(p.weights, levels)), 1.0)


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def qoe_map(m: QoEMapping, s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"provisioning level must lie in [0, 1], got {s}")
    if m.kind == "linear":
        return s
    if m.kind == "step":
        return 1.0 if s >= m.threshold else 0.0
    lo = _logistic(-m.steepness * m.center)
    hi = _logistic(m.steepness * (1.0 - m.center))
    v = (_logistic(m.steepness * (s - m.center)) - lo) / (hi - lo)
    return min(max(v, 0.0), 1.0)


def score_record(kind: str, values: dict, mapping: Optional[dict] = None) -> dict:
    """Score a plain dict of factors; used by the CLI and scenario reports."""
    if kind == "qoi":
        rec = QoIRecord(**values)
        return {"record": values, "qoi": qoi_score(rec)}
    if kind == "qod":
        rec = QoDRecord(**values)
        return {"record": values, "qod": qod_score(rec)}
    if kind == "qoe":
        levels = ProvisioningLevels(**values)
        s = provisioning_level(levels)
        m = QoEMapping(**(mapping or {}))
        return {"record": values, "provisioning": s, "qoe": qoe_map(m, s)}
    if kind == "resource":
        ResourceCost(**values)
        return {"record": values}
    raise ValueError(f"unknown record kind {kind!r}")
