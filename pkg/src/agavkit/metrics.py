"""Correlation and error metrics, training losses, and level-probability scoring.

All vector functions accept any 1-D sequence of finite numbers. Correlations
on a constant vector are treated as a caller error rather than silently
returning NaN: quality benchmarks that feed a constant prediction column into
a rank correlation almost always have a bug upstream.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

# Quality levels in the order used by level-logit scorers, best first.
QUALITY_LEVELS = ("excellent", "good", "fair", "poor", "bad")


class UndefinedCorrelationError(ValueError):
    """Raised when a correlation is requested for a constant vector."""


class Orientation(enum.Enum):
    """How a level-probability score maps onto quality.

    LEVEL_INDEXED weights each level by its position in QUALITY_LEVELS
    (excellent=1 .. bad=5), so lower scores mean better quality.
    QUALITY_ASCENDING flips that (bad=1 .. excellent=5), so higher is better.
    """

    LEVEL_INDEXED = "level-indexed"
    QUALITY_ASCENDING = "quality-ascending"


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _paired(x, y, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    xv = _as_vector(x, "x")
    yv = _as_vector(y, "y")
    if xv.size != yv.size:
        raise ValueError(f"length mismatch: {xv.size} vs {yv.size}")
    if xv.size < min_len:
        raise ValueError(f"need at least {min_len} elements, got {xv.size}")
    return xv, yv


def _is_constant(v: np.ndarray) -> bool:
    return bool(np.all(v == v[0]))


def plcc(x, y) -> float:
    """Pearson linear correlation coefficient, clipped to [-1, 1]."""
    xv, yv = _paired(x, y, 2)
    if _is_constant(xv) or _is_constant(yv):
        raise UndefinedCorrelationError("correlation of a constant vector is undefined")
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    denom = math.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    if denom == 0.0:
        # Variance underflowed: constant at float precision.
        raise UndefinedCorrelationError("correlation of a constant vector is undefined")
    r = float(np.dot(xc, yc) / denom)
    return max(-1.0, min(1.0, r))


def srcc(x, y) -> float:
    """Spearman rank correlation: PLCC of average-tie ranks."""
    xv, yv = _paired(x, y, 2)
    if _is_constant(xv) or _is_constant(yv):
        raise UndefinedCorrelationError("correlation of a constant vector is undefined")
    return plcc(stats.rankdata(xv), stats.rankdata(yv))


def krcc(x, y) -> float:
    """Kendall rank correlation (tau-b, ties corrected)."""
    xv, yv = _paired(x, y, 2)
    if _is_constant(xv) or _is_constant(yv):
        raise UndefinedCorrelationError("correlation of a constant vector is undefined")
    tau, _ = stats.kendalltau(xv, yv)
    return float(tau)


def rmse(x, y) -> float:
    """Root mean squared error between two equal-length vectors."""
    xv, yv = _paired(x, y, 1)
    d = xv - yv
    return float(math.sqrt(np.mean(d * d)))


def plcc_loss(predicted, target) -> float:
    """Correlation-based training loss: (1 - PLCC) / 2, in [0, 1]."""
    return (1.0 - plcc(predicted, target)) / 2.0


@dataclass(frozen=True)
class TokenDistribution:
    """A normalized probability vector with the index of the reference token."""

    probabilities: tuple[float, ...]
    target_index: int

    def __post_init__(self):
        if not self.probabilities:
            raise ValueError("empty probability vector")
        total = 0.0
        for p in self.probabilities:
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                raise ValueError(f"probability out of range: {p}")
            total += p
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if not 0 <= self.target_index < len(self.probabilities):
            raise ValueError(f"target index {self.target_index} out of range")

    @property
    def target_probability(self) -> float:
        return self.probabilities[self.target_index]


def cross_entropy(batch, *, on_zero: str = "raise") -> float:
    """Mean negative log-probability of the target token over a batch.

    ``on_zero`` selects what happens when a target probability is exactly
    zero: "raise" (default) signals an error, "inf" returns float inf.
    """
    if on_zero not in ("raise", "inf"):
        raise ValueError(f"unknown on_zero mode: {on_zero!r}")
    items = list(batch)
    if not items:
        raise ValueError("empty batch")
    total = 0.0
    for dist in items:
        p = dist.target_probability
        if p == 0.0:
            if on_zero == "raise":
                raise ValueError("target token has zero probability")
            return math.inf
        total += -math.log(p)
    return total / len(items)


@dataclass(frozen=True)
class LevelLogits:
    """Raw scores for the five quality levels, in QUALITY_LEVELS order."""

    values: tuple[float, float, float, float, float]
    orientation: Orientation = Orientation.QUALITY_ASCENDING

    def __post_init__(self):
        if len(self.values) != len(QUALITY_LEVELS):
            raise ValueError(f"expected {len(QUALITY_LEVELS)} logits, got {len(self.values)}")
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(f"non-finite logit: {v}")

    @classmethod
    def from_mapping(cls, logits, orientation: Orientation = Orientation.QUALITY_ASCENDING):
        """Build from a mapping of level name to logit; all five required."""
        missing = [name for name in QUALITY_LEVELS if name not in logits]
        if missing:
            raise ValueError(f"missing levels: {missing}")
        extra = [name for name in logits if name not in QUALITY_LEVELS]
        if extra:
            raise ValueError(f"unknown levels: {extra}")
        return cls(tuple(float(logits[name]) for name in QUALITY_LEVELS), orientation)


def level_probability_score(logits: LevelLogits) -> float:
    """Softmax-weighted expected level index, mapped to [1, 5].

    Level weights follow the logit orientation: LEVEL_INDEXED scores the
    expected position in QUALITY_LEVELS (1 = excellent), QUALITY_ASCENDING
    reverses the axis so 5 = excellent. The two always sum to 6.
    """
    arr = np.asarray(logits.values, dtype=float)
    e = np.exp(arr - arr.max())
    weights = np.arange(1.0, 6.0)
    indexed = float(np.dot(weights, e) / e.sum())
    score = indexed if logits.orientation is Orientation.LEVEL_INDEXED else 6.0 - indexed
    return max(1.0, min(5.0, score))


def ascending_level_score(logits: LevelLogits) -> float:
    """Level-probability score normalized so that higher always means better."""
    score = level_probability_score(logits)
    if logits.orientation is Orientation.QUALITY_ASCENDING:
        return score
    return 6.0 - score
