"""Similarity metrics over fixed-length monthly return vectors.

Six interchangeable scoring variants are provided.  The proposed hybrid
combines a weighted reciprocal of the cumulative-return distance with an
adjusted (uncentred) correlation:

    score = w / (1 + e) + (1 - w) * tau

where e is the absolute difference of the vectors' cumulative growth
factors and tau is the cosine of the vectors about zero.  The remaining
variants swap tau for centred Pearson correlation, use one component
alone, or score sign agreement only.

All scalar metrics and the batch scorer evaluate the same floating-point
expressions, so batch scores are bit-identical to the scalar ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import UndefinedCorrelationError, UsageError, ValidationError

if TYPE_CHECKING:  # pragma: no cover
    from .casebase import Case


class SimilarityVariant(str, Enum):
    """Canonical names for the scoring variants."""

    PROPOSED_ADJUSTED = "ProposedAdjusted"
    PROPOSED_PEARSON = "ProposedPearson"
    PEARSON_ONLY = "PearsonOnly"
    SHAPE = "Shape"
    ADJUSTED_ONLY = "AdjustedOnly"
    CUMULATIVE_ONLY = "CumulativeOnly"

    def __str__(self) -> str:
        return self.value


DEFAULT_WEIGHT = 0.5


@dataclass(frozen=True)
class SimilarityConfig:
    """A scoring variant plus the hybrid weight (used by Proposed variants)."""

    variant: SimilarityVariant = SimilarityVariant.PROPOSED_ADJUSTED
    weight: float = DEFAULT_WEIGHT

    def __post_init__(self) -> None:
        if isinstance(self.variant, str) and not isinstance(self.variant, SimilarityVariant):
            object.__setattr__(self, "variant", SimilarityVariant(self.variant))
        if not 0.0 <= self.weight <= 1.0:
            raise UsageError(f"similarity weight must lie in [0, 1], got {self.weight}")


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    variant: SimilarityVariant


def _as_vector(values: Sequence[float], name: str) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{name} contains non-finite values")
    return vec


def _pair(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    xv = _as_vector(x, "x")
    yv = _as_vector(y, "y")
    if xv.size != yv.size:
        raise ValidationError(f"length mismatch: {xv.size} vs {yv.size}")
    return xv, yv


def _clamp(value: float) -> float:
    # rounding in the quotient can push magnitudes a few ulp past 1
    return min(1.0, max(-1.0, value))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Centred Pearson correlation, clamped to [-1, 1].

    Computed in expanded form from the raw sums, which keeps the result
    exactly 1.0 for pairs that differ by a representable constant shift.
    Raises UndefinedCorrelationError when either vector is constant.
    """
    xv, yv = _pair(x, y)
    if float(np.max(xv)) == float(np.min(xv)):
        raise UndefinedCorrelationError("pearson undefined: first vector is constant")
    if float(np.max(yv)) == float(np.min(yv)):
        raise UndefinedCorrelationError("pearson undefined: second vector is constant")
    n = xv.size
    sx = float(np.sum(xv))
    sy = float(np.sum(yv))
    sxx = float(np.sum(xv * xv))
    syy = float(np.sum(yv * yv))
    sxy = float(np.sum(xv * yv))
    qx = n * sxx - sx * sx
    qy = n * syy - sy * sy
    if qx <= 0.0 or qy <= 0.0:
        raise UndefinedCorrelationError("pearson undefined: zero variance")
    return _clamp((n * sxy - sx * sy) / math.sqrt(qx * qy))


def adjusted_corr(x: Sequence[float], y: Sequence[float]) -> float:
    """Uncentred correlation (cosine about zero), clamped to [-1, 1].

    tau = sum(x*y) / sqrt(sum(x^2) * sum(y^2)).  Unlike Pearson this
    keeps level information: vectors equal up to a shift do not score 1.
    Raises UndefinedCorrelationError when either vector is all zero.
    """
    xv, yv = _pair(x, y)
    sxx = float(np.sum(xv * xv))
    syy = float(np.sum(yv * yv))
    if sxx == 0.0:
        raise UndefinedCorrelationError("adjusted correlation undefined: first vector is all zero")
    if syy == 0.0:
        raise UndefinedCorrelationError("adjusted correlation undefined: second vector is all zero")
    sxy = float(np.sum(xv * yv))
    return _clamp(sxy / math.sqrt(sxx * syy))


def cumulative_growth(x: Sequence[float]) -> float:
    """Product of (1 + r) over the vector."""
    xv = _as_vector(x, "x")
    return float(np.prod(1.0 + xv))


def cumulative_distance(x: Sequence[float], y: Sequence[float]) -> float:
    """Absolute difference of the two cumulative growth factors."""
    xv, yv = _pair(x, y)
    gx = float(np.prod(1.0 + xv))
    gy = float(np.prod(1.0 + yv))
    return abs(gx - gy)


def _hybrid(tau: float, e: float, w: float) -> float:
    return w / (1.0 + e) + (1.0 - w) * tau


def combined_sim(x: Sequence[float], y: Sequence[float], w: float = DEFAULT_WEIGHT) -> float:
    """Hybrid of cumulative-distance closeness and adjusted correlation.

    w / (1 + e) + (1 - w) * tau, with w in [0, 1].  At w = 0 this equals
    adjusted_corr bit for bit; at w = 1 it equals 1 / (1 + e).
    """
    if not 0.0 <= w <= 1.0:
        raise UsageError(f"weight must lie in [0, 1], got {w}")
    return _hybrid(adjusted_corr(x, y), cumulative_distance(x, y), w)


def combined_sim_pearson(x: Sequence[float], y: Sequence[float], w: float = DEFAULT_WEIGHT) -> float:
    """Hybrid variant with centred Pearson in place of adjusted correlation."""
    if not 0.0 <= w <= 1.0:
        raise UsageError(f"weight must lie in [0, 1], got {w}")
    return _hybrid(pearson(x, y), cumulative_distance(x, y), w)


def shape_sim(x: Sequence[float], y: Sequence[float]) -> float:
    """Sign-agreement score 2*m/n - 1, where m counts matching signs.

    Zero only matches zero.  Ranges over [-1, 1].
    """
    xv, yv = _pair(x, y)
    m = int(np.count_nonzero(np.sign(xv) == np.sign(yv)))
    return 2.0 * m / xv.size - 1.0


def score_vectors(x: Sequence[float], y: Sequence[float], config: SimilarityConfig) -> float:
    """Score a pair of return vectors under the configured variant."""
    variant = config.variant
    if variant is SimilarityVariant.PROPOSED_ADJUSTED:
        return combined_sim(x, y, config.weight)
    if variant is SimilarityVariant.PROPOSED_PEARSON:
        return combined_sim_pearson(x, y, config.weight)
    if variant is SimilarityVariant.PEARSON_ONLY:
        return pearson(x, y)
    if variant is SimilarityVariant.SHAPE:
        return shape_sim(x, y)
    if variant is SimilarityVariant.ADJUSTED_ONLY:
        return adjusted_corr(x, y)
    if variant is SimilarityVariant.CUMULATIVE_ONLY:
        e = cumulative_distance(x, y)
        return 1.0 / (1.0 + e)
    raise UsageError(f"unknown similarity variant {variant!r}")


def score(case_a: "Case", case_b: "Case", config: SimilarityConfig) -> SimilarityScore:
    """Score two cases by their description vectors."""
    value = score_vectors(case_a.description, case_b.description, config)
    return SimilarityScore(value=value, variant=config.variant)


def score_range(config: SimilarityConfig) -> tuple[float, float]:
    """Closed interval that contains every defined score of the variant."""
    variant = config.variant
    if variant in (SimilarityVariant.PEARSON_ONLY, SimilarityVariant.ADJUSTED_ONLY, SimilarityVariant.SHAPE):
        return (-1.0, 1.0)
    if variant is SimilarityVariant.CUMULATIVE_ONLY:
        return (0.0, 1.0)
    return (-(1.0 - config.weight), 1.0)


@dataclass(frozen=True)
class CandidateArrays:
    """Per-candidate description matrix with cached row statistics.

    Built once per candidate pool so repeated queries reuse the sums,
    sums of squares and growth factors.
    """

    matrix: np.ndarray
    sums: np.ndarray = field(init=False)
    sumsqs: np.ndarray = field(init=False)
    growths: np.ndarray = field(init=False)
    const_rows: np.ndarray = field(init=False)
    zero_rows: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValidationError("candidate matrix must be 2-D")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "sums", np.sum(matrix, axis=1))
        sumsqs = np.sum(matrix * matrix, axis=1)
        object.__setattr__(self, "sumsqs", sumsqs)
        object.__setattr__(self, "growths", np.prod(1.0 + matrix, axis=1))
        if matrix.shape[0]:
            const = np.max(matrix, axis=1) == np.min(matrix, axis=1)
        else:
            const = np.zeros(0, dtype=bool)
        object.__setattr__(self, "const_rows", const)
        object.__setattr__(self, "zero_rows", sumsqs == 0.0)

    def __len__(self) -> int:
        return int(self.matrix.shape[0])


def _query_vector(query_desc: Sequence[float], arrays: CandidateArrays) -> np.ndarray:
    q = _as_vector(query_desc, "query description")
    if q.size != arrays.matrix.shape[1]:
        raise ValidationError(
            f"query length {q.size} does not match candidate length {arrays.matrix.shape[1]}"
        )
    return q


def _tau_batch(q: np.ndarray, arrays: CandidateArrays) -> np.ndarray:
    """Adjusted correlation of q against every row; NaN where undefined."""
    sqq = float(np.sum(q * q))
    if sqq == 0.0:
        return np.full(len(arrays), np.nan)
    dots = np.sum(arrays.matrix * q, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = np.clip(dots / np.sqrt(arrays.sumsqs * sqq), -1.0, 1.0)
    return np.where(arrays.zero_rows, np.nan, tau)


def _pearson_batch(q: np.ndarray, arrays: CandidateArrays) -> np.ndarray:
    """Pearson correlation of q against every row; NaN where undefined."""
    n = q.size
    if float(np.max(q)) == float(np.min(q)):
        return np.full(len(arrays), np.nan)
    sq = float(np.sum(q))
    sqq = float(np.sum(q * q))
    qq = n * sqq - sq * sq
    if qq <= 0.0:
        return np.full(len(arrays), np.nan)
    dots = np.sum(arrays.matrix * q, axis=1)
    qc = n * arrays.sumsqs - arrays.sums * arrays.sums
    undefined = arrays.const_rows | (qc <= 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.clip((n * dots - arrays.sums * sq) / np.sqrt(qc * qq), -1.0, 1.0)
    return np.where(undefined, np.nan, r)


def _distance_batch(q: np.ndarray, arrays: CandidateArrays) -> np.ndarray:
    gq = float(np.prod(1.0 + q))
    return np.abs(arrays.growths - gq)


def similarity_components(query_desc: Sequence[float], arrays: CandidateArrays) -> tuple[np.ndarray, np.ndarray]:
    """Adjusted correlations and cumulative distances against every row.

    Exposed so weight sweeps can score many hybrid weights without
    recomputing the two components.  Combining them with hybrid_scores
    reproduces the ProposedAdjusted scores bit for bit.
    """
    q = _query_vector(query_desc, arrays)
    return _tau_batch(q, arrays), _distance_batch(q, arrays)


def hybrid_scores(tau: np.ndarray, e: np.ndarray, w: float) -> np.ndarray:
    """Vectorised form of the hybrid expression w/(1+e) + (1-w)*tau."""
    return w / (1.0 + e) + (1.0 - w) * tau


def score_candidates(
    query_desc: Sequence[float], arrays: CandidateArrays, config: SimilarityConfig
) -> np.ndarray:
    """Score a query against every candidate row.

    Returns one float per row; NaN marks candidates for which the variant
    is undefined (the scalar metric would raise).  Bit-identical to
    calling the scalar metric row by row.
    """
    q = _query_vector(query_desc, arrays)
    variant = config.variant
    if variant is SimilarityVariant.PROPOSED_ADJUSTED:
        return hybrid_scores(_tau_batch(q, arrays), _distance_batch(q, arrays), config.weight)
    if variant is SimilarityVariant.PROPOSED_PEARSON:
        return hybrid_scores(_pearson_batch(q, arrays), _distance_batch(q, arrays), config.weight)
    if variant is SimilarityVariant.PEARSON_ONLY:
        return _pearson_batch(q, arrays)
    if variant is SimilarityVariant.ADJUSTED_ONLY:
        return _tau_batch(q, arrays)
    if variant is SimilarityVariant.CUMULATIVE_ONLY:
        return 1.0 / (1.0 + _distance_batch(q, arrays))
    if variant is SimilarityVariant.SHAPE:
        matches = np.count_nonzero(np.sign(arrays.matrix) == np.sign(q), axis=1)
        return 2.0 * matches / q.size - 1.0
    raise UsageError(f"unknown similarity variant {variant!r}")


ALL_VARIANTS: tuple[SimilarityVariant, ...] = tuple(SimilarityVariant)
