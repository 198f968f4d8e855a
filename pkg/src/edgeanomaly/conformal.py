"""Distribution-free anomaly decisions for scored edges.

A nonconformity score ranks a test edge against scores from a held-out
calibration split. A single uniform draw smooths rank ties, which makes the
resulting p-value exactly uniform whenever the pooled scores are
exchangeable; thresholding the p-value at epsilon then keeps the false
positive rate at or below epsilon regardless of the score function.

Two counting orientations are supported. "power-corrected" counts pooled
scores strictly above the test score, so large scores (unlikely edges) get
small p-values. "paper" counts scores strictly below, the mirror image.
Both are valid under exchangeability; power-corrected is the default
because anomalies are flagged when the p-value is small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adnd import FittedModel, predictive_log_likelihood
from .graph_core import Edge, EdgeCorpus

__all__ = [
    "ORIENTATIONS",
    "CalibrationScores",
    "AnomalyVerdict",
    "nonconformity_score",
    "calibration_scores",
    "conformal_p_value",
    "conformal_p_values",
    "full_conformal_p_values",
    "tie_broken_rank",
    "detect",
    "detect_corpus",
]

ORIENTATIONS = ("power-corrected", "paper")


def _check_orientation(orientation: str) -> None:
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")


@dataclass(frozen=True)
class CalibrationScores:
    """Held-out nonconformity scores, all finite."""

    scores: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float)
        if scores.ndim != 1:
            raise ValueError("calibration scores must form a vector")
        if not np.all(np.isfinite(scores)):
            raise ValueError("calibration scores must be finite")
        scores.flags.writeable = False
        object.__setattr__(self, "scores", scores)

    @property
    def size(self) -> int:
        return int(self.scores.size)


@dataclass(frozen=True)
class AnomalyVerdict:
    """One detection outcome, keeping the smoothing draw for audit."""

    score: float
    p_value: float
    epsilon: float
    is_anomalous: bool
    u_draw: float

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")
        if self.is_anomalous != (self.p_value <= self.epsilon):
            raise ValueError("is_anomalous must equal p_value <= epsilon")


def nonconformity_score(model: FittedModel, edge: Edge) -> float:
    """Negated holdout log likelihood: larger means less model-conforming."""
    return -predictive_log_likelihood(model, edge)


def calibration_scores(model: FittedModel, corpus: EdgeCorpus) -> CalibrationScores:
    """Score every calibration edge through the one scalar scoring path."""
    return CalibrationScores(
        np.array([nonconformity_score(model, edge) for edge in corpus.edges])
    )


def _calibration_array(calib) -> np.ndarray:
    scores = np.asarray(getattr(calib, "scores", calib), dtype=float)
    if scores.size == 0:
        raise ValueError("calibration set must not be empty")
    return scores


def conformal_p_value(
    score: float, calib, u: float, orientation: str = "power-corrected"
) -> float:
    """Smoothed p-value of one test score against a calibration set.

    The pooled comparison set is the calibration scores plus the test score
    itself, so the tie count is always at least one. With n calibration
    scores the result is (strict + u * ties) / (n + 1), where strict counts
    pooled scores strictly above the test score for "power-corrected" and
    strictly below it for "paper".
    """
    scores = _calibration_array(calib)
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie strictly between 0 and 1")
    _check_orientation(orientation)
    ties = int(np.count_nonzero(scores == score)) + 1
    if orientation == "paper":
        strict = int(np.count_nonzero(scores < score))
    else:
        strict = int(np.count_nonzero(scores > score))
    return (strict + u * ties) / (scores.size + 1)


def conformal_p_values(
    test_scores, calib, u_draws, orientation: str = "power-corrected"
) -> np.ndarray:
    """Vectorized conformal_p_value over many test scores.

    Counts come from binary search on the sorted calibration scores and feed
    the same arithmetic as the scalar form, so results match it exactly.
    """
    scores = _calibration_array(calib)
    test_scores = np.asarray(test_scores, dtype=float)
    u_draws = np.asarray(u_draws, dtype=float)
    if u_draws.shape != test_scores.shape:
        raise ValueError("u_draws must match test_scores in shape")
    if np.any(u_draws <= 0.0) or np.any(u_draws >= 1.0):
        raise ValueError("u draws must lie strictly between 0 and 1")
    _check_orientation(orientation)
    ordered = np.sort(scores)
    left = np.searchsorted(ordered, test_scores, side="left")
    right = np.searchsorted(ordered, test_scores, side="right")
    ties = (right - left) + 1
    strict = left if orientation == "paper" else scores.size - right
    return (strict + u_draws * ties) / (scores.size + 1)


def full_conformal_p_values(
    scores, u_draws, orientation: str = "power-corrected"
) -> np.ndarray:
    """Smoothed p-value of every score against the whole set it sits in.

    Each entry is compared with all entries including itself, so the tie
    count is at least one and the divisor is the set size.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or scores.size < 2:
        raise ValueError("need at least two scores")
    u_draws = np.asarray(u_draws, dtype=float)
    if u_draws.shape != scores.shape:
        raise ValueError("u_draws must match scores in shape")
    _check_orientation(orientation)
    column = scores[:, None]
    row = scores[None, :]
    ties = (column == row).sum(axis=1)
    if orientation == "paper":
        strict = (row < column).sum(axis=1)
    else:
        strict = (row > column).sum(axis=1)
    return (strict + u_draws * ties) / scores.size


def tie_broken_rank(values, index: int, u_draws) -> int:
    """Ascending rank of values[index] after a shared tie-breaking jitter.

    Distinct values rank directly. Otherwise every value moves by xi times
    its own uniform draw from (-1, 1), where xi is half the smallest gap
    between distinct values (one when all values are equal), which is small
    enough to never reorder distinct values.
    """
    values = np.asarray(values, dtype=float)
    pivot = values[index]
    distinct = np.unique(values)
    if distinct.size == values.size:
        return int(np.count_nonzero(values <= pivot))
    jitter_scale = 1.0 if distinct.size == 1 else float(np.min(np.diff(distinct)) / 2.0)
    moved = values + jitter_scale * np.asarray(u_draws, dtype=float)
    return int(np.count_nonzero(moved <= moved[index]))


def _positive_uniform(rng: np.random.Generator, size=None):
    """Uniform draws from the open interval (0, 1); redraw the measure-zero 0."""
    if size is None:
        u = rng.uniform()
        while u == 0.0:
            u = rng.uniform()
        return u
    u = rng.uniform(size=size)
    while np.any(u == 0.0):
        u[u == 0.0] = rng.uniform(size=int(np.count_nonzero(u == 0.0)))
    return u


def detect(
    model: FittedModel,
    calib,
    edge: Edge,
    epsilon: float,
    seed: int,
    orientation: str = "power-corrected",
) -> AnomalyVerdict:
    """Score one edge, draw the smoothing uniform, and threshold at epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly between 0 and 1")
    _check_orientation(orientation)
    score = nonconformity_score(model, edge)
    u = _positive_uniform(np.random.default_rng(seed))
    p_value = conformal_p_value(score, calib, u, orientation)
    return AnomalyVerdict(
        score=score,
        p_value=p_value,
        epsilon=epsilon,
        is_anomalous=p_value <= epsilon,
        u_draw=u,
    )


def detect_corpus(
    model: FittedModel,
    calib,
    corpus: EdgeCorpus,
    epsilon: float,
    seed: int,
    orientation: str = "power-corrected",
) -> list[AnomalyVerdict]:
    """Detect over a whole corpus with one smoothing draw per edge."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly between 0 and 1")
    _check_orientation(orientation)
    scores = np.array([nonconformity_score(model, edge) for edge in corpus.edges])
    u_draws = _positive_uniform(np.random.default_rng(seed), size=scores.size)
    p_values = conformal_p_values(scores, calib, u_draws, orientation)
    return [
        AnomalyVerdict(
            score=float(score),
            p_value=float(p_value),
            epsilon=epsilon,
            is_anomalous=bool(p_value <= epsilon),
            u_draw=float(u),
        )
        for score, p_value, u in zip(scores, p_values, u_draws)
    ]
