"""Ranking metrics, ROC curves, p-value diagnostics, and a false positive
rate simulation harness for the full detection pipeline."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .adnd import HyperParams, TruncationLevels, fit, sample_edges
from .conformal import calibration_scores, conformal_p_values, nonconformity_score, _positive_uniform
from .graph_core import EdgeCorpus, format_float, split_train_calib

__all__ = [
    "LabeledScores",
    "CurvePoint",
    "FprPoint",
    "precision_recall_at_k",
    "roc_points",
    "auc",
    "ks_uniformity",
    "fpr_simulation",
    "write_curve_csv",
    "write_fpr_csv",
]


@dataclass(frozen=True)
class LabeledScores:
    """Scores with ground truth, where lower score means more anomalous."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float)
        labels = np.array(self.labels, dtype=bool)
        if scores.ndim != 1 or scores.shape != labels.shape:
            raise ValueError("scores and labels must be equal-length vectors")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        scores.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.scores.size)

    @property
    def num_anomalies(self) -> int:
        return int(self.labels.sum())


@dataclass(frozen=True)
class CurvePoint:
    """One (x, y) point of a curve over the unit square."""

    x: float
    y: float

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError("curve points must lie in the unit square")


@dataclass(frozen=True)
class FprPoint:
    """Empirical false positive rate at one threshold epsilon."""

    epsilon: float
    fpr: float
    stderr: float
    n_test: int


def precision_recall_at_k(labeled: LabeledScores):
    """Precision and recall of the k lowest scores, for every k.

    Scores sort ascending with a stable sort, so tied scores keep input
    order. Returns [(k, precision, recall)] for k = 1..n. Requires at least
    one ground-truth anomaly, because recall divides by the anomaly count.
    """
    total_anomalies = labeled.num_anomalies
    if total_anomalies == 0:
        raise ValueError("no ground-truth anomalies, recall is undefined")
    order = np.argsort(labeled.scores, kind="stable")
    hits = np.cumsum(labeled.labels[order])
    ks = np.arange(1, labeled.n + 1)
    return [
        (int(k), float(h / k), float(h / total_anomalies))
        for k, h in zip(ks, hits)
    ]


def roc_points(labeled: LabeledScores) -> list[CurvePoint]:
    """ROC curve of the rule "flag when score <= threshold".

    The threshold sweeps the distinct score values in ascending order; an
    anchor at (0, 0) is prepended and the final point is always (1, 1).
    Needs both classes present.
    """
    positives = labeled.num_anomalies
    negatives = labeled.n - positives
    if positives == 0 or negatives == 0:
        raise ValueError("roc needs at least one anomaly and one normal entry")
    order = np.argsort(labeled.scores, kind="stable")
    sorted_scores = labeled.scores[order]
    sorted_labels = labeled.labels[order]
    cum_pos = np.cumsum(sorted_labels)
    cum_neg = np.cumsum(~sorted_labels)
    # Last index of each run of equal scores marks one threshold.
    boundaries = np.append(np.nonzero(np.diff(sorted_scores))[0], labeled.n - 1)
    points = [CurvePoint(0.0, 0.0)]
    for idx in boundaries:
        points.append(
            CurvePoint(float(cum_neg[idx] / negatives), float(cum_pos[idx] / positives))
        )
    return points


def auc(points) -> float:
    """Trapezoid area under a curve sorted by x.

    With ROC input this equals the probability that a random anomaly scores
    below a random normal entry, counting ties as one half.
    """
    xs = np.array([p.x for p in points], dtype=float)
    ys = np.array([p.y for p in points], dtype=float)
    if xs.size < 2:
        raise ValueError("need at least two curve points")
    if np.any(np.diff(xs) < 0.0):
        raise ValueError("curve points must be sorted by x")
    return float(np.sum(np.diff(xs) * (ys[1:] + ys[:-1]) / 2.0))


def ks_uniformity(p_values) -> float:
    """Largest deviation between sorted p-values and the uniform grid.

    Computes max_i |p_(i) - i/n| with p_(i) the ascending order statistics.
    Uniform samples keep this near 1/sqrt(n); a constant vector at 1.0
    scores 1 - 1/n.
    """
    values = np.sort(np.asarray(p_values, dtype=float))
    if values.size == 0:
        raise ValueError("need at least one p-value")
    grid = np.arange(1, values.size + 1) / values.size
    return float(np.max(np.abs(values - grid)))


def fpr_simulation(
    hyper: HyperParams,
    trunc: TruncationLevels,
    num_nodes: int,
    n_train: int,
    n_calib: int,
    n_test: int,
    epsilons,
    trials: int,
    seed: int,
    orientation: str = "power-corrected",
    *,
    max_sweeps: int = 200,
    rel_tol: float = 1e-5,
) -> list[FprPoint]:
    """Monte Carlo false positive rate of the whole pipeline on null data.

    Each trial draws one exchangeable corpus of n_train + n_calib + n_test
    edges from a single parameter draw, splits the leading block into train
    and calibration, fits, and computes one smoothed p-value per held-out
    test edge. Every test edge is null by construction, so the fraction
    flagged at threshold epsilon estimates the false positive rate, which
    exchangeability bounds by epsilon.

    Trials run sequentially from per-trial seeds spawned off `seed`, and
    results are aggregated in trial order, so a rerun with the same seed
    reproduces the same numbers exactly.
    """
    epsilons = [float(e) for e in epsilons]
    if not epsilons:
        raise ValueError("need at least one epsilon")
    if any(not 0.0 < e < 1.0 for e in epsilons):
        raise ValueError("epsilon must lie strictly between 0 and 1")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if n_train < 1 or n_calib < 1 or n_test < 1:
        raise ValueError("n_train, n_calib, and n_test must be positive")

    flagged = {e: 0 for e in epsilons}
    total = 0
    n_pool = n_train + n_calib
    for trial_seq in np.random.SeedSequence(seed).spawn(trials):
        sample_seed, split_seed, fit_seed, u_seed = trial_seq.spawn(4)
        corpus = sample_edges(
            hyper, trunc, num_nodes, n_pool + n_test, sample_seed
        )
        pool = EdgeCorpus(corpus.edges[:n_pool], corpus.vocab)
        test = EdgeCorpus(corpus.edges[n_pool:], corpus.vocab)
        train, calib = split_train_calib(pool, n_calib / n_pool, split_seed)
        model = fit(
            train, hyper, trunc, max_sweeps=max_sweeps, rel_tol=rel_tol, seed=fit_seed
        )
        calib_set = calibration_scores(model, calib)
        test_scores = np.array(
            [nonconformity_score(model, edge) for edge in test.edges]
        )
        u_draws = _positive_uniform(
            np.random.default_rng(u_seed), size=test_scores.size
        )
        p_values = conformal_p_values(test_scores, calib_set, u_draws, orientation)
        for e in epsilons:
            flagged[e] += int(np.count_nonzero(p_values <= e))
        total += test_scores.size

    points = []
    for e in epsilons:
        rate = flagged[e] / total
        stderr = float(np.sqrt(rate * (1.0 - rate) / total))
        points.append(FprPoint(epsilon=e, fpr=rate, stderr=stderr, n_test=total))
    return points


def write_curve_csv(path, points, curve_name: str) -> None:
    """Write curve points as x,y rows under a `# curve_name` comment line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {curve_name}\n")
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for point in points:
            writer.writerow([format_float(point.x), format_float(point.y)])


def write_fpr_csv(path, points) -> None:
    """Write FprPoint rows with full-precision floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", "empirical_fpr", "stderr", "n_test"])
        for point in points:
            writer.writerow(
                [
                    format_float(point.epsilon),
                    format_float(point.fpr),
                    format_float(point.stderr),
                    point.n_test,
                ]
            )
