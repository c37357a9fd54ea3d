"""Gaussian segmentation of surprise series with AIC model selection.

A surprise series is partitioned into contiguous epochs, each modeled
as Gaussian with its own mean and variance (both maximum-likelihood
estimates).  An n-epoch model has 3n - 1 parameters: n - 1 interior
boundaries plus a mean and variance per epoch.  Boundaries are found by
exact dynamic programming over all feasible placements; the number of
epochs is selected by the Akaike Information Criterion.

Two estimator conventions are available.  ``mle`` (the default)
divides by the segment length m and weights each segment's
log-likelihood by m/2.  ``legacy`` divides by m - 1 and weights by
(m - 1)/2, matching an older published form of these equations; it is
kept for comparison runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "SegmentFit",
    "segment_loglik",
    "EpochModel",
    "fit_epochs",
    "ModelScore",
    "select_model",
    "param_count",
    "epoch_report",
]

DEFAULT_MIN_LEN = 10
DEFAULT_VAR_FLOOR = 1e-9
VARIANCE_MODES = ("mle", "legacy")

_LOG_2PI = math.log(2.0 * math.pi)


def param_count(n_epochs: int) -> int:
    """3n - 1: n - 1 boundaries plus per-epoch mean and variance."""
    if n_epochs < 1:
        raise ValueError("n_epochs must be >= 1")
    return 3 * n_epochs - 1


def _check_boundaries(boundaries: Sequence[int], length: int) -> tuple[int, ...]:
    bounds = tuple(int(b) for b in boundaries)
    if len(bounds) < 2 or bounds[0] != 0 or bounds[-1] != length:
        raise ValueError(
            f"boundaries must run from 0 to {length}, got {bounds!r}"
        )
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise ValueError(f"boundaries must be strictly increasing: {bounds!r}")
    if any(b2 - b1 < 2 for b1, b2 in zip(bounds, bounds[1:])):
        raise ValueError("every segment needs length >= 2 for a variance")
    return bounds


@dataclass(frozen=True)
class SegmentFit:
    """Per-segment Gaussian fits for a fixed set of boundaries."""

    boundaries: tuple[int, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]
    log_likelihood: float  # nats
    degenerate: tuple[bool, ...]  # variance hit the floor

    @property
    def any_degenerate(self) -> bool:
        return any(self.degenerate)


def segment_loglik(
    values: Sequence[float],
    boundaries: Sequence[int],
    variance_mode: str = "mle",
    var_floor: float = DEFAULT_VAR_FLOOR,
) -> SegmentFit:
    """Gaussian log-likelihood of `values` under fixed segment boundaries.

    Boundaries are half-open cut points 0 = e_1 < ... < e_{n+1} = len;
    each segment needs at least 2 points.  Per segment the fitted
    log-likelihood is -(m/2)(1 + ln(2 pi sigma^2)) with the MLE
    variance (denominator m); totals are sums over segments, in nats.
    A zero-variance segment has its variance floored at `var_floor` and
    is flagged as degenerate rather than rejected.
    """
    if variance_mode not in VARIANCE_MODES:
        raise ValueError(f"variance_mode must be one of {VARIANCE_MODES}")
    x = np.asarray(values, dtype=np.float64)
    bounds = _check_boundaries(boundaries, x.size)
    means, variances, flags = [], [], []
    total = 0.0
    for lo, hi in zip(bounds, bounds[1:]):
        seg = x[lo:hi]
        m = hi - lo
        denom = m if variance_mode == "mle" else m - 1
        weight = m / 2.0 if variance_mode == "mle" else (m - 1) / 2.0
        mu = float(seg.sum() / denom)
        var = float(((seg - mu) ** 2).sum() / denom)
        degenerate = var < var_floor
        var = max(var, var_floor)
        total += -weight * (1.0 + _LOG_2PI + math.log(var))
        means.append(mu)
        variances.append(var)
        flags.append(degenerate)
    return SegmentFit(
        boundaries=bounds,
        means=tuple(means),
        variances=tuple(variances),
        log_likelihood=total,
        degenerate=tuple(flags),
    )


@dataclass(frozen=True)
class EpochModel:
    """A maximum-likelihood segmentation into `n_epochs` epochs."""

    n_epochs: int
    boundaries: tuple[int, ...]  # e_1 = 0 .. e_{n+1} = series length
    means: tuple[float, ...]  # bits
    variances: tuple[float, ...]  # bits^2
    log_likelihood: float  # nats
    degenerate: tuple[bool, ...]
    variance_mode: str

    @property
    def param_count(self) -> int:
        return param_count(self.n_epochs)

    @property
    def interior_boundaries(self) -> tuple[int, ...]:
        return self.boundaries[1:-1]


def _cost_matrix(
    x: np.ndarray, min_len: int, variance_mode: str, var_floor: float
) -> np.ndarray:
    """cost[i, j] = max log-likelihood of segment x[i:j] (j - i >= min_len).

    The series is centered on its global mean before the prefix sums:
    segment variances are shift-invariant and the segmentation is
    location-equivariant, so this only improves conditioning.
    """
    n = x.size
    centered = x - x.mean()
    s = np.concatenate([[0.0], np.cumsum(centered)])
    q = np.concatenate([[0.0], np.cumsum(centered**2)])
    cost = np.full((n + 1, n + 1), -np.inf)
    for i in range(n + 1 - min_len):
        j = np.arange(i + min_len, n + 1)
        m = (j - i).astype(np.float64)
        seg_sum = s[j] - s[i]
        seg_sq = q[j] - q[i]
        if variance_mode == "mle":
            denom, weight = m, m / 2.0
        else:
            denom, weight = m - 1.0, (m - 1.0) / 2.0
        mu = seg_sum / denom
        var = (seg_sq - 2.0 * mu * seg_sum + m * mu**2) / denom
        var = np.maximum(var, var_floor)
        cost[i, i + min_len :] = -weight * (1.0 + _LOG_2PI + np.log(var))
    return cost


def fit_epochs(
    values: Sequence[float],
    n_epochs: int,
    min_len: int = DEFAULT_MIN_LEN,
    variance_mode: str = "mle",
    var_floor: float = DEFAULT_VAR_FLOOR,
) -> EpochModel:
    """Maximum-likelihood boundaries for exactly `n_epochs` epochs.

    Exact dynamic programming over all feasible boundary placements
    (every segment at least `min_len` >= 2 positions); among equally
    likely placements the earliest boundaries win.
    """
    if variance_mode not in VARIANCE_MODES:
        raise ValueError(f"variance_mode must be one of {VARIANCE_MODES}")
    x = np.asarray(values, dtype=np.float64)
    if n_epochs < 1:
        raise ValueError("n_epochs must be >= 1")
    min_len = max(int(min_len), 2)
    if x.size < n_epochs * min_len:
        raise ValueError(
            f"series of length {x.size} cannot hold {n_epochs} epochs "
            f"of >= {min_len} positions"
        )
    cost = _cost_matrix(x, min_len, variance_mode, var_floor)
    n = x.size

    # dp[e][j]: best log-likelihood covering x[:j] with e epochs
    dp = np.full((n_epochs + 1, n + 1), -np.inf)
    back = np.zeros((n_epochs + 1, n + 1), dtype=np.int64)
    dp[1] = cost[0]
    for e in range(2, n_epochs + 1):
        lo = (e - 1) * min_len
        for j in range(e * min_len, n + 1):
            candidates = dp[e - 1, lo : j - min_len + 1] + cost[lo : j - min_len + 1, j]
            best = int(np.argmax(candidates))  # first max -> earliest boundary
            dp[e, j] = candidates[best]
            back[e, j] = lo + best

    bounds = [n]
    j = n
    for e in range(n_epochs, 1, -1):
        j = int(back[e, j])
        bounds.append(j)
    bounds.append(0)
    bounds.reverse()

    fit = segment_loglik(x, bounds, variance_mode=variance_mode, var_floor=var_floor)
    return EpochModel(
        n_epochs=n_epochs,
        boundaries=fit.boundaries,
        means=fit.means,
        variances=fit.variances,
        log_likelihood=fit.log_likelihood,
        degenerate=fit.degenerate,
        variance_mode=variance_mode,
    )


@dataclass(frozen=True)
class ModelScore:
    """An epoch model with its information-criterion standing."""

    model: EpochModel
    aic: float
    relative_likelihood: float  # exp((AIC_min - AIC) / 2); 1 for the best
    delta_loglik: float  # against the single-epoch model

    @property
    def n_epochs(self) -> int:
        return self.model.n_epochs


def select_model(
    values: Sequence[float],
    max_epochs: int,
    min_len: int = DEFAULT_MIN_LEN,
    variance_mode: str = "mle",
    var_floor: float = DEFAULT_VAR_FLOOR,
) -> list[ModelScore]:
    """Fit 1..max_epochs epochs and score each by AIC.

    AIC = 2 * (3n - 1) - 2 * logL; the model with minimal AIC has
    relative likelihood 1 and the others exp((AIC_min - AIC) / 2).
    Returns scores ordered by epoch count.
    """
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    models = [
        fit_epochs(values, n, min_len=min_len, variance_mode=variance_mode, var_floor=var_floor)
        for n in range(1, max_epochs + 1)
    ]
    aics = [2.0 * m.param_count - 2.0 * m.log_likelihood for m in models]
    best = min(aics)
    base_ll = models[0].log_likelihood
    return [
        ModelScore(
            model=m,
            aic=aic,
            relative_likelihood=math.exp((best - aic) / 2.0),
            delta_loglik=m.log_likelihood - base_ll,
        )
        for m, aic in zip(models, aics)
    ]


def best_model(scores: Sequence[ModelScore]) -> ModelScore:
    return min(scores, key=lambda s: s.aic)


def epoch_report(
    scores: Sequence[ModelScore],
    position_labels: Sequence[str] | None = None,
) -> dict:
    """JSON-ready AIC table with per-epoch parameters.

    `position_labels` (e.g. reading dates), when given, must label every
    series position; boundary positions are then also reported as
    labels.
    """
    table = []
    for score in scores:
        m = score.model
        entry = {
            "n_epochs": m.n_epochs,
            "breaks": list(m.interior_boundaries),
            "param_count": m.param_count,
            "log_likelihood_nats": m.log_likelihood,
            "aic": score.aic,
            "relative_likelihood": score.relative_likelihood,
            "delta_loglik_vs_null": score.delta_loglik,
            "epochs": [
                {
                    "start": int(lo),
                    "end": int(hi),
                    "mean_bits": mu,
                    "variance_bits2": var,
                    "degenerate": flag,
                }
                for lo, hi, mu, var, flag in zip(
                    m.boundaries, m.boundaries[1:], m.means, m.variances, m.degenerate
                )
            ],
        }
        if position_labels is not None:
            entry["break_labels"] = [str(position_labels[b]) for b in m.interior_boundaries]
            for seg in entry["epochs"]:
                seg["start_label"] = str(position_labels[seg["start"]])
        table.append(entry)
    chosen = best_model(scores)
    return {
        "variance_mode": chosen.model.variance_mode,
        "best_n_epochs": chosen.model.n_epochs,
        "models": table,
    }
