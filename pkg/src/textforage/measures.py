"""Information-theoretic measures over topic distributions.

All logarithms are base 2 and all results are reported in bits.  The
divergence argument order follows the reading-surprise convention:
``kl_divergence(q, p)`` is the surprise of encountering ``q`` when the
reader's expectations were built on ``p``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NumericalDegeneracyError

__all__ = [
    "as_distribution",
    "entropy",
    "kl_divergence",
    "kl_divergence_rows",
    "js_divergence",
    "js_distance",
    "js_distance_matrix",
    "Enclosure",
    "encloses",
    "SurpriseSeries",
    "surprise_series",
]

#: Tolerated deviation of a probability vector's sum from 1.
NORMALIZATION_TOL = 1e-9


def as_distribution(values, tol: float = NORMALIZATION_TOL) -> np.ndarray:
    """Validate and return `values` as a float64 probability vector.

    Raises ValueError if any entry is negative or the sum deviates from
    1 by more than `tol`.
    """
    p = np.asarray(values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("distribution must be a non-empty 1-d vector")
    if np.any(p < 0):
        raise ValueError("distribution has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"distribution sums to {total!r}, not 1")
    return p


def entropy(p) -> float:
    """Shannon entropy of `p` in bits, with 0*log(0) taken as 0.

    Bounded by log2(len(p)); 0 for a point mass.
    """
    p = as_distribution(p)
    nz = p[p > 0]
    return max(float(-(nz * np.log2(nz)).sum()), 0.0)


def _kl_bits(q: np.ndarray, p: np.ndarray) -> float:
    """KL divergence of validated vectors, in bits.

    Terms with q_i = 0 contribute nothing; q_i > 0 against p_i = 0 is an
    infinite divergence and raises rather than clamping, because any
    upstream smoothing should have prevented it.
    """
    support = q > 0
    if np.any(p[support] <= 0):
        raise NumericalDegeneracyError(
            "infinite divergence: q has mass where p has none"
        )
    qs = q[support]
    return float((qs * np.log2(qs / p[support])).sum())


def kl_divergence(q, p) -> float:
    """D_KL(q | p) = sum_i q_i log2(q_i / p_i), in bits.

    Argument order is (new, old): the divergence experienced when `q`
    arrives while `p` was expected.  Non-negative, and 0 iff q == p.
    """
    q = as_distribution(q)
    p = as_distribution(p)
    if q.shape != p.shape:
        raise ValueError("distributions differ in length")
    return max(_kl_bits(q, p), 0.0)


def kl_divergence_rows(q_rows: np.ndarray, p_rows: np.ndarray) -> np.ndarray:
    """Row-wise KL divergence between two stacks of distributions.

    `p_rows` may be a single vector, broadcast against every row of
    `q_rows`.  Rows are assumed already validated; zero handling matches
    :func:`kl_divergence`.
    """
    q = np.atleast_2d(np.asarray(q_rows, dtype=np.float64))
    p = np.atleast_2d(np.asarray(p_rows, dtype=np.float64))
    p = np.broadcast_to(p, q.shape)
    support = q > 0
    if np.any((p <= 0) & support):
        raise NumericalDegeneracyError(
            "infinite divergence: q has mass where p has none"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(support, q * np.log2(np.where(support, q, 1.0) / p), 0.0)
    return np.maximum(terms.sum(axis=1), 0.0)


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence of `p` and `q` in bits.

    The symmetrized, smoothed KL through the midpoint M = (p + q) / 2;
    always in [0, 1] bits.
    """
    p = as_distribution(p)
    q = as_distribution(q)
    if p.shape != q.shape:
        raise ValueError("distributions differ in length")
    m = 0.5 * (p + q)
    return max(0.5 * _kl_bits(p, m) + 0.5 * _kl_bits(q, m), 0.0)


def js_distance(p, q) -> float:
    """Jensen-Shannon distance: sqrt of the JS divergence.

    A true metric on distributions (symmetric, zero iff equal, and
    satisfying the triangle inequality), bounded by 1.
    """
    return float(np.sqrt(js_divergence(p, q)))


def _js_divergence_one_to_many(p: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    """JS divergence of one distribution against a stack of them.

    Uses the two-KL form so identical rows give exactly 0 (the entropy
    identity cancels imperfectly in float and the square root inflates
    that noise).
    """
    m = 0.5 * (q_rows + p)
    with np.errstate(divide="ignore", invalid="ignore"):
        p_terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0) / m), 0.0)
        q_terms = np.where(
            q_rows > 0, q_rows * np.log2(np.where(q_rows > 0, q_rows, 1.0) / m), 0.0
        )
    return np.maximum(0.5 * p_terms.sum(axis=1) + 0.5 * q_terms.sum(axis=1), 0.0)


def js_distance_matrix(rows) -> np.ndarray:
    """Pairwise JS distance matrix for a stack of distributions."""
    theta = np.asarray(rows, dtype=np.float64)
    n = theta.shape[0]
    out = np.zeros((n, n))
    for i in range(n - 1):
        div = _js_divergence_one_to_many(theta[i], theta[i + 1 :])
        out[i, i + 1 :] = out[i + 1 :, i] = np.sqrt(div)
    return out


class Enclosure(enum.Enum):
    """Outcome of the asymmetry comparison between two distributions."""

    P_ENCLOSES_Q = "p_encloses_q"
    Q_ENCLOSES_P = "q_encloses_p"
    TIE = "tie"


def encloses(p, q, tol: float = 1e-12) -> Enclosure:
    """Which of `p`, `q` encloses the other.

    `p` encloses `q` when KL(q | p) < KL(p | q): a script optimized for
    `p` fails less badly on `q` than the reverse, so `p` is the more
    comprehensive distribution.  Differences within `tol` are a tie.
    """
    forward = kl_divergence(q, p)
    backward = kl_divergence(p, q)
    if abs(forward - backward) <= tol:
        return Enclosure.TIE
    return Enclosure.P_ENCLOSES_Q if forward < backward else Enclosure.Q_ENCLOSES_P


class _CompensatedMean:
    """Running vector mean with Kahan-compensated accumulation, so long
    text-to-past series do not drift."""

    def __init__(self, dim: int):
        self._sum = np.zeros(dim)
        self._comp = np.zeros(dim)
        self._count = 0

    def add(self, vec: np.ndarray) -> None:
        y = vec - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t
        self._count += 1

    def mean(self) -> np.ndarray:
        m = self._sum / self._count
        total = m.sum()
        if total <= 0:
            raise ValueError("degenerate past mean")
        return m / total


@dataclass(frozen=True)
class SurpriseSeries:
    """An ordered sequence of per-step surprises, in bits.

    `values[j]` is the surprise of the item at position j+1 in the
    reading order; a series over n items therefore has n-1 values.
    `item_ids`, when present, labels all n items.
    """

    mode: str
    values: np.ndarray
    window: int | None = None
    item_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if np.any(values < 0):
            raise ValueError("surprise values must be non-negative")
        if self.item_ids is not None and len(self.item_ids) != len(values) + 1:
            raise ValueError("item_ids must label every item (len(values) + 1)")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def positions(self) -> np.ndarray:
        """Positions of the arriving items (1-based)."""
        return np.arange(1, len(self.values) + 1)

    def mode_label(self) -> str:
        if self.mode == "t2n":
            return f"t2n{self.window}"
        return self.mode

    def to_csv(self, path, metadata: Sequence[str] = ()) -> None:
        """Write the series as CSV with columns position,item_id,mode,bits.

        `metadata` lines are emitted as leading '#' comments.
        """
        with open(path, "w", newline="") as fh:
            for line in metadata:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(["position", "item_id", "mode", "bits"])
            for pos, value in zip(self.positions, self.values):
                item = self.item_ids[pos] if self.item_ids else str(pos)
                writer.writerow([pos, item, self.mode_label(), repr(float(value))])


def surprise_series(
    dists: Iterable,
    mode: str = "t2t",
    window: int | None = None,
    item_ids: Sequence[str] | None = None,
) -> SurpriseSeries:
    """Per-step KL surprise along an ordered sequence of distributions.

    Modes:

    * ``t2t`` -- local surprise, KL(theta_i | theta_{i-1});
    * ``t2p`` -- global surprise, KL(theta_i | mean of theta_0..theta_{i-1});
    * ``t2n`` -- windowed surprise against the mean of the previous
      min(window, i) distributions.

    Past means are arithmetic means of the raw distributions,
    renormalized to absorb accumulation error.  At position 1 the past
    consists of a single item, so t2p and t2n agree with t2t there.
    """
    rows = [as_distribution(d) for d in dists]
    if len(rows) < 2:
        raise ValueError("need at least 2 distributions")
    dim = rows[0].size
    if any(r.size != dim for r in rows):
        raise ValueError("distributions differ in length")
    mode = mode.lower()
    if mode == "t2n":
        if window is None or window < 1:
            raise ValueError("t2n mode requires a window >= 1")
    elif window is not None:
        raise ValueError(f"window is only meaningful for t2n, not {mode!r}")

    values = np.empty(len(rows) - 1)
    if mode == "t2t":
        for i in range(1, len(rows)):
            values[i - 1] = _kl_bits(rows[i], rows[i - 1])
    elif mode == "t2p":
        past = _CompensatedMean(dim)
        past.add(rows[0])
        for i in range(1, len(rows)):
            values[i - 1] = _kl_bits(rows[i], past.mean())
            past.add(rows[i])
    elif mode == "t2n":
        stacked = np.vstack(rows)
        for i in range(1, len(rows)):
            lo = max(0, i - window)
            m = stacked[lo:i].mean(axis=0)
            values[i - 1] = _kl_bits(rows[i], m / m.sum())
    else:
        raise ValueError(f"unknown surprise mode {mode!r}")

    values = np.maximum(values, 0.0)
    ids = tuple(item_ids) if item_ids is not None else None
    return SurpriseSeries(mode=mode, values=values, window=window, item_ids=ids)
