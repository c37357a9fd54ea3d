"""Publication-constrained permutation nulls and path baselines.

The null model keeps the original reading dates fixed and re-samples
the reading list without replacement, each slot drawing uniformly among
the not-yet-used items already published by that slot's date.  Slots
are filled in chronological order, so the eligible pool only ever
grows; the sampler therefore terminates exactly when a feasible
assignment exists at all.  (Sequential filling is uniform over feasible
orders in the unconstrained case; with active constraints it defines
the operative null rather than the uniform-over-feasible-orders null.)

Also here: empirical one-sided p-values with add-one smoothing,
cumulative surprise relative to the per-position null mean, the greedy
nearest-neighbor reading path, and log-binned rank distributions of
reading choices.
"""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, as_earliest, as_latest
from .measures import kl_divergence_rows, _CompensatedMean
from .seeds import derive_seed, rng_from

__all__ = [
    "ReadingOrder",
    "constrained_permutation",
    "NullEnsemble",
    "NullComparison",
    "null_ensemble",
    "greedy_shortest_path",
    "step_ranks",
    "RankDistribution",
    "rank_distribution",
]


@dataclass(frozen=True)
class ReadingOrder:
    """Items in reading order with their slot (reading) and publication dates.

    Feasible iff every slot's item was published on or before the slot
    date; items published exactly on the slot date are eligible.
    Publication dates compare by their earliest consistent day and slot
    dates by their latest, so partial dates never manufacture
    violations.
    """

    item_ids: tuple[str, ...]
    slot_dates: tuple[datetime.date, ...]
    pub_dates: tuple[datetime.date, ...]

    def __post_init__(self):
        n = len(self.item_ids)
        if len(self.slot_dates) != n or len(self.pub_dates) != n:
            raise ValueError("item_ids, slot_dates, pub_dates differ in length")
        if len(set(self.item_ids)) != n:
            raise ValueError("duplicate item ids")
        object.__setattr__(
            self, "slot_dates", tuple(as_latest(d) for d in self.slot_dates)
        )
        object.__setattr__(
            self, "pub_dates", tuple(as_earliest(d) for d in self.pub_dates)
        )

    def __len__(self) -> int:
        return len(self.item_ids)

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "ReadingOrder":
        docs = corpus.in_reading_order()
        missing = [d.spec.id for d in docs if d.spec.pub_date is None]
        if missing:
            raise ValueError(f"documents without pub_date: {', '.join(missing[:5])}")
        missing = [d.spec.id for d in docs if d.spec.read_date is None]
        if missing:
            raise ValueError(f"documents without read_date: {', '.join(missing[:5])}")
        return cls(
            item_ids=tuple(d.spec.id for d in docs),
            slot_dates=tuple(d.spec.read_date for d in docs),
            pub_dates=tuple(d.spec.pub_date for d in docs),
        )

    def violations(self) -> list[int]:
        """Slots whose own item is published after the slot date."""
        return [
            i
            for i in range(len(self))
            if self.pub_dates[i] > self.slot_dates[i]
        ]


def constrained_permutation(order: ReadingOrder, seed_or_rng) -> np.ndarray:
    """One re-sampled reading order respecting the publication constraint.

    Returns item positions (indices into the original order): entry s is
    the item read at slot s.  Slots are filled chronologically, each
    receiving a uniform draw among the remaining items published by the
    slot date.  Reproducible from the seed.
    """
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else rng_from(seed_or_rng)
    n = len(order)
    slot_seq = sorted(range(n), key=lambda s: (order.slot_dates[s], s))
    items_by_pub = sorted(range(n), key=lambda i: (order.pub_dates[i], i))

    perm = np.empty(n, dtype=np.int64)
    pool = np.empty(n, dtype=np.int64)
    pool_size = 0
    next_item = 0
    for slot in slot_seq:
        slot_date = order.slot_dates[slot]
        while next_item < n and order.pub_dates[items_by_pub[next_item]] <= slot_date:
            pool[pool_size] = items_by_pub[next_item]
            pool_size += 1
            next_item += 1
        if pool_size == 0:
            raise ValueError(
                f"infeasible order: slot {slot} ({order.item_ids[slot]}, "
                f"{slot_date.isoformat()}) has no eligible remaining item"
            )
        j = int(rng.integers(pool_size))
        perm[slot] = pool[j]
        pool[j] = pool[pool_size - 1]
        pool_size -= 1
    return perm


# ---------------------------------------------------------------------------
# Surprise helpers (validated once per call, vectorized per permutation)


def _t2t_values(theta: np.ndarray) -> np.ndarray:
    return kl_divergence_rows(theta[1:], theta[:-1])


def _t2p_values(theta: np.ndarray) -> np.ndarray:
    # plain cumsum (not the compensated accumulator used by
    # measures.surprise_series): across a whole permutation ensemble the
    # vectorized form is what makes 1000 draws affordable, and the
    # renormalization below absorbs the accumulated rounding
    cums = np.cumsum(theta, axis=0)
    counts = np.arange(1, theta.shape[0], dtype=np.float64)[:, None]
    past_means = cums[:-1] / counts
    past_means = past_means / past_means.sum(axis=1, keepdims=True)
    return kl_divergence_rows(theta[1:], past_means)

_SERIES_FN = {"t2t": _t2t_values, "t2p": _t2p_values}


@dataclass(frozen=True)
class NullEnsemble:
    """Permutations plus their surprise statistics."""

    permutations: np.ndarray  # (n_permutations, n_items), item index per slot
    mean_by_mode: dict[str, np.ndarray]  # per-permutation mean surprise
    null_series_by_mode: dict[str, np.ndarray]  # per-position ensemble mean
    master_seed: int

    @property
    def n_permutations(self) -> int:
        return int(self.permutations.shape[0])


@dataclass(frozen=True)
class NullComparison:
    """An actual reading order measured against its null ensemble."""

    ensemble: NullEnsemble
    actual_mean: dict[str, float]
    actual_series: dict[str, np.ndarray]
    p_value: dict[str, float]
    cumulative_relative: dict[str, np.ndarray]
    null_ci: dict[str, tuple[float, float]]  # 95% band of per-permutation means

    def summary_payload(self) -> dict:
        out = {}
        for mode in self.actual_mean:
            means = self.ensemble.mean_by_mode[mode]
            out[mode] = {
                "actual_mean_bits": self.actual_mean[mode],
                "null_mean_bits": float(means.mean()),
                "null_ci95_bits": list(self.null_ci[mode]),
                "p_value": self.p_value[mode],
                "n_permutations": self.ensemble.n_permutations,
                "cumulative_relative_final_bits": float(
                    self.cumulative_relative[mode][-1]
                ),
            }
        return out


def null_ensemble(
    order: ReadingOrder,
    dists: np.ndarray,
    n: int,
    seed: int,
    modes: Sequence[str] = ("t2t", "t2p"),
) -> NullComparison:
    """Generate `n` constrained permutations and compare the actual order.

    `dists` are the topic distributions aligned with `order` (row i is
    the item read at slot i).  The one-sided p-value asks how often a
    null permutation's mean surprise is at or below the actual mean,
    with add-one smoothing: p = (1 + #{null <= actual}) / (n + 1), so a
    p-value of exactly 0 is never reported.  cumulative_relative is the
    running sum of (actual - null mean) per position.
    """
    if n < 1:
        raise ValueError("need at least one permutation")
    for mode in modes:
        if mode not in _SERIES_FN:
            raise ValueError(f"unknown mode {mode!r}")
    theta = np.asarray(dists, dtype=np.float64)
    if theta.shape[0] != len(order):
        raise ValueError("dists and order are not aligned")

    actual_series = {m: _SERIES_FN[m](theta) for m in modes}
    permutations = np.empty((n, len(order)), dtype=np.int64)
    per_perm_means = {m: np.empty(n) for m in modes}
    series_sums = {m: np.zeros(len(order) - 1) for m in modes}
    for draw in range(n):
        perm = constrained_permutation(order, rng_from(derive_seed(seed, draw, "null")))
        permutations[draw] = perm
        theta_perm = theta[perm]
        for m in modes:
            values = _SERIES_FN[m](theta_perm)
            per_perm_means[m][draw] = values.mean()
            series_sums[m] += values

    null_series = {m: series_sums[m] / n for m in modes}
    ensemble = NullEnsemble(
        permutations=permutations,
        mean_by_mode=per_perm_means,
        null_series_by_mode=null_series,
        master_seed=seed,
    )
    p_values = {
        m: float((1 + np.sum(per_perm_means[m] <= actual_series[m].mean())) / (n + 1))
        for m in modes
    }
    cumulative = {
        m: np.cumsum(actual_series[m] - null_series[m]) for m in modes
    }
    ci = {
        m: (
            float(np.percentile(per_perm_means[m], 2.5)),
            float(np.percentile(per_perm_means[m], 97.5)),
        )
        for m in modes
    }
    return NullComparison(
        ensemble=ensemble,
        actual_mean={m: float(actual_series[m].mean()) for m in modes},
        actual_series=actual_series,
        p_value=p_values,
        cumulative_relative=cumulative,
        null_ci=ci,
    )


def ensemble_means_to_csv(comparison: NullComparison, path, metadata: Sequence[str] = ()) -> None:
    modes = sorted(comparison.actual_mean)
    means = comparison.ensemble.mean_by_mode
    with open(path, "w", newline="") as fh:
        for line in metadata:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["permutation"] + [f"{m}_mean_bits" for m in modes])
        for i in range(comparison.ensemble.n_permutations):
            writer.writerow([i] + [repr(float(means[m][i])) for m in modes])


def cumulative_relative_to_csv(
    comparison: NullComparison,
    mode: str,
    path,
    item_ids: Sequence[str] | None = None,
    metadata: Sequence[str] = (),
) -> None:
    actual = comparison.actual_series[mode]
    null_mean = comparison.ensemble.null_series_by_mode[mode]
    cumulative = comparison.cumulative_relative[mode]
    with open(path, "w", newline="") as fh:
        for line in metadata:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["position", "item_id", "actual_bits", "null_mean_bits", "cumulative_relative_bits"]
        )
        for pos in range(1, len(actual) + 1):
            item = item_ids[pos] if item_ids else str(pos)
            writer.writerow(
                [
                    pos,
                    item,
                    repr(float(actual[pos - 1])),
                    repr(float(null_mean[pos - 1])),
                    repr(float(cumulative[pos - 1])),
                ]
            )


# ---------------------------------------------------------------------------
# Greedy baseline and rank statistics


def greedy_shortest_path(
    dists: np.ndarray, start: int = 0, objective: str = "t2t"
) -> np.ndarray:
    """Nearest-neighbor traversal of the topic distributions.

    Starting from `start`, each step visits the unvisited item with the
    smallest incremental surprise: KL from the current item (t2t) or
    from the running mean of everything visited so far (t2p).  Ties
    break to the lowest item index.  An approximation of the
    surprise-minimizing order, not an exact one.
    """
    if objective not in ("t2t", "t2p"):
        raise ValueError(f"objective must be 't2t' or 't2p', got {objective!r}")
    theta = np.asarray(dists, dtype=np.float64)
    n = theta.shape[0]
    if not 0 <= start < n:
        raise ValueError(f"start {start} out of range")
    remaining = [i for i in range(n) if i != start]
    path = [start]
    past = _CompensatedMean(theta.shape[1])
    past.add(theta[start])
    current = start
    while remaining:
        reference = theta[current] if objective == "t2t" else past.mean()
        costs = kl_divergence_rows(theta[remaining], reference)
        pick = int(np.argmin(costs))  # first minimum = lowest id, remaining is sorted
        current = remaining.pop(pick)
        path.append(current)
        past.add(theta[current])
    return np.asarray(path, dtype=np.int64)


def step_ranks(dists: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Rank of each reading choice among the remaining candidates.

    At step i the candidates are the items not yet read; rank 1 means
    the chosen item was the nearest by text-to-text KL from the current
    item.  Ranks use competition ranking (1 + number of strictly nearer
    candidates).
    """
    theta = np.asarray(dists, dtype=np.float64)
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(theta.shape[0])):
        raise ValueError("order must visit every item exactly once")
    n = len(order)
    ranks = np.empty(n - 1, dtype=np.int64)
    for i in range(n - 1):
        current = order[i]
        candidates = order[i + 1 :]
        costs = kl_divergence_rows(theta[candidates], theta[current])
        ranks[i] = 1 + int(np.sum(costs < costs[0]))
    return ranks


def _log_bin_index(rank: int) -> int:
    return int(rank).bit_length() - 1


def _bin_masses(ranks: np.ndarray, n_bins: int) -> np.ndarray:
    masses = np.zeros(n_bins)
    for r in ranks:
        masses[_log_bin_index(r)] += 1
    return masses / len(ranks)


@dataclass(frozen=True)
class RankDistribution:
    """Log-binned rank histogram, optionally against a null ensemble.

    Bins are powers of two: {1}, {2,3}, {4..7}, ...  `ratio` is the
    observed bin mass over the null's mean bin mass; `null_ci` is the
    2.5/97.5 percentile band of the per-permutation masses.
    """

    bin_labels: tuple[str, ...]
    observed_mass: np.ndarray
    null_mean_mass: np.ndarray | None = None
    null_ci: np.ndarray | None = None  # (n_bins, 2)
    ratio: np.ndarray | None = None

    def to_payload(self) -> dict:
        payload = {
            "bins": list(self.bin_labels),
            "observed_mass": [float(x) for x in self.observed_mass],
        }
        if self.null_mean_mass is not None:
            payload["null_mean_mass"] = [float(x) for x in self.null_mean_mass]
            payload["null_ci95"] = [[float(a), float(b)] for a, b in self.null_ci]
            payload["ratio"] = [
                None if not np.isfinite(x) else float(x) for x in self.ratio
            ]
        return payload


def rank_distribution(
    dists: np.ndarray,
    order: Sequence[int],
    null_permutations: np.ndarray | None = None,
) -> RankDistribution:
    """Distribution of reading-choice ranks, log-binned.

    With `null_permutations` (e.g. from a :class:`NullEnsemble`), the
    observed bin masses are compared against the permutations' mean
    masses to give per-bin ratios with a 95% null band.
    """
    ranks = step_ranks(dists, order)
    max_rank = len(order) - 1
    n_bins = _log_bin_index(max_rank) + 1
    labels = tuple(
        f"{2 ** b}" if 2 ** b == min(2 ** (b + 1) - 1, max_rank)
        else f"{2 ** b}-{min(2 ** (b + 1) - 1, max_rank)}"
        for b in range(n_bins)
    )
    observed = _bin_masses(ranks, n_bins)
    if null_permutations is None:
        return RankDistribution(bin_labels=labels, observed_mass=observed)

    null_masses = np.vstack(
        [_bin_masses(step_ranks(dists, perm), n_bins) for perm in null_permutations]
    )
    null_mean = null_masses.mean(axis=0)
    ci = np.percentile(null_masses, [2.5, 97.5], axis=0).T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(null_mean > 0, observed / null_mean, np.inf)
        ratio = np.where((null_mean == 0) & (observed == 0), np.nan, ratio)
    return RankDistribution(
        bin_labels=labels,
        observed_mass=observed,
        null_mean_mass=null_mean,
        null_ci=ci,
        ratio=ratio,
    )
