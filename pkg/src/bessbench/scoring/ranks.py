"""Scores for the predicted ordering of hours within a day.

Ranks run from 1 (cheapest) to ``K`` (dearest); equal prices are broken by
hour index so the earlier hour gets the lower rank.  All Brier-type scores
use the multi-class form with the ``1/K`` factor, so each lies in ``[0, 2]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bessbench._validation import check_matrix, check_vector
from bessbench.core import PriceDay, ScenarioEnsemble

TOP_K = (1, 2, 4, 8)


def price_ranks(prices) -> np.ndarray:
    """Within-row ranks (1-based) of a vector or ``(M, K)`` matrix of prices."""
    x = np.asarray(prices, dtype=float)
    order = np.argsort(x, axis=-1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(1, x.shape[-1] + 1), axis=-1)
    return ranks


@dataclass(frozen=True, eq=False)
class RankEnsemble:
    """Member ranks ``(M, K)`` and observed ranks ``(K,)``; each row a permutation of ``1..K``."""

    ranks: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        ranks = np.asarray(self.ranks)
        obs = np.asarray(self.observed)
        if ranks.ndim != 2 or obs.ndim != 1 or ranks.shape[1] != obs.shape[0]:
            raise ValueError(f"ranks must be (M, K) and observed (K,); got {ranks.shape} and {obs.shape}")
        perm = np.arange(1, obs.shape[0] + 1)
        if not np.array_equal(np.sort(obs), perm) or not np.all(np.sort(ranks, axis=1) == perm):
            raise ValueError("every rank row must be a permutation of 1..K")
        object.__setattr__(self, "ranks", ranks.astype(np.int64))
        object.__setattr__(self, "observed", obs.astype(np.int64))

    @property
    def members(self) -> int:
        return self.ranks.shape[0]

    @property
    def k(self) -> int:
        return self.observed.shape[0]

    @classmethod
    def from_prices(cls, forecast, day) -> RankEnsemble:
        paths = forecast.paths if isinstance(forecast, ScenarioEnsemble) else check_matrix(forecast, "forecast")
        y = day.prices if isinstance(day, PriceDay) else check_vector(day, "observation")
        if y.shape[0] != paths.shape[1]:
            raise ValueError(f"observation has {y.shape[0]} hours, forecast has {paths.shape[1]}")
        return cls(price_ranks(paths), price_ranks(y))

    def rank_probabilities(self) -> np.ndarray:
        """``P[h, k-1]``: fraction of members giving hour ``h`` rank ``k``."""
        k = self.k
        probs = np.zeros((k, k))
        hours = np.broadcast_to(np.arange(k), self.ranks.shape)
        np.add.at(probs, (hours.ravel(), self.ranks.ravel() - 1), 1.0)
        return probs / self.members


def _brier(prob: np.ndarray, outcome: np.ndarray) -> float:
    """Multi-class Brier score summed over classes (last axis), averaged over the rest."""
    return float(np.mean(np.sum((prob - outcome) ** 2, axis=-1)))


def _bess_event(ranks: np.ndarray, k: int) -> np.ndarray:
    """Top-k hours that come after every bottom-k hour, for each row of ranks."""
    n_hours = ranks.shape[-1]
    hours = np.arange(n_hours)
    low = ranks <= k
    last_low = np.max(np.where(low, hours, -1), axis=-1, keepdims=True)
    return (ranks > n_hours - k) & (hours > last_low)


def top_k_scores(ens: RankEnsemble, ks=TOP_K) -> dict[str, float]:
    """Low-k, High-k, Low-High-k and BESS-k Brier scores.

    Low-k and High-k score the binary events ``rank <= k`` and
    ``rank > K - k`` per hour.  Low-High-k scores the three classes
    {bottom-k, middle, top-k}.  BESS-k scores the event "top-k hour that
    follows all bottom-k hours", the part of the ranking a storage asset
    can trade.
    """
    r, o = ens.ranks, ens.observed
    big_k = ens.k
    out = {}
    for k in ks:
        if not 1 <= k <= big_k // 2:
            raise ValueError(f"top-k size {k} must lie in 1..{big_k // 2}")
        low_p = np.mean(r <= k, axis=0)
        high_p = np.mean(r > big_k - k, axis=0)
        low_o = (o <= k).astype(float)
        high_o = (o > big_k - k).astype(float)
        out[f"Low-{k}"] = _brier(np.stack([low_p, 1 - low_p], -1), np.stack([low_o, 1 - low_o], -1))
        out[f"High-{k}"] = _brier(np.stack([high_p, 1 - high_p], -1), np.stack([high_o, 1 - high_o], -1))
        mid_p, mid_o = 1 - low_p - high_p, 1 - low_o - high_o
        out[f"Low-High-{k}"] = _brier(np.stack([low_p, mid_p, high_p], -1), np.stack([low_o, mid_o, high_o], -1))
        bess_p = np.mean(_bess_event(r, k), axis=0)
        bess_o = _bess_event(o, k).astype(float)
        out[f"BESS-{k}"] = _brier(np.stack([bess_p, 1 - bess_p], -1), np.stack([bess_o, 1 - bess_o], -1))
    return out


def rank_scores(ens: RankEnsemble, ks=TOP_K) -> dict[str, object]:
    """All rank-based scores of one day.

    Returns
    -------
    dict
        ``brier_rank`` (length K, one per rank), ``brier_item`` (length K,
        one per hour), their means ``Brier_rank`` and ``Brier_item``,
        ``RPS`` averaged over hours and the K thresholds, and the entries
        of :func:`top_k_scores`.
    """
    k = ens.k
    probs = ens.rank_probabilities()
    outcome = np.zeros((k, k))
    outcome[np.arange(k), ens.observed - 1] = 1.0
    sq = (probs - outcome) ** 2
    brier_rank = sq.sum(axis=0) / k
    brier_item = sq.sum(axis=1) / k
    cum = np.cumsum(probs, axis=1) - np.cumsum(outcome, axis=1)
    rps = float(np.mean(cum**2))
    out: dict[str, object] = {
        "brier_rank": brier_rank,
        "brier_item": brier_item,
        "Brier_rank": float(brier_rank.mean()),
        "Brier_item": float(brier_item.mean()),
        "RPS": rps,
    }
    out.update(top_k_scores(ens, ks) if k >= 2 else {})
    return out
