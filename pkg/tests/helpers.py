"""Synthetic data shared by the test modules."""

import datetime as dt

import numpy as np

from bessbench.core import PriceDay


def daily_profile(hours: int = 24) -> np.ndarray:
    """Two-peak shape typical of day-ahead prices."""
    return 40.0 + 20.0 * np.sin(np.arange(hours) / hours * 4 * np.pi)


def make_days(n: int, seed: int = 0, start=dt.date(2024, 1, 1), noise: float = 8.0) -> list[PriceDay]:
    rng = np.random.default_rng(seed)
    return [PriceDay(daily_profile() + rng.normal(0, noise, 24), start + dt.timedelta(days=d)) for d in range(n)]
