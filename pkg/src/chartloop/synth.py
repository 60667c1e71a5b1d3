"""Seeded random chart tables for closed-loop verification and demos."""

from __future__ import annotations

import random
from decimal import Decimal
from typing import Optional

from .symbolic import stable_seed
from .tables import ChartTable

SERIES_POOL = (
    "Norway", "Chile", "Portugal", "Kenya", "Vietnam", "Austria", "Peru",
    "Jordan", "Iceland", "Malta", "Senegal", "Uruguay", "Laos", "Estonia",
    "Bolivia", "Tunisia", "Nepal", "Latvia", "Ghana", "Fiji",
)

CATEGORY_POOL = (
    "Groceries", "Transport", "Housing", "Utilities", "Leisure", "Health",
    "Education", "Clothing", "Savings", "Dining",
)

COLOR_POOL = (
    "blue", "orange", "green", "purple", "brown", "grey", "dark blue",
    "light blue", "pink", "dark green",
)


def _random_value(rng: random.Random) -> str:
    magnitude = rng.choice((10, 100, 1000, 10000))
    number = Decimal(rng.randrange(1 * magnitude, 10 * magnitude))
    style = rng.randrange(3)
    if style == 0:
        return str(number)
    if style == 1:
        return str(number / Decimal(10))
    return str(number / Decimal(100))


def random_table(
    seed: int,
    index: int = 0,
    n_series: Optional[int] = None,
    n_x: Optional[int] = None,
) -> ChartTable:
    """One random chart table, deterministic under (seed, index).

    Values are positive decimals of mixed printed precision, so every
    template has usable numeric cells and averages/ratios stay well away
    from rounding cliffs.
    """
    rng = random.Random(stable_seed("table", seed, index))
    if n_series is None:
        n_series = rng.choice((1, 1, 2, 3, 4))
    if n_x is None:
        n_x = rng.randrange(3, 8)
    names = rng.sample(SERIES_POOL, n_series)
    colored = rng.random() < 0.85
    series = [(name, rng.choice(COLOR_POOL) if colored else None) for name in names]
    if rng.random() < 0.7:
        start = rng.randrange(1990, 2016)
        x_labels = [str(start + i) for i in range(n_x)]
    else:
        x_labels = list(rng.sample(CATEGORY_POOL, n_x))
    cells = [[_random_value(rng) for _ in range(n_x)] for _ in range(n_series)]
    table = ChartTable.build(f"synthetic-{seed}-{index}", series, x_labels, cells)
    table.validate()
    return table


def random_tables(seed: int, count: int, **kwargs) -> list[ChartTable]:
    return [random_table(seed, index, **kwargs) for index in range(count)]
