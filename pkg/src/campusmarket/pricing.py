"""Competitive price evaluation against comparable refurbished quotes.

The ideal price is 75% of the mean price of the first ten comparables
(fewer when fewer exist), rounded half-up to the nearest minor unit. All
prices are integer minor units; the rounding is done in exact integer
arithmetic so there is no float drift. Pricing never blocks a listing:
a failing or empty source degrades to a NoData award.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

MAX_COMPARABLES = 10


@dataclass(frozen=True)
class ComparableQuote:
    title: str
    price: int  # minor units

    def __post_init__(self):
        if self.price <= 0:
            raise ValueError(f"quote price must be positive, got {self.price}")


@dataclass(frozen=True)
class IdealPrice:
    value: int
    sample_size: int


class PriceAward(str, Enum):
    ECONOMICAL = "Economical"
    NOT_ECONOMICAL = "NotEconomical"
    NO_DATA = "NoData"


class PriceSourceClient(Protocol):
    def search(self, product_name: str) -> Sequence[ComparableQuote]:
        """Ordered comparables for the product. Blocking; remote adapters own
        their timeout (10 s). May raise on transport failure."""
        ...


class MockPriceSource:
    """Fixture-driven adapter keyed by exact product name:
    ``{"<name>": [{"title": ..., "price": ...}, ...]}``."""

    def __init__(self, quotes: dict[str, list[ComparableQuote]] | None = None):
        self.quotes = dict(quotes or {})

    @classmethod
    def from_file(cls, path: str | Path) -> "MockPriceSource":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        quotes = {
            name: [ComparableQuote(title=q["title"], price=q["price"]) for q in entries]
            for name, entries in raw.items()
        }
        return cls(quotes)

    def search(self, product_name: str) -> list[ComparableQuote]:
        return list(self.quotes.get(product_name, []))


def fetch_comparables(product_name: str, client: PriceSourceClient) -> list[ComparableQuote]:
    """Source order, truncated to ten; empty on client failure (never blocks)."""
    if not product_name:
        raise ValueError("product name must be non-empty")
    try:
        quotes = list(client.search(product_name))
    except Exception:
        return []
    return quotes[:MAX_COMPARABLES]


def compute_ideal(quotes: Sequence[ComparableQuote]) -> IdealPrice | None:
    if not quotes:
        return None
    sample = quotes[:MAX_COMPARABLES]
    k = len(sample)
    total = sum(q.price for q in sample)
    # round-half-up(3*total / (4*k)) in exact integers:
    # floor(p/q + 1/2) = (2p + q) // (2q) with p = 3*total, q = 4*k
    value = (6 * total + 4 * k) // (8 * k)
    return IdealPrice(value=value, sample_size=k)


def evaluate_listing_price(listed_price: int, ideal: IdealPrice | None) -> PriceAward:
    """Boundary equality counts as economical (documented tie-break)."""
    if listed_price < 0:
        raise ValueError("listed price must be non-negative")
    if ideal is None:
        return PriceAward.NO_DATA
    if listed_price <= ideal.value:
        return PriceAward.ECONOMICAL
    return PriceAward.NOT_ECONOMICAL
