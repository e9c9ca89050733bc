"""A compact in-memory world for exercising the services end to end."""

from __future__ import annotations

import random
from dataclasses import dataclass

from campusmarket.auth import CaptureMailer
from campusmarket.bootstrap import Runtime, build_runtime
from campusmarket.catalog import ProductListing
from campusmarket.compliance import MockClassifierClient
from campusmarket.config import AppConfig
from campusmarket.persistence import MemoryDocumentStore
from campusmarket.pricing import ComparableQuote, MockPriceSource

APPROVE = '{"compliant": true}'
PASSWORD = "sturdy-pass-1"


class FakeClock:
    def __init__(self, start: float = 1_700_000_000.0):
        self.now = float(start)

    def __call__(self) -> float:
        return self.now

    def tick(self, seconds: float = 1.0) -> None:
        self.now += seconds


@dataclass
class World:
    runtime: Runtime
    mailer: CaptureMailer
    classifier: MockClassifierClient
    prices: MockPriceSource
    clock: FakeClock

    def register(
        self,
        name: str,
        email: str,
        *,
        password: str = PASSWORD,
        phone: str = "555-0000",
        college_id: str = "C-1",
    ) -> str:
        self.runtime.auth.register_begin(
            name=name, email=email, phone=phone, college_id=college_id, password=password
        )
        code = self.mailer.last_code_for(email)
        assert code is not None, f"no OTP mail captured for {email}"
        return self.runtime.auth.verify_otp(email, code).id

    def token(self, email: str, password: str = PASSWORD) -> str:
        return self.runtime.auth.login(email, password).token

    def category(self, name: str) -> str:
        self.runtime.catalog.seed_categories([name])
        return self.runtime.catalog.find_category(name).id

    def list_item(
        self, seller_id: str, name: str, price: int, *, category: str = "General", **kwargs
    ) -> ProductListing:
        return self.runtime.catalog.create_listing(
            seller_id,
            name=name,
            description=kwargs.pop("description", ""),
            price=price,
            category_id=self.category(category),
            **kwargs,
        )

    def quote(self, product_name: str, prices: list[int]) -> None:
        self.prices.quotes[product_name] = [
            ComparableQuote(title=f"comp {i}", price=p) for i, p in enumerate(prices, start=1)
        ]


def make_world(
    *,
    config: AppConfig | None = None,
    classifier: MockClassifierClient | None = None,
    quotes: dict[str, list[int]] | None = None,
    clock: FakeClock | None = None,
    rng_seed: int = 1234,
) -> World:
    if config is None:
        config = AppConfig(allowed_email_domains=("campus.edu",))
    if classifier is None:
        classifier = MockClassifierClient(default=APPROVE)
    prices = MockPriceSource(
        {
            name: [ComparableQuote(title=f"comp {i}", price=p) for i, p in enumerate(ps, start=1)]
            for name, ps in (quotes or {}).items()
        }
    )
    clock = clock or FakeClock()
    runtime = build_runtime(
        config,
        store=MemoryDocumentStore(),
        mailer=CaptureMailer(),
        classifier=classifier,
        price_client=prices,
        clock=clock,
        rng=random.Random(rng_seed),
    )
    runtime.auth.config.scrypt_cost = 2**12  # keep test hashing quick; format is self-describing
    return World(
        runtime=runtime,
        mailer=runtime.mailer,
        classifier=classifier,
        prices=prices,
        clock=clock,
    )
