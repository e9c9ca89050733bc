"""Categories, the listing pipeline, and reputation-boosted keyword search.

The pipeline order is load-bearing and observable from the outside: input
validation first (a rejected field makes zero external calls), then the
compliance check (a blacklist hit or classifier rejection makes zero
price-source calls and costs the seller an immediate penalty), then price
appraisal, persistence, and finally the on-sale reputation accrual. The
comparables used for the appraisal are recorded on the listing so its award
stays reproducible.

Search only ever sees Listed products; a Reserved product stays fetchable by
id but never appears in results.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass
from typing import Callable

from . import pricing
from .compliance import ComplianceChecker, ComplianceRequest
from .errors import (
    Forbidden,
    NonCompliant,
    NotFound,
    ReservedCannotDelete,
    UnknownCategory,
    ValidationFailed,
    VersionConflict,
)
from .persistence import MemoryDocumentStore
from .pricing import IdealPrice, PriceAward, PriceSourceClient
from .reputation import ModifierKind, ReputationService

CATEGORIES = "categories"
PRODUCTS = "products"

MAX_NAME_LEN = 120
MAX_DESCRIPTION_LEN = 2000
MAX_PHOTO_BYTES = 2 * 1024 * 1024
ALLOWED_PHOTO_TYPES = {"image/jpeg", "image/png"}

STATUS_LISTED = "Listed"
STATUS_RESERVED = "Reserved"


@dataclass(frozen=True)
class Category:
    id: str
    name: str


@dataclass(frozen=True)
class ProductListing:
    id: str
    name: str
    description: str
    price: int
    seller_id: str
    category_id: str
    quantity: int
    shipping: bool  # stored, functionally inert (hand-to-hand platform)
    status: str
    price_award: PriceAward
    ideal: IdealPrice | None
    has_photo: bool
    photo_media_type: str | None
    created_at: float
    updated_at: float


@dataclass(frozen=True)
class SearchResult:
    listing: ProductListing
    category_name: str
    seller_name: str
    seller_points: int
    score: float


@dataclass(frozen=True)
class ListingDetail:
    listing: ProductListing
    category_name: str
    seller_name: str
    seller_points: int


def _listing_from_doc(doc_id: str, body: dict) -> ProductListing:
    ideal = body.get("ideal")
    return ProductListing(
        id=doc_id,
        name=body["name"],
        description=body["description"],
        price=body["price"],
        seller_id=body["seller_id"],
        category_id=body["category_id"],
        quantity=body["quantity"],
        shipping=body["shipping"],
        status=body["status"],
        price_award=PriceAward(body["price_award"]),
        ideal=IdealPrice(value=ideal["value"], sample_size=ideal["sample_size"]) if ideal else None,
        has_photo=body.get("photo") is not None,
        photo_media_type=(body.get("photo") or {}).get("media_type"),
        created_at=body["created_at"],
        updated_at=body["updated_at"],
    )


def relevance(query_tokens: list[str], name: str, description: str) -> int:
    """Name matches weigh double; the empty query is uniformly relevant."""
    if not query_tokens:
        return 1
    name_l, desc_l = name.lower(), description.lower()
    return 2 * sum(1 for t in query_tokens if t in name_l) + sum(
        1 for t in query_tokens if t in desc_l
    )


class CatalogService:
    def __init__(
        self,
        store: MemoryDocumentStore,
        checker: ComplianceChecker,
        price_client: PriceSourceClient,
        reputation: ReputationService,
        clock: Callable[[], float] = time.time,
    ):
        self.store = store
        self.checker = checker
        self.price_client = price_client
        self.reputation = reputation
        self.clock = clock

    # --- categories ---

    def seed_categories(self, names: list[str]) -> int:
        """Idempotent upsert by name; returns how many names were ensured."""
        ensured = set()
        for raw in names:
            name = raw.strip()
            if not name:
                raise ValidationFailed("name", "category name must be non-empty")
            if self.find_category(name) is None:
                self.store.insert(CATEGORIES, uuid.uuid4().hex, {"name": name})
            ensured.add(name)
        return len(ensured)

    def list_categories(self) -> list[Category]:
        return [
            Category(id=doc.id, name=doc.body["name"])
            for doc in self.store.query(CATEGORIES, sort_by="name")
        ]

    def find_category(self, name: str) -> Category | None:
        docs = self.store.query(CATEGORIES, where=lambda b: b["name"] == name)
        return Category(id=docs[0].id, name=docs[0].body["name"]) if docs else None

    def get_category(self, category_id: str) -> Category | None:
        doc = self.store.get(CATEGORIES, category_id)
        return Category(id=doc.id, name=doc.body["name"]) if doc else None

    # --- the listing pipeline ---

    def create_listing(
        self,
        seller_id: str,
        *,
        name: str,
        description: str,
        price: int,
        category_id: str,
        quantity: int = 1,
        photo: bytes | None = None,
        photo_media_type: str | None = None,
        shipping: bool = False,
    ) -> ProductListing:
        name = (name or "").strip()
        description = (description or "").strip()
        if not 1 <= len(name) <= MAX_NAME_LEN:
            raise ValidationFailed("name", f"name must be 1-{MAX_NAME_LEN} characters")
        if len(description) > MAX_DESCRIPTION_LEN:
            raise ValidationFailed("description", f"description exceeds {MAX_DESCRIPTION_LEN} characters")
        if not isinstance(price, int) or isinstance(price, bool) or price < 0:
            raise ValidationFailed("price", "price must be a non-negative integer of minor units")
        if not isinstance(quantity, int) or isinstance(quantity, bool) or quantity < 1:
            raise ValidationFailed("quantity", "quantity must be a positive integer")
        if photo is not None:
            if len(photo) > MAX_PHOTO_BYTES:
                raise ValidationFailed("photo", "photo exceeds 2 MiB")
            if photo_media_type not in ALLOWED_PHOTO_TYPES:
                raise ValidationFailed("photo", "photo must be JPEG or PNG")
        category = self.get_category(category_id)
        if category is None:
            raise UnknownCategory(category_id)

        verdict = self.checker.check(
            ComplianceRequest(
                name=name,
                description=description,
                category_name=category.name,
                photo=photo,
                photo_media_type=photo_media_type,
            )
        )
        if not verdict.compliant:
            self.reputation.apply_immediate(seller_id, ModifierKind.NON_COMPLIANT_LISTING)
            raise NonCompliant(verdict.reason or "non-compliant")

        quotes = pricing.fetch_comparables(name, self.price_client)
        ideal = pricing.compute_ideal(quotes)
        award = pricing.evaluate_listing_price(price, ideal)

        now = self.clock()
        listing_id = uuid.uuid4().hex
        photo_ref = None
        if photo is not None:
            photo_ref = {"blob": self.store.put_blob(photo), "media_type": photo_media_type}
        body = {
            "name": name,
            "description": description,
            "price": price,
            "seller_id": seller_id,
            "category_id": category_id,
            "quantity": quantity,
            "photo": photo_ref,
            "shipping": shipping,
            "status": STATUS_LISTED,
            "price_award": award.value,
            "ideal": {"value": ideal.value, "sample_size": ideal.sample_size} if ideal else None,
            "comparables": [{"title": q.title, "price": q.price} for q in quotes],
            "created_at": now,
            "updated_at": now,
        }
        self.store.insert(PRODUCTS, listing_id, body)

        kinds = [ModifierKind.TRANSACTION_COMPLETED]
        if price == 0:
            kinds.append(ModifierKind.FREE_LISTING)
        if award is PriceAward.ECONOMICAL:
            kinds.append(ModifierKind.ECONOMICAL_LISTING)
        self.reputation.accrue_pending(seller_id, listing_id, kinds)

        return _listing_from_doc(listing_id, body)

    # --- search and retrieval ---

    def search(
        self,
        query: str = "",
        category_id: str | None = None,
        min_price: int | None = None,
        max_price: int | None = None,
        limit: int | None = None,
        offset: int = 0,
    ) -> list[SearchResult]:
        tokens = query.lower().split()

        def matches(body: dict) -> bool:
            if body["status"] != STATUS_LISTED:
                return False
            if category_id is not None and body["category_id"] != category_id:
                return False
            if min_price is not None and body["price"] < min_price:
                return False
            if max_price is not None and body["price"] > max_price:
                return False
            haystack = f"{body['name']} {body['description']}".lower()
            return all(t in haystack for t in tokens)

        boosts: dict[str, float] = {}
        sellers: dict[str, tuple[str, int]] = {}
        categories: dict[str, str] = {}
        results = []
        for doc in self.store.query(PRODUCTS, where=matches):
            body = doc.body
            seller_id = body["seller_id"]
            if seller_id not in sellers:
                account = self.reputation.get_account(seller_id)
                user = self.store.get("users", seller_id)
                sellers[seller_id] = (user.body["name"] if user else "", account.credited)
                boosts[seller_id] = self.reputation.boost(account.credited)
            seller_name, seller_points = sellers[seller_id]
            if body["category_id"] not in categories:
                category = self.get_category(body["category_id"])
                categories[body["category_id"]] = category.name if category else ""
            score = relevance(tokens, body["name"], body["description"]) * boosts[seller_id]
            results.append(
                SearchResult(
                    listing=_listing_from_doc(doc.id, body),
                    category_name=categories[body["category_id"]],
                    seller_name=seller_name,
                    seller_points=seller_points,
                    score=score,
                )
            )
        results.sort(key=lambda r: (-r.score, -r.listing.created_at, r.listing.id))
        if offset:
            results = results[offset:]
        if limit is not None:
            results = results[:limit]
        return results

    def get_listing(self, listing_id: str) -> ListingDetail:
        doc = self.store.get(PRODUCTS, listing_id)
        if doc is None:
            raise NotFound(f"product {listing_id}")
        body = doc.body
        category = self.get_category(body["category_id"])
        account = self.reputation.get_account(body["seller_id"])
        user = self.store.get("users", body["seller_id"])
        return ListingDetail(
            listing=_listing_from_doc(doc.id, body),
            category_name=category.name if category else "",
            seller_name=user.body["name"] if user else "",
            seller_points=account.credited,
        )

    def get_photo(self, listing_id: str) -> tuple[bytes, str]:
        doc = self.store.get(PRODUCTS, listing_id)
        if doc is None or doc.body.get("photo") is None:
            raise NotFound(f"no photo for product {listing_id}")
        ref = doc.body["photo"]
        blob = self.store.get_blob(ref["blob"])
        if blob is None:
            raise NotFound(f"no photo for product {listing_id}")
        return blob, ref["media_type"]

    def delete_listing(self, seller_id: str, listing_id: str) -> None:
        """Owner-only withdrawal of a still-Listed product; voids its pending
        points. The delete is version-guarded so a concurrent reservation wins."""
        while True:
            doc = self.store.get(PRODUCTS, listing_id)
            if doc is None:
                raise NotFound(f"product {listing_id}")
            if doc.body["seller_id"] != seller_id:
                raise Forbidden("only the seller may delete a listing")
            if doc.body["status"] != STATUS_LISTED:
                raise ReservedCannotDelete(listing_id)
            try:
                self.store.delete_if_version(PRODUCTS, listing_id, doc.version)
            except VersionConflict:
                continue
            except NotFound:
                raise NotFound(f"product {listing_id}") from None
            self.reputation.void_pending(seller_id, listing_id)
            return
