"""Purchase requests: reserve, resolve, contact exchange, seller prompts.

A request takes the product out of the public pool the moment it is created,
and only one buyer can hold it. The transition set is small on purpose:

    Requested -> Pending | Sold | Declined
    Pending   -> Sold | Declined

Sold deletes the product and settles the seller's pending points; Declined
returns the product to the pool and leaves the points accrued (they can still
settle if the listing sells later). Both races, reserve-vs-reserve and
resolve-vs-resolve, are decided by compare-and-set on a single document.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass
from typing import Callable

from .auth import USERS
from .catalog import PRODUCTS, STATUS_LISTED, STATUS_RESERVED
from .errors import (
    AlreadyReserved,
    AlreadyResolved,
    Forbidden,
    NothingPending,
    NotFound,
    SelfRequestForbidden,
    ValidationFailed,
    VersionConflict,
)
from .persistence import MemoryDocumentStore
from .reputation import ReputationService

REQUESTS = "requests"

REQUESTED = "Requested"
PENDING = "Pending"
SOLD = "Sold"
DECLINED = "Declined"

TERMINAL_STATES = {SOLD, DECLINED}
OUTCOMES = {"sold", "pending", "declined"}


@dataclass(frozen=True)
class PurchaseRequest:
    id: str
    product_id: str
    buyer_id: str
    seller_id: str
    state: str
    created_at: float
    resolved_at: float | None


@dataclass(frozen=True)
class PartyContact:
    name: str
    email: str
    phone: str


@dataclass(frozen=True)
class ContactExchange:
    buyer: PartyContact
    seller: PartyContact


@dataclass(frozen=True)
class ProductSummary:
    """Snapshot taken at request time, so it survives the product's deletion."""

    id: str
    name: str
    price: int


@dataclass(frozen=True)
class RequestView:
    request: PurchaseRequest
    product: ProductSummary


@dataclass(frozen=True)
class PromptEntry:
    """One item of the seller's login prompt queue."""

    request: PurchaseRequest
    product: ProductSummary
    buyer: PartyContact


def _request_from_doc(doc_id: str, body: dict) -> PurchaseRequest:
    return PurchaseRequest(
        id=doc_id,
        product_id=body["product_id"],
        buyer_id=body["buyer_id"],
        seller_id=body["seller_id"],
        state=body["state"],
        created_at=body["created_at"],
        resolved_at=body["resolved_at"],
    )


def _summary_from_doc(body: dict) -> ProductSummary:
    return ProductSummary(
        id=body["product_id"], name=body["product_name"], price=body["product_price"]
    )


class TransactionService:
    def __init__(
        self,
        store: MemoryDocumentStore,
        reputation: ReputationService,
        clock: Callable[[], float] = time.time,
    ):
        self.store = store
        self.reputation = reputation
        self.clock = clock

    def _contact(self, user_id: str) -> PartyContact:
        doc = self.store.get(USERS, user_id)
        if doc is None:
            raise NotFound(f"user {user_id}")
        return PartyContact(
            name=doc.body["name"], email=doc.body["email"], phone=doc.body["phone"]
        )

    def request_product(
        self, buyer_id: str, product_id: str
    ) -> tuple[PurchaseRequest, ContactExchange]:
        """Reserve the product for this buyer and exchange contact details.

        The Listed->Reserved flip is a compare-and-set, so of any number of
        simultaneous buyers exactly one gets the request; the rest see
        AlreadyReserved. The stored request doubles as the seller's
        notification and is surfaced by pending_prompts.
        """
        while True:
            doc = self.store.get(PRODUCTS, product_id)
            if doc is None:
                raise NotFound(f"product {product_id}")
            body = doc.body
            if body["seller_id"] == buyer_id:
                raise SelfRequestForbidden()
            if body["status"] != STATUS_LISTED:
                raise AlreadyReserved(product_id)
            now = self.clock()
            reserved = dict(body, status=STATUS_RESERVED, updated_at=now)
            try:
                self.store.compare_and_set(PRODUCTS, product_id, doc.version, reserved)
            except VersionConflict:
                continue
            except NotFound:
                raise NotFound(f"product {product_id}") from None
            break

        request_id = uuid.uuid4().hex
        record = {
            "product_id": product_id,
            "product_name": body["name"],
            "product_price": body["price"],
            "buyer_id": buyer_id,
            "seller_id": body["seller_id"],
            "state": REQUESTED,
            "created_at": now,
            "resolved_at": None,
        }
        self.store.insert(REQUESTS, request_id, record)
        exchange = ContactExchange(
            buyer=self._contact(buyer_id), seller=self._contact(body["seller_id"])
        )
        return _request_from_doc(request_id, record), exchange

    def resolve(self, seller_id: str, request_id: str, outcome: str) -> PurchaseRequest:
        """Seller's verdict on a request: sold, pending, or declined.

        The request document is flipped first; whoever wins that CAS owns the
        follow-up (delete or relist the product, settle points), which makes
        settlement per sale exactly-once. Marking an already Pending request
        pending again is a no-op rather than an error.
        """
        if outcome not in OUTCOMES:
            raise ValidationFailed("outcome", "outcome must be sold, pending or declined")
        while True:
            doc = self.store.get(REQUESTS, request_id)
            if doc is None:
                raise NotFound(f"request {request_id}")
            body = doc.body
            if body["seller_id"] != seller_id:
                raise Forbidden("only the seller may resolve a request")
            if body["state"] in TERMINAL_STATES:
                raise AlreadyResolved(request_id)
            if outcome == "pending" and body["state"] == PENDING:
                return _request_from_doc(request_id, body)
            now = self.clock()
            updated = dict(body)
            if outcome == "pending":
                updated["state"] = PENDING
            else:
                updated["state"] = SOLD if outcome == "sold" else DECLINED
                updated["resolved_at"] = now
            try:
                self.store.compare_and_set(REQUESTS, request_id, doc.version, updated)
            except VersionConflict:
                continue
            break

        if outcome == "sold":
            self.store.delete(PRODUCTS, body["product_id"])
            try:
                self.reputation.settle_on_sale(seller_id, body["product_id"])
            except NothingPending:
                pass  # directly seeded listings have nothing accrued
        elif outcome == "declined":
            self._relist(body["product_id"])
        return _request_from_doc(request_id, updated)

    def _relist(self, product_id: str) -> None:
        # Reserved -> Listed; the request is already terminal at this point so
        # the product rejoins the pool with no active claim on it.
        while True:
            doc = self.store.get(PRODUCTS, product_id)
            if doc is None or doc.body["status"] != STATUS_RESERVED:
                return
            relisted = dict(doc.body, status=STATUS_LISTED, updated_at=self.clock())
            try:
                self.store.compare_and_set(PRODUCTS, product_id, doc.version, relisted)
            except (VersionConflict, NotFound):
                continue
            return

    def pending_prompts(self, seller_id: str) -> list[PromptEntry]:
        """Unresolved requests against the caller's listings, newest first.

        This is the notification feed shown to a seller at login; it includes
        the buyer's contact so the two can arrange the hand-off.
        """
        docs = self.store.query(
            REQUESTS,
            where=lambda b: b["seller_id"] == seller_id and b["state"] not in TERMINAL_STATES,
            sort_by="created_at",
            descending=True,
        )
        entries = []
        for doc in docs:
            entries.append(
                PromptEntry(
                    request=_request_from_doc(doc.id, doc.body),
                    product=_summary_from_doc(doc.body),
                    buyer=self._contact(doc.body["buyer_id"]),
                )
            )
        return entries

    def my_requests(self, buyer_id: str) -> list[RequestView]:
        """Everything the caller has asked for, any state, newest first."""
        docs = self.store.query(
            REQUESTS,
            where=lambda b: b["buyer_id"] == buyer_id,
            sort_by="created_at",
            descending=True,
        )
        return [
            RequestView(
                request=_request_from_doc(doc.id, doc.body),
                product=_summary_from_doc(doc.body),
            )
            for doc in docs
        ]
