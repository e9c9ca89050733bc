"""Point ledger with immediate and sale-deferred modifiers, plus the search boost.

Positive listing rewards are never credited up front: they accrue as pending
entries keyed by listing and only move into the credited balance when that
listing actually sells (the anti-point-farming rule). Every mutation appends
an event to the account's ledger log, so the credited balance is replayable:

    credited = initial points + sum(immediate) + sum(settled pending)

TransactionCompleted is modeled as an on-sale modifier accrued at listing
time. It cannot precede the sale by definition, and applying it at resolve
time instead would be replay-equivalent.

Account mutations go through the store's compare-and-set, so concurrent
updates to one account serialize; distinct accounts never contend.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum

from .errors import AccountExists, AlreadyExists, NothingPending, UnknownAccount, VersionConflict, WrongTiming
from .persistence import MemoryDocumentStore

REPUTATION = "reputation"


class ModifierKind(str, Enum):
    TRANSACTION_COMPLETED = "transaction_completed"
    FREE_LISTING = "free_listing"
    ECONOMICAL_LISTING = "economical_listing"
    NON_COMPLIANT_LISTING = "non_compliant_listing"
    TOS_VIOLATION = "tos_violation"


class Timing(Enum):
    IMMEDIATE = "immediate"
    ON_SALE = "on_sale"


KIND_TIMING = {
    ModifierKind.TRANSACTION_COMPLETED: Timing.ON_SALE,
    ModifierKind.FREE_LISTING: Timing.ON_SALE,
    ModifierKind.ECONOMICAL_LISTING: Timing.ON_SALE,
    ModifierKind.NON_COMPLIANT_LISTING: Timing.IMMEDIATE,
    ModifierKind.TOS_VIOLATION: Timing.IMMEDIATE,
}

POSITIVE_KINDS = {
    ModifierKind.TRANSACTION_COMPLETED,
    ModifierKind.FREE_LISTING,
    ModifierKind.ECONOMICAL_LISTING,
}

DEFAULT_MAGNITUDES = {
    ModifierKind.TRANSACTION_COMPLETED: 10,
    ModifierKind.FREE_LISTING: 20,
    ModifierKind.ECONOMICAL_LISTING: 15,
    ModifierKind.NON_COMPLIANT_LISTING: -5,
    ModifierKind.TOS_VIOLATION: -50,
}


@dataclass(frozen=True)
class Modifier:
    kind: ModifierKind
    magnitude: int

    @property
    def timing(self) -> Timing:
        return KIND_TIMING[self.kind]


def search_boost(credited: int, *, alpha: float = 0.25, cap: int = 500) -> float:
    """1 + alpha * clamp(credited, 0, cap)/cap: strictly increasing on
    [0, cap], constant beyond, never below 1."""
    clamped = min(max(credited, 0), cap)
    return 1.0 + alpha * clamped / cap


@dataclass
class ReputationConfig:
    initial_points: int = 100
    boost_alpha: float = 0.25
    boost_cap: int = 500
    magnitudes: dict[ModifierKind, int] = field(default_factory=lambda: dict(DEFAULT_MAGNITUDES))

    def validate(self) -> None:
        if self.boost_cap <= 0:
            raise ValueError("boost cap must be positive")
        if self.boost_alpha < 0:
            raise ValueError("boost alpha must be non-negative")
        for kind in ModifierKind:
            magnitude = self.magnitudes.get(kind)
            if magnitude is None:
                raise ValueError(f"missing magnitude for {kind.value}")
            if kind in POSITIVE_KINDS and magnitude <= 0:
                raise ValueError(f"{kind.value} must have positive magnitude")
            if kind not in POSITIVE_KINDS and magnitude >= 0:
                raise ValueError(f"{kind.value} must have negative magnitude")

    def modifier(self, kind: ModifierKind) -> Modifier:
        return Modifier(kind=kind, magnitude=self.magnitudes[kind])


@dataclass(frozen=True)
class AccountSnapshot:
    user_id: str
    credited: int
    pending: dict[str, list[Modifier]]


def _snapshot(user_id: str, body: dict) -> AccountSnapshot:
    pending = {
        listing_id: [Modifier(ModifierKind(m["kind"]), m["magnitude"]) for m in mods]
        for listing_id, mods in body["pending"].items()
    }
    return AccountSnapshot(user_id=user_id, credited=body["credited"], pending=pending)


class ReputationService:
    def __init__(self, store: MemoryDocumentStore, config: ReputationConfig | None = None):
        self.store = store
        self.config = config or ReputationConfig()
        self.config.validate()

    def init_account(self, user_id: str) -> AccountSnapshot:
        body = {
            "user_id": user_id,
            "credited": self.config.initial_points,
            "pending": {},
            "events": [{"type": "init", "points": self.config.initial_points}],
        }
        try:
            self.store.insert(REPUTATION, user_id, body)
        except AlreadyExists:
            raise AccountExists(user_id) from None
        return _snapshot(user_id, body)

    def apply_immediate(self, user_id: str, kind: ModifierKind) -> int:
        if KIND_TIMING[kind] is not Timing.IMMEDIATE:
            raise WrongTiming(f"{kind.value} settles on sale, not immediately")
        modifier = self.config.modifier(kind)

        def mutate(body: dict) -> None:
            body["credited"] += modifier.magnitude
            body["events"].append(
                {"type": "immediate", "kind": kind.value, "magnitude": modifier.magnitude}
            )

        return self._mutate(user_id, mutate)["credited"]

    def accrue_pending(
        self, user_id: str, listing_id: str, kinds: list[ModifierKind]
    ) -> dict[str, list[Modifier]]:
        for kind in kinds:
            if KIND_TIMING[kind] is not Timing.ON_SALE:
                raise WrongTiming(f"{kind.value} applies immediately, not on sale")
        if not kinds:
            return self.get_account(user_id).pending
        modifiers = [self.config.modifier(kind) for kind in kinds]

        def mutate(body: dict) -> None:
            entries = body["pending"].setdefault(listing_id, [])
            entries.extend({"kind": m.kind.value, "magnitude": m.magnitude} for m in modifiers)
            body["events"].append(
                {
                    "type": "accrue",
                    "listing": listing_id,
                    "modifiers": [
                        {"kind": m.kind.value, "magnitude": m.magnitude} for m in modifiers
                    ],
                }
            )

        return _snapshot(user_id, self._mutate(user_id, mutate)).pending

    def settle_on_sale(self, user_id: str, listing_id: str) -> int:
        def mutate(body: dict) -> None:
            entries = body["pending"].pop(listing_id, None)
            if entries is None:
                raise NothingPending(f"no pending points for listing {listing_id}")
            amount = sum(m["magnitude"] for m in entries)
            body["credited"] += amount
            body["events"].append({"type": "settle", "listing": listing_id, "amount": amount})

        return self._mutate(user_id, mutate)["credited"]

    def void_pending(self, user_id: str, listing_id: str) -> None:
        """Drop pending points without crediting; idempotent, never errors."""

        def mutate(body: dict) -> None:
            if body["pending"].pop(listing_id, None) is None:
                raise _NoChange()
            body["events"].append({"type": "void", "listing": listing_id})

        try:
            self._mutate(user_id, mutate)
        except UnknownAccount:
            pass

    def boost(self, credited: int) -> float:
        return search_boost(credited, alpha=self.config.boost_alpha, cap=self.config.boost_cap)

    def get_account(self, user_id: str) -> AccountSnapshot:
        doc = self.store.get(REPUTATION, user_id)
        if doc is None:
            raise UnknownAccount(user_id)
        return _snapshot(user_id, doc.body)

    def events(self, user_id: str) -> list[dict]:
        doc = self.store.get(REPUTATION, user_id)
        if doc is None:
            raise UnknownAccount(user_id)
        return copy.deepcopy(doc.body["events"])

    def _mutate(self, user_id: str, fn) -> dict:
        while True:
            doc = self.store.get(REPUTATION, user_id)
            if doc is None:
                raise UnknownAccount(user_id)
            body = doc.body
            try:
                fn(body)
            except _NoChange:
                return body
            try:
                self.store.compare_and_set(REPUTATION, user_id, doc.version, body)
            except VersionConflict:
                continue
            return body


class _NoChange(Exception):
    """Raised by a mutation callback to skip the write entirely."""
