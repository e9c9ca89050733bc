"""Assembles a running service out of its parts.

Everything is injectable for tests (store, mailer, classifier, price source,
clock, rng); production wiring is file store + capture mailer + the mock
adapters named in the config. The session signing secret comes from the
config or, failing that, from a file in the data directory so restarts do
not invalidate sessions.
"""

from __future__ import annotations

import random
import secrets
import time
from dataclasses import dataclass
from typing import Callable

from .auth import AuthConfig, AuthService, CaptureMailer, Mailer
from .catalog import CatalogService
from .compliance import (
    BlacklistConfig,
    ClassifierClient,
    ComplianceChecker,
    MockClassifierClient,
    load_blacklist,
)
from .config import AppConfig
from .persistence import FileDocumentStore, MemoryDocumentStore
from .pricing import MockPriceSource, PriceSourceClient
from .reputation import ReputationService
from .transactions import TransactionService

APPROVE_ALL = '{"compliant": true}'


@dataclass
class Runtime:
    config: AppConfig
    store: MemoryDocumentStore
    mailer: Mailer
    auth: AuthService
    reputation: ReputationService
    catalog: CatalogService
    transactions: TransactionService

    def close(self) -> None:
        self.store.close()


def _session_secret(config: AppConfig, store_is_file: bool) -> str:
    if config.session_secret:
        return config.session_secret
    if store_is_file and config.data_dir is not None:
        path = config.data_dir / "session.secret"
        if path.exists():
            return path.read_text(encoding="utf-8").strip()
        secret = secrets.token_hex(32)
        config.data_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(secret + "\n", encoding="utf-8")
        return secret
    return secrets.token_hex(32)  # ephemeral: in-memory runs die with their sessions


def build_runtime(
    config: AppConfig,
    *,
    store: MemoryDocumentStore | None = None,
    mailer: Mailer | None = None,
    classifier: ClassifierClient | None = None,
    price_client: PriceSourceClient | None = None,
    clock: Callable[[], float] = time.time,
    rng: random.Random | None = None,
) -> Runtime:
    own_store = store is None
    if store is None:
        store = FileDocumentStore(config.require_data_dir())

    if mailer is None:
        if own_store and config.data_dir is not None:
            mailer = CaptureMailer(config.data_dir / "outbox.jsonl")
        else:
            mailer = CaptureMailer()

    if classifier is None:
        if config.classifier_fixture_path is not None:
            classifier = MockClassifierClient.from_file(config.classifier_fixture_path)
        else:
            # no fixture configured: the blacklist is the only gate
            classifier = MockClassifierClient(default=APPROVE_ALL)

    if price_client is None:
        if config.price_fixture_path is not None:
            price_client = MockPriceSource.from_file(config.price_fixture_path)
        else:
            price_client = MockPriceSource({})

    if config.blacklist_path is not None:
        blacklist = load_blacklist(config.blacklist_path)
    else:
        blacklist = BlacklistConfig(terms=frozenset())

    reputation = ReputationService(store, config.reputation())
    auth = AuthService(
        store,
        mailer,
        AuthConfig(
            allowed_domains=config.allowed_email_domains,
            session_secret=_session_secret(config, own_store),
            otp_ttl_seconds=config.otp_ttl_seconds,
            session_ttl_seconds=config.session_ttl_seconds,
        ),
        clock=clock,
        rng=rng,
        on_account_created=reputation.init_account,
    )
    checker = ComplianceChecker(blacklist, classifier)
    catalog = CatalogService(store, checker, price_client, reputation, clock)
    transactions = TransactionService(store, reputation, clock)
    return Runtime(
        config=config,
        store=store,
        mailer=mailer,
        auth=auth,
        reputation=reputation,
        catalog=catalog,
        transactions=transactions,
    )
