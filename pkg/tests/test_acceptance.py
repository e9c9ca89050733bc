"""Top-level guarantees of the marketplace core, one test per guarantee.

Each test prints a PASS line with the numbers it measured, so a verbose run
doubles as a conformance report. Everything here drives the system through
its public seams (services, CLI, HTTP) against the independent oracles in
``oracles.py``; nothing reaches into private state except to read final
ledgers.
"""

from __future__ import annotations

import itertools
import json
import os
import random
import signal
import socket
import subprocess
import sys
import threading
import time
from collections import Counter

import httpx
import pytest
from click.testing import CliRunner

from campusmarket.auth import USERS
from campusmarket.catalog import PRODUCTS, CatalogService
from campusmarket.cli import main as cli_main
from campusmarket.compliance import (
    BlacklistConfig,
    ComplianceChecker,
    ComplianceRequest,
    MockClassifierClient,
    check_compliance,
    default_system_prompt,
    load_blacklist,
)
from campusmarket.config import AppConfig
from campusmarket.bootstrap import build_runtime
from campusmarket.errors import (
    AlreadyReserved,
    AlreadyResolved,
    InvalidCredentials,
    MarketError,
    NothingPending,
    NotFound,
    OtpAlreadyConsumed,
    OtpExpired,
    OtpMismatch,
    OtpNotFound,
    ReservedCannotDelete,
    VersionConflict,
)
from campusmarket.persistence import FileDocumentStore, MemoryDocumentStore
from campusmarket.pricing import ComparableQuote, MockPriceSource, compute_ideal
from campusmarket.reputation import (
    DEFAULT_MAGNITUDES,
    REPUTATION,
    ModifierKind,
    ReputationService,
)
from campusmarket.transactions import REQUESTS, TransactionService
from helpers import APPROVE, PASSWORD, make_world
from oracles import (
    ABSENT,
    ALREADY_RESERVED as REF_ALREADY_RESERVED,
    ALREADY_RESOLVED as REF_ALREADY_RESOLVED,
    NO_REQUEST,
    NOT_FOUND as REF_NOT_FOUND,
    OK,
    RESERVED_CANNOT_DELETE as REF_RESERVED_CANNOT_DELETE,
    ReferenceMarket,
    boost_oracle,
    ideal_price_oracle,
    relevance_oracle,
    replay_credited_oracle,
    score_oracle,
)


def report(capsys, line: str) -> None:
    with capsys.disabled():
        print(f"\nPASS {line}")


def seed_user(store, uid: str, name: str) -> None:
    store.insert(
        USERS,
        uid,
        {
            "name": name,
            "email": f"{uid}@campus.edu",
            "password_hash": "",
            "phone": "555-0000",
            "college_id": "C-1",
            "role": 0,
            "created_at": 0.0,
            "updated_at": 0.0,
        },
    )


# --- 1. pricing formula ------------------------------------------------------


def test_pricing_formula_matches_oracle(capsys):
    rng = random.Random(0xC0FFEE)
    started = time.perf_counter()

    fixed = [
        ([1000] * 10, 750),
        (list(range(500, 2301, 200)), 1050),  # 10-element arithmetic run, mean 1400
    ]
    for prices, want in fixed:
        got = compute_ideal([ComparableQuote(title="c", price=p) for p in prices])
        assert got is not None and got.value == want

    checked = 0
    for _ in range(1000):
        n = rng.randint(0, 25)
        prices = [rng.randint(1, 10**6) for _ in range(n)]
        ideal = compute_ideal([ComparableQuote(title="c", price=p) for p in prices])
        assert (ideal.value if ideal else None) == ideal_price_oracle(prices)
        checked += 1

    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    report(
        capsys,
        f"pricing: both fixed examples (750, 1050) and {checked} random quote lists "
        f"match the rational-arithmetic oracle exactly in {elapsed:.3f}s (< 1s)",
    )


# --- 2. moderation corpus + fuzz ---------------------------------------------


def test_compliance_corpus_and_fuzz(tmp_path, capsys, fixtures_dir):
    cfg = tmp_path / "app.toml"
    cfg.write_text(
        'data_dir = "data"\n'
        'allowed_email_domains = ["campus.edu"]\n'
        f'blacklist_path = "{fixtures_dir / "blacklist.txt"}"\n'
    )
    corpus = fixtures_dir / "compliance_corpus.jsonl"
    result = CliRunner().invoke(cli_main, ["check-corpus", "--config", str(cfg), str(corpus)])
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output)
    assert (summary["total"], summary["passed"], summary["failed"]) == (30, 30, 0)

    # every blacklist-hitting fixture must short-circuit: zero classifier calls
    blacklist = load_blacklist(fixtures_dir / "blacklist.txt")
    prompt = default_system_prompt()
    blocked = 0
    for line in corpus.read_text().splitlines():
        entry = json.loads(line)
        if entry.get("expect_classifier_calls") != 0:
            continue
        client = MockClassifierClient(default=APPROVE)
        verdict = check_compliance(
            ComplianceRequest(
                name=entry["name"],
                description=entry.get("description", ""),
                category_name=entry.get("category", ""),
            ),
            blacklist,
            client,
            prompt,
        )
        assert not verdict.compliant
        assert client.calls == 0 and verdict.classifier_calls == 0
        blocked += 1
    assert blocked == 10

    # fuzz: arbitrary byte soup must always yield a verdict, never a crash
    rng = random.Random(97)
    approving = MockClassifierClient(default=APPROVE)
    garbled = MockClassifierClient(default="\x00 not a verdict {{{")
    fuzzed = 0
    for i in range(10_000):
        request = ComplianceRequest(
            name=rng.randbytes(rng.randint(0, 40)).decode("utf-8", "replace"),
            description=rng.randbytes(rng.randint(0, 120)).decode("utf-8", "replace"),
            category_name=rng.randbytes(rng.randint(0, 12)).decode("utf-8", "replace"),
        )
        verdict = check_compliance(
            request, blacklist, approving if i % 2 else garbled, prompt
        )
        assert isinstance(verdict.compliant, bool)
        fuzzed += 1
    report(
        capsys,
        f"moderation: shipped corpus 30/30 via check-corpus, {blocked}/10 blacklist fixtures "
        f"made zero classifier calls, {fuzzed} fuzzed listings all produced verdicts",
    )


# --- 3. reservation race -----------------------------------------------------


def test_reservation_race_single_winner(capsys):
    world = make_world()
    store = world.runtime.store
    seed_user(store, "seller", "Seller")
    world.runtime.reputation.init_account("seller")
    buyers = [f"buyer{i:03d}" for i in range(100)]
    for uid in buyers:
        seed_user(store, uid, uid)
    category_id = world.category("General")

    rounds = 20
    for round_no in range(rounds):
        listing = world.runtime.catalog.create_listing(
            "seller", name=f"Hot item {round_no}", description="", price=10,
            category_id=category_id,
        )
        barrier = threading.Barrier(len(buyers))
        outcomes: list[str] = []
        lock = threading.Lock()

        def attempt(uid, listing_id=listing.id):
            barrier.wait()
            try:
                world.runtime.transactions.request_product(uid, listing_id)
                got = "won"
            except AlreadyReserved:
                got = "reserved"
            with lock:
                outcomes.append(got)

        threads = [threading.Thread(target=attempt, args=(uid,)) for uid in buyers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        counts = Counter(outcomes)
        assert counts == {"won": 1, "reserved": 99}, f"round {round_no}: {counts}"
        assert store.get(PRODUCTS, listing.id).body["status"] == "Reserved"
        open_requests = store.query(
            REQUESTS,
            where=lambda b: b["product_id"] == listing.id
            and b["state"] not in ("Sold", "Declined"),
        )
        assert len(open_requests) == 1

    report(
        capsys,
        f"reservation race: {rounds} rounds x 100 concurrent buyers -> exactly 1 winner "
        f"and 99 AlreadyReserved every round; product Reserved with one open request",
    )


# --- 4. state-machine oracle -------------------------------------------------

_SM_OPS = ("request_a", "request_b", "sold", "pending", "declined", "delete")


def _drive_real(ops: tuple[str, ...]):
    """Run one op sequence against a fresh in-memory market; return the
    per-step outcomes and the final (product, request states, credited)."""
    store = MemoryDocumentStore()
    reputation = ReputationService(store)
    clock = lambda: 1_000.0
    catalog = CatalogService(
        store,
        ComplianceChecker(BlacklistConfig(terms=frozenset()), MockClassifierClient(default=APPROVE)),
        MockPriceSource({}),
        reputation,
        clock,
    )
    transactions = TransactionService(store, reputation, clock)
    for uid, name in (("seller", "S"), ("alice", "A"), ("bob", "B")):
        seed_user(store, uid, name)
    reputation.init_account("seller")
    catalog.seed_categories(["General"])
    category_id = catalog.find_category("General").id
    product_id = catalog.create_listing(
        "seller", name="Widget", description="", price=50, category_id=category_id
    ).id

    request_ids: list[str] = []
    outcomes: list[str] = []
    for op in ops:
        try:
            if op == "request_a" or op == "request_b":
                buyer = "alice" if op == "request_a" else "bob"
                record, _ = transactions.request_product(buyer, product_id)
                request_ids.append(record.id)
                outcomes.append(OK)
            elif op == "delete":
                catalog.delete_listing("seller", product_id)
                outcomes.append(OK)
            else:
                if not request_ids:
                    outcomes.append(NO_REQUEST)
                    continue
                transactions.resolve("seller", request_ids[-1], op)
                outcomes.append(OK)
        except NotFound:
            outcomes.append(REF_NOT_FOUND)
        except AlreadyReserved:
            outcomes.append(REF_ALREADY_RESERVED)
        except AlreadyResolved:
            outcomes.append(REF_ALREADY_RESOLVED)
        except ReservedCannotDelete:
            outcomes.append(REF_RESERVED_CANNOT_DELETE)

    doc = store.get(PRODUCTS, product_id)
    product = ABSENT if doc is None else doc.body["status"].lower()
    states = tuple(store.get(REQUESTS, rid).body["state"] for rid in request_ids)
    credited = reputation.get_account("seller").credited
    return outcomes, (product, states, credited)


def _drive_reference(ops: tuple[str, ...]):
    market = ReferenceMarket(sale_settles=10, initial=100)
    outcomes = []
    for op in ops:
        if op == "request_a":
            outcomes.append(market.do_request("a"))
        elif op == "request_b":
            outcomes.append(market.do_request("b"))
        elif op == "delete":
            outcomes.append(market.do_delete())
        else:
            outcomes.append(market.do_resolve(op))
    return outcomes, market.final_state()


def test_state_machine_matches_reference_model(capsys):
    checked = 0
    divergences = []
    for length in range(1, 6):
        for ops in itertools.product(_SM_OPS, repeat=length):
            got_outcomes, got_final = _drive_real(ops)
            want_outcomes, want_final = _drive_reference(ops)
            if got_outcomes != want_outcomes or got_final != want_final:
                divergences.append((ops, got_outcomes, want_outcomes, got_final, want_final))
            checked += 1
    assert not divergences, f"first divergence: {divergences[0]}"
    assert checked == sum(len(_SM_OPS) ** k for k in range(1, 6))  # 9330
    report(
        capsys,
        f"state machine: all {checked} operation sequences of length <= 5 agree with the "
        f"reference model on every step outcome and final state (0 divergences)",
    )


# --- 5. reputation replay ----------------------------------------------------


def test_reputation_replay_against_ledger_oracle(capsys):
    rng = random.Random(777)
    immediates = [ModifierKind.NON_COMPLIANT_LISTING, ModifierKind.TOS_VIOLATION]
    on_sale = [
        ModifierKind.TRANSACTION_COMPLETED,
        ModifierKind.FREE_LISTING,
        ModifierKind.ECONOMICAL_LISTING,
    ]
    magnitude = DEFAULT_MAGNITUDES
    trials, total_ops = 500, 0

    for _ in range(trials):
        store = MemoryDocumentStore()
        service = ReputationService(store)
        service.init_account("u")
        listings = [f"L{i}" for i in range(6)]
        settled: set[str] = set()
        settle_counts: Counter = Counter()
        log: list[tuple] = []

        for _ in range(rng.randint(1, 15)):
            op = rng.choices(("immediate", "accrue", "settle", "void"), weights=(2, 4, 3, 1))[0]
            if op == "immediate":
                kind = rng.choice(immediates)
                service.apply_immediate("u", kind)
                log.append(("immediate", magnitude[kind]))
            elif op == "accrue":
                # listing ids are never reused after a sale, so never re-accrue one
                candidates = [l for l in listings if l not in settled]
                if not candidates:
                    continue
                listing = rng.choice(candidates)
                kinds = [rng.choice(on_sale) for _ in range(rng.randint(1, 3))]
                before = service.get_account("u").credited
                service.accrue_pending("u", listing, kinds)
                assert service.get_account("u").credited == before  # nothing early
                log.append(("accrue", listing, [magnitude[k] for k in kinds]))
            elif op == "settle":
                listing = rng.choice(listings)
                try:
                    service.settle_on_sale("u", listing)
                    settled.add(listing)
                    settle_counts[listing] += 1
                except NothingPending:
                    pass
                log.append(("settle", listing))
            else:
                listing = rng.choice(listings)
                service.void_pending("u", listing)
                log.append(("void", listing))

            # the ledger agrees with the oracle after every single step
            assert service.get_account("u").credited == replay_credited_oracle(100, log)
            total_ops += 1

        assert all(count <= 1 for count in settle_counts.values())

    report(
        capsys,
        f"reputation replay: {trials} random ledgers ({total_ops} ops) match the oracle "
        f"after every step; pending never credited before its sale; <= 1 settle per listing",
    )


# --- 6. search properties ----------------------------------------------------


def _reach_credited(service: ReputationService, uid: str, target: int) -> None:
    """Walk the account from 100 to ``target`` (a multiple of 5 in [0, 500])
    using only legitimate ledger operations."""
    assert 0 <= target <= 500 and target % 5 == 0
    delta = target - 100
    settles = 0
    penalties = 0
    if delta >= 0:
        settles, rem = divmod(delta, 10)
        if rem:  # need one -5 and one more +10
            settles += 1
            penalties = 1
    else:
        penalties, rem = divmod(-delta, 5)
    for i in range(settles):
        listing = f"warm-{uid}-{i}"
        service.accrue_pending(uid, listing, [ModifierKind.TRANSACTION_COMPLETED])
        service.settle_on_sale(uid, listing)
    for _ in range(penalties):
        service.apply_immediate(uid, ModifierKind.NON_COMPLIANT_LISTING)
    assert service.get_account(uid).credited == target


def test_search_ranking_properties(capsys):
    rng = random.Random(4242)
    words = ["calc", "chair", "lamp", "book", "cycle", "desk", "fan", "bag", "shoe", "pad"]
    rounds, results_seen, boost_pairs = 10, 0, 0

    for round_no in range(rounds):
        store = MemoryDocumentStore()
        reputation = ReputationService(store)
        clock_now = [1_000.0]

        def clock():
            return clock_now[0]

        catalog = CatalogService(
            store,
            ComplianceChecker(BlacklistConfig(terms=frozenset()), MockClassifierClient(default=APPROVE)),
            MockPriceSource({}),
            reputation,
            clock,
        )
        transactions = TransactionService(store, reputation, clock)
        catalog.seed_categories(["General"])
        category_id = catalog.find_category("General").id

        sellers = [f"s{round_no}-{i}" for i in range(6)]
        targets = rng.sample(range(0, 501, 5), len(sellers))  # distinct credited levels
        credited_of = {}
        for uid, target in zip(sellers, targets):
            seed_user(store, uid, uid)
            reputation.init_account(uid)
            _reach_credited(reputation, uid, target)
            credited_of[uid] = target
        seed_user(store, "watcher", "Watcher")

        listings = []
        # a deliberate equal-relevance cluster: identical text, different sellers
        for uid in rng.sample(sellers, 3):
            listings.append(
                (
                    catalog.create_listing(
                        uid, name="calc classic kit", description="",
                        price=rng.randint(1, 900), category_id=category_id,
                    ),
                    uid,
                )
            )
            clock_now[0] += 1.0
        for _ in range(12):
            uid = rng.choice(sellers)
            name = " ".join(rng.sample(words, 2)) + f" {rng.randint(1, 999)}"
            description = " ".join(rng.sample(words, rng.randint(0, 3)))
            listings.append(
                (
                    catalog.create_listing(
                        uid, name=name, description=description,
                        price=rng.randint(0, 900), category_id=category_id,
                    ),
                    uid,
                )
            )
            clock_now[0] += 1.0

        reserved_ids = set()
        for listing, uid in rng.sample(listings, 4):
            transactions.request_product("watcher", listing.id)
            reserved_ids.add(listing.id)

        queries = [""] + ["calc"] + [
            " ".join(rng.sample(words, rng.randint(1, 2))) for _ in range(8)
        ]
        for query in queries:
            results = catalog.search(query)
            results_seen += len(results)
            assert all(r.listing.id not in reserved_ids for r in results)
            for result in results:
                seller_credited = credited_of[result.listing.seller_id]
                want = score_oracle(
                    query, result.listing.name, result.listing.description, seller_credited
                )
                assert result.score == pytest.approx(want, rel=1e-12)
            # equal relevance must be broken by credited points, higher first
            for i in range(len(results)):
                rel_i = relevance_oracle(
                    query, results[i].listing.name, results[i].listing.description
                )
                for j in range(i + 1, len(results)):
                    rel_j = relevance_oracle(
                        query, results[j].listing.name, results[j].listing.description
                    )
                    if rel_i != rel_j:
                        continue
                    ci = credited_of[results[i].listing.seller_id]
                    cj = credited_of[results[j].listing.seller_id]
                    if ci != cj:
                        assert ci > cj, (
                            f"query {query!r}: equal relevance {rel_i} but credited "
                            f"{ci} ranked below {cj}"
                        )
                        boost_pairs += 1

    assert boost_pairs > 100  # the property was exercised, not vacuous
    report(
        capsys,
        f"search: {rounds} random catalogs, {results_seen} results checked; Reserved items "
        f"never surfaced; scores equal the oracle; {boost_pairs} equal-relevance pairs all "
        f"ranked the higher-credited seller first",
    )


# --- 7. auth suite -----------------------------------------------------------


def test_auth_suite(tmp_path, capsys):
    world = make_world()
    auth = world.runtime.auth

    def begin(email):
        auth.register_begin(
            name="U", email=email, phone="555", college_id="C", password=PASSWORD
        )
        return world.mailer.last_code_for(email)

    # TTL boundary: 600 s still verifies, 601 s is expired
    code = begin("edge@campus.edu")
    world.clock.tick(600)
    account = auth.verify_otp("edge@campus.edu", code)
    assert account.email == "edge@campus.edu"
    code = begin("late@campus.edu")
    world.clock.tick(601)
    with pytest.raises(OtpExpired):
        auth.verify_otp("late@campus.edu", code)

    # single use
    code = begin("once@campus.edu")
    auth.verify_otp("once@campus.edu", code)
    with pytest.raises(OtpAlreadyConsumed):
        auth.verify_otp("once@campus.edu", code)

    # five misses invalidate the code for good
    code = begin("locked@campus.edu")
    for _ in range(5):
        with pytest.raises(OtpMismatch):
            auth.verify_otp("locked@campus.edu", "000000")
    with pytest.raises(OtpNotFound):
        auth.verify_otp("locked@campus.edu", code)

    # token tamper detection: every single-bit flip must be rejected
    rng = random.Random(0xBEEF)
    token = auth.login("edge@campus.edu", PASSWORD).token
    raw = token.encode("ascii")
    false_accepts = 0
    for _ in range(1000):
        flipped = bytearray(raw)
        position = rng.randrange(len(flipped))
        flipped[position] ^= 1 << rng.randrange(8)
        try:
            auth.verify_token(bytes(flipped).decode("latin-1"))
            false_accepts += 1
        except MarketError:
            pass
    assert false_accepts == 0

    # 50-user randomized session against the on-disk store: no plaintext anywhere
    data_dir = tmp_path / "data"
    config = AppConfig(
        data_dir=data_dir,
        allowed_email_domains=("campus.edu",),
        session_secret="acceptance-auth-secret",
    )
    runtime = build_runtime(config)
    runtime.auth.config.scrypt_cost = 2**12
    session_rng = random.Random(31337)
    passwords = []
    try:
        for i in range(50):
            password = f"pw-{session_rng.getrandbits(64):016x}-{i:02d}"
            passwords.append(password)
            email = f"user{i:02d}@campus.edu"
            runtime.auth.register_begin(
                name=f"User {i}", email=email, phone=f"555-01{i:02d}",
                college_id=f"C-{i}", password=password,
            )
            mail_code = runtime.mailer.last_code_for(email)
            if session_rng.random() < 0.3:
                with pytest.raises(OtpMismatch):
                    runtime.auth.verify_otp(email, "000000")
            runtime.auth.verify_otp(email, mail_code)
            if session_rng.random() < 0.7:
                runtime.auth.login(email, password)
            if session_rng.random() < 0.3:
                with pytest.raises(InvalidCredentials):
                    runtime.auth.login(email, "totally-wrong-guess")
    finally:
        runtime.close()

    leaks = []
    files_scanned = 0
    for file in sorted(data_dir.rglob("*")):
        if not file.is_file():
            continue
        files_scanned += 1
        blob = file.read_bytes()
        for password in passwords:
            if password.encode("utf-8") in blob:
                leaks.append((file.name, password))
    assert files_scanned > 0
    assert leaks == []

    report(
        capsys,
        "auth: OTP verifies at 600s and expires at 601s, codes are single-use, 5 misses "
        "lock the code out, 1000 token bit-flips -> 0 false accepts, and a 50-user "
        f"session left no plaintext password in any of {files_scanned} data files",
    )


# --- 8. persistence ----------------------------------------------------------


def _random_json(rng: random.Random, depth: int = 0):
    choices = ["int", "str", "bool", "none", "float"]
    if depth < 2:
        choices += ["list", "dict"]
    kind = rng.choice(choices)
    if kind == "int":
        return rng.randint(-(10**9), 10**9)
    if kind == "str":
        return "".join(rng.choice("abcdefghij é世") for _ in range(rng.randint(0, 12)))
    if kind == "bool":
        return rng.random() < 0.5
    if kind == "none":
        return None
    if kind == "float":
        return rng.randint(-(10**6), 10**6) / 64.0  # exact binary fractions round-trip
    if kind == "list":
        return [_random_json(rng, depth + 1) for _ in range(rng.randint(0, 4))]
    return {f"k{i}": _random_json(rng, depth + 1) for i in range(rng.randint(0, 4))}


def test_persistence_guarantees(tmp_path, capsys):
    # compare-and-set under contention: 100 racers x 20 rounds, no lost updates
    store = FileDocumentStore(tmp_path / "cas")
    store.put("counters", "hits", {"value": 0})
    racers, rounds = 100, 20

    def bump():
        while True:
            doc = store.get("counters", "hits")
            body = dict(doc.body)
            body["value"] += 1
            try:
                store.compare_and_set("counters", "hits", doc.version, body)
                return
            except VersionConflict:
                continue

    for _ in range(rounds):
        barrier = threading.Barrier(racers)

        def run():
            barrier.wait()
            bump()

        threads = [threading.Thread(target=run) for _ in range(racers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    final = store.get("counters", "hits").body["value"]
    store.close()
    assert final == racers * rounds

    # journal restart round trip over 1000 random documents
    rng = random.Random(55)
    root = tmp_path / "journal"
    store = FileDocumentStore(root)
    expected: dict[str, dict] = {}
    ids = [f"doc{i:04d}" for i in range(1000)]
    for doc_id in ids:
        body = {"payload": _random_json(rng), "n": rng.randint(-(10**9), 10**9)}
        store.put("corpus", doc_id, body)
        expected[doc_id] = body
    for doc_id in rng.sample(ids, 400):  # churn: rewrites and deletes
        if rng.random() < 0.3:
            store.delete("corpus", doc_id)
            expected.pop(doc_id, None)
        else:
            body = {"payload": _random_json(rng), "n": rng.randint(-(10**9), 10**9)}
            store.put("corpus", doc_id, body)
            expected[doc_id] = body
    versions = {doc_id: store.get("corpus", doc_id).version for doc_id in expected}
    store.close()

    reopened = FileDocumentStore(root)
    try:
        docs = {doc.id: doc for doc in reopened.query("corpus")}
        assert set(docs) == set(expected)
        for doc_id, body in expected.items():
            assert docs[doc_id].body == body
            assert docs[doc_id].version == versions[doc_id]
    finally:
        reopened.close()

    report(
        capsys,
        f"persistence: {racers} racers x {rounds} CAS rounds -> counter exactly {final} "
        f"(no lost updates); {len(ids)} random documents ({len(expected)} surviving churn) "
        f"reload after restart with bodies and versions intact",
    )


# --- 9. end-to-end over HTTP -------------------------------------------------


def _free_port() -> int:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


def test_end_to_end_over_http(tmp_path, capsys, fixtures_dir):
    started = time.perf_counter()
    port = _free_port()
    data_dir = tmp_path / "data"
    cfg = tmp_path / "app.toml"
    cfg.write_text(
        f"""
data_dir = "data"
bind_address = "127.0.0.1:{port}"
allowed_email_domains = ["campus.edu"]
session_secret = "e2e-session-secret"
blacklist_path = "{fixtures_dir / 'blacklist.txt'}"

[price_source]
mode = "mock"
fixture_path = "{fixtures_dir / 'price_quotes.json'}"
"""
    )
    env = dict(os.environ)
    env.pop("MARKET_DATA_DIR", None)

    categories = tmp_path / "categories.txt"
    categories.write_text("Calculator\nBooks\n")
    seeded = subprocess.run(
        [sys.executable, "-m", "campusmarket.cli", "seed", "--config", str(cfg), str(categories)],
        capture_output=True, text=True, env=env,
    )
    assert seeded.returncode == 0, seeded.stderr
    assert seeded.stdout.strip() == "2"

    server = subprocess.Popen(
        [sys.executable, "-m", "campusmarket.cli", "serve", "--config", str(cfg)],
        stdout=subprocess.DEVNULL, stderr=subprocess.PIPE, env=env,
    )

    def otp_for(email: str) -> str:
        for line in reversed((data_dir / "outbox.jsonl").read_text().splitlines()):
            mail = json.loads(line)
            if mail["to"] == email:
                for text_line in mail["body"].splitlines():
                    stripped = text_line.strip()
                    if stripped.isdigit() and len(stripped) == 6:
                        return stripped
        raise AssertionError(f"no OTP mail for {email}")

    try:
        with httpx.Client(base_url=f"http://127.0.0.1:{port}", timeout=5.0) as client:
            for _ in range(200):
                if server.poll() is not None:
                    raise AssertionError(f"server died: {server.stderr.read().decode()}")
                try:
                    if client.get("/healthz").status_code == 200:
                        break
                except httpx.TransportError:
                    time.sleep(0.05)
            else:
                raise AssertionError("server never became healthy")

            def signup(name: str, email: str):
                r = client.post(
                    "/auth/register",
                    json={
                        "name": name, "email": email, "phone": "555-9000",
                        "collegeId": "C-42", "password": PASSWORD,
                    },
                )
                assert r.status_code == 200, r.text
                r = client.post("/auth/verify-otp", json={"email": email, "code": otp_for(email)})
                assert r.status_code == 200, r.text
                user_id = r.json()["userId"]
                r = client.post("/auth/login", json={"email": email, "password": PASSWORD})
                assert r.status_code == 200, r.text
                headers = {"Authorization": f"Bearer {r.json()['token']}"}
                return user_id, headers, r.json()["profile"]["creditedPoints"]

            seller_id, seller_headers, seller_points = signup("Sana", "sana@campus.edu")
            buyer_id, buyer_headers, _ = signup("Bilal", "bilal@campus.edu")
            assert seller_points == 100

            category_rows = client.get("/categories", headers=seller_headers).json()
            calculator = next(c["id"] for c in category_rows if c["name"] == "Calculator")

            r = client.post(
                "/products",
                data={
                    "name": "Casio FX-991EX Calculator",
                    "description": "solar scientific calculator",
                    "price": "700",
                    "categoryId": calculator,
                },
                headers=seller_headers,
            )
            assert r.status_code == 201, r.text
            listing = r.json()
            assert listing["idealPrice"] == 750  # fixture quotes: ten at 1000
            assert listing["priceAward"] == "Economical"  # 700 <= 750

            r = client.get(
                "/products", params={"q": "casio calculator"}, headers=buyer_headers
            )
            hits = r.json()
            assert [h["id"] for h in hits] == [listing["id"]]
            assert hits[0]["sellerPoints"] == 100

            r = client.post(f"/products/{listing['id']}/request", headers=buyer_headers)
            assert r.status_code == 200, r.text
            request_id = r.json()["request"]["id"]
            assert r.json()["contact"]["seller"]["email"] == "sana@campus.edu"
            assert r.json()["contact"]["buyer"]["email"] == "bilal@campus.edu"

            prompts = client.get("/me/prompts", headers=seller_headers).json()
            assert len(prompts) == 1
            assert prompts[0]["request"]["id"] == request_id

            r = client.post(
                f"/requests/{request_id}/resolve",
                json={"outcome": "sold"},
                headers=seller_headers,
            )
            assert r.status_code == 200, r.text
            assert r.json()["state"] == "Sold"

            reputation_view = client.get("/me/reputation", headers=seller_headers).json()
            assert reputation_view["credited"] == 125  # 100 + 10 completed + 15 economical
            assert reputation_view["pending"] == []
            assert client.get(f"/products/{listing['id']}", headers=buyer_headers).status_code == 404
            mine = client.get("/me/requests", headers=buyer_headers).json()
            assert [v["request"]["state"] for v in mine] == ["Sold"]
    finally:
        server.send_signal(signal.SIGTERM)
        try:
            server.wait(timeout=10)
        except subprocess.TimeoutExpired:
            server.kill()
            server.wait()

    # ledger oracle, straight off the reopened journal
    store = FileDocumentStore(data_dir)
    try:
        account = store.get(REPUTATION, seller_id)
        events = account.body["events"]
        assert events[0]["type"] == "init"
        log = []
        for event in events[1:]:
            if event["type"] == "immediate":
                log.append(("immediate", event["magnitude"]))
            elif event["type"] == "accrue":
                log.append(("accrue", event["listing"], [m["magnitude"] for m in event["modifiers"]]))
            elif event["type"] == "settle":
                log.append(("settle", event["listing"]))
            elif event["type"] == "void":
                log.append(("void", event["listing"]))
        replayed = replay_credited_oracle(events[0]["points"], log)
        assert replayed == account.body["credited"] == 125
    finally:
        store.close()

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    report(
        capsys,
        f"end to end: register/verify/login/seed/list/search/request/resolve over plain HTTP "
        f"on 127.0.0.1 ended with the product gone, the request Sold, and the seller "
        f"credited 125 (ledger replay agrees) in {elapsed:.1f}s (< 30s); mock adapters only, "
        f"no other component involved",
    )
