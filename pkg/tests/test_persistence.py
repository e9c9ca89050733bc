import json
import struct
import threading

import pytest

from campusmarket.errors import AlreadyExists, NotFound, VersionConflict
from campusmarket.persistence import FileDocumentStore, MemoryDocumentStore


@pytest.fixture(params=["memory", "file"])
def store(request, tmp_path):
    if request.param == "memory":
        yield MemoryDocumentStore()
    else:
        s = FileDocumentStore(tmp_path / "data")
        yield s
        s.close()


def test_put_get_round_trip(store):
    store.put("things", "a", {"x": 1, "nested": {"y": [1, 2]}})
    doc = store.get("things", "a")
    assert doc.body == {"x": 1, "nested": {"y": [1, 2]}}
    assert doc.version == 0


def test_get_unknown_is_none(store):
    assert store.get("things", "missing") is None


def test_put_twice_bumps_version(store):
    store.put("things", "a", {"x": 1})
    doc = store.put("things", "a", {"x": 2})
    assert doc.version == 1
    assert store.get("things", "a").body == {"x": 2}


def test_returned_documents_are_isolated_copies(store):
    body = {"x": [1]}
    store.put("things", "a", body)
    body["x"].append(2)
    doc = store.get("things", "a")
    assert doc.body == {"x": [1]}
    doc.body["x"].append(3)
    assert store.get("things", "a").body == {"x": [1]}


def test_insert_refuses_existing(store):
    store.insert("things", "a", {"x": 1})
    with pytest.raises(AlreadyExists):
        store.insert("things", "a", {"x": 2})
    assert store.get("things", "a").body == {"x": 1}


def test_query_filter_sort_limit(store):
    for i, price in enumerate([30, 10, 20, 40]):
        store.put("products", f"p{i}", {"price": price, "cat": "a" if price < 25 else "b"})
    docs = store.query("products", where=lambda b: b["cat"] == "a")
    assert {d.body["price"] for d in docs} == {10, 20}
    docs = store.query("products", sort_by="price", descending=True, limit=1)
    assert docs[0].body["price"] == 40
    assert store.query("empty") == []


def test_query_tie_break_is_id_order(store):
    for doc_id in ["c", "a", "b"]:
        store.put("t", doc_id, {"k": 7})
    assert [d.id for d in store.query("t", sort_by="k")] == ["a", "b", "c"]


def test_cas_success_and_conflict(store):
    store.put("t", "a", {"n": 0})
    doc = store.get("t", "a")
    store.compare_and_set("t", "a", doc.version, {"n": 1})
    with pytest.raises(VersionConflict):
        store.compare_and_set("t", "a", doc.version, {"n": 2})
    assert store.get("t", "a").body == {"n": 1}


def test_cas_missing_doc(store):
    with pytest.raises(NotFound):
        store.compare_and_set("t", "ghost", 0, {"n": 1})


def test_delete_idempotent_and_fresh_version(store):
    store.put("t", "a", {"n": 0})
    store.put("t", "a", {"n": 1})
    store.delete("t", "a")
    assert store.get("t", "a") is None
    store.delete("t", "a")  # second delete is a no-op
    store.put("t", "a", {"n": 2})
    assert store.get("t", "a").version == 0


def test_delete_if_version(store):
    store.put("t", "a", {"n": 0})
    with pytest.raises(VersionConflict):
        store.delete_if_version("t", "a", 5)
    store.delete_if_version("t", "a", 0)
    assert store.get("t", "a") is None
    with pytest.raises(NotFound):
        store.delete_if_version("t", "a", 0)


def test_collection_isolation(store):
    store.put("a", "k", {"v": 1})
    store.put("b", "k", {"v": 2})
    store.delete("a", "k")
    assert store.get("b", "k").body == {"v": 2}


def test_blob_round_trip(store):
    payload = b"\x89PNG fake bytes" * 100
    ref = store.put_blob(payload)
    assert store.get_blob(ref) == payload
    assert store.get_blob("0" * 64) is None
    # same content converges on the same key
    assert store.put_blob(payload) == ref


def test_cas_two_racers_one_wins(store):
    store.put("t", "a", {"n": 0})
    version = store.get("t", "a").version
    outcomes = []
    barrier = threading.Barrier(2)

    def racer():
        barrier.wait()
        try:
            store.compare_and_set("t", "a", version, {"n": 1})
            outcomes.append("win")
        except VersionConflict:
            outcomes.append("lose")

    threads = [threading.Thread(target=racer) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(outcomes) == ["lose", "win"]


def test_cas_chain_no_lost_updates(store):
    store.put("t", "counter", {"n": 0})

    def bump_until(target):
        while True:
            doc = store.get("t", "counter")
            if doc.body["n"] >= target:
                return
            try:
                store.compare_and_set("t", "counter", doc.version, {"n": doc.body["n"] + 1})
            except VersionConflict:
                continue

    threads = [threading.Thread(target=bump_until, args=(50,)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert store.get("t", "counter").body["n"] == 50


# --- file-backed specifics ---


def test_restart_reloads_documents(tmp_path):
    root = tmp_path / "data"
    store = FileDocumentStore(root)
    store.put("users", "u1", {"name": "a"})
    store.put("users", "u1", {"name": "b"})
    store.put("products", "p1", {"price": 5})
    store.delete("products", "p1")
    ref = store.put_blob(b"photo")
    store.close()

    reopened = FileDocumentStore(root)
    assert reopened.get("users", "u1").body == {"name": "b"}
    assert reopened.get("users", "u1").version == 1
    assert reopened.get("products", "p1") is None
    assert reopened.get_blob(ref) == b"photo"
    reopened.close()


def test_restart_round_trip_many(tmp_path):
    import random

    rng = random.Random(42)
    root = tmp_path / "data"
    store = FileDocumentStore(root)
    expect = {}
    for i in range(300):
        doc_id = f"d{rng.randrange(120)}"
        body = {"i": i, "r": rng.random()}
        store.put("bulk", doc_id, body)
        expect[doc_id] = body
        if rng.random() < 0.1:
            victim = rng.choice(sorted(expect))
            store.delete("bulk", victim)
            del expect[victim]
    store.close()

    reopened = FileDocumentStore(root)
    docs = {d.id: d.body for d in reopened.query("bulk")}
    assert docs == expect
    reopened.close()


def test_truncated_journal_tail_is_dropped(tmp_path):
    root = tmp_path / "data"
    store = FileDocumentStore(root)
    store.put("t", "keep", {"ok": True})
    store.close()

    journal = root / "t.journal"
    record = json.dumps({"op": "put", "id": "torn", "version": 0, "body": {}}).encode()
    with open(journal, "ab") as fh:
        fh.write(struct.pack(">I", len(record)))
        fh.write(record[: len(record) // 2])  # simulate a torn write

    reopened = FileDocumentStore(root)
    assert reopened.get("t", "keep").body == {"ok": True}
    assert reopened.get("t", "torn") is None
    reopened.close()


def test_startup_compaction_rewrites_journal(tmp_path):
    root = tmp_path / "data"
    store = FileDocumentStore(root)
    for i in range(50):
        store.put("t", "hot", {"i": i})
    store.close()
    size_before = (root / "t.journal").stat().st_size

    reopened = FileDocumentStore(root)
    reopened.close()
    size_after = (root / "t.journal").stat().st_size
    assert size_after < size_before
    final = FileDocumentStore(root)
    assert final.get("t", "hot").body == {"i": 49}
    assert final.get("t", "hot").version == 49
    final.close()


def test_healthcheck(tmp_path):
    store = FileDocumentStore(tmp_path / "data")
    assert store.healthcheck() is True
    store.close()
    assert MemoryDocumentStore().healthcheck() is True
