"""Embedded document store with named collections and optimistic versioning.

Two interchangeable backends:

* ``MemoryDocumentStore``: dict-backed, used by most tests.
* ``FileDocumentStore``: one append-only journal per collection
  (``<root>/<collection>.journal``, length-prefixed JSON records), compacted
  on startup. Photo blobs live in a sidecar directory keyed by content hash
  (``<root>/blobs/<sha256>``).

``compare_and_set`` on the document version is the only mutation primitive
upper layers use for contended state; every operation here runs under one
store lock, so per-document CAS is linearizable. Bodies are deep-copied on
the way in and out, so callers never share references with the store.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import AlreadyExists, NotFound, VersionConflict

_LEN = struct.Struct(">I")


@dataclass
class Document:
    id: str
    body: dict
    version: int


def _sort_key(sort_by: str | None) -> Callable[[Document], Any]:
    if sort_by is None:
        return lambda doc: (doc.id,)
    return lambda doc: (doc.body.get(sort_by), doc.id)


class MemoryDocumentStore:
    """In-memory backend; the reference semantics for the file store."""

    def __init__(self):
        self._lock = threading.RLock()
        self._collections: dict[str, dict[str, Document]] = {}
        self._blobs: dict[str, bytes] = {}

    # journal hook points; the memory store has nothing to persist
    def _record_put(self, collection: str, doc: Document) -> None:
        pass

    def _record_delete(self, collection: str, doc_id: str) -> None:
        pass

    def put(self, collection: str, doc_id: str, body: dict) -> Document:
        """Upsert; version starts at 0 and increments on every overwrite."""
        with self._lock:
            docs = self._collections.setdefault(collection, {})
            prior = docs.get(doc_id)
            version = 0 if prior is None else prior.version + 1
            doc = Document(doc_id, copy.deepcopy(body), version)
            docs[doc_id] = doc
            self._record_put(collection, doc)
            return copy.deepcopy(doc)

    def insert(self, collection: str, doc_id: str, body: dict) -> Document:
        """Create-only put: raises AlreadyExists instead of overwriting."""
        with self._lock:
            docs = self._collections.setdefault(collection, {})
            if doc_id in docs:
                raise AlreadyExists(f"{collection}/{doc_id}")
            return self.put(collection, doc_id, body)

    def get(self, collection: str, doc_id: str) -> Document | None:
        with self._lock:
            doc = self._collections.get(collection, {}).get(doc_id)
            return copy.deepcopy(doc) if doc is not None else None

    def query(
        self,
        collection: str,
        where: Callable[[dict], bool] | None = None,
        sort_by: str | None = None,
        descending: bool = False,
        limit: int | None = None,
    ) -> list[Document]:
        """Snapshot query; deterministic order (sort field, then id)."""
        with self._lock:
            docs = [
                copy.deepcopy(d)
                for d in self._collections.get(collection, {}).values()
                if where is None or where(d.body)
            ]
        docs.sort(key=_sort_key(sort_by), reverse=descending)
        if limit is not None:
            docs = docs[:limit]
        return docs

    def compare_and_set(
        self, collection: str, doc_id: str, expected_version: int, new_body: dict
    ) -> Document:
        with self._lock:
            docs = self._collections.get(collection, {})
            current = docs.get(doc_id)
            if current is None:
                raise NotFound(f"{collection}/{doc_id}")
            if current.version != expected_version:
                raise VersionConflict(
                    f"{collection}/{doc_id}: expected v{expected_version}, at v{current.version}"
                )
            doc = Document(doc_id, copy.deepcopy(new_body), current.version + 1)
            docs[doc_id] = doc
            self._record_put(collection, doc)
            return copy.deepcopy(doc)

    def delete(self, collection: str, doc_id: str) -> None:
        """Idempotent; a later put of the same id starts back at version 0."""
        with self._lock:
            docs = self._collections.get(collection, {})
            if doc_id in docs:
                del docs[doc_id]
                self._record_delete(collection, doc_id)

    def delete_if_version(self, collection: str, doc_id: str, expected_version: int) -> None:
        """Delete guarded by version, for delete-vs-CAS races."""
        with self._lock:
            docs = self._collections.get(collection, {})
            current = docs.get(doc_id)
            if current is None:
                raise NotFound(f"{collection}/{doc_id}")
            if current.version != expected_version:
                raise VersionConflict(
                    f"{collection}/{doc_id}: expected v{expected_version}, at v{current.version}"
                )
            del docs[doc_id]
            self._record_delete(collection, doc_id)

    def collections(self) -> list[str]:
        with self._lock:
            return sorted(self._collections)

    # --- blobs ---

    def put_blob(self, data: bytes) -> str:
        key = hashlib.sha256(data).hexdigest()
        with self._lock:
            self._blobs[key] = bytes(data)
        return key

    def get_blob(self, key: str) -> bytes | None:
        with self._lock:
            return self._blobs.get(key)

    def healthcheck(self) -> bool:
        return True

    def close(self) -> None:
        pass


class FileDocumentStore(MemoryDocumentStore):
    """Journal-backed store. Each write is appended and flushed immediately;
    the whole journal set is replayed and compacted when the store opens.
    Single-process use only (the journals are not advisory-locked)."""

    def __init__(self, root: str | os.PathLike):
        super().__init__()
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(exist_ok=True)
        self._files: dict[str, Any] = {}
        self._replay_all()
        self._compact_all()

    # --- journal plumbing ---

    def _journal_path(self, collection: str) -> Path:
        return self.root / f"{collection}.journal"

    def _handle(self, collection: str):
        fh = self._files.get(collection)
        if fh is None:
            fh = open(self._journal_path(collection), "ab")
            self._files[collection] = fh
        return fh

    def _append(self, collection: str, record: dict) -> None:
        payload = json.dumps(record, separators=(",", ":")).encode("utf-8")
        fh = self._handle(collection)
        fh.write(_LEN.pack(len(payload)) + payload)
        fh.flush()

    def _record_put(self, collection: str, doc: Document) -> None:
        self._append(collection, {"op": "put", "id": doc.id, "version": doc.version, "body": doc.body})

    def _record_delete(self, collection: str, doc_id: str) -> None:
        self._append(collection, {"op": "delete", "id": doc_id})

    def _replay_all(self) -> None:
        for path in sorted(self.root.glob("*.journal")):
            collection = path.stem
            docs: dict[str, Document] = {}
            for record in _read_journal(path):
                if record["op"] == "put":
                    docs[record["id"]] = Document(record["id"], record["body"], record["version"])
                elif record["op"] == "delete":
                    docs.pop(record["id"], None)
            self._collections[collection] = docs

    def _compact_all(self) -> None:
        for collection, docs in self._collections.items():
            tmp = self._journal_path(collection).with_suffix(".journal.tmp")
            with open(tmp, "wb") as fh:
                for doc in docs.values():
                    payload = json.dumps(
                        {"op": "put", "id": doc.id, "version": doc.version, "body": doc.body},
                        separators=(",", ":"),
                    ).encode("utf-8")
                    fh.write(_LEN.pack(len(payload)) + payload)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self._journal_path(collection))

    # --- blobs on disk ---

    def put_blob(self, data: bytes) -> str:
        key = hashlib.sha256(data).hexdigest()
        path = self.root / "blobs" / key
        with self._lock:
            if not path.exists():
                tmp = path.with_suffix(".tmp")
                tmp.write_bytes(data)
                os.replace(tmp, path)
        return key

    def get_blob(self, key: str) -> bytes | None:
        path = self.root / "blobs" / key
        try:
            return path.read_bytes()
        except FileNotFoundError:
            return None

    def healthcheck(self) -> bool:
        probe = self.root / ".healthcheck"
        try:
            probe.write_bytes(b"ok")
            probe.unlink()
            return True
        except OSError:
            return False

    def close(self) -> None:
        with self._lock:
            for fh in self._files.values():
                fh.close()
            self._files.clear()


def _read_journal(path: Path) -> Iterable[dict]:
    """Yield records until EOF; a truncated tail record is dropped."""
    with open(path, "rb") as fh:
        while True:
            header = fh.read(_LEN.size)
            if len(header) < _LEN.size:
                return
            (length,) = _LEN.unpack(header)
            payload = fh.read(length)
            if len(payload) < length:
                return
            yield json.loads(payload.decode("utf-8"))
