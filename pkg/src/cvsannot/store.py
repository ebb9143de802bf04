"""Embedded transactional record store with optimistic versioning and an audit log.

Records are JSON documents addressed by (kind, id). Every mutation carries the
version the writer last read; a mismatch raises VersionConflictError instead of
silently clobbering a concurrent write. Each mutation also appends exactly one
audit entry inside the same transaction, so the log and the data cannot drift.

Backed by sqlite3 (WAL, synchronous=FULL): acknowledged commits survive a
process kill, and snapshots are plain read transactions.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import NotFoundError, StorageError, VersionConflictError

_SCHEMA = """
CREATE TABLE IF NOT EXISTS records (
    kind    TEXT NOT NULL,
    id      TEXT NOT NULL,
    version INTEGER NOT NULL,
    doc     TEXT NOT NULL,
    PRIMARY KEY (kind, id)
);
CREATE TABLE IF NOT EXISTS audit_log (
    seq           INTEGER PRIMARY KEY AUTOINCREMENT,
    at            TEXT NOT NULL,
    actor         TEXT NOT NULL,
    action        TEXT NOT NULL,
    kind          TEXT NOT NULL,
    record_id     TEXT NOT NULL,
    prior_version INTEGER,
    new_version   INTEGER
);
"""


@dataclass(frozen=True)
class Record:
    kind: str
    record_id: str
    doc: dict[str, Any]
    version: int


@dataclass(frozen=True)
class AuditEntry:
    seq: int
    at: str
    actor: str
    action: str
    kind: str
    record_id: str
    prior_version: int | None
    new_version: int | None


class RecordStore:
    """Versioned document store over a single sqlite file (or ":memory:")."""

    def __init__(self, path: str | Path = ":memory:") -> None:
        self._path = str(path)
        self._lock = threading.RLock()
        try:
            self._conn = sqlite3.connect(
                self._path, check_same_thread=False, isolation_level=None
            )
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=FULL")
            self._conn.executescript(_SCHEMA)
        except sqlite3.Error as exc:
            raise StorageError(f"cannot open store at {self._path}: {exc}") from exc

    @property
    def path(self) -> str:
        return self._path

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- writes ------------------------------------------------------------

    def put(
        self,
        kind: str,
        record_id: str,
        doc: dict[str, Any],
        *,
        expected_version: int | None,
        actor: str,
    ) -> Record:
        """Insert (expected_version=None) or update (expected_version=current).

        Returns the stored record with its new version. Raises
        VersionConflictError when the record already exists on insert, or when
        the stored version is not the expected one on update.
        """
        payload = json.dumps(doc, sort_keys=True)
        with self._lock:
            self._begin()
            try:
                current = self._current_version(kind, record_id)
                if expected_version is None:
                    if current is not None:
                        raise VersionConflictError(
                            f"{kind}/{record_id} already exists at version {current}"
                        )
                    new_version = 1
                    self._conn.execute(
                        "INSERT INTO records (kind, id, version, doc) VALUES (?, ?, ?, ?)",
                        (kind, record_id, new_version, payload),
                    )
                    action = "create"
                else:
                    if current is None:
                        raise NotFoundError(f"{kind}/{record_id} does not exist")
                    if current != expected_version:
                        raise VersionConflictError(
                            f"{kind}/{record_id}: expected version "
                            f"{expected_version}, found {current}"
                        )
                    new_version = current + 1
                    self._conn.execute(
                        "UPDATE records SET version = ?, doc = ? WHERE kind = ? AND id = ?",
                        (new_version, payload, kind, record_id),
                    )
                    action = "update"
                self._audit(actor, action, kind, record_id, current, new_version)
                self._conn.execute("COMMIT")
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise
        return Record(kind, record_id, doc, new_version)

    def delete(
        self, kind: str, record_id: str, *, expected_version: int, actor: str
    ) -> None:
        with self._lock:
            self._begin()
            try:
                current = self._current_version(kind, record_id)
                if current is None:
                    raise NotFoundError(f"{kind}/{record_id} does not exist")
                if current != expected_version:
                    raise VersionConflictError(
                        f"{kind}/{record_id}: expected version "
                        f"{expected_version}, found {current}"
                    )
                self._conn.execute(
                    "DELETE FROM records WHERE kind = ? AND id = ?", (kind, record_id)
                )
                self._audit(actor, "delete", kind, record_id, current, None)
                self._conn.execute("COMMIT")
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise

    # -- reads -------------------------------------------------------------

    def get(self, kind: str, record_id: str) -> Record:
        with self._lock:
            row = self._conn.execute(
                "SELECT version, doc FROM records WHERE kind = ? AND id = ?",
                (kind, record_id),
            ).fetchone()
        if row is None:
            raise NotFoundError(f"{kind}/{record_id} does not exist")
        return Record(kind, record_id, json.loads(row[1]), row[0])

    def find(self, kind: str, record_id: str) -> Record | None:
        try:
            return self.get(kind, record_id)
        except NotFoundError:
            return None

    def scan(self, kind: str) -> list[Record]:
        """All records of a kind, ordered by id."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT id, version, doc FROM records WHERE kind = ? ORDER BY id",
                (kind,),
            ).fetchall()
        return [Record(kind, r[0], json.loads(r[2]), r[1]) for r in rows]

    def snapshot(self) -> dict[str, dict[str, Record]]:
        """Consistent point-in-time copy of every record, keyed kind → id."""
        with self._lock:
            self._conn.execute("BEGIN")
            try:
                rows = self._conn.execute(
                    "SELECT kind, id, version, doc FROM records ORDER BY kind, id"
                ).fetchall()
            finally:
                self._conn.execute("COMMIT")
        snap: dict[str, dict[str, Record]] = {}
        for kind, record_id, version, doc in rows:
            snap.setdefault(kind, {})[record_id] = Record(
                kind, record_id, json.loads(doc), version
            )
        return snap

    def audit(
        self, kind: str | None = None, record_id: str | None = None
    ) -> list[AuditEntry]:
        query = (
            "SELECT seq, at, actor, action, kind, record_id, prior_version, "
            "new_version FROM audit_log"
        )
        clauses, params = [], []
        if kind is not None:
            clauses.append("kind = ?")
            params.append(kind)
        if record_id is not None:
            clauses.append("record_id = ?")
            params.append(record_id)
        if clauses:
            query += " WHERE " + " AND ".join(clauses)
        query += " ORDER BY seq"
        with self._lock:
            rows = self._conn.execute(query, params).fetchall()
        return [AuditEntry(*row) for row in rows]

    # -- internals -----------------------------------------------------------

    def _begin(self) -> None:
        # IMMEDIATE takes the write lock up front so read-then-write pairs
        # are atomic against other processes, not just other threads.
        self._conn.execute("BEGIN IMMEDIATE")

    def _current_version(self, kind: str, record_id: str) -> int | None:
        row = self._conn.execute(
            "SELECT version FROM records WHERE kind = ? AND id = ?",
            (kind, record_id),
        ).fetchone()
        return None if row is None else row[0]

    def _audit(
        self,
        actor: str,
        action: str,
        kind: str,
        record_id: str,
        prior: int | None,
        new: int | None,
    ) -> None:
        self._conn.execute(
            "INSERT INTO audit_log (at, actor, action, kind, record_id, "
            "prior_version, new_version) VALUES (?, ?, ?, ?, ?, ?, ?)",
            (
                time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                actor,
                action,
                kind,
                record_id,
                prior,
                new,
            ),
        )
