"""Institution-local storage: entities, content-addressed blobs, audit chain.

Layout under the storage root:

    entities.db          embedded sqlite store, records keyed (kind, id)
    blobs/<first2>/<digest>   audio blobs named by sha256 of their bytes
    audit.log            line-delimited canonical-JSON audit events

The audit log is append-only and hash-chained:
    chain_digest = sha256(prev_digest || payload_digest || seq_be64)
where payload_digest covers the full canonical event body and the genesis
prev_digest is 32 zero bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from . import model
from .errors import EmptyBlob, InvariantViolation, NotFound, UnknownUser

GENESIS_DIGEST = "0" * 64


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp: str
    actor_id: str
    action: str
    entity_kind: str
    entity_id: str
    payload: Dict[str, Any]
    payload_digest: str
    prev_digest: str
    chain_digest: str


@dataclass(frozen=True)
class BlobRef:
    address: str
    size_bytes: int
    media_format: str


def _payload_digest(event_body: Dict[str, Any]) -> str:
    canonical = json.dumps(event_body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _chain_digest(prev_digest: str, payload_digest: str, seq: int) -> str:
    data = bytes.fromhex(prev_digest) + bytes.fromhex(payload_digest) + seq.to_bytes(8, "big")
    return hashlib.sha256(data).hexdigest()


def _event_body(event_fields: Dict[str, Any]) -> Dict[str, Any]:
    # Everything except the digests themselves is covered by payload_digest,
    # so a flip in any field breaks verification.
    return {
        k: event_fields[k]
        for k in ("seq", "timestamp", "actor_id", "action", "entity_kind", "entity_id", "payload")
    }


class Store:
    """Durable store; safe for concurrent use from multiple threads.

    Entity writes are serialized per process by a lock over a single sqlite
    connection; audit appends hold a dedicated lock so seq assignment and the
    file write are atomic (single-writer discipline).
    """

    def __init__(self, root: Union[str, Path], fsync_audit: bool = False):
        # flush-to-OS on every audit append survives a process kill; fsync
        # additionally survives power loss at a heavy latency cost
        self._fsync_audit = fsync_audit
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(exist_ok=True)
        self._db = sqlite3.connect(self.root / "entities.db", check_same_thread=False)
        self._db.execute("PRAGMA journal_mode=WAL")
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS entities ("
            "kind TEXT NOT NULL, id TEXT NOT NULL, body TEXT NOT NULL, "
            "PRIMARY KEY (kind, id))"
        )
        self._db.commit()
        self._db_lock = threading.Lock()
        self._audit_lock = threading.Lock()
        self._audit_path = self.root / "audit.log"
        self._last_seq, self._last_chain = self._scan_audit_tail()

    def close(self) -> None:
        self._db.close()

    # -- blobs --------------------------------------------------------------

    def _blob_path(self, address: str) -> Path:
        return self.root / "blobs" / address[:2] / address

    def put_blob(self, data: bytes, media_format: str = "wav") -> BlobRef:
        if not data:
            raise EmptyBlob("refusing to store empty blob")
        address = hashlib.sha256(data).hexdigest()
        path = self._blob_path(address)
        if not path.exists():
            path.parent.mkdir(exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return BlobRef(address=address, size_bytes=len(data), media_format=media_format)

    def get_blob(self, address: str) -> bytes:
        path = self._blob_path(address)
        if not path.exists():
            raise NotFound("blob", address)
        return path.read_bytes()

    def blob_count(self) -> int:
        return sum(1 for p in (self.root / "blobs").glob("*/*") if p.is_file())

    # -- entities -----------------------------------------------------------

    def save_entity(self, entity: Any) -> None:
        problems = model.validate_entity(entity)
        if problems:
            raise InvariantViolation(f"{entity.store_kind} {entity.id}: {'; '.join(problems)}")
        body = model.to_canonical_json(entity)
        with self._db_lock:
            self._db.execute(
                "INSERT OR REPLACE INTO entities (kind, id, body) VALUES (?, ?, ?)",
                (entity.store_kind, entity.id, body),
            )
            self._db.commit()

    def save_entities(self, entities) -> None:
        """Bulk insert with a single commit; used by fixture builders."""
        rows = []
        for entity in entities:
            problems = model.validate_entity(entity)
            if problems:
                raise InvariantViolation(
                    f"{entity.store_kind} {entity.id}: {'; '.join(problems)}"
                )
            rows.append((entity.store_kind, entity.id, model.to_canonical_json(entity)))
        with self._db_lock:
            self._db.executemany(
                "INSERT OR REPLACE INTO entities (kind, id, body) VALUES (?, ?, ?)", rows
            )
            self._db.commit()

    def load_entity(self, kind: str, entity_id: str) -> Any:
        with self._db_lock:
            row = self._db.execute(
                "SELECT body FROM entities WHERE kind = ? AND id = ?", (kind, entity_id)
            ).fetchone()
        if row is None:
            raise NotFound(kind, entity_id)
        return model.entity_from_json(kind, row[0])

    def has_entity(self, kind: str, entity_id: str) -> bool:
        with self._db_lock:
            row = self._db.execute(
                "SELECT 1 FROM entities WHERE kind = ? AND id = ?", (kind, entity_id)
            ).fetchone()
        return row is not None

    def iter_entities(self, kind: str) -> Iterator[Any]:
        with self._db_lock:
            rows = self._db.execute(
                "SELECT body FROM entities WHERE kind = ?", (kind,)
            ).fetchall()
        for (body,) in rows:
            yield model.entity_from_json(kind, body)

    def list_sessions(self, owner_id: str, descending: bool = True) -> List[model.Session]:
        """Owner's sessions in chronological order, newest first by default."""
        if not self.has_entity("user", owner_id):
            raise UnknownUser(owner_id)
        sessions = [s for s in self.iter_entities("session") if s.owner_id == owner_id]
        sessions.sort(key=lambda s: (s.created_at, s.id), reverse=descending)
        return sessions

    # -- templates ----------------------------------------------------------
    # Stored under the reserved entity kind "template"; builtins are code,
    # never rows, so custom templates can never shadow a builtin id.

    def save_template(self, template) -> None:
        from . import templates as tmpl

        problems = tmpl.validate_template(template)
        if problems:
            raise InvariantViolation(f"template {template.id}: {', '.join(problems)}")
        if template.kind == "builtin" or any(
            b.id == template.id for b in tmpl.builtin_templates()
        ):
            raise InvariantViolation("builtin templates are immutable")
        with self._db_lock:
            self._db.execute(
                "INSERT OR REPLACE INTO entities (kind, id, body) VALUES (?, ?, ?)",
                ("template", template.id, tmpl.template_to_json(template)),
            )
            self._db.commit()

    def load_template(self, template_id: str):
        from . import templates as tmpl

        for builtin in tmpl.builtin_templates():
            if builtin.id == template_id:
                return builtin
        with self._db_lock:
            row = self._db.execute(
                "SELECT body FROM entities WHERE kind = 'template' AND id = ?",
                (template_id,),
            ).fetchone()
        if row is None:
            raise NotFound("template", template_id)
        return tmpl.template_from_dict(json.loads(row[0]))

    def list_templates(self, owner_id: Optional[str] = None) -> List[Any]:
        from . import templates as tmpl

        result = list(tmpl.builtin_templates())
        with self._db_lock:
            rows = self._db.execute(
                "SELECT body FROM entities WHERE kind = 'template'"
            ).fetchall()
        custom = [tmpl.template_from_dict(json.loads(body)) for (body,) in rows]
        if owner_id is not None:
            custom = [t for t in custom if t.owner_id == owner_id]
        custom.sort(key=lambda t: (t.created_at, t.id))
        return result + custom

    # -- audit chain --------------------------------------------------------

    def _scan_audit_tail(self) -> Tuple[int, str]:
        if not self._audit_path.exists():
            return 0, GENESIS_DIGEST
        last = None
        with self._audit_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    last = line
        if last is None:
            return 0, GENESIS_DIGEST
        rec = json.loads(last)
        return rec["seq"], rec["chain_digest"]

    def append_audit(
        self,
        actor_id: str,
        action: str,
        entity_kind: str,
        entity_id: str,
        payload: Optional[Dict[str, Any]] = None,
    ) -> AuditEvent:
        payload = payload or {}
        with self._audit_lock:
            seq = self._last_seq + 1
            body = {
                "seq": seq,
                "timestamp": model.utc_now(),
                "actor_id": actor_id,
                "action": action,
                "entity_kind": entity_kind,
                "entity_id": entity_id,
                "payload": payload,
            }
            pd = _payload_digest(body)
            cd = _chain_digest(self._last_chain, pd, seq)
            record = dict(body, payload_digest=pd, prev_digest=self._last_chain, chain_digest=cd)
            line = json.dumps(record, sort_keys=True, separators=(",", ":"))
            with self._audit_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                if self._fsync_audit:
                    os.fsync(fh.fileno())
            self._last_seq = seq
            self._last_chain = cd
        return AuditEvent(**{k: record[k] for k in AuditEvent.__dataclass_fields__})

    def read_audit(self) -> List[AuditEvent]:
        events = []
        if not self._audit_path.exists():
            return events
        with self._audit_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                events.append(AuditEvent(**{k: rec[k] for k in AuditEvent.__dataclass_fields__}))
        return events

    def verify_audit_chain(self) -> Optional[int]:
        """None when the whole chain verifies; else the first violating seq."""
        if not self._audit_path.exists():
            return None
        prev = GENESIS_DIGEST
        expected_seq = 1
        with self._audit_path.open("rb") as fh:
            for raw in fh:
                if not raw.strip():
                    continue
                try:
                    rec = json.loads(raw.decode("utf-8"))
                    body = _event_body(rec)
                    pd = rec["payload_digest"]
                    cd = rec["chain_digest"]
                    stored_prev = rec["prev_digest"]
                except Exception:
                    return expected_seq
                if rec.get("seq") != expected_seq:
                    return expected_seq
                if stored_prev != prev:
                    return expected_seq
                if _payload_digest(body) != pd:
                    return expected_seq
                if _chain_digest(prev, pd, expected_seq) != cd:
                    return expected_seq
                prev = cd
                expected_seq += 1
        return None

    # -- export -------------------------------------------------------------

    def export_archive(self, dest: Union[str, Path]) -> Path:
        """Portable snapshot: audit log plus per-kind entity dumps."""
        dest = Path(dest)
        dest.mkdir(parents=True, exist_ok=True)
        if self._audit_path.exists():
            (dest / "audit.log").write_bytes(self._audit_path.read_bytes())
        else:
            (dest / "audit.log").write_text("")
        for kind in ("session", "recording", "transcript", "note", "user", "facility"):
            lines = [model.to_canonical_json(e) for e in self.iter_entities(kind)]
            (dest / f"{kind}s.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
        return dest
