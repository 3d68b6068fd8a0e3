"""Durable on-disk state for a node data directory.

Layout:
    ledger.log     one canonical-JSON log entry per line, fsync'd on append
    decisions.log  one reward decision per line
    snapshot.json  canonical state serialization plus its state_hash
    .lock          exclusive-instance lock (flock)

The ledger log alone reconstructs the chain; snapshots are a convenience
export and are verified against their embedded hash on read.
"""

import fcntl
import json
import os
from pathlib import Path

from .chain import Chain, canonical_json, sha256_hex, state_payload
from .errors import CorruptLogError, LockHeldError

LEDGER_FILE = "ledger.log"
DECISIONS_FILE = "decisions.log"
SNAPSHOT_FILE = "snapshot.json"
LOCK_FILE = ".lock"


class DataDir:
    """Owns the lock and the append-only files of one node instance."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self._lock_fh = open(self.path / LOCK_FILE, "w")
        try:
            fcntl.flock(self._lock_fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            self._lock_fh.close()
            raise LockHeldError(f"another instance holds {self.path}")
        self._ledger_fh = open(self.path / LEDGER_FILE, "a", encoding="utf-8")
        self._decisions_fh = open(self.path / DECISIONS_FILE, "a", encoding="utf-8")

    def close(self):
        for fh in (self._ledger_fh, self._decisions_fh):
            fh.close()
        fcntl.flock(self._lock_fh, fcntl.LOCK_UN)
        self._lock_fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # --- appends ----------------------------------------------------------

    def _append_line(self, fh, obj: dict):
        fh.write(canonical_json(obj) + "\n")
        fh.flush()
        os.fsync(fh.fileno())

    def append_ledger_entry(self, entry: dict):
        self._append_line(self._ledger_fh, entry)

    def append_decision(self, decision):
        self._append_line(self._decisions_fh, decision.to_dict())

    # --- reads ------------------------------------------------------------

    def has_ledger(self) -> bool:
        ledger = self.path / LEDGER_FILE
        return ledger.exists() and ledger.stat().st_size > 0

    def read_ledger_entries(self) -> list[dict]:
        return read_ledger_file(self.path / LEDGER_FILE)

    # --- snapshots ----------------------------------------------------------

    def write_snapshot(self, chain: Chain):
        payload = state_payload(chain.state)
        doc = {"state": payload, "state_hash": sha256_hex(canonical_json(payload))}
        tmp = self.path / (SNAPSHOT_FILE + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(doc) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path / SNAPSHOT_FILE)

    def read_snapshot(self) -> dict:
        with open(self.path / SNAPSHOT_FILE, encoding="utf-8") as fh:
            doc = json.load(fh)
        if sha256_hex(canonical_json(doc["state"])) != doc["state_hash"]:
            raise CorruptLogError("snapshot hash mismatch")
        return doc


def read_ledger_file(path) -> list[dict]:
    """Parse a ledger log file into entries; bad JSON is corrupt-log."""
    entries = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError:
                    raise CorruptLogError(f"bad JSON on line {lineno}")
    except FileNotFoundError:
        raise CorruptLogError(f"no ledger log at {path}")
    return entries
