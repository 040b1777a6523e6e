"""Durable, resumable session state via an append-only event log.

A session is a directory holding an immutable ``meta.json`` (id, flow,
creation time), one line-delimited JSON event log, and exported artifact
files. Current state is a pure fold over the log: replaying the log
reconstructs the session exactly, which is what makes crash-resume and
audit ("who answered what, which prompt produced which verdict") work.
Events are never mutated or deleted; a fresh session has an empty log and
phase ``setup``.

Log format (session-log/1): one JSON object per line with keys
``seq`` (1-based, strictly increasing, gap-free), ``kind`` (closed set),
``payload`` (kind-specific), ``ts`` (ISO-8601 UTC). Durability: every
append is flushed and fsynced before being acknowledged.
"""

from __future__ import annotations

import json
import logging
import os
import time
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from secplan.errors import CorruptLog, StorageFailure, TerminalSession, UnknownSession

log = logging.getLogger(__name__)

LOG_FORMAT = "session-log/1"

# Flows
FLOW_PHYSICAL = "physical_supply_chain"
FLOW_SOFTWARE = "software_exploitable"
FLOWS = (FLOW_PHYSICAL, FLOW_SOFTWARE)

# Phases
SETUP = "setup"
KNOWLEDGE_EXTRACTION = "knowledge_extraction"
INTERROGATION = "interrogation"
ASSESSMENT = "assessment"
POLICY_MINING = "policy_mining"
CAPABILITY_GATHERING = "capability_gathering"
PLAN_GENERATION = "plan_generation"
FINALIZED = "finalized"
DEGRADED = "degraded"

TERMINAL_PHASES = {FINALIZED, DEGRADED}

# Event kinds (closed set)
DOCUMENT_INGESTED = "document_ingested"
QUERY_PRESENTED = "query_presented"
ANSWER_RECORDED = "answer_recorded"
LLM_EXCHANGE = "llm_exchange"
THREAT_UPDATED = "threat_updated"
POLICY_EMITTED = "policy_emitted"
BANK_UPDATED = "bank_updated"
PLAN_EMITTED = "plan_emitted"
PHASE_CHANGED = "phase_changed"

EVENT_KINDS = {
    DOCUMENT_INGESTED,
    QUERY_PRESENTED,
    ANSWER_RECORDED,
    LLM_EXCHANGE,
    THREAT_UPDATED,
    POLICY_EMITTED,
    BANK_UPDATED,
    PLAN_EMITTED,
    PHASE_CHANGED,
}

# Interrogation and assessment alternate (one assessment round per answered
# query); everything else moves strictly forward. Degraded is reachable from
# any non-terminal phase.
_ALLOWED_TRANSITIONS = {
    FLOW_PHYSICAL: {
        (SETUP, KNOWLEDGE_EXTRACTION),
        (KNOWLEDGE_EXTRACTION, INTERROGATION),
        (INTERROGATION, ASSESSMENT),
        (ASSESSMENT, INTERROGATION),
        (INTERROGATION, CAPABILITY_GATHERING),
        (ASSESSMENT, CAPABILITY_GATHERING),
        (CAPABILITY_GATHERING, PLAN_GENERATION),
        (PLAN_GENERATION, FINALIZED),
    },
    FLOW_SOFTWARE: {
        (SETUP, POLICY_MINING),
        (POLICY_MINING, CAPABILITY_GATHERING),
        (CAPABILITY_GATHERING, PLAN_GENERATION),
        (PLAN_GENERATION, FINALIZED),
    },
}


def canonical_json_bytes(doc: dict) -> bytes:
    """Canonical artifact serialization: sorted keys, 2-space indent, LF end.

    Artifacts deliberately contain no timestamps or session ids, so two runs
    over the same inputs produce byte-identical exports.
    """
    return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def _pid_alive(pid: int) -> bool:
    if pid <= 0:
        return False
    try:
        os.kill(pid, 0)
    except (ProcessLookupError, PermissionError):
        return False
    except OSError:
        return False
    return True


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    payload: dict
    ts: str

    def to_line(self) -> str:
        return json.dumps(
            {"seq": self.seq, "kind": self.kind, "payload": self.payload, "ts": self.ts},
            ensure_ascii=False,
        )


class Session:
    """One engineer engagement: an event log, a phase, and artifact files."""

    def __init__(self, session_id: str, flow: str, directory: Path):
        self.session_id = session_id
        self.flow = flow
        self.directory = directory
        self.phase = SETUP
        self.events: list[Event] = []
        self._lock_held = False

    # ------------------------------------------------------------------
    # Paths
    # ------------------------------------------------------------------

    @property
    def log_path(self) -> Path:
        return self.directory / "events.jsonl"

    @property
    def meta_path(self) -> Path:
        return self.directory / "meta.json"

    @property
    def artifacts_dir(self) -> Path:
        return self.directory / "artifacts"

    @property
    def _lock_path(self) -> Path:
        return self.directory / "writer.lock"

    # ------------------------------------------------------------------
    # Writer lock (one writer per session; stale locks from dead pids are
    # stolen so a crashed run never wedges resume)
    # ------------------------------------------------------------------

    def _acquire_lock(self) -> None:
        if self._lock_held:
            return
        while True:
            try:
                fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                try:
                    holder = int(self._lock_path.read_text(encoding="utf-8").strip() or "-1")
                except (OSError, ValueError):
                    holder = -1
                if holder == os.getpid() or not _pid_alive(holder):
                    try:
                        self._lock_path.unlink()
                    except FileNotFoundError:
                        pass
                    continue
                raise StorageFailure(
                    f"session {self.session_id} is locked by another writer (pid {holder})"
                )
            except OSError as exc:
                raise StorageFailure(f"cannot create writer lock: {exc}") from exc
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            self._lock_held = True
            return

    def release(self) -> None:
        if self._lock_held:
            try:
                self._lock_path.unlink()
            except FileNotFoundError:
                pass
            self._lock_held = False

    # ------------------------------------------------------------------
    # Event log
    # ------------------------------------------------------------------

    def append(self, kind: str, payload: dict) -> Event:
        """Durably append one event; acknowledged only after fsync."""
        if self.phase in TERMINAL_PHASES:
            raise TerminalSession(
                f"session {self.session_id} is {self.phase}; no further events accepted"
            )
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        self._acquire_lock()
        event = Event(
            seq=len(self.events) + 1,
            kind=kind,
            payload=payload,
            ts=datetime.fromtimestamp(time.time(), tz=timezone.utc).isoformat(),
        )
        try:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(event.to_line() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"cannot append to session log: {exc}") from exc
        self.events.append(event)
        if kind == PHASE_CHANGED:
            self.phase = payload["phase"]
        return event

    def set_phase(self, phase: str, **extra) -> None:
        """Record a phase transition; same-phase calls are no-ops."""
        if phase == self.phase:
            return
        if phase != DEGRADED and (self.phase, phase) not in _ALLOWED_TRANSITIONS[self.flow]:
            raise ValueError(
                f"illegal phase transition {self.phase} -> {phase} for flow {self.flow}"
            )
        self.append(PHASE_CHANGED, {"phase": phase, **extra})

    def events_of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    # ------------------------------------------------------------------
    # Artifacts (sibling files; exports are derived from folded state)
    # ------------------------------------------------------------------

    def write_artifact(self, name: str, data: bytes) -> Path:
        self.artifacts_dir.mkdir(parents=True, exist_ok=True)
        path = self.artifacts_dir / name
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise StorageFailure(f"cannot write artifact {name}: {exc}") from exc
        return path

    def read_artifact(self, name: str) -> bytes | None:
        path = self.artifacts_dir / name
        if not path.exists():
            return None
        return path.read_bytes()


class SessionStore:
    """Directory of per-session event logs."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)

    def create_session(self, flow: str) -> Session:
        if flow not in FLOWS:
            raise ValueError(f"unknown flow {flow!r}; expected one of {FLOWS}")
        session_id = "s" + uuid.uuid4().hex[:12]
        directory = self.sessions_dir / session_id
        directory.mkdir(parents=True)
        meta = {
            "format": LOG_FORMAT,
            "session_id": session_id,
            "flow": flow,
            "created": datetime.fromtimestamp(time.time(), tz=timezone.utc).isoformat(),
        }
        (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        (directory / "events.jsonl").touch()
        return Session(session_id, flow, directory)

    def load_session(self, session_id: str) -> Session:
        """Reconstruct a session by folding its persisted log."""
        directory = self.sessions_dir / session_id
        meta_path = directory / "meta.json"
        if not meta_path.exists():
            raise UnknownSession(f"no session {session_id!r} under {self.sessions_dir}")
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            flow = meta["flow"]
        except (json.JSONDecodeError, KeyError, OSError) as exc:
            raise CorruptLog(f"session {session_id}: unreadable meta.json: {exc}") from exc

        events: list[Event] = []
        log_path = directory / "events.jsonl"
        if log_path.exists():
            with open(log_path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        raw = json.loads(line)
                        event = Event(
                            seq=raw["seq"], kind=raw["kind"], payload=raw["payload"], ts=raw["ts"]
                        )
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        raise CorruptLog(
                            f"session {session_id}: unreadable event at line {lineno}: {exc}",
                            details={"seq": lineno},
                        ) from exc
                    if event.seq != len(events) + 1:
                        raise CorruptLog(
                            f"session {session_id}: seq {event.seq} at line {lineno}, "
                            f"expected {len(events) + 1}",
                            details={"seq": event.seq},
                        )
                    if event.kind not in EVENT_KINDS:
                        raise CorruptLog(
                            f"session {session_id}: unknown event kind {event.kind!r} at seq {event.seq}",
                            details={"seq": event.seq},
                        )
                    events.append(event)

        session = Session(session_id, flow, directory)
        session.events = events
        for event in events:
            if event.kind == PHASE_CHANGED:
                session.phase = event.payload["phase"]
        return session

    def list_sessions(self) -> list[str]:
        return sorted(
            p.name for p in self.sessions_dir.iterdir() if (p / "meta.json").exists()
        )
