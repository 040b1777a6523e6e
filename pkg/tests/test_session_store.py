"""Event log durability, replay, and phase discipline."""

from __future__ import annotations

import json

import pytest

from secplan import session_store as store
from secplan.errors import CorruptLog, StorageFailure, TerminalSession, UnknownSession
from secplan.session_store import SessionStore


@pytest.fixture
def sessions(tmp_path):
    return SessionStore(tmp_path)


class TestCreate:
    def test_fresh_session(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        assert session.phase == store.SETUP
        assert session.events == []

    def test_distinct_ids(self, sessions):
        a = sessions.create_session(store.FLOW_PHYSICAL)
        b = sessions.create_session(store.FLOW_PHYSICAL)
        assert a.session_id != b.session_id

    def test_flow_recorded(self, sessions):
        session = sessions.create_session(store.FLOW_SOFTWARE)
        loaded = sessions.load_session(session.session_id)
        assert loaded.flow == store.FLOW_SOFTWARE

    def test_unknown_flow_rejected(self, sessions):
        with pytest.raises(ValueError):
            sessions.create_session("sideways")


class TestAppend:
    def test_append_then_reload(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        session.append(store.ANSWER_RECORDED, {"bank": "threat", "query_id": "q1", "answer": "a"})
        loaded = sessions.load_session(session.session_id)
        assert len(loaded.events) == 1
        assert loaded.events[0].payload["answer"] == "a"

    def test_seq_continuity_100(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        for i in range(100):
            session.append(store.LLM_EXCHANGE, {"n": i})
        loaded = sessions.load_session(session.session_id)
        assert [e.seq for e in loaded.events] == list(range(1, 101))

    def test_terminal_session_rejects_appends(self, sessions):
        session = sessions.create_session(store.FLOW_SOFTWARE)
        session.set_phase(store.POLICY_MINING)
        session.set_phase(store.DEGRADED)
        with pytest.raises(TerminalSession):
            session.append(store.LLM_EXCHANGE, {})

    def test_unknown_kind_rejected(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        with pytest.raises(ValueError):
            session.append("made_up_kind", {})


class TestPhases:
    def test_forward_transitions(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        for phase in (
            store.KNOWLEDGE_EXTRACTION,
            store.INTERROGATION,
            store.ASSESSMENT,
            store.INTERROGATION,  # the loop alternates
            store.ASSESSMENT,
            store.CAPABILITY_GATHERING,
            store.PLAN_GENERATION,
            store.FINALIZED,
        ):
            session.set_phase(phase)
        assert session.phase == store.FINALIZED

    def test_illegal_transition(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        with pytest.raises(ValueError):
            session.set_phase(store.PLAN_GENERATION)

    def test_same_phase_is_noop(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        session.set_phase(store.KNOWLEDGE_EXTRACTION)
        n = len(session.events)
        session.set_phase(store.KNOWLEDGE_EXTRACTION)
        assert len(session.events) == n

    def test_degraded_reachable_from_anywhere(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        session.set_phase(store.KNOWLEDGE_EXTRACTION)
        session.set_phase(store.DEGRADED)
        assert session.phase == store.DEGRADED


class TestLoad:
    def test_unknown_session(self, sessions):
        with pytest.raises(UnknownSession):
            sessions.load_session("s0000deadbeef")

    def test_replay_equals_in_memory(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        session.set_phase(store.KNOWLEDGE_EXTRACTION)
        session.append(store.BANK_UPDATED, {"bank": "threat", "action": "initialized", "queries": []})
        session.set_phase(store.INTERROGATION)
        session.append(store.QUERY_PRESENTED, {"bank": "threat", "query_id": "q1", "text": "?"})
        loaded = sessions.load_session(session.session_id)
        assert loaded.phase == session.phase
        assert [(e.seq, e.kind) for e in loaded.events] == [
            (e.seq, e.kind) for e in session.events
        ]

    def test_truncated_log_corrupt(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        session.append(store.LLM_EXCHANGE, {"n": 1})
        session.append(store.LLM_EXCHANGE, {"n": 2})
        raw = session.log_path.read_text()
        session.log_path.write_text(raw[: len(raw) - 10])  # torn tail line
        with pytest.raises(CorruptLog) as err:
            sessions.load_session(session.session_id)
        assert err.value.details.get("seq") == 2

    def test_seq_gap_corrupt(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        session.append(store.LLM_EXCHANGE, {"n": 1})
        lines = session.log_path.read_text().splitlines()
        gapped = json.loads(lines[0])
        gapped["seq"] = 7
        session.log_path.write_text(json.dumps(gapped) + "\n")
        with pytest.raises(CorruptLog):
            sessions.load_session(session.session_id)


class TestWriterLock:
    def test_lock_file_created_and_released(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        session.append(store.LLM_EXCHANGE, {})
        assert session._lock_path.exists()
        session.release()
        assert not session._lock_path.exists()

    def test_live_foreign_lock_blocks(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        # simulate another live writer: PID 1 is always running
        session._lock_path.write_text("1")
        with pytest.raises(StorageFailure):
            session.append(store.LLM_EXCHANGE, {})

    def test_stale_lock_stolen(self, sessions):
        session = sessions.create_session(store.FLOW_PHYSICAL)
        session._lock_path.write_text("999999999")  # dead pid
        session.append(store.LLM_EXCHANGE, {})
        assert len(session.events) == 1


class TestArtifacts:
    def test_write_and_read(self, sessions):
        session = sessions.create_session(store.FLOW_SOFTWARE)
        session.write_artifact("policy_list.json", b"{}\n")
        assert session.read_artifact("policy_list.json") == b"{}\n"
        assert session.read_artifact("missing.json") is None
