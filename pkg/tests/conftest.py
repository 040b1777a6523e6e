"""Shared fixtures: fixture corpus paths and configured engines."""

from __future__ import annotations

from pathlib import Path

import pytest

from secplan.engine import Engine, load_config

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

ATTACK_NOTES = [
    ("attack_side_channel.txt", "side-channel notes"),
    ("attack_fault_injection.txt", "fault injection notes"),
    ("attack_reverse_engineering.txt", "reverse engineering notes"),
    ("attack_ic_cloning.txt", "IC cloning notes"),
    ("attack_invasive.txt", "invasive attack notes"),
]


@pytest.fixture
def flow1_engine(tmp_path):
    return Engine(tmp_path / "root", load_config(FIXTURES / "config_flow1.json"))


@pytest.fixture
def flow2_engine(tmp_path):
    return Engine(tmp_path / "root", load_config(FIXTURES / "config_flow2.json"))


def ingest_attack_notes(engine: Engine, session) -> None:
    for filename, title in ATTACK_NOTES:
        engine.ingest(session, (FIXTURES / filename).read_bytes(), "attack_knowledge", title)


def ingest_flow2_docs(engine: Engine, session) -> None:
    engine.ingest(
        session, (FIXTURES / "mini_design_spec.txt").read_bytes(), "design_spec", "mini design spec"
    )
    engine.ingest(session, (FIXTURES / "mini_isa.txt").read_bytes(), "isa_manual", "mini ISA")


@pytest.fixture
def flow1_session(flow1_engine):
    session = flow1_engine.create_session("physical_supply_chain")
    ingest_attack_notes(flow1_engine, session)
    return session


@pytest.fixture
def flow2_session(flow2_engine):
    session = flow2_engine.create_session("software_exploitable")
    ingest_flow2_docs(flow2_engine, session)
    return session
