"""Exact cosine search against an independent brute-force oracle."""

from __future__ import annotations

import math
import random

import pytest

from secplan.corpus import DocumentKind
from secplan.errors import DimensionMismatch, DuplicateChunk, InvalidQuery
from secplan.retrieval import HashEmbeddingProvider, VectorIndex, embed_text


def cosine_oracle(a: list[float], b: list[float]) -> float:
    dot = math.fsum(x * y for x, y in zip(a, b))
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def brute_force(entries, query, k, kind_filter=None):
    """Independent scan: same scoring convention, same tie-break."""
    scored = [
        (cid, cosine_oracle(vec, query))
        for cid, vec, kind in entries
        if kind_filter is None or kind == kind_filter
    ]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]


def random_index(rng, max_entries=200, max_dim=16):
    dim = rng.randint(1, max_dim)
    count = rng.randint(1, max_entries)
    index = VectorIndex(dim)
    entries = []
    kinds = list(DocumentKind)
    for i in range(count):
        vec = [rng.uniform(-1, 1) for _ in range(dim)]
        kind = kinds[rng.randrange(len(kinds))]
        cid = f"c{i:05d}"
        index.add(cid, vec, kind)
        entries.append((cid, vec, kind))
    return index, entries, dim


class TestEmbedText:
    def test_dimension_contract(self):
        provider = HashEmbeddingProvider(dim=8)
        vec = embed_text("pmp read permission", provider)
        assert len(vec) == 8

    def test_determinism(self):
        provider = HashEmbeddingProvider(dim=16)
        a = embed_text("same text twice", provider)
        b = embed_text("same text twice", provider)
        assert a == b

    def test_empty_text_rejected(self):
        provider = HashEmbeddingProvider(dim=8)
        with pytest.raises(InvalidQuery):
            embed_text("   ", provider)

    def test_declared_dimension_enforced(self):
        class Lying:
            dim = 8

            def embed(self, text):
                return [0.0] * 5

        with pytest.raises(DimensionMismatch):
            embed_text("anything", Lying())


class TestIndexAdd:
    def test_add_to_empty(self):
        index = VectorIndex(4)
        index.add("a", [1, 0, 0, 0], DocumentKind.DESIGN_SPEC)
        assert len(index) == 1

    def test_duplicate_chunk(self):
        index = VectorIndex(2)
        index.add("a", [1, 0], DocumentKind.DESIGN_SPEC)
        with pytest.raises(DuplicateChunk):
            index.add("a", [0, 1], DocumentKind.DESIGN_SPEC)

    def test_dimension_mismatch(self):
        index = VectorIndex(8)
        with pytest.raises(DimensionMismatch):
            index.add("a", [0.0] * 7, DocumentKind.DESIGN_SPEC)


class TestSearch:
    def test_self_similarity(self):
        index = VectorIndex(3)
        index.add("unit", [0.0, 1.0, 0.0], DocumentKind.ISA_MANUAL)
        index.add("other", [1.0, 1.0, 0.0], DocumentKind.ISA_MANUAL)
        hits = index.search([0.0, 1.0, 0.0], k=1)
        assert hits[0].chunk_id == "unit"
        assert hits[0].rank == 1
        assert abs(hits[0].score - 1.0) <= 1e-9

    def test_k_zero(self):
        index = VectorIndex(2)
        index.add("a", [1, 0], DocumentKind.DESIGN_SPEC)
        assert index.search([1, 0], k=0) == []

    def test_negative_k_rejected(self):
        index = VectorIndex(2)
        with pytest.raises(InvalidQuery):
            index.search([1, 0], k=-1)

    def test_spec_example_five_vectors(self):
        # stored: (1,0) (0,1) (1,1) (-1,0) (2,0); query (1,0), k=3.
        # ranks: tie between (1,0) and (2,0) at 1.0 broken by id, then (1,1).
        vectors = {
            "va": [1.0, 0.0],
            "vb": [0.0, 1.0],
            "vc": [1.0, 1.0],
            "vd": [-1.0, 0.0],
            "ve": [2.0, 0.0],
        }
        index = VectorIndex(2)
        for cid, vec in vectors.items():
            index.add(cid, vec, DocumentKind.ATTACK_KNOWLEDGE)
        hits = index.search([1.0, 0.0], k=3)
        expected = brute_force([(c, v, None) for c, v in vectors.items()], [1.0, 0.0], 3)
        assert [h.chunk_id for h in hits] == [c for c, _ in expected] == ["va", "ve", "vc"]
        assert abs(hits[0].score - 1.0) <= 1e-9
        assert abs(hits[1].score - 1.0) <= 1e-9
        assert abs(hits[2].score - 1 / math.sqrt(2)) <= 1e-9

    def test_zero_norm_convention(self):
        index = VectorIndex(2)
        index.add("zero", [0.0, 0.0], DocumentKind.DESIGN_SPEC)
        index.add("unit", [1.0, 0.0], DocumentKind.DESIGN_SPEC)
        hits = index.search([1.0, 0.0], k=2)
        by_id = {h.chunk_id: h.score for h in hits}
        assert by_id["zero"] == 0.0
        # zero-norm query scores everything 0; order falls back to chunk_id
        hits = index.search([0.0, 0.0], k=2)
        assert [h.chunk_id for h in hits] == ["unit", "zero"]
        assert all(h.score == 0.0 for h in hits)

    def test_oracle_equivalence_randomized(self):
        rng = random.Random(1234)
        for _ in range(40):
            index, entries, dim = random_index(rng)
            query = [rng.uniform(-1, 1) for _ in range(dim)]
            k = rng.randint(0, 12)
            hits = index.search(query, k)
            expected = brute_force(entries, query, k)
            assert [h.chunk_id for h in hits] == [c for c, _ in expected]
            assert [h.rank for h in hits] == list(range(1, len(expected) + 1))
            for hit, (_, score) in zip(hits, expected):
                assert abs(hit.score - score) <= 1e-9

    def test_scale_invariance_of_ranking(self):
        rng = random.Random(77)
        index, entries, dim = random_index(rng, max_entries=100, max_dim=12)
        query = [rng.uniform(-1, 1) for _ in range(dim)]
        base = [h.chunk_id for h in index.search(query, k=10)]
        for scale in (0.25, 2.0, 1000.0):
            scaled = [scale * v for v in query]
            assert [h.chunk_id for h in index.search(scaled, k=10)] == base

    def test_filter_soundness(self):
        rng = random.Random(99)
        index, entries, dim = random_index(rng, max_entries=120, max_dim=8)
        query = [rng.uniform(-1, 1) for _ in range(dim)]
        kinds = {cid: kind for cid, _, kind in entries}
        for kind in DocumentKind:
            hits = index.search(query, k=50, kind_filter=kind)
            assert all(kinds[h.chunk_id] == kind for h in hits)
            expected = brute_force(entries, query, 50, kind_filter=kind)
            assert [h.chunk_id for h in hits] == [c for c, _ in expected]

    def test_query_dimension_checked(self):
        index = VectorIndex(4)
        with pytest.raises(DimensionMismatch):
            index.search([1.0, 0.0], k=1)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = random.Random(5)
        index, entries, dim = random_index(rng, max_entries=60, max_dim=10)
        path = tmp_path / "index.json"
        index.save(path)
        loaded = VectorIndex.load(path)
        assert loaded.dim == index.dim
        assert len(loaded) == len(index)
        query = [rng.uniform(-1, 1) for _ in range(dim)]
        orig = index.search(query, k=20)
        back = loaded.search(query, k=20)
        assert [(h.chunk_id, h.score, h.rank) for h in orig] == [
            (h.chunk_id, h.score, h.rank) for h in back
        ]

    def test_format_version_checked(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "vector-index/999", "dim": 2, "count": 0, "entries": []}')
        with pytest.raises(InvalidQuery):
            VectorIndex.load(path)
