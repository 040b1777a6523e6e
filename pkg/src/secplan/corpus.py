"""Document ingestion and deterministic chunking.

Source documents (design specs, ISA manuals, attack-knowledge notes) are
normalized to plain text and split into fixed-stride overlapping chunks.
Chunks are the unit of retrieval and citation: every downstream artifact
references chunk ids, so chunking must be bit-reproducible. The engine
ingests plain text only; PDF/HTML conversion happens before ingestion.

After normalization the body is treated as a sequence of characters and
``byte_length`` counts those characters; chunk spans are half-open
character ranges into the body.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum

from secplan.errors import DecodeFailure, EmptyDocument, InvalidChunkParams

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1600
DEFAULT_OVERLAP = 200


class DocumentKind(str, Enum):
    DESIGN_SPEC = "design_spec"
    ISA_MANUAL = "isa_manual"
    ATTACK_KNOWLEDGE = "attack_knowledge"


@dataclass(frozen=True)
class SourceDocument:
    """A normalized plain-text document."""

    doc_id: str
    kind: DocumentKind
    title: str
    body: str
    byte_length: int


@dataclass(frozen=True)
class Chunk:
    """A half-open span [start, end) of a parent document body."""

    chunk_id: str
    doc_id: str
    ordinal: int
    start: int
    end: int
    text: str


def _normalize(text: str) -> str:
    """Collapse CR/LF variants to LF and strip trailing whitespace per line."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in text.split("\n"))


def ingest_document(data: bytes | str, kind: DocumentKind, title: str) -> SourceDocument:
    """Decode, normalize, and identify a source document.

    ``doc_id`` is content-addressed (hash of kind, title, and normalized
    body), so re-ingesting identical content yields the identical document.
    Lossy UTF-8 decoding is permitted with a logged warning; real spec
    documents contain stray bytes and should not abort a pipeline.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            text = data.decode("utf-8", errors="replace")
            log.warning("document %r decoded lossily; replacement characters inserted", title)
    elif isinstance(data, str):
        text = data
    else:
        raise DecodeFailure(f"cannot decode content of type {type(data).__name__}")

    body = _normalize(text)
    if not body.strip():
        raise EmptyDocument(f"document {title!r} is empty after normalization")

    kind = DocumentKind(kind)
    digest = hashlib.sha256()
    digest.update(kind.value.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(title.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(body.encode("utf-8"))
    doc_id = "doc-" + digest.hexdigest()[:12]

    return SourceDocument(
        doc_id=doc_id,
        kind=kind,
        title=title,
        body=body,
        byte_length=len(body),
    )


def chunk_document(
    doc: SourceDocument,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
) -> list[Chunk]:
    """Split a document into fixed-stride overlapping chunks.

    Chunk i spans [i * (chunk_size - overlap), i * stride + chunk_size),
    clamped to the body length. Every chunk except possibly the last has
    length ``chunk_size``; spans cover the whole body with exactly
    ``overlap`` characters shared between consecutive chunks.
    """
    if chunk_size <= 0:
        raise InvalidChunkParams(f"chunk_size must be positive, got {chunk_size}")
    if overlap < 0 or overlap >= chunk_size:
        raise InvalidChunkParams(
            f"overlap must satisfy 0 <= overlap < chunk_size, got overlap={overlap} chunk_size={chunk_size}"
        )

    stride = chunk_size - overlap
    length = doc.byte_length
    chunks: list[Chunk] = []
    ordinal = 0
    while True:
        start = ordinal * stride
        end = min(start + chunk_size, length)
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}:{ordinal:04d}",
                doc_id=doc.doc_id,
                ordinal=ordinal,
                start=start,
                end=end,
                text=doc.body[start:end],
            )
        )
        if end >= length:
            break
        ordinal += 1
    return chunks


@dataclass
class Corpus:
    """In-memory collection of documents and their chunks.

    Adding the same content twice is a no-op (doc ids are content-addressed),
    which makes ingestion idempotent under session replay.
    """

    chunk_size: int = DEFAULT_CHUNK_SIZE
    overlap: int = DEFAULT_OVERLAP
    documents: dict[str, SourceDocument] = field(default_factory=dict)
    chunks: dict[str, Chunk] = field(default_factory=dict)
    _by_doc: dict[str, list[str]] = field(default_factory=dict)

    def add(self, doc: SourceDocument) -> list[Chunk]:
        """Add a document and chunk it; returns its chunks (existing or new)."""
        if doc.doc_id in self.documents:
            return [self.chunks[cid] for cid in self._by_doc[doc.doc_id]]
        chunks = chunk_document(doc, self.chunk_size, self.overlap)
        self.documents[doc.doc_id] = doc
        self._by_doc[doc.doc_id] = [c.chunk_id for c in chunks]
        for chunk in chunks:
            self.chunks[chunk.chunk_id] = chunk
        return chunks

    def kind_of(self, chunk_id: str) -> DocumentKind:
        return self.documents[self.chunks[chunk_id].doc_id].kind

    def docs_of_kind(self, kind: DocumentKind) -> list[SourceDocument]:
        return [d for d in self.documents.values() if d.kind == kind]

    def chunks_of_kind(self, kind: DocumentKind) -> list[Chunk]:
        out: list[Chunk] = []
        for doc_id, chunk_ids in self._by_doc.items():
            if self.documents[doc_id].kind == kind:
                out.extend(self.chunks[cid] for cid in chunk_ids)
        return out
