"""Align contextual text vectors with documents and concatenate them with
structure vectors into one representation per token."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class ContextualFileError(Exception):
    pass


@dataclass
class ContextualRecord:
    doc_id: str
    tokens: list                # token norms, aligned with corpus tokenization
    vectors: np.ndarray         # (len(tokens), dim_text)


@dataclass
class ContextualEmbeddingFile:
    records: dict               # doc_id -> ContextualRecord
    dim_text: int


@dataclass
class FusedSequence:
    doc_id: str
    vectors: np.ndarray         # (n_tokens, dim_text + dim_struct)
    has_text: np.ndarray        # (n_tokens,) bool
    has_struct: np.ndarray      # (n_tokens,) bool
    dim_text: int
    dim_struct: int


def read_contextual(path, docs=None) -> ContextualEmbeddingFile:
    """Read a JSONL contextual-embedding file and validate it.

    Each line: {"doc_id": ..., "tokens": [...], "vectors": [[...], ...]}.
    A producer may prepend a {"meta": {...}} record describing itself
    (pooling, model, ...); such records are skipped. Checks one vector per
    token, a constant width across the file, and finite entries. When
    `docs` (doc_id -> Document) is given, token norms are checked against
    the corpus tokenization.
    """
    path = Path(path)
    if not path.exists():
        raise ContextualFileError(f"contextual embedding file does not exist: {path}")
    records = {}
    dim_text = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ContextualFileError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if set(rec.keys()) == {"meta"}:
                continue
            doc_id = rec.get("doc_id")
            tokens = rec.get("tokens")
            vectors = rec.get("vectors")
            if doc_id is None or tokens is None or vectors is None:
                raise ContextualFileError(
                    f"{path}:{lineno}: record needs doc_id, tokens, vectors")
            if len(vectors) != len(tokens):
                bad = min(len(vectors), len(tokens))
                raise ContextualFileError(
                    f"{path}:{lineno}: doc {doc_id!r}: {len(tokens)} tokens but "
                    f"{len(vectors)} vectors (first problem at token index {bad})")
            arr = np.asarray(vectors, dtype=np.float64)
            if arr.size and arr.ndim != 2:
                raise ContextualFileError(
                    f"{path}:{lineno}: doc {doc_id!r}: ragged vector widths")
            if len(tokens) == 0:
                arr = arr.reshape(0, dim_text if dim_text is not None else 0)
            if dim_text is None and len(tokens):
                dim_text = arr.shape[1]
            if len(tokens) and arr.shape[1] != dim_text:
                raise ContextualFileError(
                    f"{path}:{lineno}: doc {doc_id!r}: vector width {arr.shape[1]} "
                    f"!= file width {dim_text}")
            if not np.all(np.isfinite(arr)):
                raise ContextualFileError(
                    f"{path}:{lineno}: doc {doc_id!r}: non-finite vector entries")
            if docs is not None:
                if doc_id not in docs:
                    raise ContextualFileError(
                        f"{path}:{lineno}: doc {doc_id!r} not in the corpus")
                expected = [t.norm for t in docs[doc_id].tokens]
                if list(tokens) != expected:
                    pos = next((i for i, (a, b) in enumerate(zip(tokens, expected)) if a != b),
                               min(len(tokens), len(expected)))
                    raise ContextualFileError(
                        f"{path}:{lineno}: doc {doc_id!r}: token mismatch at position {pos} "
                        f"(file has {len(tokens)} tokens, corpus has {len(expected)})")
            if doc_id in records:
                raise ContextualFileError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            records[doc_id] = ContextualRecord(doc_id=doc_id, tokens=list(tokens), vectors=arr)
    return ContextualEmbeddingFile(records=records, dim_text=dim_text or 0)


def write_contextual(path, records):
    """Write ContextualRecords as the JSONL contract read_contextual expects."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "doc_id": rec.doc_id,
                "tokens": list(rec.tokens),
                "vectors": [[float(x) for x in row] for row in rec.vectors],
            }) + "\n")


def fuse(doc, record: ContextualRecord | None, struct=None) -> FusedSequence:
    """Concatenate per-token text vectors with per-word structure vectors.

    Text block first, structure block second. Tokens absent from the graph
    vocabulary get a zero structure block and has_struct=False. Either side
    may be omitted (single-modality baselines), not both.
    """
    if record is None and struct is None:
        raise ValueError("fuse needs a contextual record, a structure matrix, or both")
    n = len(doc.tokens)
    if record is not None:
        if len(record.tokens) != n:
            raise ContextualFileError(
                f"doc {doc.doc_id!r}: record has {len(record.tokens)} tokens, "
                f"document has {n}")
        for i, tok in enumerate(doc.tokens):
            if record.tokens[i] != tok.norm:
                raise ContextualFileError(
                    f"doc {doc.doc_id!r}: token mismatch at position {i}: "
                    f"{record.tokens[i]!r} != {tok.norm!r}")
        dim_text = record.vectors.shape[1] if n else 0
        text_block = np.asarray(record.vectors, dtype=np.float64).reshape(n, dim_text)
        has_text = np.ones(n, dtype=bool)
    else:
        dim_text = 0
        text_block = np.zeros((n, 0))
        has_text = np.zeros(n, dtype=bool)

    if struct is not None:
        dim_struct = struct.dim
        struct_block = np.zeros((n, dim_struct))
        has_struct = np.zeros(n, dtype=bool)
        for i, tok in enumerate(doc.tokens):
            vec = struct.get(tok.norm)
            if vec is not None:
                struct_block[i] = vec
                has_struct[i] = True
    else:
        dim_struct = 0
        struct_block = np.zeros((n, 0))
        has_struct = np.zeros(n, dtype=bool)

    return FusedSequence(
        doc_id=doc.doc_id,
        vectors=np.concatenate([text_block, struct_block], axis=1),
        has_text=has_text,
        has_struct=has_struct,
        dim_text=dim_text,
        dim_struct=dim_struct,
    )


def fuse_static(doc, text_emb=None, struct_emb=None) -> FusedSequence:
    """Fused sequence from static embedding lookups on both sides (used by
    the static-text baseline); tokens missing from a matrix get zeros."""
    if text_emb is None and struct_emb is None:
        raise ValueError("fuse_static needs at least one embedding matrix")
    n = len(doc.tokens)
    blocks, flags, dims = [], [], []
    for emb in (text_emb, struct_emb):
        if emb is None:
            blocks.append(np.zeros((n, 0)))
            flags.append(np.zeros(n, dtype=bool))
            dims.append(0)
            continue
        block = np.zeros((n, emb.dim))
        has = np.zeros(n, dtype=bool)
        for i, tok in enumerate(doc.tokens):
            vec = emb.get(tok.norm)
            if vec is not None:
                block[i] = vec
                has[i] = True
        blocks.append(block)
        flags.append(has)
        dims.append(emb.dim)
    return FusedSequence(doc_id=doc.doc_id, vectors=np.concatenate(blocks, axis=1),
                         has_text=flags[0], has_struct=flags[1],
                         dim_text=dims[0], dim_struct=dims[1])
