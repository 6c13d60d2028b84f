"""Encode documents and emit token-aligned contextual vectors as JSONL.

For each document the encoder runs over the raw text; its subtokens are
aligned to word tokens by character offsets and pooled (mean by default)
into one vector per word token. The output is the JSONL contract the
consumer pipeline reads: a leading {"meta": ...} record describing this
producer, then one {"doc_id", "tokens", "vectors"} record per document.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .corpusio import read_corpus
from .tokenize import tokenize_with_spans

log = logging.getLogger(__name__)

POOLINGS = ("mean", "first")


class ExportError(Exception):
    pass


@dataclass
class ExportConfig:
    corpus_path: str
    corpus_format: str = "jsonl"
    model: str = "bert-base-uncased"
    layer: str = "last"          # "last", "avg", or an integer index
    pooling: str = "mean"
    batch_size: int = 8
    max_length: int = 512
    out_path: str = "contextual.jsonl"

    def __post_init__(self):
        if self.pooling not in POOLINGS:
            raise ExportError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.layer not in ("last", "avg"):
            try:
                int(self.layer)
            except (TypeError, ValueError):
                raise ExportError(f"layer must be 'last', 'avg', or an integer, "
                                  f"got {self.layer!r}") from None


def load_encoder(model_id):
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id, use_fast=True)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ExportError(f"cannot load encoder {model_id!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _select_layer(outputs, layer):
    if layer == "last":
        return outputs.last_hidden_state
    hidden = outputs.hidden_states
    if layer == "avg":
        return torch.stack(hidden).mean(dim=0)
    return hidden[int(layer)]


def _pool(subvecs, pooling):
    if pooling == "first":
        return subvecs[0]
    return subvecs.mean(axis=0)


def align_and_pool(hidden, offsets, special_mask, word_spans, pooling):
    """One pooled vector per word span; zero-subtoken spans flagged.

    hidden: (n_subtokens, dim); offsets: (n_subtokens, 2) character spans;
    word_spans: [(start, end)] from the word tokenizer.
    """
    vectors = np.zeros((len(word_spans), hidden.shape[1]), dtype=np.float64)
    misses = []
    sub = [(int(a), int(b), i) for i, ((a, b), special)
           in enumerate(zip(offsets, special_mask))
           if not special and b > a]
    for w, (start, end) in enumerate(word_spans):
        rows = [i for a, b, i in sub if a < end and b > start]
        if rows:
            vectors[w] = _pool(hidden[rows], pooling)
        else:
            misses.append(w)
    return vectors, misses


def export(config: ExportConfig) -> Path:
    """Run the exporter; returns the output path.

    Alignment failures (tokens with no overlapping subtokens, e.g. beyond
    the encoder's length limit) yield zero vectors and are listed in a
    sidecar log next to the output file.
    """
    docs = read_corpus(config.corpus_path, config.corpus_format)
    tokenizer, model = load_encoder(config.model)
    need_hidden = config.layer != "last"
    out_path = Path(config.out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = out_path.with_name(out_path.name + ".tmp")
    sidecar = []
    dim = None
    with open(tmp_path, "w", encoding="utf-8") as fh:
        meta = {
            "producer": "keyfuse-exporter",
            "model": config.model,
            "layer": config.layer,
            "pooling": config.pooling,
        }
        fh.write(json.dumps({"meta": meta}) + "\n")
        for start in range(0, len(docs), config.batch_size):
            batch = docs[start:start + config.batch_size]
            texts = [text for _, text in batch]
            enc = tokenizer(
                texts,
                return_offsets_mapping=True,
                return_special_tokens_mask=True,
                padding=True,
                truncation=True,
                max_length=config.max_length,
                return_tensors="pt",
            )
            offsets = enc.pop("offset_mapping").numpy()
            special = enc.pop("special_tokens_mask").numpy()
            attention = enc["attention_mask"].numpy()
            with torch.no_grad():
                outputs = model(**enc, output_hidden_states=need_hidden)
            hidden = _select_layer(outputs, config.layer).numpy()
            for d, (doc_id, text) in enumerate(batch):
                n_sub = int(attention[d].sum())
                words = tokenize_with_spans(text)
                vectors, misses = align_and_pool(
                    hidden[d, :n_sub], offsets[d, :n_sub], special[d, :n_sub],
                    [(s, e) for _, s, e in words], config.pooling)
                dim = vectors.shape[1] if dim is None else dim
                for w in misses:
                    sidecar.append(f"{doc_id}\t{words[w][0]}\t{w}")
                fh.write(json.dumps({
                    "doc_id": doc_id,
                    "tokens": [norm for norm, _, _ in words],
                    "vectors": [[float(x) for x in row] for row in vectors],
                }) + "\n")
    os.replace(tmp_path, out_path)
    if sidecar:
        log_path = out_path.with_name(out_path.name + ".misses.log")
        log_path.write_text("\n".join(sidecar) + "\n", encoding="utf-8")
        log.warning("%d token(s) had no overlapping subtokens; see %s",
                    len(sidecar), log_path)
    log.info("wrote %d records (dim %s) -> %s", len(docs), dim, out_path)
    return out_path
