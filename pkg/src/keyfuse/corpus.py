"""Corpus loading, tokenization, and BIO tag sequences for keyphrase labeling."""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

log = logging.getLogger(__name__)

_PUNCT_CHARS = frozenset(string.punctuation)


class CorpusError(Exception):
    """Unreadable path or malformed corpus record."""


def _load_stopwords() -> frozenset:
    text = resources.files("keyfuse").joinpath("data/stopwords_en.txt").read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


STOPWORDS = _load_stopwords()


class BioTag(str, Enum):
    B = "B"
    I = "I"
    O = "O"


# Fixed class order used by taggers and serialized models.
TAG_ORDER = (BioTag.B, BioTag.I, BioTag.O)


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    position: int
    is_stopword: bool = False
    is_punct: bool = False


@dataclass
class Document:
    doc_id: str
    tokens: list
    gold_phrases: set = field(default_factory=set)
    bio: list | None = None


def tokenize(raw: str) -> list:
    """Whitespace-split `raw`; peel leading/trailing punctuation into separate tokens.

    Internal punctuation (hyphens, apostrophes) stays attached. Each token gets a
    lowercased norm, a 0-based position, and stopword/punctuation flags.
    """
    surfaces = []
    for chunk in raw.split():
        lead = []
        while chunk and chunk[0] in _PUNCT_CHARS:
            lead.append(chunk[0])
            chunk = chunk[1:]
        trail = []
        while chunk and chunk[-1] in _PUNCT_CHARS:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        surfaces.extend(lead)
        if chunk:
            surfaces.append(chunk)
        surfaces.extend(reversed(trail))

    tokens = []
    for pos, surface in enumerate(surfaces):
        norm = surface.lower()
        is_punct = all(c in _PUNCT_CHARS for c in surface)
        is_stop = (not is_punct) and norm in STOPWORDS
        tokens.append(Token(surface, norm, pos, is_stop, is_punct))
    return tokens


def normalize_phrase(phrase: str) -> str:
    """Canonical form of a phrase: token norms joined by single spaces."""
    return " ".join(t.norm for t in tokenize(phrase))


def make_document(doc_id: str, text: str, gold_phrases=()) -> Document:
    return Document(doc_id=doc_id, tokens=tokenize(text), gold_phrases=set(gold_phrases))


def _load_jsonl(path: Path) -> list:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            doc_id = rec.get("doc_id")
            if not doc_id or "text" not in rec:
                raise CorpusError(
                    f"{path}:{lineno}: record needs doc_id and text (doc_id={doc_id!r})"
                )
            keys = rec.get("keyphrases", [])
            if not isinstance(keys, list):
                raise CorpusError(f"{path}:{lineno}: keyphrases must be a list (doc_id={doc_id!r})")
            docs.append(make_document(str(doc_id), rec["text"], keys))
    return docs


def _load_inspec(path: Path) -> list:
    docs = []
    for abstr in sorted(path.glob("*.abstr")):
        text = abstr.read_text(encoding="utf-8")
        keys_path = abstr.with_suffix(".uncontr")
        keys = set()
        if keys_path.exists():
            raw = keys_path.read_text(encoding="utf-8").replace("\n", " ").replace("\t", " ")
            keys = {k.strip() for k in raw.split(";") if k.strip()}
        else:
            log.warning("no keyphrase file for %s", abstr.name)
        docs.append(make_document(abstr.stem, text, keys))
    return docs


def load_corpus(path, fmt: str = "jsonl") -> list:
    """Load a corpus as a list of tokenized Documents with gold keyphrases.

    fmt="jsonl": one record per line with doc_id, text, keyphrases.
    fmt="inspec": directory of *.abstr files with sibling *.uncontr files
    (semicolon-separated keyphrases).
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus path does not exist: {path}")
    if fmt == "jsonl":
        docs = _load_jsonl(path)
    elif fmt in ("inspec", "inspec-style"):
        if not path.is_dir():
            raise CorpusError(f"inspec-style corpus must be a directory: {path}")
        docs = _load_inspec(path)
    else:
        raise CorpusError(f"unknown corpus format: {fmt!r}")
    if not docs:
        log.warning("corpus at %s is empty", path)
    return docs


def corpus_stats(docs) -> dict:
    """Document count, gold-key totals/means, token mean, absent-gold fraction."""
    n = len(docs)
    total_gold = sum(len(d.gold_phrases) for d in docs)
    total_tokens = sum(len(d.tokens) for d in docs)
    absent = 0
    for d in docs:
        present = present_gold_phrases(d)
        absent += len(d.gold_phrases) - len(present)
    return {
        "documents": n,
        "gold_keys": total_gold,
        "gold_keys_per_doc": total_gold / n if n else 0.0,
        "tokens_per_doc": total_tokens / n if n else 0.0,
        "absent_gold_fraction": absent / total_gold if total_gold else 0.0,
    }


def _phrase_norms(phrase: str) -> tuple:
    return tuple(t.norm for t in tokenize(phrase))


def _find_matches(doc: Document):
    """All occurrences of gold phrases as (start, length, normalized phrase)."""
    norms = [t.norm for t in doc.tokens]
    matches = []
    seen = set()
    for phrase in doc.gold_phrases:
        ptoks = _phrase_norms(phrase)
        if not ptoks or ptoks in seen:
            continue
        seen.add(ptoks)
        plen = len(ptoks)
        for start in range(len(norms) - plen + 1):
            if tuple(norms[start:start + plen]) == ptoks:
                matches.append((start, plen, " ".join(ptoks)))
    return matches


def encode_bio(doc: Document) -> list:
    """Tag tokens B/I/O from gold phrases by exact case-folded token matching.

    Longest match first, leftmost on ties; overlapping later matches are
    dropped. Gold phrases absent from the token stream produce no tags.
    """
    tags = [BioTag.O] * len(doc.tokens)
    taken = [False] * len(doc.tokens)
    matches = sorted(_find_matches(doc), key=lambda m: (-m[1], m[0]))
    matched_phrases = set()
    for start, length, phrase in matches:
        if any(taken[start:start + length]):
            continue
        tags[start] = BioTag.B
        for i in range(start + 1, start + length):
            tags[i] = BioTag.I
        for i in range(start, start + length):
            taken[i] = True
        matched_phrases.add(phrase)

    n_absent = len({" ".join(_phrase_norms(p)) for p in doc.gold_phrases if _phrase_norms(p)}) \
        - len(matched_phrases)
    if n_absent:
        log.debug("doc %s: %d gold phrase(s) absent from text", doc.doc_id, n_absent)
    return tags


def present_gold_phrases(doc: Document) -> set:
    """Normalized gold phrases that occur in the token stream."""
    return {phrase for _, _, phrase in _find_matches(doc)}


def decode_bio(tags, tokens) -> set:
    """Turn maximal B(I)* runs into a set of normalized phrases.

    An I with no preceding B/I is repaired as B (logged). Raises on length
    mismatch.
    """
    if len(tags) != len(tokens):
        raise ValueError(f"tag/token length mismatch: {len(tags)} vs {len(tokens)}")
    phrases = set()
    run = []
    for tag, tok in zip(tags, tokens):
        if tag == BioTag.B:
            if run:
                phrases.add(" ".join(run))
            run = [tok.norm]
        elif tag == BioTag.I:
            if run:
                run.append(tok.norm)
            else:
                log.debug("position %d: I without preceding B/I, repaired as B", tok.position)
                run = [tok.norm]
        else:
            if run:
                phrases.add(" ".join(run))
            run = []
    if run:
        phrases.add(" ".join(run))
    return phrases
