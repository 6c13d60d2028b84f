"""Minimal corpus readers for the two supported input formats.

Only doc ids and raw text are needed here; gold keyphrases stay with the
consumer pipeline.
"""

import json
from pathlib import Path


class CorpusReadError(Exception):
    pass


def read_jsonl(path):
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusReadError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "doc_id" not in rec or "text" not in rec:
                raise CorpusReadError(f"{path}:{lineno}: record needs doc_id and text")
            docs.append((str(rec["doc_id"]), rec["text"]))
    return docs


def read_inspec(path):
    path = Path(path)
    return [(p.stem, p.read_text(encoding="utf-8")) for p in sorted(path.glob("*.abstr"))]


def read_corpus(path, fmt: str = "jsonl"):
    path = Path(path)
    if not path.exists():
        raise CorpusReadError(f"corpus path does not exist: {path}")
    if fmt == "jsonl":
        return read_jsonl(path)
    if fmt in ("inspec", "inspec-style"):
        if not path.is_dir():
            raise CorpusReadError(f"inspec-style corpus must be a directory: {path}")
        return read_inspec(path)
    raise CorpusReadError(f"unknown corpus format: {fmt!r}")
