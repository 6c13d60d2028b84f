"""Word tokenization with character spans.

These rules mirror the consumer pipeline's tokenizer exactly (verified by
a shared fixture test): split on whitespace, peel leading and trailing
punctuation characters into separate tokens, lowercase the norm. Spans
index into the raw text so encoder subtokens can be aligned by offset.
"""

import re
import string

_PUNCT = frozenset(string.punctuation)
_CHUNK = re.compile(r"\S+")


def tokenize_with_spans(raw: str):
    """[(norm, start, end)] over raw text; raw[start:end].lower() == norm."""
    out = []
    for m in _CHUNK.finditer(raw):
        chunk, base = m.group(), m.start()
        lead = 0
        while lead < len(chunk) and chunk[lead] in _PUNCT:
            out.append((chunk[lead].lower(), base + lead, base + lead + 1))
            lead += 1
        trail = len(chunk)
        while trail > lead and chunk[trail - 1] in _PUNCT:
            trail -= 1
        if trail > lead:
            out.append((chunk[lead:trail].lower(), base + lead, base + trail))
        for i in range(trail, len(chunk)):
            out.append((chunk[i].lower(), base + i, base + i + 1))
    return out
