import json
from pathlib import Path

import pytest
import torch
from transformers import BertConfig, BertModel

HUB_WORDS = [f"hub{i:02d}" for i in range(30)]
FILLER_WORDS = [f"fill{i:03d}" for i in range(120)]
# words absent from the wordpiece vocab as a whole, forcing subword splits
SPLIT_WORDS = ["jumping", "walking", "parsing", "tokenizing"]
SPLIT_PIECES = ["jump", "walk", "pars", "token", "##izing", "##ing"]


def build_vocab():
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += HUB_WORDS + FILLER_WORDS + SPLIT_PIECES
    vocab += ["the", "a", "of", ",", ".", ";"]
    return vocab


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory) -> Path:
    """A small seeded encoder saved locally so tests run offline."""
    model_dir = tmp_path_factory.mktemp("tiny-encoder")
    vocab = build_vocab()
    (model_dir / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=256,
    )
    torch.manual_seed(7)
    BertModel(config).save_pretrained(model_dir)
    return model_dir


def hub_documents(n_docs, seed, n_fillers=20):
    """Docs whose gold keyphrases are hub words living in a dense region,
    with stopwords, punctuation, and split-prone words mixed in."""
    import numpy as np

    rng = np.random.default_rng(seed)
    docs = []
    for d in range(n_docs):
        tokens = [FILLER_WORDS[i] for i in rng.integers(0, len(FILLER_WORDS), n_fillers)]
        tokens.insert(int(rng.integers(0, len(tokens) + 1)),
                      SPLIT_WORDS[int(rng.integers(0, len(SPLIT_WORDS)))])
        tokens.insert(int(rng.integers(0, len(tokens) + 1)), "the")
        hubs = [HUB_WORDS[i] for i in rng.choice(len(HUB_WORDS), size=3, replace=False)]
        pos = int(rng.integers(0, len(tokens) + 1))
        tokens = tokens[:pos] + hubs + tokens[pos:]
        text = " ".join(tokens) + "."
        docs.append((f"doc{d:04d}", text, hubs))
    return docs


def write_jsonl_corpus(path, docs):
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, text, golds in docs:
            fh.write(json.dumps({"doc_id": doc_id, "text": text,
                                 "keyphrases": golds}) + "\n")


def write_inspec_corpus(dirpath, docs):
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for doc_id, text, golds in docs:
        (dirpath / f"{doc_id}.abstr").write_text(text, encoding="utf-8")
        (dirpath / f"{doc_id}.uncontr").write_text("; ".join(golds), encoding="utf-8")
