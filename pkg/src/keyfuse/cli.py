"""Pipeline CLI: composable subcommands with files as stage contracts.

Stages: build-graph -> train-structure -> train-tagger -> extract ->
evaluate, plus single-modality baselines and a run-all chain. Every
stochastic stage takes its seed from the config so a full run is
reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cograph, corpus, evalkit, fuse, sgns, tagger, walker

log = logging.getLogger("keyfuse")


class UsageError(Exception):
    """Bad input or configuration; maps to exit code 2."""


@dataclass
class PipelineConfig:
    corpus_path: str = ""
    corpus_format: str = "jsonl"
    window: int = 2
    train_only_graph: bool = False
    strategy: str = "deepwalk"
    walk: dict = field(default_factory=dict)
    sgns: dict = field(default_factory=dict)
    contextual: str | None = None
    tagger_kind: str = "softmax"
    tagger: dict = field(default_factory=dict)
    split: dict = field(default_factory=dict)
    textrank_k: int = 10
    out_dir: str = "out"
    seed: int = 42

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file does not exist: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON config: {exc}") from exc
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"{path}: unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**raw)

    def fingerprint(self) -> str:
        import hashlib
        blob = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def atomic_output(path, write_fn):
    """Run write_fn against a temp path, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    write_fn(tmp)
    os.replace(tmp, path)


def load_docs(cfg: PipelineConfig):
    if not cfg.corpus_path:
        raise UsageError("config is missing corpus_path")
    try:
        docs = corpus.load_corpus(cfg.corpus_path, cfg.corpus_format)
    except corpus.CorpusError as exc:
        raise UsageError(str(exc)) from exc
    return docs


def split_docs(cfg: PipelineConfig, docs):
    """Deterministic train/test split; must be configured explicitly."""
    spec = cfg.split
    if not spec:
        raise UsageError("config is missing the split specification "
                         '(e.g. {"train_fraction": 0.8, "seed": 13})')
    ids = [d.doc_id for d in docs]
    if "train_ids" in spec or "test_ids" in spec:
        train_ids = set(spec.get("train_ids", []))
        test_ids = set(spec.get("test_ids", []))
        if not train_ids or not test_ids:
            raise UsageError("split needs both train_ids and test_ids when given explicitly")
        unknown = (train_ids | test_ids) - set(ids)
        if unknown:
            raise UsageError(f"split references unknown doc ids: {sorted(unknown)[:5]}")
    else:
        frac = spec.get("train_fraction")
        if frac is None or not 0 < frac < 1:
            raise UsageError("split.train_fraction must be in (0,1)")
        if "seed" not in spec:
            raise UsageError("split.seed is required for fraction splits")
        rng = np.random.default_rng(spec["seed"])
        order = list(ids)
        rng.shuffle(order)
        cut = int(round(len(order) * frac))
        train_ids, test_ids = set(order[:cut]), set(order[cut:])
    train = [d for d in docs if d.doc_id in train_ids]
    test = [d for d in docs if d.doc_id in test_ids]
    log.info("split: %d train / %d test documents", len(train), len(test))
    return train, test


def graph_paths(cfg):
    out = Path(cfg.out_dir)
    return out / "graph.txt", out / "graph.vocab"


def build_graph_for(cfg: PipelineConfig, docs):
    if cfg.train_only_graph:
        train, _ = split_docs(cfg, docs)
        graph_docs = train
    else:
        graph_docs = docs
    return cograph.build_graph(graph_docs, window=cfg.window)


def cmd_build_graph(cfg: PipelineConfig) -> int:
    docs = load_docs(cfg)
    g = build_graph_for(cfg, docs)
    gp, vp = graph_paths(cfg)
    gp.parent.mkdir(parents=True, exist_ok=True)
    tmp_g = gp.with_name(gp.name + ".tmp")
    tmp_v = vp.with_name(vp.name + ".tmp")
    cograph.save_graph(g, tmp_g, tmp_v)
    os.replace(tmp_g, gp)
    os.replace(tmp_v, vp)
    log.info("graph: v=%d e=%d window=%d -> %s", len(g), g.n_edges, g.window, gp)
    return 0


def _walk_config(cfg: PipelineConfig) -> walker.WalkConfig:
    return walker.WalkConfig(seed=cfg.seed, **cfg.walk)


def _sgns_config(cfg: PipelineConfig) -> sgns.SgnsConfig:
    return sgns.SgnsConfig(seed=cfg.seed, **cfg.sgns)


def structure_embedding_path(cfg):
    return Path(cfg.out_dir) / f"structure-{cfg.strategy}.emb"


def cmd_train_structure(cfg: PipelineConfig) -> int:
    if cfg.strategy not in walker.STRATEGIES:
        raise UsageError(f"unknown strategy {cfg.strategy!r}; "
                         f"expected one of {walker.STRATEGIES}")
    gp, vp = graph_paths(cfg)
    if not gp.exists():
        raise UsageError(f"graph file {gp} not found; run build-graph first")
    g = cograph.load_graph(gp, vp)
    dom = None
    if cfg.strategy == "exem":
        dom = cograph.greedy_dominating_set(g)
        log.info("dominating set size: %d of %d nodes", len(dom), len(g))
    wcfg = _walk_config(cfg)
    walk_corpus = walker.generate_walks(g, cfg.strategy, wcfg, dom=dom)
    atomic_output(Path(cfg.out_dir) / f"walks-{cfg.strategy}.txt",
                  lambda tmp: walker.save_walks(tmp, walk_corpus))
    sequences = [[g.words[n] for n in walk] for walk in walk_corpus.walks]
    model = sgns.train_sgns(sequences, _sgns_config(cfg))
    emb = model.to_embedding_matrix(kind="structure")
    atomic_output(structure_embedding_path(cfg),
                  lambda tmp: sgns.save_embeddings(tmp, emb))
    log.info("structure embeddings: %d words x %d dims -> %s",
             len(emb.words), emb.dim, structure_embedding_path(cfg))
    return 0


def _load_contextual(cfg: PipelineConfig, docs):
    if not cfg.contextual:
        raise UsageError("config is missing the contextual embedding path")
    try:
        return fuse.read_contextual(cfg.contextual, docs={d.doc_id: d for d in docs})
    except fuse.ContextualFileError as exc:
        raise UsageError(str(exc)) from exc


def _fused_for(doc, ctx, struct, mode: str):
    if mode == "fused":
        return fuse.fuse(doc, ctx.records[doc.doc_id], struct)
    if mode == "text-only":
        return fuse.fuse(doc, ctx.records[doc.doc_id], None)
    if mode == "structure-only":
        return fuse.fuse(doc, None, struct)
    raise UsageError(f"unknown fusion mode {mode!r}")


def _tagger_config(cfg: PipelineConfig) -> tagger.TaggerConfig:
    return tagger.TaggerConfig(seed=cfg.seed, **cfg.tagger)


def model_path(cfg, mode="fused"):
    return Path(cfg.out_dir) / f"tagger-{cfg.tagger_kind}-{mode}.model"


def train_tagger_on(cfg: PipelineConfig, docs, mode: str) -> tagger.TaggerModel:
    train_split, _ = split_docs(cfg, docs)
    struct = None
    ctx = None
    if mode in ("fused", "structure-only"):
        path = structure_embedding_path(cfg)
        if not path.exists():
            raise UsageError(f"structure embeddings {path} not found; "
                             "run train-structure first")
        struct = sgns.load_embeddings(path, kind="structure")
    if mode in ("fused", "text-only"):
        ctx = _load_contextual(cfg, docs)
    pairs = []
    for doc in train_split:
        tags = corpus.encode_bio(doc)
        pairs.append((_fused_for(doc, ctx, struct, mode), tags))
    model = tagger.train(cfg.tagger_kind, pairs, _tagger_config(cfg))
    return model


def cmd_train_tagger(cfg: PipelineConfig, mode: str = "fused") -> int:
    docs = load_docs(cfg)
    model = train_tagger_on(cfg, docs, mode)
    atomic_output(model_path(cfg, mode), lambda tmp: tagger.save_model(tmp, model))
    if model.epoch_losses:
        log.info("epoch losses: first %.4f last %.4f",
                 model.epoch_losses[0], model.epoch_losses[-1])
    log.info("model -> %s", model_path(cfg, mode))
    return 0


def predictions_path(cfg, label):
    return Path(cfg.out_dir) / f"predictions-{label}.jsonl"


def write_predictions(path, outputs: dict):
    def write(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            for doc_id in sorted(outputs):
                fh.write(json.dumps({"doc_id": doc_id,
                                     "phrases": sorted(outputs[doc_id])}) + "\n")
    atomic_output(path, write)


def read_predictions(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"predictions file does not exist: {path}")
    outputs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            outputs[rec["doc_id"]] = set(rec.get("phrases", []))
    return outputs


def extract_on(cfg: PipelineConfig, docs, model, mode: str):
    _, test_split = split_docs(cfg, docs)
    struct = None
    ctx = None
    if mode in ("fused", "structure-only"):
        struct = sgns.load_embeddings(structure_embedding_path(cfg), kind="structure")
    if mode in ("fused", "text-only"):
        ctx = _load_contextual(cfg, docs)
    outputs = {}
    tags_by_doc = {}
    for doc in test_split:
        fused_seq = _fused_for(doc, ctx, struct, mode)
        _, tags = tagger.predict(model, fused_seq)
        tags_by_doc[doc.doc_id] = tags
        outputs[doc.doc_id] = corpus.decode_bio(tags, doc.tokens)
    return outputs, tags_by_doc, test_split


def cmd_extract(cfg: PipelineConfig, mode: str = "fused", label: str | None = None) -> int:
    docs = load_docs(cfg)
    mpath = model_path(cfg, mode)
    if not mpath.exists():
        raise UsageError(f"model file {mpath} not found; run train-tagger first")
    model = tagger.load_model(mpath)
    outputs, _, _ = extract_on(cfg, docs, model, mode)
    label = label or mode
    write_predictions(predictions_path(cfg, label), outputs)
    log.info("predictions for %d documents -> %s", len(outputs),
             predictions_path(cfg, label))
    return 0


def cmd_evaluate(cfg: PipelineConfig, predictions, method: str | None = None,
                 csv: bool = False) -> int:
    docs = load_docs(cfg)
    _, test_split = split_docs(cfg, docs)
    outputs = read_predictions(predictions)
    method = method or Path(predictions).stem
    try:
        report = evalkit.evaluate_method(outputs, test_split, method=method,
                                         config_fingerprint=cfg.fingerprint())
    except evalkit.EvalError as exc:
        raise UsageError(str(exc)) from exc
    report_path = Path(cfg.out_dir) / f"report-{method}.json"
    atomic_write_text(report_path, evalkit.report_to_json(report) + "\n")
    if csv:
        atomic_write_text(report_path.with_suffix(".csv"), evalkit.report_to_csv(report))
    print(evalkit.render_report(report))
    return 0


def cmd_baseline(cfg: PipelineConfig, method: str) -> int:
    docs = load_docs(cfg)
    if method == "textrank":
        g = build_graph_for(cfg, docs)
        scores = cograph.pagerank(g)
        _, test_split = split_docs(cfg, docs)
        outputs = {d.doc_id: cograph.textrank_extract(d, scores, cfg.textrank_k)
                   for d in test_split}
    elif method == "word2vec":
        # static text vectors trained on the token text, tagged like any
        # other feature set
        sequences = [[t.norm for t in d.tokens] for d in docs]
        text_cfg_fields = dict(cfg.sgns)
        text_cfg_fields.setdefault("context_window", 5)
        text_cfg_fields.setdefault("min_count", 5)
        text_cfg = sgns.SgnsConfig(seed=cfg.seed, **text_cfg_fields)
        model = sgns.train_sgns(sequences, text_cfg)
        emb = model.to_embedding_matrix(kind="text-static")
        train_split, test_split = split_docs(cfg, docs)
        pairs = [(fuse.fuse_static(d, emb, None), corpus.encode_bio(d))
                 for d in train_split]
        tag_model = tagger.train(cfg.tagger_kind, pairs, _tagger_config(cfg))
        outputs = {}
        for doc in test_split:
            _, tags = tagger.predict(tag_model, fuse.fuse_static(doc, emb, None))
            outputs[doc.doc_id] = corpus.decode_bio(tags, doc.tokens)
    elif method in ("structure-only", "text-only"):
        model = train_tagger_on(cfg, docs, method)
        outputs, _, _ = extract_on(cfg, docs, model, method)
    else:
        raise UsageError(f"unknown baseline {method!r}; expected textrank, "
                         "word2vec, structure-only, or text-only")
    write_predictions(predictions_path(cfg, method), outputs)
    log.info("baseline %s predictions -> %s", method, predictions_path(cfg, method))
    return 0


def cmd_run_all(cfg: PipelineConfig, csv: bool = False) -> int:
    cmd_build_graph(cfg)
    cmd_train_structure(cfg)
    cmd_train_tagger(cfg, mode="fused")
    cmd_extract(cfg, mode="fused")
    return cmd_evaluate(cfg, predictions_path(cfg, "fused"), method="fused", csv=csv)


def apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "strategy", None):
        cfg.strategy = args.strategy
    if getattr(args, "tagger", None):
        cfg.tagger_kind = args.tagger
    if getattr(args, "window", None):
        cfg.window = args.window
    if getattr(args, "dim", None):
        cfg.sgns = dict(cfg.sgns, dim=args.dim)
    if getattr(args, "train_only_graph", False):
        cfg.train_only_graph = True
    if args.out:
        cfg.out_dir = args.out
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keyfuse",
        description="Keyphrase extraction pipeline over fused text and graph vectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, strategy=True, tagger_flag=True):
        p.add_argument("--config", required=True, help="JSON pipeline config file")
        p.add_argument("--verbose", action="store_true", help="log at INFO level")
        p.add_argument("--seed", type=int, default=None, help="override the global seed")
        p.add_argument("--out", default=None, help="override the output directory")
        if strategy:
            p.add_argument("--strategy", choices=walker.STRATEGIES, default=None)
        if tagger_flag:
            p.add_argument("--tagger", choices=tagger.KINDS, default=None)
        p.add_argument("--window", type=int, default=None)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--train-only-graph", action="store_true")

    common(sub.add_parser("build-graph", help="build and serialize the co-occurrence graph"))
    common(sub.add_parser("train-structure", help="random walks + skip-gram embeddings"))
    p = sub.add_parser("train-tagger", help="train the B/I/O tagger on fused vectors")
    common(p)
    p.add_argument("--mode", choices=("fused", "text-only", "structure-only"),
                   default="fused")
    p = sub.add_parser("extract", help="predict keyphrases for the test split")
    common(p)
    p.add_argument("--mode", choices=("fused", "text-only", "structure-only"),
                   default="fused")
    p.add_argument("--label", default=None, help="predictions file label")
    p = sub.add_parser("evaluate", help="score a predictions file")
    common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--method", default=None)
    p.add_argument("--csv", action="store_true", help="also write a CSV report")
    p = sub.add_parser("baseline", help="run a single-modality baseline")
    common(p)
    p.add_argument("--method", required=True,
                   choices=("textrank", "word2vec", "structure-only", "text-only"))
    p = sub.add_parser("run-all", help="chain all stages for the fused pipeline")
    common(p)
    p.add_argument("--csv", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(PipelineConfig.from_file(args.config), args)
        if args.command == "build-graph":
            return cmd_build_graph(cfg)
        if args.command == "train-structure":
            return cmd_train_structure(cfg)
        if args.command == "train-tagger":
            return cmd_train_tagger(cfg, mode=args.mode)
        if args.command == "extract":
            return cmd_extract(cfg, mode=args.mode, label=args.label)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.predictions, method=args.method, csv=args.csv)
        if args.command == "baseline":
            return cmd_baseline(cfg, args.method)
        if args.command == "run-all":
            return cmd_run_all(cfg, csv=args.csv)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        log.exception("internal error: %s", exc)
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
