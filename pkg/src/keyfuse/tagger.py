"""Per-token B/I/O classifiers over fused vectors, plus decoding to phrases.

Three model kinds: multinomial logistic regression (softmax), a single
hidden layer network (tanh nonlinearity), and a bagged random forest with
Gini splits. Class order is fixed as [B, I, O]; argmax ties resolve in that
order.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus import TAG_ORDER, BioTag, decode_bio

log = logging.getLogger(__name__)

KINDS = ("softmax", "mlp", "forest")
MODEL_FORMAT = "keyfuse-tagger"
MODEL_VERSION = 1


class TaggerError(Exception):
    pass


@dataclass(frozen=True)
class TaggerConfig:
    lr: float = 0.1
    epochs: int = 100
    batch_size: int = 128
    hidden: int = 256
    trees: int = 100
    max_depth: int = 16
    class_weights: bool = True
    seed: int = 0


@dataclass
class TaggerModel:
    kind: str
    input_dim: int
    config: TaggerConfig
    params: dict                  # arrays for softmax/mlp, tree list for forest
    classes: tuple = TAG_ORDER
    epoch_losses: list | None = None
    oob_error: float | None = None

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise TaggerError(f"expected input width {self.input_dim}, "
                              f"got {X.shape[1] if X.ndim == 2 else X.shape}")
        if self.kind == "softmax":
            return _softmax(X @ self.params["W"] + self.params["b"])
        if self.kind == "mlp":
            h = np.tanh(X @ self.params["W1"] + self.params["b1"])
            return _softmax(h @ self.params["W2"] + self.params["b2"])
        if self.kind == "forest":
            votes = np.zeros((len(X), len(self.classes)))
            for tree in self.params["trees"]:
                votes[np.arange(len(X)), _tree_predict(tree, X)] += 1.0
            return votes / len(self.params["trees"])
        raise TaggerError(f"unknown model kind {self.kind!r}")


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _class_weights(y, n_classes, enabled):
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    if not enabled:
        return np.ones(n_classes)
    seen = counts > 0
    weights = np.zeros(n_classes)
    weights[seen] = len(y) / (seen.sum() * counts[seen])
    return weights


def softmax_loss_grads(W, b, X, y, sample_weights):
    """Weighted cross-entropy and analytic gradients for logistic regression."""
    probs = _softmax(X @ W + b)
    n = len(y)
    wsum = sample_weights.sum()
    loss = -(sample_weights * np.log(probs[np.arange(n), y] + 1e-300)).sum() / wsum
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta *= (sample_weights / wsum)[:, None]
    return loss, X.T @ delta, delta.sum(axis=0)


def mlp_loss_grads(params, X, y, sample_weights):
    """Weighted cross-entropy and gradients for the one-hidden-layer net."""
    n = len(y)
    wsum = sample_weights.sum()
    a1 = X @ params["W1"] + params["b1"]
    h = np.tanh(a1)
    probs = _softmax(h @ params["W2"] + params["b2"])
    loss = -(sample_weights * np.log(probs[np.arange(n), y] + 1e-300)).sum() / wsum
    delta2 = probs.copy()
    delta2[np.arange(n), y] -= 1.0
    delta2 *= (sample_weights / wsum)[:, None]
    grads = {
        "W2": h.T @ delta2,
        "b2": delta2.sum(axis=0),
    }
    delta1 = (delta2 @ params["W2"].T) * (1.0 - h ** 2)
    grads["W1"] = X.T @ delta1
    grads["b1"] = delta1.sum(axis=0)
    return loss, grads


def _stack_training_data(pairs):
    xs, ys = [], []
    for fused, tags in pairs:
        if len(tags) != len(fused.vectors):
            raise TaggerError(f"doc {fused.doc_id!r}: {len(tags)} tags for "
                              f"{len(fused.vectors)} tokens")
        xs.append(np.asarray(fused.vectors, dtype=np.float64))
        ys.extend(TAG_ORDER.index(t) for t in tags)
    if not xs or not ys:
        raise TaggerError("empty training set")
    return np.concatenate(xs, axis=0), np.array(ys, dtype=np.int64)


def _check_finite_loss(loss, epoch):
    if not np.isfinite(loss):
        raise TaggerError(f"non-finite loss {loss} at epoch {epoch}; "
                          "lower the learning rate or rescale inputs")


def _train_gd(kind, X, y, cfg):
    rng = np.random.default_rng(cfg.seed)
    n, d = X.shape
    weights = _class_weights(y, len(TAG_ORDER), cfg.class_weights)
    sw_all = weights[y]
    if kind == "softmax":
        params = {"W": np.zeros((d, len(TAG_ORDER))), "b": np.zeros(len(TAG_ORDER))}
    else:
        limit1 = np.sqrt(6.0 / (d + cfg.hidden))
        limit2 = np.sqrt(6.0 / (cfg.hidden + len(TAG_ORDER)))
        params = {
            "W1": rng.uniform(-limit1, limit1, (d, cfg.hidden)),
            "b1": np.zeros(cfg.hidden),
            "W2": rng.uniform(-limit2, limit2, (cfg.hidden, len(TAG_ORDER))),
            "b2": np.zeros(len(TAG_ORDER)),
        }
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss, batches = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if kind == "softmax":
                loss, dW, db = softmax_loss_grads(params["W"], params["b"],
                                                  X[idx], y[idx], sw_all[idx])
                params["W"] -= cfg.lr * dW
                params["b"] -= cfg.lr * db
            else:
                loss, grads = mlp_loss_grads(params, X[idx], y[idx], sw_all[idx])
                for key, grad in grads.items():
                    params[key] -= cfg.lr * grad
            epoch_loss += loss
            batches += 1
        mean_loss = epoch_loss / batches
        _check_finite_loss(mean_loss, epoch)
        losses.append(mean_loss)
    log.info("%s: trained %d epochs, loss %.4f -> %.4f", kind, cfg.epochs,
             losses[0], losses[-1])
    return params, losses


def _gini(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - (p ** 2).sum()


def _build_tree(X, y, idx, rng, cfg, n_split_features, depth=0):
    counts = np.bincount(y[idx], minlength=len(TAG_ORDER))
    if depth >= cfg.max_depth or counts.max() == len(idx) or len(idx) < 2:
        return {"counts": counts.tolist()}
    feats = rng.choice(X.shape[1], size=n_split_features, replace=False)
    best = None
    for f in feats:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[idx][order]
        cuts = np.nonzero(sv[1:] > sv[:-1])[0]
        if len(cuts) == 0:
            continue
        onehot = np.zeros((len(idx), len(TAG_ORDER)))
        onehot[np.arange(len(idx)), sy] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left = cum[cuts]
        n_left = (cuts + 1).astype(np.float64)
        right = cum[-1] - left
        n_right = len(idx) - n_left
        gini_left = 1.0 - ((left / n_left[:, None]) ** 2).sum(axis=1)
        gini_right = 1.0 - ((right / n_right[:, None]) ** 2).sum(axis=1)
        weighted = (n_left * gini_left + n_right * gini_right) / len(idx)
        j = int(np.argmin(weighted))
        if best is None or weighted[j] < best[0]:
            thr = 0.5 * (sv[cuts[j]] + sv[cuts[j] + 1])
            best = (weighted[j], int(f), float(thr))
    if best is None:
        return {"counts": counts.tolist()}
    _, f, thr = best
    mask = X[idx, f] <= thr
    return {
        "f": f,
        "t": thr,
        "l": _build_tree(X, y, idx[mask], rng, cfg, n_split_features, depth + 1),
        "r": _build_tree(X, y, idx[~mask], rng, cfg, n_split_features, depth + 1),
    }


def _tree_predict(tree, X):
    out = np.empty(len(X), dtype=np.int64)
    for i, row in enumerate(X):
        node = tree
        while "f" in node:
            node = node["l"] if row[node["f"]] <= node["t"] else node["r"]
        out[i] = int(np.argmax(node["counts"]))
    return out


def _train_forest(X, y, cfg):
    n, d = X.shape
    n_split_features = int(np.ceil(np.sqrt(d)))
    trees = []
    oob_votes = np.zeros((n, len(TAG_ORDER)))
    for t in range(cfg.trees):
        rng = np.random.default_rng([cfg.seed, t])
        bag = rng.integers(0, n, size=n)
        tree = _build_tree(X, y, bag, rng, cfg, n_split_features)
        trees.append(tree)
        oob = np.setdiff1d(np.arange(n), bag, assume_unique=False)
        if len(oob):
            preds = _tree_predict(tree, X[oob])
            oob_votes[oob, preds] += 1.0
    voted = oob_votes.sum(axis=1) > 0
    oob_error = None
    if voted.any():
        oob_pred = np.argmax(oob_votes[voted], axis=1)
        oob_error = float(np.mean(oob_pred != y[voted]))
    return trees, oob_error


def train(kind, pairs, cfg: TaggerConfig | None = None) -> TaggerModel:
    """Train a B/I/O tagger on (FusedSequence, gold tag list) pairs.

    Deterministic for a fixed cfg.seed. Inverse-frequency class weights are
    applied to the cross-entropy unless cfg.class_weights is False (the O
    class dominates real corpora).
    """
    if kind not in KINDS:
        raise TaggerError(f"unknown tagger kind {kind!r}; expected one of {KINDS}")
    cfg = cfg or TaggerConfig()
    X, y = _stack_training_data(pairs)
    present = np.bincount(y, minlength=len(TAG_ORDER)) > 0
    if not present.all():
        missing = [TAG_ORDER[i].value for i in range(len(TAG_ORDER)) if not present[i]]
        log.warning("training set has no examples of class(es) %s; proceeding",
                    ",".join(missing))
    epoch_losses = None
    oob_error = None
    if kind == "forest":
        trees, oob_error = _train_forest(X, y, cfg)
        params = {"trees": trees}
    else:
        params, epoch_losses = _train_gd(kind, X, y, cfg)
    return TaggerModel(kind=kind, input_dim=X.shape[1], config=cfg, params=params,
                       epoch_losses=epoch_losses, oob_error=oob_error)


def predict(model: TaggerModel, fused):
    """Per-token class distributions and argmax tags (ties resolve B < I < O)."""
    X = np.asarray(fused.vectors, dtype=np.float64)
    if len(X) == 0:
        return np.zeros((0, len(TAG_ORDER))), []
    probs = model.predict_proba(X)
    tags = [TAG_ORDER[i] for i in np.argmax(probs, axis=1)]
    return probs, tags


def extract_phrases(model: TaggerModel, doc, fused) -> set:
    """Predict tags for the document and decode them to a phrase set."""
    _, tags = predict(model, fused)
    return decode_bio(tags, doc.tokens)


def _array_payload(params, order):
    blobs = [np.ascontiguousarray(params[name], dtype="<f4").tobytes() for name in order]
    shapes = {name: list(params[name].shape) for name in order}
    return b"".join(blobs), shapes


def save_model(path, model: TaggerModel):
    """Self-describing model file: JSON header line plus parameter payload
    (little-endian float32 arrays, or JSON trees for forests)."""
    path = Path(path)
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "input_dim": model.input_dim,
        "classes": [c.value for c in model.classes],
        "config": asdict(model.config),
        "oob_error": model.oob_error,
    }
    if model.kind == "forest":
        payload = json.dumps(model.params["trees"]).encode("utf-8")
        header["payload"] = {"encoding": "json-trees", "bytes": len(payload)}
    else:
        order = sorted(model.params)
        payload, shapes = _array_payload(model.params, order)
        header["payload"] = {"encoding": "f4-arrays", "order": order, "shapes": shapes}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(payload)


def load_model(path) -> TaggerModel:
    path = Path(path)
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != MODEL_FORMAT:
            raise TaggerError(f"{path}: not a tagger model file")
        if header.get("version") != MODEL_VERSION:
            raise TaggerError(f"{path}: unsupported model version {header.get('version')}")
        if header["classes"] != [c.value for c in TAG_ORDER]:
            raise TaggerError(f"{path}: unexpected class order {header['classes']}")
        payload = fh.read()
    spec = header["payload"]
    if spec["encoding"] == "json-trees":
        params = {"trees": json.loads(payload.decode("utf-8"))}
    else:
        params = {}
        offset = 0
        for name in spec["order"]:
            shape = spec["shapes"][name]
            size = int(np.prod(shape)) * 4
            arr = np.frombuffer(payload[offset:offset + size], dtype="<f4")
            params[name] = arr.reshape(shape).astype(np.float64)
            offset += size
    cfg = TaggerConfig(**header["config"])
    return TaggerModel(kind=header["kind"], input_dim=header["input_dim"], config=cfg,
                       params=params, oob_error=header.get("oob_error"))
