"""Exact-match phrase-level precision/recall/F1 and comparative reports."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

from .corpus import TAG_ORDER, present_gold_phrases

log = logging.getLogger(__name__)


class EvalError(Exception):
    pass


def f1(predicted, gold):
    """(precision, recall, f1) of predicted vs gold phrase sets.

    P = |Y n Y'| / |Y'| (0 when Y' is empty), R = |Y n Y'| / |Y|
    (0 when Y is empty), F1 = 2PR/(P+R) with the 0/0 case defined as 0.
    """
    predicted, gold = set(predicted), set(gold)
    hits = len(predicted & gold)
    p = hits / len(predicted) if predicted else 0.0
    r = hits / len(gold) if gold else 0.0
    score = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, score


def split_fingerprint(doc_ids) -> str:
    digest = hashlib.sha256("\n".join(sorted(doc_ids)).encode("utf-8")).hexdigest()[:12]
    return f"{len(set(doc_ids))}:{digest}"


@dataclass
class EvalReport:
    method: str
    split: str
    per_doc: dict                       # doc_id -> (p, r, f1)
    macro: dict                         # precision/recall/f1 means over docs
    micro: dict                         # pooled phrase counts
    excluded: list = field(default_factory=list)  # docs with no present gold
    tag_accuracy: float | None = None
    per_class_f1: dict | None = None
    config_fingerprint: str = ""

    def to_dict(self):
        return {
            "method": self.method,
            "split": self.split,
            "macro": self.macro,
            "micro": self.micro,
            "per_doc": {k: list(v) for k, v in sorted(self.per_doc.items())},
            "excluded": sorted(self.excluded),
            "tag_accuracy": self.tag_accuracy,
            "per_class_f1": self.per_class_f1,
            "config_fingerprint": self.config_fingerprint,
        }


def _token_diagnostics(predicted_tags, gold_tags):
    correct = total = 0
    tp = {t: 0 for t in TAG_ORDER}
    fp = {t: 0 for t in TAG_ORDER}
    fn = {t: 0 for t in TAG_ORDER}
    for doc_id, pred in predicted_tags.items():
        gold = gold_tags.get(doc_id)
        if gold is None:
            continue
        if len(pred) != len(gold):
            raise EvalError(f"doc {doc_id!r}: {len(pred)} predicted tags vs "
                            f"{len(gold)} gold tags")
        for a, b in zip(pred, gold):
            total += 1
            if a == b:
                correct += 1
                tp[a] += 1
            else:
                fp[a] += 1
                fn[b] += 1
    if total == 0:
        return None, None
    per_class = {}
    for t in TAG_ORDER:
        p = tp[t] / (tp[t] + fp[t]) if tp[t] + fp[t] else 0.0
        r = tp[t] / (tp[t] + fn[t]) if tp[t] + fn[t] else 0.0
        per_class[t.value] = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return correct / total, per_class


def evaluate_method(outputs: dict, docs, method: str = "method",
                    predicted_tags: dict | None = None,
                    config_fingerprint: str = "") -> EvalReport:
    """Score per-document phrase sets against present gold phrases.

    `outputs` maps doc_id to a predicted phrase set and must cover every
    document; documents whose gold phrases are all absent from their text
    are excluded from aggregation (logged). Macro averages per-document
    scores; micro pools phrase counts.
    """
    doc_list = list(docs.values()) if isinstance(docs, dict) else list(docs)
    missing = [d.doc_id for d in doc_list if d.doc_id not in outputs]
    if missing:
        raise EvalError(f"outputs missing {len(missing)} document(s): "
                        f"{', '.join(sorted(missing)[:10])}")
    per_doc = {}
    excluded = []
    pooled_hits = pooled_pred = pooled_gold = 0
    for doc in doc_list:
        gold = present_gold_phrases(doc)
        if not gold:
            excluded.append(doc.doc_id)
            continue
        predicted = {p.strip().lower() for p in outputs[doc.doc_id]}
        per_doc[doc.doc_id] = f1(predicted, gold)
        pooled_hits += len(predicted & gold)
        pooled_pred += len(predicted)
        pooled_gold += len(gold)
    if excluded:
        log.info("%d document(s) with no present gold phrases excluded: %s",
                 len(excluded), ", ".join(sorted(excluded)[:5]))
    n = len(per_doc)
    macro = {
        "precision": sum(v[0] for v in per_doc.values()) / n if n else 0.0,
        "recall": sum(v[1] for v in per_doc.values()) / n if n else 0.0,
        "f1": sum(v[2] for v in per_doc.values()) / n if n else 0.0,
    }
    micro_p = pooled_hits / pooled_pred if pooled_pred else 0.0
    micro_r = pooled_hits / pooled_gold if pooled_gold else 0.0
    micro = {
        "precision": micro_p,
        "recall": micro_r,
        "f1": 2 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r > 0 else 0.0,
    }
    tag_acc, per_class = (None, None)
    if predicted_tags is not None:
        gold_tags = {d.doc_id: d.bio for d in doc_list if d.bio is not None}
        tag_acc, per_class = _token_diagnostics(predicted_tags, gold_tags)
    return EvalReport(method=method, split=split_fingerprint([d.doc_id for d in doc_list]),
                      per_doc=per_doc, macro=macro, micro=micro, excluded=excluded,
                      tag_accuracy=tag_acc, per_class_f1=per_class,
                      config_fingerprint=config_fingerprint)


def relative_gain(a: float, b: float) -> float:
    """(a - b) / b; the conventional relative improvement of a over b."""
    if b == 0:
        raise EvalError("relative gain against a zero baseline is undefined")
    return (a - b) / b


def compare(reports, metric: str = "macro") -> list:
    """Rank reports by F1 with absolute and relative deltas vs the weakest.

    All reports must be on the same split. Returns rows sorted best-first:
    {method, f1, delta_abs, delta_rel}.
    """
    if len(reports) < 2:
        raise EvalError("compare needs at least two reports")
    if metric not in ("macro", "micro"):
        raise EvalError(f"unknown metric {metric!r}")
    splits = {r.split for r in reports}
    if len(splits) > 1:
        raise EvalError(f"reports cover different splits: {sorted(splits)}")
    rows = sorted(reports, key=lambda r: (-getattr(r, metric)["f1"], r.method))
    baseline = rows[-1]
    base_f1 = getattr(baseline, metric)["f1"]
    table = []
    for r in rows:
        score = getattr(r, metric)["f1"]
        table.append({
            "method": r.method,
            "f1": score,
            "delta_abs": score - base_f1,
            "delta_rel": relative_gain(score, base_f1) if base_f1 > 0 else 0.0,
        })
    return table


def render_table(table, metric: str = "macro") -> str:
    """Aligned-column text table for compare() output."""
    header = f"{'method':<40} {'f1':>8} {'delta':>8} {'rel':>8}"
    lines = [header, "-" * len(header)]
    for row in table:
        lines.append(f"{row['method']:<40} {row['f1']:>8.4f} "
                     f"{row['delta_abs']:>+8.4f} {row['delta_rel']:>+7.1%}")
    return "\n".join(lines)


def render_report(report: EvalReport) -> str:
    """Aligned-column summary of one report's aggregates."""
    header = f"{'':<8} {'precision':>10} {'recall':>10} {'f1':>10}"
    lines = [f"method: {report.method}  split: {report.split}", header]
    for name, agg in (("macro", report.macro), ("micro", report.micro)):
        lines.append(f"{name:<8} {agg['precision']:>10.4f} {agg['recall']:>10.4f} "
                     f"{agg['f1']:>10.4f}")
    if report.tag_accuracy is not None:
        lines.append(f"token accuracy: {report.tag_accuracy:.4f}  per-class F1: "
                     + "  ".join(f"{k}={v:.4f}" for k, v in report.per_class_f1.items()))
    if report.excluded:
        lines.append(f"excluded (no present gold): {len(report.excluded)}")
    return "\n".join(lines)


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2)


def report_to_csv(report: EvalReport) -> str:
    lines = ["doc_id,precision,recall,f1"]
    for doc_id, (p, r, score) in sorted(report.per_doc.items()):
        lines.append(f"{doc_id},{p:.6f},{r:.6f},{score:.6f}")
    lines.append(f"macro,{report.macro['precision']:.6f},"
                 f"{report.macro['recall']:.6f},{report.macro['f1']:.6f}")
    lines.append(f"micro,{report.micro['precision']:.6f},"
                 f"{report.micro['recall']:.6f},{report.micro['f1']:.6f}")
    return "\n".join(lines) + "\n"
