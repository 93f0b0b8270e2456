"""Evaluation metrics for image and video situation recognition.

Image metrics follow the per-frame definitions: a role is correct when the
predicted noun matches any annotator; ``value`` credits a frame with at least
one correct role and ``value-all`` needs every role correct. Grounded
variants additionally need IoU >= 0.5 on roles that have a ground-truth box.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np

from .ontology import BoundingBox, SituationFrame

IOU_THRESHOLD = 0.5
SETTINGS = ("gt-verb", "top1-verb", "top5-verb")


def role_correct(pred_nouns: Sequence[int], frame: SituationFrame) -> list[bool]:
    if len(pred_nouns) != frame.num_roles:
        raise ValueError(f"{len(pred_nouns)} predictions for {frame.num_roles} roles ({frame.image_id})")
    return [int(n) in set(frame.annotator_nouns[i].tolist()) for i, n in enumerate(pred_nouns)]


def value_metrics(pred_nouns: Sequence[int], frame: SituationFrame) -> tuple[bool, bool]:
    hits = role_correct(pred_nouns, frame)
    return any(hits), all(hits)


def _as_box(b):
    if b is None or isinstance(b, BoundingBox):
        return b
    return BoundingBox(*map(float, b))


def iou(a, b) -> float:
    """IoU of two (cx, cy, h, w) boxes.

    Zero-area boxes score 0, except two identical zero-area boxes, which score 1.
    """
    a, b = _as_box(a), _as_box(b)
    if a.w == 0 or a.h == 0 or b.w == 0 or b.h == 0:
        return 1.0 if a == b else 0.0
    # overlap from centre distance, so identical boxes give exactly 1
    iw = min((a.w + b.w) / 2 - abs(a.cx - b.cx), a.w, b.w)
    ih = min((a.h + b.h) / 2 - abs(a.cy - b.cy), a.h, b.h)
    if iw <= 0 or ih <= 0:
        return 0.0
    # rescale so products of tiny sides do not underflow
    sw, sh = max(a.w, b.w), max(a.h, b.h)
    inter = (iw / sw) * (ih / sh)
    union = (a.w / sw) * (a.h / sh) + (b.w / sw) * (b.h / sh) - inter
    return min(1.0, inter / union)


def grounded_metrics(pred_nouns, pred_boxes, frame: SituationFrame, require_noun: bool = True) -> tuple[bool, bool]:
    """(grnd value, grnd value-all) for one frame.

    A role is grounded-correct when its noun is correct (unless
    ``require_noun`` is off) and, if a ground-truth box exists, the predicted
    box overlaps it with IoU >= 0.5.
    """
    nouns_ok = role_correct(pred_nouns, frame)
    gt_boxes = frame.boxes or (None,) * frame.num_roles
    if len(pred_boxes) != frame.num_roles:
        raise ValueError(f"{len(pred_boxes)} boxes for {frame.num_roles} roles ({frame.image_id})")
    hits = []
    for ok, pb, gb in zip(nouns_ok, pred_boxes, gt_boxes):
        box_ok = gb is None or (pb is not None and iou(pb, gb) >= IOU_THRESHOLD)
        hits.append(box_ok and (ok or not require_noun))
    return any(hits), all(hits)


def verb_topk_accuracy(preds: Sequence[Sequence[int]], gts: Sequence[int], k: Optional[int] = None) -> float:
    if len(preds) != len(gts):
        raise ValueError("prediction and ground-truth counts differ")
    if not gts:
        return 0.0
    hits = sum(int(g) in [int(p) for p in (pr if k is None else pr[:k])] for pr, g in zip(preds, gts))
    return hits / len(gts)


@dataclass
class EvalReport:
    setting: str
    frames: int = 0
    counts: dict[str, int] = field(default_factory=dict)
    lea: str = "unimplemented"

    def add(self, name: str, hit: bool):
        self.counts[name] = self.counts.get(name, 0) + int(hit)

    def merge(self, other: "EvalReport") -> "EvalReport":
        if other.setting != self.setting:
            raise ValueError("cannot merge reports from different settings")
        out = EvalReport(self.setting, self.frames + other.frames, dict(self.counts))
        for k, v in other.counts.items():
            out.counts[k] = out.counts.get(k, 0) + v
        return out

    def scores(self) -> dict[str, float]:
        n = max(self.frames, 1)
        return {k: v / n for k, v in sorted(self.counts.items())}

    def to_json(self) -> dict:
        return {"setting": self.setting, "frames": self.frames, "counts": dict(sorted(self.counts.items())), "scores": self.scores(), "lea": self.lea}


def score_frames(frames, pred_nouns, pred_boxes=None, verb_hits=None, setting="gt-verb", require_noun=True) -> EvalReport:
    """Aggregate per-frame metrics.

    ``verb_hits[i]`` says whether the frame's verb counts as predicted in the
    current setting; frames with a missed verb get no noun credit.
    """
    rep = EvalReport(setting)
    for i, frame in enumerate(frames):
        rep.frames += 1
        verb_ok = True if verb_hits is None else bool(verb_hits[i])
        if verb_hits is not None:
            rep.add("verb", verb_ok)
        v, va = value_metrics(pred_nouns[i], frame) if verb_ok else (False, False)
        rep.add("value", v)
        rep.add("value-all", va)
        if pred_boxes is not None:
            gv, gva = grounded_metrics(pred_nouns[i], pred_boxes[i], frame, require_noun) if verb_ok else (False, False)
            rep.add("grnd value", gv)
            rep.add("grnd value-all", gva)
    return rep


# --- generation metrics ----------------------------------------------------


def _ngrams(words: Sequence[str], n: int) -> Counter:
    return Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))


def _cook(sentence: str, n: int) -> Counter:
    words = sentence.split()
    counts = Counter()
    for k in range(1, n + 1):
        counts.update(_ngrams(words, k))
    return counts


class CiderScorer:
    """Corpus CIDEr with document frequencies taken from the references.

    ``variant="cider-d"`` (the default, as used by the common COCO caption
    evaluation code) clips candidate n-gram weights by the reference weights
    and applies a Gaussian length penalty; ``"cider"`` is plain TF-IDF cosine
    similarity averaged over 1..n-grams. Scores carry the conventional factor
    of 10.
    """

    def __init__(self, n: int = 4, sigma: float = 6.0, variant: str = "cider-d"):
        if variant not in ("cider", "cider-d"):
            raise ValueError(f"unknown CIDEr variant {variant!r}")
        self.n, self.sigma, self.variant = n, sigma, variant

    def _vec(self, counts: Counter, df, log_n):
        vec = [defaultdict(float) for _ in range(self.n)]
        norm = [0.0] * self.n
        length = 0
        for gram, tf in counts.items():
            k = len(gram) - 1
            w = tf * (log_n - math.log(max(1.0, df[gram])))
            vec[k][gram] = w
            norm[k] += w * w
            if k == 1:
                length += tf
        return vec, [math.sqrt(x) for x in norm], length

    def _sim(self, hyp, ref):
        (vh, nh, lh), (vr, nr, lr) = hyp, ref
        val = np.zeros(self.n)
        for k in range(self.n):
            for gram, w in vh[k].items():
                if self.variant == "cider-d":
                    val[k] += min(w, vr[k].get(gram, 0.0)) * vr[k].get(gram, 0.0)
                else:
                    val[k] += w * vr[k].get(gram, 0.0)
            if nh[k] != 0 and nr[k] != 0:
                val[k] /= nh[k] * nr[k]
            if self.variant == "cider-d":
                val[k] *= math.exp(-((lh - lr) ** 2) / (2 * self.sigma**2))
        return val

    def score_items(self, candidates: Sequence[str], references: Sequence[Sequence[str]]) -> np.ndarray:
        if len(candidates) != len(references):
            raise ValueError("candidate and reference counts differ")
        if not candidates:
            raise ValueError("empty corpus")
        crefs = []
        for refs in references:
            if not refs:
                raise ValueError("empty reference set")
            crefs.append([_cook(r, self.n) for r in refs])
        df = Counter()
        for refs in crefs:
            df.update(set(g for r in refs for g in r))
        log_n = math.log(float(len(crefs)))
        scores = []
        for cand, refs in zip(candidates, crefs):
            hyp = self._vec(_cook(cand, self.n), df, log_n)
            total = np.zeros(self.n)
            for r in refs:
                total += self._sim(hyp, self._vec(r, df, log_n))
            scores.append(float(np.mean(total)) / len(refs) * 10.0)
        return np.array(scores)


def cider(candidates: Sequence[str], references: Sequence[Sequence[str]], groups: Optional[Sequence[Hashable]] = None, variant: str = "cider-d") -> float:
    """Corpus CIDEr, or with ``groups`` the macro-average of per-group mean item scores.

    Document frequencies always come from the full reference corpus.
    """
    scores = CiderScorer(variant=variant).score_items(candidates, references)
    if groups is None:
        return float(scores.mean())
    if len(groups) != len(scores):
        raise ValueError("group labels do not match candidates")
    by_group = defaultdict(list)
    for g, s in zip(groups, scores):
        by_group[g].append(s)
    return float(np.mean([np.mean(v) for v in by_group.values()]))


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, references: Iterable[str], beta: float = 1.2) -> float:
    """LCS F-measure, best over the references."""
    cand = candidate.split()
    best = 0.0
    for ref in references:
        ref = ref.split()
        lcs = lcs_length(cand, ref)
        if lcs == 0:
            continue
        p, r = lcs / len(cand), lcs / len(ref)
        best = max(best, (1 + beta**2) * p * r / (r + beta**2 * p))
    return best
