"""Training losses.

All losses take logits (not probabilities) and average over the elements
that contribute, as selected by the masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

# Multiplier on the multi-head role loss. The literal published formula also
# divides by the number of role classes; set to 1 / 191 to reproduce that.
ROLE_LOSS_SCALE = 1.0


@dataclass
class LossReport:
    total: torch.Tensor
    components: dict[str, torch.Tensor] = field(default_factory=dict)
    count: int = 0

    def as_dict(self) -> dict:
        return {
            "total": float(self.total),
            "count": self.count,
            **{k: float(v) for k, v in self.components.items()},
        }


def _token_ce(logits, labels):
    """Per-element cross-entropy; labels < 0 give +inf."""
    logp = torch.log_softmax(logits, dim=-1)
    safe = labels.clamp(min=0)
    ce = -logp.gather(-1, safe.unsqueeze(-1)).squeeze(-1)
    return ce.masked_fill(labels < 0, float("inf"))


def per_annotator_ce(logits, annotator_labels):
    """(..., C) logits, (..., q) labels -> (..., q) cross-entropies (+inf for label -1)."""
    c = logits.shape[-1]
    if annotator_labels.numel() and int(annotator_labels.max()) >= c:
        raise ValueError("annotator label exceeds the number of classes")
    q = annotator_labels.shape[-1]
    expanded = logits.unsqueeze(-2).expand(*logits.shape[:-1], q, c)
    return _token_ce(expanded, annotator_labels)


def maxe_loss(logits, annotator_labels, mask=None):
    """Minimum-over-annotators cross-entropy averaged over unmasked roles.

    ``logits`` is (..., m, C), ``annotator_labels`` is (..., m, q) with -1
    padding for missing annotators, ``mask`` is (..., m). On ties the first
    minimizing annotator carries the gradient.
    """
    ce = per_annotator_ce(logits, annotator_labels)
    first = ce.argmin(dim=-1, keepdim=True)
    per_role = ce.gather(-1, first).squeeze(-1)
    if mask is None:
        mask = torch.ones(per_role.shape, dtype=torch.bool)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("every role is masked; nothing to average")
    return per_role.masked_fill(~mask, 0.0).sum() / n


def annotator_ce_loss(logits, annotator_labels, mask=None):
    """Plain cross-entropy against every annotator separately, averaged (baseline to MAXE)."""
    ce = per_annotator_ce(logits, annotator_labels)
    valid = annotator_labels >= 0
    if mask is not None:
        valid = valid & mask.unsqueeze(-1)
    n = int(valid.sum())
    if n == 0:
        raise ValueError("every role is masked; nothing to average")
    return ce.masked_fill(~valid, 0.0).sum() / n


def bbox_l1(pred, gt, present):
    """Mean L1 distance over present boxes; returns (loss, count)."""
    n = int(present.sum())
    if n == 0:
        return pred.sum() * 0.0, 0
    diff = (pred - gt).abs().sum(-1)
    return diff.masked_fill(~present, 0.0).sum() / n, n


def combined_loss(logits, annotator_labels, mask, pred_boxes, gt_boxes, present) -> LossReport:
    maxe = maxe_loss(logits, annotator_labels, mask)
    l1, n_boxes = bbox_l1(pred_boxes, gt_boxes, present & mask)
    return LossReport(maxe + l1, {"maxe": maxe, "l1": l1}, int(mask.sum()) + n_boxes)


def role_ce(head_logits, targets, scale: float = None):
    """Mean over heads (and batch) of per-head cross-entropy.

    ``head_logits`` is (..., heads, R + 1), ``targets`` is (..., heads) padded
    with the no-role class.
    """
    scale = ROLE_LOSS_SCALE if scale is None else scale
    classes = head_logits.shape[-1]
    if int(targets.max()) >= classes or int(targets.min()) < 0:
        raise ValueError(f"role target outside [0, {classes})")
    ce = F.cross_entropy(head_logits.reshape(-1, classes), targets.reshape(-1))
    return scale * ce


def seq_ce(logits, targets, pad_mask):
    """Token cross-entropy averaged over non-PAD positions.

    ``pad_mask`` is True where the target is padding.
    """
    keep = ~pad_mask
    n = int(keep.sum())
    if n == 0:
        raise ValueError("every target position is padding")
    ce = _token_ce(logits, targets.masked_fill(pad_mask, 0))
    return ce.masked_fill(pad_mask, 0.0).sum() / n
