"""Dense tensors for training and evaluation, built from frames and a provider."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from .embeddings import OntologyEmbeddings
from .heads import role_targets
from .ontology import ARG_SLOTS, MAX_ROLES, Ontology, SituationFrame, VideoSituation
from .video import Tokenizer, event_dicts, render

DTYPE = torch.float32


@dataclass
class ImageTensors:
    image_ids: list[str]
    pooled: torch.Tensor  # (N, d)
    patches: torch.Tensor  # (N, p, d)
    verb: torch.Tensor  # (N,) long
    roles: torch.Tensor  # (N, 6) long, -1 padding
    mask: torch.Tensor  # (N, 6) bool
    labels: torch.Tensor  # (N, 6, q) long, -1 padding
    boxes: torch.Tensor  # (N, 6, 4) (cx, cy, h, w)
    present: torch.Tensor  # (N, 6) bool, role has a ground-truth box
    role_targets: torch.Tensor  # (N, 6) long, no-role padded

    def __len__(self):
        return len(self.image_ids)

    def subset(self, idx) -> "ImageTensors":
        idx = torch.as_tensor(idx, dtype=torch.long)
        fields = {k: v[idx] for k, v in vars(self).items() if isinstance(v, torch.Tensor)}
        return ImageTensors([self.image_ids[int(i)] for i in idx], **fields)


def image_tensors(frames: Sequence[SituationFrame], ontology: Ontology, provider) -> ImageTensors:
    if not frames:
        raise ValueError("no frames to tensorize")
    n = len(frames)
    q = max(f.num_annotators for f in frames)
    bundles = [provider.embed_image(f.image_id) for f in frames]
    roles = torch.full((n, MAX_ROLES), -1, dtype=torch.long)
    labels = torch.full((n, MAX_ROLES, q), -1, dtype=torch.long)
    boxes = torch.zeros((n, MAX_ROLES, 4), dtype=DTYPE)
    present = torch.zeros((n, MAX_ROLES), dtype=torch.bool)
    targets = torch.empty((n, MAX_ROLES), dtype=torch.long)
    for i, f in enumerate(frames):
        m = f.num_roles
        roles[i, :m] = torch.tensor(f.roles)
        labels[i, :m, : f.num_annotators] = torch.tensor(np.asarray(f.annotator_nouns, dtype=np.int64))
        for j, b in enumerate(f.boxes or ()):
            if b is not None:
                boxes[i, j] = torch.tensor(b.as_tuple(), dtype=DTYPE)
                present[i, j] = True
        targets[i] = torch.tensor(role_targets(f.roles, MAX_ROLES, ontology.no_role))
    return ImageTensors(
        image_ids=[f.image_id for f in frames],
        pooled=torch.as_tensor(np.stack([b.pooled for b in bundles]), dtype=DTYPE),
        patches=torch.as_tensor(np.stack([b.patches for b in bundles]), dtype=DTYPE),
        verb=torch.tensor([f.verb for f in frames], dtype=torch.long),
        roles=roles,
        mask=roles >= 0,
        labels=labels,
        boxes=boxes,
        present=present,
        role_targets=targets,
    )


@dataclass
class Tables:
    """Text-embedding lookup tables as tensors."""

    verbs: torch.Tensor
    roles: torch.Tensor
    nouns: torch.Tensor

    @classmethod
    def from_embeddings(cls, emb: OntologyEmbeddings) -> "Tables":
        t = lambda a: torch.as_tensor(np.asarray(a), dtype=DTYPE)
        return cls(t(emb.verbs), t(emb.roles), t(emb.nouns))

    def role_embs(self, roles: torch.Tensor) -> torch.Tensor:
        """(…, m) role ids with -1 padding -> (…, m, d), zeros at padding."""
        out = self.roles[roles.clamp(min=0)]
        return out * (roles >= 0).unsqueeze(-1).to(out.dtype)


# --- video -----------------------------------------------------------------


@dataclass
class VideoTensors:
    video_ids: list[str]
    pooled: torch.Tensor  # (N, 5, d)
    unpooled: torch.Tensor  # (N, 5, t, d)
    verbs: torch.Tensor  # (N, 5, d)
    roles: torch.Tensor  # (N, 5, 4, d)
    slot_mask: torch.Tensor  # (N, 5, 4) bool
    targets: list[list[int]]  # token ids, BOS ... EOS

    def __len__(self):
        return len(self.video_ids)


def slot_role_name(event, slot: str) -> str:
    item = event.args.get(slot)
    return item[0] if item else slot


def video_tensors(videos: Sequence[VideoSituation], provider, tokenizer: Tokenizer, gt_verbs: bool = True) -> VideoTensors:
    """Event embeddings plus verb and slot-role text embeddings.

    With ``gt_verbs`` off the verb inputs are zero, so the decoder has to
    infer each verb from the video alone.
    """
    if not videos:
        raise ValueError("no videos to tensorize")
    d = provider.config.d
    pooled, unpooled, verbs, roles, masks, targets = [], [], [], [], [], []
    for v in videos:
        evs = provider.embed_video(v.video_id)
        pooled.append(np.stack([e.pooled for e in evs]))
        unpooled.append(np.stack([e.unpooled for e in evs]))
        verbs.append(np.stack([provider.embed_text(e.verb) if gt_verbs else np.zeros(d) for e in v.events]))
        roles.append(np.stack([[provider.embed_text(slot_role_name(e, s)) for s in ARG_SLOTS] for e in v.events]))
        masks.append([[s in e.args for s in ARG_SLOTS] for e in v.events])
        targets.append(tokenizer.encode(render(event_dicts(v.events))))
    t = lambda a: torch.as_tensor(np.asarray(a), dtype=DTYPE)
    return VideoTensors(
        [v.video_id for v in videos], t(pooled), t(unpooled), t(verbs), t(roles),
        torch.tensor(masks, dtype=torch.bool), targets,
    )


def per_event_targets(video: VideoSituation, tokenizer: Tokenizer) -> list[list[int]]:
    """One BOS ... EOS sequence per event."""
    return [tokenizer.encode(render(event_dicts([ev]))) for ev in video.events]


def event_memory_valid(valid: torch.Tensor, event: int) -> torch.Tensor:
    """Restrict a (B, 20) memory validity mask to one event's slots."""
    slots = len(ARG_SLOTS)
    keep = torch.zeros_like(valid)
    keep[:, event * slots : (event + 1) * slots] = True
    out = valid & keep
    # an event with no present slots still needs something to attend to
    empty = ~out.any(dim=1)
    if bool(empty.any()):
        out[empty, event * slots] = True
    return out

