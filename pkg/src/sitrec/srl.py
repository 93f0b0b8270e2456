"""Noun prediction for semantic roles: MLP, role transformer (TF), patch
cross-attention transformer (XTF), and the attention-driven box localizer.

Batched tensors use a fixed role axis of ``MAX_ROLES`` slots with a boolean
mask; the single-frame helpers (``mlp_predict`` etc.) take exactly ``m`` roles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .embeddings import Projection
from .layers import CrossAttentionLayer, EncoderLayer, InputBlock, MLPBlock, key_padding_allowed
from .ontology import MAX_ROLES


@dataclass(frozen=True)
class MlpConfig:
    blocks: int = 3
    hidden_dim: int = 16384
    block_dropout: float = 0.2
    classifier_dropout: float = 0.5

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError("need at least one MLP block")


@dataclass(frozen=True)
class TfConfig:
    layers: int = 4
    heads: int = 8
    token_dim: int = 512
    ff_dim: int = 2048
    dropout: float = 0.1
    classifier_dropout: float = 0.5
    seq_len: int = MAX_ROLES

    def __post_init__(self):
        if self.token_dim % self.heads:
            raise ValueError("token_dim must be divisible by heads")


@dataclass(frozen=True)
class XtfConfig:
    layers: int = 4
    heads: int = 1
    query_dim: int = 512
    ff_dim: int = 2048
    dropout: float = 0.1
    classifier_dropout: float = 0.5
    seq_len: int = MAX_ROLES

    def __post_init__(self):
        if self.query_dim % self.heads:
            raise ValueError("query_dim must be divisible by heads")


@dataclass(frozen=True)
class LocalizerConfig:
    hidden_dim: int = 1024
    dropout: float = 0.2


@dataclass
class SrlOutput:
    logits: torch.Tensor  # (B, M, C)
    noun_embs: torch.Tensor  # (B, M, D)
    mask: torch.Tensor  # (B, M) bool
    attention: Optional[torch.Tensor] = None  # (B, M, p), first layer, head-averaged


class NounClassifier(nn.Sequential):
    """Dropout + linear over noun classes, shared by all roles."""

    def __init__(self, dim: int, n_nouns: int, dropout: float):
        super().__init__(nn.Dropout(dropout), nn.Linear(dim, n_nouns))


def _check_roles(roles, mask, d):
    if roles.shape[-1] != d:
        raise ValueError(f"role embeddings have dim {roles.shape[-1]}, expected {d}")
    if roles.shape[-2] > MAX_ROLES:
        raise ValueError(f"{roles.shape[-2]} roles exceed the maximum of {MAX_ROLES}")
    if mask.shape != roles.shape[:-1]:
        raise ValueError("mask shape does not match roles")


class NounMLP(nn.Module):
    """Per-role MLP over [image; verb; role]; roles do not interact."""

    kind = "mlp"

    def __init__(self, d: int, n_nouns: int, config: MlpConfig = MlpConfig()):
        super().__init__()
        self.d = d
        self.config = config
        blocks = [InputBlock(3 * d, config.hidden_dim)]
        blocks += [MLPBlock(config.hidden_dim, config.hidden_dim, config.block_dropout) for _ in range(config.blocks - 1)]
        self.blocks = nn.Sequential(*blocks)
        self.classifier = NounClassifier(config.hidden_dim, n_nouns, config.classifier_dropout)

    def forward(self, pooled, patches, verb, roles, mask) -> SrlOutput:
        _check_roles(roles, mask, self.d)
        m = roles.shape[1]
        x = torch.cat([pooled[:, None].expand(-1, m, -1), verb[:, None].expand(-1, m, -1), roles], dim=-1)
        emb = self.blocks(x)
        return SrlOutput(self.classifier(emb), emb, mask)


class RoleTransformer(nn.Module):
    """Self-attention over the frame's role tokens [image; verb; role], padding masked."""

    kind = "tf"

    def __init__(self, d: int, n_nouns: int, config: TfConfig = TfConfig()):
        super().__init__()
        self.d = d
        self.config = config
        self.proj = Projection(3 * d, config.token_dim)
        self.layers = nn.ModuleList(
            EncoderLayer(config.token_dim, config.heads, config.ff_dim, config.dropout) for _ in range(config.layers)
        )
        self.classifier = NounClassifier(config.token_dim, n_nouns, config.classifier_dropout)

    def forward(self, pooled, patches, verb, roles, mask) -> SrlOutput:
        _check_roles(roles, mask, self.d)
        m = roles.shape[1]
        x = torch.cat([pooled[:, None].expand(-1, m, -1), verb[:, None].expand(-1, m, -1), roles], dim=-1)
        x = self.proj(x)
        allowed = key_padding_allowed(mask)
        for layer in self.layers:
            x, _ = layer(x, allowed)
        return SrlOutput(self.classifier(x), x, mask)


class PatchCrossTransformer(nn.Module):
    """Verb-role queries cross-attend to image patch embeddings (K = V = W_I patches)."""

    kind = "xtf"

    def __init__(self, d: int, n_nouns: int, config: XtfConfig = XtfConfig(), p: Optional[int] = None):
        super().__init__()
        self.d = d
        self.p = p
        self.config = config
        self.query_proj = Projection(2 * d, config.query_dim)
        # wide encoders are projected down before attention
        self.patch_proj = Projection(d, config.query_dim) if d > config.query_dim else None
        kv_dim = config.query_dim if self.patch_proj is not None else d
        self.layers = nn.ModuleList(
            CrossAttentionLayer(config.query_dim, config.heads, kv_dim, config.ff_dim, config.dropout)
            for _ in range(config.layers)
        )
        self.classifier = NounClassifier(config.query_dim, n_nouns, config.classifier_dropout)

    def memory(self, patches):
        if self.p is not None and patches.shape[1] != self.p:
            raise ValueError(f"expected {self.p} patches, got {patches.shape[1]}")
        return self.patch_proj(patches) if self.patch_proj is not None else patches

    def forward(self, pooled, patches, verb, roles, mask) -> SrlOutput:
        _check_roles(roles, mask, self.d)
        m = roles.shape[1]
        x = self.query_proj(torch.cat([verb[:, None].expand(-1, m, -1), roles], dim=-1))
        mem = self.memory(patches)
        first = None
        for layer in self.layers:
            x, w = layer(x, mem)
            if first is None:
                first = w.mean(dim=1)
        return SrlOutput(self.classifier(x), x, mask, first)


class Localizer(nn.Module):
    """[verb; role; attention row] -> box (cx, cy, h, w) in (0, 1) via one MLP block."""

    def __init__(self, d: int, p: int, config: LocalizerConfig = LocalizerConfig()):
        super().__init__()
        self.d = d
        self.p = p
        self.config = config
        self.block = MLPBlock(2 * d + p, config.hidden_dim, config.dropout)
        self.out = nn.Linear(config.hidden_dim, 4)

    def zero_init(self):
        with torch.no_grad():
            self.out.weight.zero_()
            self.out.bias.zero_()
        return self

    def forward(self, verb, roles, attention) -> torch.Tensor:
        if attention.shape[-2] != roles.shape[-2]:
            raise ValueError(f"attention has {attention.shape[-2]} rows for {roles.shape[-2]} roles")
        if attention.shape[-1] != self.p:
            raise ValueError(f"attention has {attention.shape[-1]} columns, expected {self.p}")
        m = roles.shape[-2]
        x = torch.cat([verb[..., None, :].expand(*roles.shape[:-1], -1), roles, attention], dim=-1)
        return torch.sigmoid(self.out(self.block(x)))


NOUN_MODELS = {"mlp": NounMLP, "tf": RoleTransformer, "xtf": PatchCrossTransformer}
CONFIG_TYPES = {"mlp": MlpConfig, "tf": TfConfig, "xtf": XtfConfig}


def build_noun_model(kind: str, d: int, n_nouns: int, config=None, p: Optional[int] = None) -> nn.Module:
    if kind not in NOUN_MODELS:
        raise ValueError(f"unknown noun model {kind!r}")
    config = config or CONFIG_TYPES[kind]()
    if kind == "xtf":
        return PatchCrossTransformer(d, n_nouns, config, p=p)
    return NOUN_MODELS[kind](d, n_nouns, config)


# --- single-frame helpers --------------------------------------------------


def _as_batch(model, pooled, patches, verb_emb, role_embs):
    dtype = next(model.parameters()).dtype
    t = lambda a: torch.as_tensor(np.asarray(a), dtype=dtype)[None]
    roles = t(role_embs)
    mask = torch.ones(roles.shape[:2], dtype=torch.bool)
    pooled = t(pooled) if pooled is not None else None
    patches = t(patches) if patches is not None else None
    return pooled, patches, t(verb_emb), roles, mask


def _run(model, pooled, patches, verb_emb, role_embs) -> SrlOutput:
    if len(role_embs) > MAX_ROLES:
        raise ValueError(f"{len(role_embs)} roles exceed the maximum of {MAX_ROLES}")
    was_training = model.training
    model.eval()
    with torch.no_grad():
        out = model(*_as_batch(model, pooled, patches, verb_emb, role_embs))
    model.train(was_training)
    return SrlOutput(out.logits[0], out.noun_embs[0], out.mask[0], None if out.attention is None else out.attention[0])


def mlp_predict(model: NounMLP, pooled, verb_emb, role_embs) -> SrlOutput:
    return _run(model, pooled, None, verb_emb, role_embs)


def tf_predict(model: RoleTransformer, pooled, verb_emb, role_embs) -> SrlOutput:
    return _run(model, pooled, None, verb_emb, role_embs)


def xtf_predict(model: PatchCrossTransformer, patches, verb_emb, role_embs) -> SrlOutput:
    return _run(model, None, patches, verb_emb, role_embs)


def localize(localizer: Localizer, verb_emb, role_embs, attention) -> np.ndarray:
    """Boxes (m, 4) as (cx, cy, h, w)."""
    was_training = localizer.training
    localizer.eval()
    dtype = next(localizer.parameters()).dtype
    with torch.no_grad():
        boxes = localizer(
            torch.as_tensor(np.asarray(verb_emb), dtype=dtype),
            torch.as_tensor(np.asarray(role_embs), dtype=dtype),
            torch.as_tensor(np.asarray(attention), dtype=dtype),
        )
    localizer.train(was_training)
    return boxes.numpy()
