"""Image-level heads: verb classifier and multi-head role predictor."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .ontology import MAX_ROLES


@dataclass(frozen=True)
class VerbHeadConfig:
    hidden_layers: int = 1
    hidden_dim: int = 1024
    dropout: float = 0.5

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("verb head needs at least one hidden layer")


class VerbMLP(nn.Module):
    """Pooled image embedding -> verb logits (ReLU MLP, dropout before the classifier)."""

    def __init__(self, d: int, n_verbs: int, config: VerbHeadConfig = VerbHeadConfig()):
        super().__init__()
        self.config = config
        self.d = d
        layers = []
        width = d
        for _ in range(config.hidden_layers):
            layers += [nn.Linear(width, config.hidden_dim), nn.ReLU()]
            width = config.hidden_dim
        self.body = nn.Sequential(*layers)
        self.dropout = nn.Dropout(config.dropout)
        self.classifier = nn.Linear(width, n_verbs)

    def forward(self, pooled: torch.Tensor) -> torch.Tensor:
        if pooled.shape[-1] != self.d:
            raise ValueError(f"verb head expects dim {self.d}, got {pooled.shape[-1]}")
        return self.classifier(self.dropout(self.body(pooled)))


def topk_with_ties(logits: torch.Tensor, k: int) -> torch.Tensor:
    """Indices of the k largest entries along the last dim, lower index first on ties."""
    n = logits.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    # stable sort on the negated logits keeps the lower index first among equals
    order = torch.sort(-logits, dim=-1, stable=True).indices
    return order[..., :k]


@torch.no_grad()
def predict_verb(head: VerbMLP, pooled, k: int = 1) -> list[tuple[int, float]]:
    """Top-k (verb index, logit) pairs for one pooled embedding, best first."""
    was_training = head.training
    head.eval()
    x = torch.as_tensor(pooled, dtype=next(head.parameters()).dtype)
    logits = head(x)
    head.train(was_training)
    idx = topk_with_ties(logits, k)
    return [(int(i), float(logits[i])) for i in idx]


@dataclass(frozen=True)
class RoleHeadConfig:
    heads: int = MAX_ROLES
    hidden_dim: int = 1024
    dropout: float = 0.5


class RoleHead(nn.Module):
    """[pooled image; verb embedding] -> one (|roles| + 1)-way classifier per role slot.

    The extra class (index ``n_roles``) means "no role in this slot".
    """

    def __init__(self, d: int, n_roles: int, config: RoleHeadConfig = RoleHeadConfig()):
        super().__init__()
        self.config = config
        self.d = d
        self.n_roles = n_roles
        self.body = nn.Sequential(nn.Linear(2 * d, config.hidden_dim), nn.ReLU(), nn.Dropout(config.dropout))
        self.heads = nn.ModuleList(nn.Linear(config.hidden_dim, n_roles + 1) for _ in range(config.heads))

    @property
    def no_role(self) -> int:
        return self.n_roles

    def forward(self, pooled: torch.Tensor, verb_emb: torch.Tensor) -> torch.Tensor:
        """Returns logits of shape (..., heads, n_roles + 1)."""
        if pooled.shape[-1] != self.d or verb_emb.shape[-1] != self.d:
            raise ValueError(f"role head expects dim {self.d}")
        h = self.body(torch.cat([pooled, verb_emb], dim=-1))
        return torch.stack([head(h) for head in self.heads], dim=-2)


def decode_roles(head_argmax, no_role: int) -> list[int]:
    """Per-head argmax -> ordered role list (stop at "no role", drop repeats)."""
    out = []
    for r in head_argmax:
        r = int(r)
        if r == no_role:
            break
        if r not in out:
            out.append(r)
    return out


@torch.no_grad()
def predict_roles(head: RoleHead, pooled, verb_emb) -> list[int]:
    was_training = head.training
    head.eval()
    dtype = next(head.parameters()).dtype
    logits = head(torch.as_tensor(pooled, dtype=dtype), torch.as_tensor(verb_emb, dtype=dtype))
    head.train(was_training)
    return decode_roles(logits.argmax(-1), head.no_role)


def role_targets(roles, heads: int, no_role: int) -> list[int]:
    """Ground-truth role list padded with the no-role class to ``heads`` slots."""
    if len(roles) > heads:
        raise ValueError(f"{len(roles)} roles exceed {heads} heads")
    return list(roles) + [no_role] * (heads - len(roles))
