"""Attention and MLP building blocks shared by the image and video models.

Masks are boolean "may attend" tensors broadcastable to (B, Lq, Lk); blocked
entries get -inf before the softmax, so they receive exactly zero weight.
"""

from __future__ import annotations

import math
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn


def masked_softmax_attention(q, k, v, allowed: Optional[torch.Tensor] = None):
    """softmax(q k^T / sqrt(d_k)) v over the last two dims; returns (out, weights)."""
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    if allowed is not None:
        scores = scores.masked_fill(~allowed, float("-inf"))
    weights = torch.softmax(scores, dim=-1)
    return weights @ v, weights


class MultiHeadAttention(nn.Module):
    """Multi-head attention with separate query/key/value projections.

    With ``shared_kv`` the keys and values come from one projection of the
    memory (K = V = W x), which is the form used by the patch cross-attention.
    """

    def __init__(self, dim: int, heads: int, kv_dim: Optional[int] = None, shared_kv: bool = False):
        super().__init__()
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by {heads} heads")
        kv_dim = kv_dim or dim
        self.heads = heads
        self.head_dim = dim // heads
        self.shared_kv = shared_kv
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(kv_dim, dim)
        self.v_proj = None if shared_kv else nn.Linear(kv_dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def _split(self, x):
        b, n, _ = x.shape
        return x.view(b, n, self.heads, self.head_dim).transpose(1, 2)

    def attend(self, query, memory, allowed=None):
        """Attention before the output projection: (B, Lq, dim), weights (B, H, Lq, Lk)."""
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(memory))
        v = k if self.shared_kv else self._split(self.v_proj(memory))
        if allowed is not None:
            allowed = allowed.unsqueeze(1)
        out, weights = masked_softmax_attention(q, k, v, allowed)
        b, h, n, hd = out.shape
        return out.transpose(1, 2).reshape(b, n, h * hd), weights

    def forward(self, query, memory, allowed=None):
        out, weights = self.attend(query, memory, allowed)
        return self.out_proj(out), weights


class FeedForward(nn.Sequential):
    def __init__(self, dim: int, hidden: int, dropout: float):
        super().__init__(nn.Linear(dim, hidden), nn.ReLU(), nn.Dropout(dropout), nn.Linear(hidden, dim))


class EncoderLayer(nn.Module):
    """Post-norm self-attention block."""

    def __init__(self, dim: int, heads: int, ff_dim: int, dropout: float = 0.1):
        super().__init__()
        self.attn = MultiHeadAttention(dim, heads)
        self.ff = FeedForward(dim, ff_dim, dropout)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, allowed=None):
        a, w = self.attn(x, x, allowed)
        x = self.norm1(x + self.drop(a))
        x = self.norm2(x + self.drop(self.ff(x)))
        return x, w


class CrossAttentionLayer(nn.Module):
    """Queries attend to a memory whose keys and values share a projection."""

    def __init__(self, dim: int, heads: int, kv_dim: int, ff_dim: int, dropout: float = 0.1):
        super().__init__()
        self.attn = MultiHeadAttention(dim, heads, kv_dim=kv_dim, shared_kv=True)
        self.ff = FeedForward(dim, ff_dim, dropout)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, memory, allowed=None):
        a, w = self.attn(x, memory, allowed)
        x = self.norm1(x + self.drop(a))
        x = self.norm2(x + self.drop(self.ff(x)))
        return x, w


class DecoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, ff_dim: int, dropout: float = 0.1):
        super().__init__()
        self.self_attn = MultiHeadAttention(dim, heads)
        self.cross_attn = MultiHeadAttention(dim, heads)
        self.ff = FeedForward(dim, ff_dim, dropout)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.norm3 = nn.LayerNorm(dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, memory, self_allowed, memory_allowed):
        a, _ = self.self_attn(x, x, self_allowed)
        x = self.norm1(x + self.drop(a))
        a, _ = self.cross_attn(x, memory, memory_allowed)
        x = self.norm2(x + self.drop(a))
        return self.norm3(x + self.drop(self.ff(x)))


class MLPBlock(nn.Module):
    """Linear -> Dropout -> ReLU -> LayerNorm."""

    def __init__(self, in_dim: int, out_dim: int, dropout: float = 0.2):
        super().__init__()
        self.linear = nn.Linear(in_dim, out_dim)
        self.drop = nn.Dropout(dropout)
        self.norm = nn.LayerNorm(out_dim)

    def forward(self, x):
        return self.norm(F.relu(self.drop(self.linear(x))))


class InputBlock(nn.Module):
    """Linear projection followed by LayerNorm (first block of the noun MLP)."""

    def __init__(self, in_dim: int, out_dim: int):
        super().__init__()
        self.linear = nn.Linear(in_dim, out_dim)
        self.norm = nn.LayerNorm(out_dim)

    def forward(self, x):
        return self.norm(self.linear(x))


def key_padding_allowed(mask: torch.Tensor, n_queries: Optional[int] = None) -> torch.Tensor:
    """(B, L) validity mask -> (B, Lq, L) allowed-attention mask over keys."""
    n_queries = mask.shape[1] if n_queries is None else n_queries
    return mask[:, None, :].expand(-1, n_queries, -1)


def causal_allowed(n: int, device=None) -> torch.Tensor:
    return torch.ones(n, n, dtype=torch.bool, device=device).tril()
