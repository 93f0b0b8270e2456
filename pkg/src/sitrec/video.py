"""Video situation recognition: per-event encoders with event-aware masking and
a transformer decoder that writes the verb/argument sequence for all five
events at once.

Target sequences look like::

    BOS verb talk Arg0 man in suit Arg1 woman AScn office EV-SEP verb ... EOS
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import torch
from torch import nn

from .embeddings import Projection
from .layers import (
    CrossAttentionLayer,
    DecoderLayer,
    EncoderLayer,
    InputBlock,
    MLPBlock,
    causal_allowed,
)
from .ontology import ARG_SLOTS, NUM_EVENTS, VideoSituation

PAD, BOS, EOS, SEP, VERB, UNK = "PAD", "BOS", "EOS", "EV-SEP", "verb", "UNK"
SPECIALS = (PAD, BOS, EOS, SEP, VERB, *ARG_SLOTS, UNK)


class Tokenizer:
    """Whitespace word-level vocabulary; special tokens come first."""

    def __init__(self, words: Sequence[str] = ()):
        self.itos = list(SPECIALS) + sorted(set(words) - set(SPECIALS))
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    @classmethod
    def fit(cls, texts: Sequence[str], min_freq: int = 1) -> "Tokenizer":
        counts = Counter(w for t in texts for w in t.split())
        return cls([w for w, c in counts.items() if c >= min_freq])

    def __len__(self):
        return len(self.itos)

    @property
    def pad_id(self) -> int:
        return self.stoi[PAD]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        unk = self.stoi[UNK]
        return [self.stoi.get(t, unk) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.itos[int(i)] for i in ids]


def event_dicts(events) -> list[dict]:
    """EventAnnotation sequence -> plain ``{"verb": ..., slot: phrase}`` dicts."""
    return [{"verb": ev.verb, **{slot: phrase for slot, (_, phrase) in ev.args.items()}} for ev in events]


def render(events: Sequence[dict]) -> list[str]:
    """Serialize event dicts (``verb`` plus placeholder -> phrase) to tokens."""
    tokens = [BOS]
    for i, ev in enumerate(events):
        if i:
            tokens.append(SEP)
        tokens += [VERB, *ev["verb"].split()]
        for slot in ARG_SLOTS:
            if ev.get(slot):
                tokens += [slot, *ev[slot].split()]
    tokens.append(EOS)
    return tokens


@dataclass
class ParsedVideo:
    events: list[dict]
    warnings: int = 0


def parse_generated(tokens: Sequence[str]) -> ParsedVideo:
    """Best-effort inverse of ``render``; never raises.

    Malformed regions (text before any placeholder, repeated placeholders,
    empty phrases, surplus events) are dropped and counted as warnings.
    """
    body = []
    for t in tokens:
        if t == EOS:
            break
        if t not in (BOS, PAD):
            body.append(t)
    chunks = [[]]
    for t in body:
        if t == SEP:
            chunks.append([])
        else:
            chunks[-1].append(t)
    warnings = 0
    if len(chunks) > NUM_EVENTS:
        warnings += len(chunks) - NUM_EVENTS
        chunks = chunks[:NUM_EVENTS]
    events = []
    for chunk in chunks:
        ev: dict = {}
        key, words = None, []

        def flush():
            nonlocal warnings
            if key is None:
                warnings += bool(words)
                return
            if not words or key in ev:
                warnings += 1
                return
            ev[key] = " ".join(words)

        for t in chunk:
            if t == VERB or t in ARG_SLOTS:
                flush()
                key, words = t, []
            else:
                words.append(t)
        flush()
        events.append(ev)
    while len(events) < NUM_EVENTS:
        events.append({})
    return ParsedVideo(events, warnings)


# --- encoders --------------------------------------------------------------


@dataclass(frozen=True)
class DecoderConfig:
    layers: int = 3
    heads: int = 8
    dim: int = 512
    ff_dim: int = 2048
    dropout: float = 0.1
    max_len: int = 120


@dataclass(frozen=True)
class VideoConfig:
    variant: str = "mlp"  # mlp | tf | xtf
    hidden_dim: int = 512
    layers: int = 1
    heads: int = 1
    ff_dim: int = 1024
    dropout: float = 0.1
    decoder: DecoderConfig = field(default_factory=DecoderConfig)

    def __post_init__(self):
        if self.variant not in ("mlp", "tf", "xtf"):
            raise ValueError(f"unknown video encoder variant {self.variant!r}")


N_SLOTS = len(ARG_SLOTS)


def event_ids(device=None) -> torch.Tensor:
    """Event index of each of the 5 x 4 memory tokens."""
    return torch.arange(NUM_EVENTS, device=device).repeat_interleave(N_SLOTS)


def event_mask(n_events: int = NUM_EVENTS) -> torch.Tensor:
    """M[i, j] = 1 iff i == j."""
    return torch.eye(n_events, dtype=torch.bool)


class EventEncoder(nn.Module):
    """Per-event role encoders producing 5 x 4 memory tokens for the decoder.

    Inputs: ``pooled`` (B, 5, d), ``unpooled`` (B, 5, t, d), ``verbs`` (B, 5, d),
    ``roles`` (B, 5, 4, d), ``slot_mask`` (B, 5, 4). Attention in the TF and XTF
    variants never crosses events.
    """

    def __init__(self, d: int, config: VideoConfig):
        super().__init__()
        self.d = d
        self.config = config
        h = config.hidden_dim
        if config.variant == "mlp":
            blocks = [InputBlock(3 * d, h)] + [MLPBlock(h, h, config.dropout) for _ in range(config.layers - 1)]
            self.blocks = nn.Sequential(*blocks)
        elif config.variant == "tf":
            self.proj = Projection(3 * d, h)
            self.layers = nn.ModuleList(EncoderLayer(h, config.heads, config.ff_dim, config.dropout) for _ in range(config.layers))
        else:
            self.proj = Projection(2 * d, h)
            self.layers = nn.ModuleList(
                CrossAttentionLayer(h, config.heads, d, config.ff_dim, config.dropout) for _ in range(config.layers)
            )
        self.event_embed = nn.Embedding(NUM_EVENTS, h)
        self.out = nn.Linear(h, config.decoder.dim)

    def forward(self, pooled, unpooled, verbs, roles, slot_mask):
        b = roles.shape[0]
        if roles.shape[1] != NUM_EVENTS:
            raise ValueError(f"expected {NUM_EVENTS} events, got {roles.shape[1]}")
        n = NUM_EVENTS * N_SLOTS
        ev = event_ids(roles.device)
        roles = roles.reshape(b, n, -1)
        verbs_t = verbs.repeat_interleave(N_SLOTS, dim=1)
        # the first slot of every event stays visible so that events without
        # arguments still expose their verb to the decoder
        valid = slot_mask.clone()
        valid[:, :, 0] = True
        valid = valid.reshape(b, n)
        v = self.config.variant
        if v == "mlp":
            x = self.blocks(torch.cat([pooled.repeat_interleave(N_SLOTS, dim=1), verbs_t, roles], dim=-1))
        elif v == "tf":
            x = self.proj(torch.cat([pooled.repeat_interleave(N_SLOTS, dim=1), verbs_t, roles], dim=-1))
            same = ev[:, None] == ev[None, :]
            allowed = (same[None] & valid[:, None, :]) | torch.eye(n, dtype=torch.bool)[None]
            for layer in self.layers:
                x, _ = layer(x, allowed)
        else:
            t = unpooled.shape[2]
            memory = unpooled.reshape(b, NUM_EVENTS * t, -1)
            key_ev = torch.arange(NUM_EVENTS, device=roles.device).repeat_interleave(t)
            allowed = (ev[:, None] == key_ev[None, :])[None].expand(b, -1, -1)
            x = self.proj(torch.cat([verbs_t, roles], dim=-1))
            for layer in self.layers:
                x, _ = layer(x, memory, allowed)
        x = x + self.event_embed(ev)[None]
        return self.out(x), valid


class SequenceDecoder(nn.Module):
    def __init__(self, vocab_size: int, config: DecoderConfig = DecoderConfig()):
        super().__init__()
        self.config = config
        self.embed = nn.Embedding(vocab_size, config.dim)
        self.pos = nn.Embedding(config.max_len + 1, config.dim)
        self.layers = nn.ModuleList(DecoderLayer(config.dim, config.heads, config.ff_dim, config.dropout) for _ in range(config.layers))
        self.out = nn.Linear(config.dim, vocab_size)

    def forward(self, memory, memory_valid, tokens):
        """Teacher-forced logits (B, T, V); position t predicts token t + 1."""
        t = tokens.shape[1]
        if t > self.config.max_len + 1:
            raise ValueError(f"sequence of {t} tokens exceeds max_len {self.config.max_len}")
        x = self.embed(tokens) + self.pos(torch.arange(t, device=tokens.device))[None]
        self_allowed = causal_allowed(t, tokens.device)[None]
        mem_allowed = memory_valid[:, None, :].expand(-1, t, -1)
        for layer in self.layers:
            x = layer(x, memory, self_allowed, mem_allowed)
        return self.out(x)


class VideoSrlModel(nn.Module):
    def __init__(self, d: int, vocab_size: int, config: VideoConfig = VideoConfig()):
        super().__init__()
        self.config = config
        self.encoder = EventEncoder(d, config)
        self.decoder = SequenceDecoder(vocab_size, config.decoder)

    def encode_events(self, pooled, unpooled, verbs, roles, slot_mask):
        return self.encoder(pooled, unpooled, verbs, roles, slot_mask)

    def decode_teacher_forced(self, memory, memory_valid, tokens):
        return self.decoder(memory, memory_valid, tokens)

    def forward(self, pooled, unpooled, verbs, roles, slot_mask, tokens):
        memory, valid = self.encode_events(pooled, unpooled, verbs, roles, slot_mask)
        return self.decoder(memory, valid, tokens)

    @torch.no_grad()
    def decode_greedy(self, memory, memory_valid, bos_id: int, eos_id: int, max_len: Optional[int] = None) -> list[list[int]]:
        """Argmax decoding for each batch item; stops at EOS or ``max_len`` tokens."""
        max_len = self.config.decoder.max_len if max_len is None else min(max_len, self.config.decoder.max_len)
        was_training = self.training
        self.eval()
        b = memory.shape[0]
        seq = torch.full((b, 1), bos_id, dtype=torch.long)
        done = torch.zeros(b, dtype=torch.bool)
        out = [[] for _ in range(b)]
        for _ in range(max_len):
            logits = self.decoder(memory, memory_valid, seq)[:, -1]
            nxt = logits.argmax(-1)
            for i in range(b):
                if not done[i]:
                    out[i].append(int(nxt[i]))
            done |= nxt == eos_id
            if bool(done.all()):
                break
            seq = torch.cat([seq, nxt[:, None]], dim=1)
        self.train(was_training)
        return out


def target_tensor(token_lists: Sequence[Sequence[int]], pad_id: int) -> torch.Tensor:
    n = max(len(t) for t in token_lists)
    out = torch.full((len(token_lists), n), pad_id, dtype=torch.long)
    for i, t in enumerate(token_lists):
        out[i, : len(t)] = torch.tensor(t, dtype=torch.long)
    return out


def shift_labels(tokens: torch.Tensor, pad_id: int) -> torch.Tensor:
    """Labels for teacher forcing: the next token at each position, PAD at the end."""
    return torch.cat([tokens[:, 1:], torch.full_like(tokens[:, :1], pad_id)], dim=1)


def corpus_texts(videos: Sequence[VideoSituation]) -> list[str]:
    return [" ".join(render(event_dicts(v.events))) for v in videos]
