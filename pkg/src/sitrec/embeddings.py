"""Embedding providers: the contract every encoder satisfies, a deterministic
synthetic provider, on-disk caches, and the learnable projection used when
encoder width differs from model width.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np
import torch
from torch import nn

from .ontology import NUM_EVENTS, Ontology


@dataclass(frozen=True)
class ProviderConfig:
    name: str
    d: int
    p: int  # patch tokens, class token included when class_token is set
    frames: int = 8  # unpooled tokens per video event
    class_token: bool = True
    deterministic_seed: int = 0

    @property
    def grid(self) -> int:
        cells = self.p - int(self.class_token)
        g = math.isqrt(cells)
        if g * g != cells:
            raise ValueError(f"{self.name}: {cells} patch cells is not a square grid")
        return g


CONFIGS: dict[str, ProviderConfig] = {}


def register_config(config: ProviderConfig) -> ProviderConfig:
    existing = CONFIGS.get(config.name)
    if existing is not None and existing != config:
        raise ValueError(f"config {config.name!r} already registered with different shape")
    CONFIGS[config.name] = config
    return config


for _cfg in (
    ProviderConfig("vit-b32", 512, 50),
    ProviderConfig("vit-b16", 512, 197),
    ProviderConfig("vit-l14", 768, 257),
    ProviderConfig("vit-l14-336", 768, 577),
    ProviderConfig("xclip-b32", 512, 50, frames=8),
    ProviderConfig("xclip-l14", 768, 257, frames=8),
):
    register_config(_cfg)
BUNDLED = tuple(CONFIGS)


def get_config(name: str) -> ProviderConfig:
    try:
        return CONFIGS[name]
    except KeyError:
        raise KeyError(f"unknown provider config {name!r}; known: {sorted(CONFIGS)}") from None


@dataclass(frozen=True)
class EmbeddingBundle:
    pooled: np.ndarray  # (d,)
    patches: np.ndarray  # (p, d)


@dataclass(frozen=True)
class VideoEventEmbedding:
    pooled: np.ndarray  # (d,)
    unpooled: np.ndarray  # (t, d)


class EmbeddingProvider(Protocol):
    config: ProviderConfig

    def embed_image(self, image_ref: str) -> EmbeddingBundle: ...

    def embed_text(self, s: str) -> np.ndarray: ...

    def embed_video(self, video_ref: str) -> list[VideoEventEmbedding]: ...


def _unit(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.maximum(n, 1e-12)


def _rng(*parts) -> np.random.Generator:
    key = "\x1f".join(str(p) for p in parts).encode()
    return np.random.default_rng(int.from_bytes(hashlib.sha256(key).digest()[:8], "little"))


class SyntheticProvider:
    """Deterministic provider whose image embeddings encode a planted scene.

    ``scenes`` maps an image id to ``{"verb": name, "nouns": [name per role],
    "boxes": [normalized (x1, y1, x2, y2) or None per role]}`` and a video id
    to ``{"events": [{"verb": name, "phrases": [...]}, ...]}``. Instead of
    ``boxes`` a scene may give ``"cells"``, one patch cell (or None) per role,
    which plants the noun in that cell alone. Refs starting with ``noise:``
    produce pure-noise images/videos.

    The pooled embedding is the unit-normalized sum of the verb and noun text
    embeddings plus Gaussian noise. Patches are rendered at the provider's own
    grid: each cell mixes the nouns of the objects overlapping it, weighted by
    the fraction of the cell they cover, with a random background vector
    filling the uncovered part. Small objects therefore fade in coarse grids.
    """

    def __init__(self, config: ProviderConfig, seed: int = 0, scenes: Optional[Mapping] = None, noise: float = 0.1):
        self.config = config
        self.seed = seed
        self.noise = noise
        self.scenes = dict(scenes or {})
        self._text_cache: dict[str, np.ndarray] = {}

    def embed_text(self, s: str) -> np.ndarray:
        if not s:
            raise ValueError("cannot embed an empty string")
        vec = self._text_cache.get(s)
        if vec is None:
            vec = _unit(_rng(self.seed, "text", s).standard_normal(self.config.d))
            vec.setflags(write=False)
            self._text_cache[s] = vec
        return vec

    def _noisy(self, rng, base):
        # noise is relative: a draw of expected norm ``noise`` per vector
        return _unit(base + self.noise / np.sqrt(self.config.d) * rng.standard_normal(base.shape))

    def _cells(self, scene, nouns) -> tuple[dict[int, np.ndarray], dict[int, float]]:
        """Noun mixture and total covered fraction for every touched cell."""
        g = self.config.grid
        mix: dict[int, np.ndarray] = {}
        cover: dict[int, float] = {}
        if "boxes" in scene:
            for emb, box in zip(nouns, scene["boxes"]):
                if box is None:
                    continue
                x1, y1, x2, y2 = box
                for row in range(max(0, int(y1 * g)), min(g, int(math.ceil(y2 * g)))):
                    for col in range(max(0, int(x1 * g)), min(g, int(math.ceil(x2 * g)))):
                        ox = min(x2, (col + 1) / g) - max(x1, col / g)
                        oy = min(y2, (row + 1) / g) - max(y1, row / g)
                        frac = max(0.0, ox) * max(0.0, oy) * g * g
                        if frac > 0:
                            c = row * g + col
                            mix[c] = mix.get(c, 0) + frac * emb
                            cover[c] = cover.get(c, 0.0) + frac
        else:
            for emb, cell in zip(nouns, scene["cells"]):
                if cell is not None:
                    mix[cell] = mix.get(cell, 0) + emb
                    cover[cell] = cover.get(cell, 0.0) + 1.0
        return mix, cover

    def embed_image(self, image_ref: str) -> EmbeddingBundle:
        cfg = self.config
        rng = _rng(self.seed, "image", image_ref)
        if image_ref.startswith("noise:"):
            pooled = _unit(rng.standard_normal(cfg.d))
            patches = _unit(rng.standard_normal((cfg.p, cfg.d)))
            return EmbeddingBundle(pooled, patches)
        scene = self.scenes.get(image_ref)
        if scene is None:
            raise KeyError(f"unknown image ref {image_ref!r}")
        verb = self.embed_text(scene["verb"])
        nouns = [self.embed_text(n) for n in scene["nouns"]]
        pooled = self._noisy(rng, verb + sum(nouns))
        patches = _unit(rng.standard_normal((cfg.p, cfg.d)))
        offset = int(cfg.class_token)
        mix, cover = self._cells(scene, nouns)
        for cell in sorted(mix):
            background = patches[offset + cell] * max(0.0, 1.0 - cover[cell])
            patches[offset + cell] = self._noisy(rng, _unit(mix[cell] + background))
        if cfg.class_token:
            patches[0] = pooled
        return EmbeddingBundle(pooled, patches)

    def embed_video(self, video_ref: str) -> list[VideoEventEmbedding]:
        cfg = self.config
        rng = _rng(self.seed, "video", video_ref)
        if video_ref.startswith("noise:"):
            return [
                VideoEventEmbedding(_unit(rng.standard_normal(cfg.d)), _unit(rng.standard_normal((cfg.frames, cfg.d))))
                for _ in range(NUM_EVENTS)
            ]
        scene = self.scenes.get(video_ref)
        if scene is None:
            raise KeyError(f"unknown video ref {video_ref!r}")
        out = []
        for ev in scene["events"]:
            base = self.embed_text(ev["verb"]) + sum(self.embed_text(ph) for ph in ev["phrases"])
            base = _unit(base)
            pooled = self._noisy(rng, base)
            unpooled = self._noisy(rng, np.broadcast_to(base, (cfg.frames, cfg.d)))
            out.append(VideoEventEmbedding(pooled, unpooled))
        if len(out) != NUM_EVENTS:
            raise ValueError(f"video {video_ref!r} has {len(out)} events")
        return out


# --- caches ----------------------------------------------------------------


def vocabulary_hash(names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(names).encode()).hexdigest()[:16]


def _sidecar(provider, names: Sequence[str], **extra) -> dict:
    cfg = provider.config
    return {
        "provider": cfg.name,
        "d": cfg.d,
        "p": cfg.p,
        "seed": getattr(provider, "seed", None),
        "vocabulary_hash": vocabulary_hash(names),
        **extra,
    }


def embed_vocabulary(provider, names: Sequence[str]) -> np.ndarray:
    if not names:
        return np.zeros((0, provider.config.d))
    return np.stack([provider.embed_text(n) for n in names])


@dataclass(frozen=True)
class OntologyEmbeddings:
    verbs: np.ndarray  # (V, d)
    roles: np.ndarray  # (R, d)
    nouns: np.ndarray  # (N, d)


def ontology_embeddings(provider, ontology: Ontology, cache_path: Optional[Path] = None) -> OntologyEmbeddings:
    """Text embeddings of every verb, role and noun name.

    With ``cache_path`` the stacked matrix is written once (``.npy`` plus a
    ``.json`` sidecar) and reused while the sidecar still matches.
    """
    names = [*ontology.verbs, *ontology.roles, *ontology.nouns]
    meta = _sidecar(provider, names)
    mat = None
    if cache_path is not None:
        cache_path = Path(cache_path)
        side = cache_path.with_suffix(".json")
        if cache_path.exists() and side.exists() and json.loads(side.read_text()) == meta:
            mat = np.load(cache_path)
    if mat is None:
        mat = embed_vocabulary(provider, names)
        if cache_path is not None:
            np.save(cache_path, mat)
            cache_path.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    v, r = len(ontology.verbs), len(ontology.roles)
    return OntologyEmbeddings(mat[:v], mat[v : v + r], mat[v + r :])


def save_bundle_cache(path, provider, image_refs: Sequence[str]) -> None:
    """Precompute image bundles into a directory of two ``.npy`` arrays and a JSON sidecar.

    This is the format an external encoder process writes so that
    ``PrecomputedProvider`` can serve its outputs.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    bundles = [provider.embed_image(r) for r in image_refs]
    np.save(path / "pooled.npy", np.stack([b.pooled for b in bundles]))
    np.save(path / "patches.npy", np.stack([b.patches for b in bundles]))
    meta = _sidecar(provider, list(image_refs), image_refs=list(image_refs), config=asdict(provider.config))
    (path / "bundles.json").write_text(json.dumps(meta, indent=1, sort_keys=True))


class PrecomputedProvider:
    """Serves image bundles from a cache written by ``save_bundle_cache``.

    Text embeddings are delegated to ``text_provider`` (the same encoder that
    produced the bundles).
    """

    def __init__(self, path, text_provider=None):
        path = Path(path)
        meta = json.loads((path / "bundles.json").read_text())
        self.config = ProviderConfig(**meta["config"])
        self.seed = meta.get("seed")
        self._index = {r: i for i, r in enumerate(meta["image_refs"])}
        self._pooled = np.load(path / "pooled.npy", mmap_mode="r")
        self._patches = np.load(path / "patches.npy", mmap_mode="r")
        if self._patches.shape[1:] != (self.config.p, self.config.d):
            raise ValueError(f"cached patches have shape {self._patches.shape[1:]}, config says {(self.config.p, self.config.d)}")
        self.text_provider = text_provider

    def embed_image(self, image_ref: str) -> EmbeddingBundle:
        i = self._index.get(image_ref)
        if i is None:
            raise KeyError(f"image {image_ref!r} not in cache")
        return EmbeddingBundle(np.array(self._pooled[i]), np.array(self._patches[i]))

    def embed_text(self, s: str) -> np.ndarray:
        if self.text_provider is None:
            raise RuntimeError("no text provider attached to the bundle cache")
        return self.text_provider.embed_text(s)

    def embed_video(self, video_ref: str):
        raise NotImplementedError("bundle caches hold image embeddings only")


# --- projection ------------------------------------------------------------


class Projection(nn.Linear):
    """Learnable affine map from encoder width to model width."""

    def __init__(self, in_dim: int, out_dim: int, identity_init: bool = False):
        super().__init__(in_dim, out_dim)
        if identity_init:
            if in_dim != out_dim:
                raise ValueError("identity init needs a square projection")
            with torch.no_grad():
                self.weight.copy_(torch.eye(in_dim))
                self.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.in_features:
            raise ValueError(f"projection expects last dim {self.in_features}, got {x.shape[-1]}")
        return super().forward(x)


def project(x: torch.Tensor, projection: Projection) -> torch.Tensor:
    return projection(x)
