"""Adapter for pretrained CLIP encoders from Hugging Face ``transformers``.

Imported lazily: nothing here runs unless a provider named ``clip:<model id>``
is requested, and the package never downloads weights on its own. Outputs are
passed through without L2 normalization.
"""

from __future__ import annotations

import os

import numpy as np

from .embeddings import EmbeddingBundle, ProviderConfig

CACHE_ENV = "SITREC_CACHE"


class PretrainedProvider:
    def __init__(self, name: str, device: str = "cpu"):
        kind, _, model_id = name.partition(":")
        if kind != "clip" or not model_id:
            raise ValueError(f"unsupported pretrained provider {name!r}; use clip:<model id>")
        try:
            import torch
            from PIL import Image
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise RuntimeError("pretrained providers need the transformers and Pillow packages") from exc
        cache = os.environ.get(CACHE_ENV)
        self._torch, self._image = torch, Image
        self.model = CLIPModel.from_pretrained(model_id, cache_dir=cache).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(model_id, cache_dir=cache)
        vc = self.model.config.vision_config
        p = (vc.image_size // vc.patch_size) ** 2 + 1
        self.config = ProviderConfig(name, self.model.config.projection_dim, p)
        self.seed = None
        self.device = device

    def embed_text(self, s: str) -> np.ndarray:
        if not s:
            raise ValueError("cannot embed an empty string")
        with self._torch.no_grad():
            inputs = self.processor(text=[s], return_tensors="pt", padding=True).to(self.device)
            return self.model.get_text_features(**inputs)[0].cpu().numpy()

    def embed_image(self, image_ref: str) -> EmbeddingBundle:
        with self._torch.no_grad():
            image = self._image.open(image_ref).convert("RGB")
            inputs = self.processor(images=image, return_tensors="pt").to(self.device)
            out = self.model.vision_model(**inputs)
            tokens = self.model.visual_projection(self.model.vision_model.post_layernorm(out.last_hidden_state))
            pooled = self.model.visual_projection(out.pooler_output)
        return EmbeddingBundle(pooled[0].cpu().numpy(), tokens[0].cpu().numpy())

    def embed_video(self, video_ref: str):
        raise NotImplementedError("video encoders are not bundled; precompute X-CLIP features instead")
