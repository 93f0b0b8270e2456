"""Checkpoint directories: one ``.npy`` blob per tensor plus a JSON manifest.

Layout::

    ckpt/
      manifest.json   config, ontology digest, components, tensor hashes
      ontology.json   the imSitu-style space the model was trained on
      trace.json      per-epoch training metrics
      tensors/<component>.<parameter>.npy
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .ontology import Ontology, load_imsitu_space

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True)


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def ontology_digest(ontology: Optional[Ontology]) -> Optional[str]:
    return None if ontology is None else ontology.digest()


@dataclass
class Checkpoint:
    config: dict
    ontology: Optional[Ontology]  # None for video checkpoints
    state: dict[str, dict[str, torch.Tensor]]  # component -> state_dict
    trace: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)  # provider info, tokenizer, ...

    @property
    def components(self) -> list[str]:
        return sorted(self.state)

    def has(self, component: str) -> bool:
        return component in self.state

    def digest(self) -> str:
        """Content hash over config, ontology and every tensor."""
        h = hashlib.sha256()
        h.update(_dumps({"config": self.config, "ontology": ontology_digest(self.ontology), "extra": self.extra}).encode())
        for comp in self.components:
            for name in sorted(self.state[comp]):
                t = self.state[comp][name].detach().cpu().contiguous().numpy()
                h.update(f"{comp}.{name}:{t.dtype}:{t.shape}".encode())
                h.update(t.tobytes())
        return h.hexdigest()[:16]


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    path = Path(path)
    tdir = path / "tensors"
    tdir.mkdir(parents=True, exist_ok=True)
    for old in tdir.glob("*.npy"):
        old.unlink()
    tensors = {}
    for comp in ckpt.components:
        for name, t in sorted(ckpt.state[comp].items()):
            arr = t.detach().cpu().contiguous().numpy()
            key = f"{comp}.{name}"
            np.save(tdir / f"{key}.npy", arr)
            tensors[key] = {"shape": list(arr.shape), "dtype": str(arr.dtype), "sha256": _sha(arr.tobytes())}
    if ckpt.ontology is not None:
        ckpt.ontology.save(path / "ontology.json")
    manifest = {
        "format": FORMAT_VERSION,
        "config": ckpt.config,
        "ontology_digest": ontology_digest(ckpt.ontology),
        "components": ckpt.components,
        "tensors": tensors,
        "extra": ckpt.extra,
        "digest": ckpt.digest(),
    }
    (path / "manifest.json").write_text(_dumps(manifest))
    (path / "trace.json").write_text(_dumps(ckpt.trace))
    return path


def load_checkpoint(path, expect_ontology: Optional[Ontology] = None) -> Checkpoint:
    path = Path(path)
    mf = path / "manifest.json"
    if not mf.exists():
        raise CheckpointError(f"{path} is not a checkpoint (no manifest.json)")
    manifest = json.loads(mf.read_text())
    if manifest.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format')!r}")
    ontology = load_imsitu_space(path / "ontology.json") if manifest["ontology_digest"] else None
    if ontology_digest(ontology) != manifest["ontology_digest"]:
        raise CheckpointError("stored ontology does not match the manifest digest")
    if expect_ontology is not None and expect_ontology.digest() != ontology_digest(ontology):
        raise CheckpointError(
            f"ontology mismatch: checkpoint {ontology_digest(ontology)} vs data {expect_ontology.digest()}"
        )
    state: dict[str, dict[str, torch.Tensor]] = {c: {} for c in manifest["components"]}
    for key, meta in manifest["tensors"].items():
        comp, name = key.split(".", 1)
        arr = np.load(path / "tensors" / f"{key}.npy")
        if _sha(arr.tobytes()) != meta["sha256"]:
            raise CheckpointError(f"tensor {key} is corrupt (hash mismatch)")
        state[comp][name] = torch.from_numpy(arr.copy())
    trace_path = path / "trace.json"
    trace = json.loads(trace_path.read_text()) if trace_path.exists() else []
    ckpt = Checkpoint(manifest["config"], ontology, state, trace, manifest.get("extra", {}))
    if ckpt.digest() != manifest["digest"]:
        raise CheckpointError("checkpoint digest mismatch")
    return ckpt
