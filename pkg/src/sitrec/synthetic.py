"""Planted synthetic datasets in the imSitu / SWiG / VidSitu file schemas.

What makes each task learnable:

* verb: the pooled image embedding contains the verb's text embedding;
* nouns: every role draws its nouns from its own pool, and the pooled
  embedding contains the true nouns, so (role, image) determines the noun;
* localization: each visible object has a box, and every patch cell it
  overlaps carries the object's noun embedding weighted by the covered
  fraction of the cell. The cell holding the box centre is the object's
  planted cell. Coarse grids dilute small objects with background;
* roles: ``roles_of`` is a function of the verb;
* video: each event's embeddings contain its verb and argument phrases.

Besides the annotation files the generator writes ``scenes.json`` (the planted
ground truth the synthetic provider renders) and ``manifest.json``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .embeddings import ProviderConfig, SyntheticProvider, register_config
from .ontology import ARG_SLOTS, BLANK, MAX_ROLES, NUM_EVENTS

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class SyntheticSpec:
    n_verbs: int = 10
    n_roles: int = 3
    n_nouns: int = 30
    frames_per_verb: int = 200
    seed: int = 0
    annotators: int = 3
    disagreement: float = 0.0
    blank_rate: float = 0.0
    min_roles: int = 1
    max_roles: int = MAX_ROLES
    grid: int = 4
    class_token: bool = True
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    n_videos: int = 0
    n_video_verbs: int = 6
    n_words: int = 40
    frames_per_event: int = 4
    box_size: tuple[float, float] = (0.2, 0.4)  # side length range, normalized

    def check(self):
        if min(self.n_verbs, self.n_roles, self.n_nouns, self.frames_per_verb, self.annotators) < 1:
            raise ValueError("sizes must be positive")
        if self.n_nouns < self.n_roles:
            raise ValueError("need at least one noun per role")
        if not 1 <= self.min_roles <= self.max_roles <= MAX_ROLES:
            raise ValueError(f"roles per verb must lie in [1, {MAX_ROLES}]")
        if self.min_roles > self.n_roles:
            raise ValueError("min_roles exceeds the number of roles")
        if min(self.max_roles, self.n_roles) > self.grid * self.grid:
            raise ValueError("more roles than patch cells")
        if not 0 <= self.disagreement <= 1 or not 0 <= self.blank_rate < 1:
            raise ValueError("rates must lie in [0, 1]")
        if not 0 < self.box_size[0] <= self.box_size[1] <= 1:
            raise ValueError("box sizes must satisfy 0 < low <= high <= 1")
        if abs(sum(self.split_fractions) - 1) > 1e-9:
            raise ValueError("split fractions must sum to 1")


def _names(prefix, n):
    width = max(2, len(str(n - 1)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True))


def _box_for(rng, grid, width, height, size=(0.2, 0.4)):
    cx, cy = rng.uniform(0.05, 0.95, size=2)
    w, h = rng.uniform(*size, size=2)
    x1, x2 = max(0.0, cx - w / 2), min(1.0, cx + w / 2)
    y1, y2 = max(0.0, cy - h / 2), min(1.0, cy + h / 2)
    # the planted cell holds the centre of the clipped box
    cell = expected_cell((x1 + x2) / 2, (y1 + y2) / 2, grid)
    return cell, [x1, y1, x2, y2], [x1 * width, y1 * height, x2 * width, y2 * height]


def generate_synthetic_dataset(out_dir, spec: SyntheticSpec = SyntheticSpec(), **overrides) -> Path:
    """Write a planted dataset to ``out_dir`` and return the directory."""
    if overrides:
        spec = SyntheticSpec(**{**asdict(spec), **overrides})
    spec.check()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    verbs = _names("verb", spec.n_verbs)
    roles = _names("role", spec.n_roles)
    nouns = _names("noun", spec.n_nouns)
    pools = {r: [n for j, n in enumerate(nouns) if j % spec.n_roles == i] for i, r in enumerate(roles)}
    hi = min(spec.max_roles, spec.n_roles)
    lo = min(spec.min_roles, hi)
    roles_of = {}
    for v in verbs:
        k = int(rng.integers(lo, hi + 1))
        roles_of[v] = [roles[i] for i in rng.permutation(spec.n_roles)[:k]]
    space = {
        "verbs": {v: {"framename": v, "order": rs, "roles": {r: {"framename": r} for r in rs}} for v, rs in roles_of.items()},
        "nouns": {n: {"gloss": [n]} for n in nouns},
    }
    _write_json(out / "imsitu_space.json", space)

    split_of = []
    for v in verbs:
        n_train = int(round(spec.frames_per_verb * spec.split_fractions[0]))
        n_dev = int(round(spec.frames_per_verb * spec.split_fractions[1]))
        labels = ["train"] * n_train + ["dev"] * n_dev + ["test"] * (spec.frames_per_verb - n_train - n_dev)
        split_of += [(v, s) for s in labels]
    order = rng.permutation(len(split_of))
    annotations = {s: {} for s in SPLITS}
    swig = {s: {} for s in SPLITS}
    scenes = {}
    for idx, j in enumerate(order):
        verb, split = split_of[j]
        image_id = f"img{idx:06d}"
        truth, cells, boxes, frames, bb = [], [], [], [{} for _ in range(spec.annotators)], {}
        width, height = (int(v) for v in rng.integers(200, 641, size=2))
        for role in roles_of[verb]:
            cell, unit_box, corners = _box_for(rng, spec.grid, width, height, spec.box_size)
            pool = pools[role]
            blank = rng.random() < spec.blank_rate
            noun = BLANK if blank else pool[int(rng.integers(len(pool)))]
            truth.append(noun)
            cells.append(None if blank else cell)
            boxes.append(None if blank else unit_box)
            bb[role] = [-1, -1, -1, -1] if blank else corners
            for a in range(spec.annotators):
                label = noun
                if rng.random() < spec.disagreement:
                    options = [n for n in pool + [BLANK] if n != noun]
                    label = options[int(rng.integers(len(options)))]
                frames[a][role] = label
        annotations[split][image_id] = {"verb": verb, "frames": [{r: ("" if n == BLANK else n) for r, n in f.items()} for f in frames]}
        swig[split][image_id] = {"verb": verb, "width": width, "height": height, "bb": bb}
        scenes[image_id] = {"verb": verb, "nouns": truth, "cells": cells, "boxes": boxes}
    for s in SPLITS:
        _write_json(out / f"{s}.json", annotations[s])
        _write_json(out / f"swig_{s}.json", swig[s])

    videos = _generate_videos(rng, spec)
    video_scenes = {}
    for split, items in videos.items():
        _write_json(out / f"vsann_{split}.json", items)
        for item in items:
            events = []
            for e in range(NUM_EVENTS):
                ev = item[f"Ev{e + 1}"]
                events.append({"verb": ev["VerbID"], "phrases": [ph for k, ph in sorted(ev.items()) if k != "VerbID"]})
            video_scenes[item["vid_seg_int_id"]] = {"events": events}

    _write_json(out / "scenes.json", {"images": scenes, "videos": video_scenes, "grid": spec.grid, "class_token": spec.class_token})
    manifest = {"generator": "planted-synthetic", "version": 1, "spec": asdict(spec)}
    _write_json(out / "manifest.json", manifest)
    return out


def _generate_videos(rng, spec: SyntheticSpec) -> dict[str, list]:
    out = {"train": [], "dev": []}
    if spec.n_videos == 0:
        return out
    vverbs = _names("act", spec.n_video_verbs)
    words = _names("w", spec.n_words)
    slot_names = {v: {s: f"{v}-{s.lower()}" for s in ARG_SLOTS} for v in vverbs}
    n_train = int(round(spec.n_videos * spec.split_fractions[0] / (spec.split_fractions[0] + spec.split_fractions[1])))
    for k in range(spec.n_videos):
        item = {"vid_seg_int_id": f"vid{k:05d}"}
        for e in range(NUM_EVENTS):
            v = vverbs[int(rng.integers(len(vverbs)))]
            ev = {"VerbID": v}
            present = ["Arg0"] + [s for s in ARG_SLOTS[1:] if rng.random() < 0.6]
            for s in present:
                n_w = int(rng.integers(1, 3))
                ev[f"{s} ({slot_names[v][s]})"] = " ".join(words[int(i)] for i in rng.integers(len(words), size=n_w))
            item[f"Ev{e + 1}"] = ev
        out["train" if k < n_train else "dev"].append(item)
    return out


def load_scenes(data_dir) -> dict:
    return json.loads((Path(data_dir) / "scenes.json").read_text())


def synthetic_config(d: int, grid: int, class_token: bool = True, frames: int = 4) -> ProviderConfig:
    p = grid * grid + int(class_token)
    return register_config(ProviderConfig(f"synthetic-d{d}-p{p}", d, p, frames=frames, class_token=class_token))


def provider_for(data_dir, d: int = 512, seed: int = 0, noise: float = 0.1) -> SyntheticProvider:
    """Synthetic provider matching a generated dataset's patch grid."""
    scenes = load_scenes(data_dir)
    manifest = json.loads((Path(data_dir) / "manifest.json").read_text())
    frames = manifest["spec"].get("frames_per_event", 4)
    cfg = synthetic_config(d, scenes["grid"], scenes["class_token"], frames)
    return SyntheticProvider(cfg, seed=seed, scenes={**scenes["images"], **scenes["videos"]}, noise=noise)


def cell_bounds(cell: int, grid: int) -> tuple[float, float, float, float]:
    """(x1, y1, x2, y2) of a patch cell in normalized coordinates."""
    row, col = divmod(cell, grid)
    return col / grid, row / grid, (col + 1) / grid, (row + 1) / grid


def in_cell(cx: float, cy: float, cell: int, grid: int) -> bool:
    x1, y1, x2, y2 = cell_bounds(cell, grid)
    return x1 <= cx <= x2 and y1 <= cy <= y2


def expected_cell(cx: float, cy: float, grid: int) -> int:
    return min(int(math.floor(cy * grid)), grid - 1) * grid + min(int(math.floor(cx * grid)), grid - 1)
