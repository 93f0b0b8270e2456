"""Toy-scale ablations: patch count for XTF and MAXE against plain cross-entropy."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

from .config import TrainConfig, desk_config
from .harness import evaluate, train
from .synthetic import generate_synthetic_dataset


def _run(config: TrainConfig, data_dir, split: str) -> dict:
    ckpt = train(config, data_dir)
    return evaluate(ckpt, split, "gt-verb", data_dir=data_dir).scores()


def patch_ablation(
    root,
    grids: Sequence[int] = (2, 4),
    seed: int = 0,
    config: Optional[TrainConfig] = None,
    **data_kwargs,
) -> list[dict]:
    """Train XTF on the same planted frames rendered with ``grid x grid`` patches.

    No class token is added, so the patch count is exactly ``grid ** 2``.
    Coarser grids merge objects that share a cell.
    """
    config = config or desk_config(model="xtf", localize=False)
    rows = []
    for g in grids:
        data = generate_synthetic_dataset(Path(root) / f"grid{g}", seed=seed, grid=g, class_token=False, **data_kwargs)
        scores = _run(config, data, "test")
        rows.append({"patches": g * g, **scores})
    return rows


def loss_ablation(
    root,
    disagreement: float = 0.3,
    seed: int = 0,
    config: Optional[TrainConfig] = None,
    **data_kwargs,
) -> list[dict]:
    """MAXE against per-annotator cross-entropy on noisy multi-annotator labels."""
    config = config or desk_config(model="xtf", localize=False)
    data = generate_synthetic_dataset(Path(root) / "noisy", seed=seed, disagreement=disagreement, **data_kwargs)
    rows = []
    for loss in ("maxe", "ce"):
        cfg = TrainConfig(**{**config.__dict__, "loss": loss})
        rows.append({"loss": loss, **_run(cfg, data, "test")})
    return rows
