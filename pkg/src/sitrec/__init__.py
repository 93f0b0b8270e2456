"""Situation recognition on frozen image/video embeddings: verb, role and noun
prediction with optional grounding, plus verb-role sequence generation for video."""

from .ontology import BoundingBox, Ontology, SituationFrame, load_frames, load_imsitu_space
from .synthetic import SyntheticSpec, generate_synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Ontology",
    "SituationFrame",
    "SyntheticSpec",
    "generate_synthetic_dataset",
    "load_frames",
    "load_imsitu_space",
]
