"""Verb/role/noun vocabularies and loaders for imSitu, SWiG and VidSitu files.

All loaders return immutable domain objects with deterministic index
assignment (lexicographic order of names), so loading the same file twice
always yields the same indices.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

BLANK = "-"
MAX_ROLES = 6
NUM_EVENTS = 5
# Placeholders kept for generation/evaluation, in serialization order.
ARG_SLOTS = ("Arg0", "Arg1", "Arg2", "AScn")
# VidSitu placeholders that exist in the data but are not generated.
DROPPED_SLOTS = ("ALoc", "ADir", "AMnr")
_SLOT_ALIASES = {"ArgScn": "AScn"}


class OntologyError(ValueError):
    """Raised for malformed or inconsistent annotation files."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{message} (at {key!r})" if key is not None else message)


@dataclass(frozen=True)
class Ontology:
    verbs: tuple[str, ...]
    roles_of: dict[str, tuple[str, ...]]
    roles: tuple[str, ...]
    nouns: tuple[str, ...]
    max_roles: int = MAX_ROLES
    # Number of nouns listed in the source file, before adding the blank class.
    file_noun_count: int = 0
    verb_index: dict[str, int] = field(init=False, repr=False, compare=False)
    role_index: dict[str, int] = field(init=False, repr=False, compare=False)
    noun_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "verb_index", {v: i for i, v in enumerate(self.verbs)})
        object.__setattr__(self, "role_index", {r: i for i, r in enumerate(self.roles)})
        object.__setattr__(self, "noun_index", {n: i for i, n in enumerate(self.nouns)})
        if self.nouns.count(BLANK) != 1:
            raise OntologyError("noun vocabulary must contain exactly one blank class")
        for verb in self.verbs:
            roles = self.roles_of.get(verb)
            if not roles:
                raise OntologyError("verb has no roles", verb)
            if len(roles) > self.max_roles:
                raise OntologyError(f"verb has {len(roles)} roles (max {self.max_roles})", verb)
            if len(set(roles)) != len(roles):
                raise OntologyError("duplicate role in frame", verb)
            for r in roles:
                if r not in self.role_index:
                    raise OntologyError(f"role {r!r} missing from role list", verb)

    @property
    def blank(self) -> int:
        return self.noun_index[BLANK]

    @property
    def no_role(self) -> int:
        """Class index used by role heads for an empty slot."""
        return len(self.roles)

    def frame_roles(self, verb: int) -> list[int]:
        return [self.role_index[r] for r in self.roles_of[self.verbs[verb]]]

    def sizes(self) -> tuple[int, int, int]:
        return len(self.verbs), len(self.roles), len(self.nouns)

    def digest(self) -> str:
        """Stable hash of the vocabulary, used to tie checkpoints to data."""
        payload = json.dumps(self.to_space(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def to_space(self) -> dict:
        verbs = {
            v: {
                "framename": v,
                "order": list(self.roles_of[v]),
                "roles": {r: {"framename": r} for r in self.roles_of[v]},
            }
            for v in self.verbs
        }
        # the blank class is written only when the source file listed it
        added_blank = self.file_noun_count < len(self.nouns)
        nouns = {n: {"gloss": [n]} for n in self.nouns if not (added_blank and n == BLANK)}
        return {"verbs": verbs, "nouns": nouns}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_space(), indent=1, sort_keys=True))


def build_ontology(roles_of: dict[str, Sequence[str]], nouns: Iterable[str]) -> Ontology:
    verbs = tuple(sorted(roles_of))
    roles = tuple(sorted({r for rs in roles_of.values() for r in rs}))
    nouns = [BLANK if n == "" else n for n in nouns]
    file_noun_count = len(set(nouns))
    names = sorted(set(nouns))
    if BLANK not in names:
        names.append(BLANK)
    return Ontology(
        verbs=verbs,
        roles_of={v: tuple(roles_of[v]) for v in verbs},
        roles=roles,
        nouns=tuple(names),
        file_noun_count=file_noun_count,
    )


def load_imsitu_space(path) -> Ontology:
    """Load an imSitu ``imsitu_space.json`` file."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise OntologyError(f"invalid JSON: {exc.msg}", str(path)) from exc
    for key in ("verbs", "nouns"):
        if key not in data:
            raise OntologyError("missing top-level key", key)
    roles_of = {}
    for verb, entry in data["verbs"].items():
        if not isinstance(entry, dict):
            raise OntologyError("verb entry must be an object", verb)
        if "order" in entry:
            order = entry["order"]
        elif "roles" in entry:
            order = list(entry["roles"])
        else:
            raise OntologyError("verb entry has neither 'order' nor 'roles'", verb)
        if not isinstance(order, list) or not all(isinstance(r, str) for r in order):
            raise OntologyError("role order must be a list of names", verb)
        if len(order) > MAX_ROLES:
            raise OntologyError(f"verb has {len(order)} roles (max {MAX_ROLES})", verb)
        roles_of[verb] = order
    if not isinstance(data["nouns"], dict):
        raise OntologyError("noun table must be an object", "nouns")
    return build_ontology(roles_of, data["nouns"].keys())


@dataclass(frozen=True)
class BoundingBox:
    """Box as (cx, cy, h, w), each a fraction of the image size."""

    cx: float
    cy: float
    h: float
    w: float

    def __post_init__(self):
        for name in ("cx", "cy", "h", "w"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise ValueError(f"box component {name}={v} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.h, self.w)

    def corners(self) -> tuple[float, float, float, float]:
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)


def normalize_box(x1, y1, x2, y2, width, height, tol=1e-6) -> BoundingBox:
    """Pixel corner box -> normalized (cx, cy, h, w)."""
    if x2 < x1 or y2 < y1:
        raise ValueError(f"inverted box {(x1, y1, x2, y2)}")
    vals = [x1 / width, y1 / height, x2 / width, y2 / height]
    for v in vals:
        if v < -tol or v > 1 + tol:
            raise ValueError(f"box {(x1, y1, x2, y2)} outside {width}x{height} image")
    a, b, c, d = (min(max(v, 0.0), 1.0) for v in vals)
    return BoundingBox(cx=(a + c) / 2, cy=(b + d) / 2, h=d - b, w=c - a)


def denormalize_box(box: BoundingBox, width, height) -> tuple[float, float, float, float]:
    x1, y1, x2, y2 = box.corners()
    return (x1 * width, y1 * height, x2 * width, y2 * height)


@dataclass(frozen=True)
class SituationFrame:
    image_id: str
    verb: int
    roles: tuple[int, ...]
    annotator_nouns: np.ndarray  # (m, q) int
    boxes: Optional[tuple[Optional[BoundingBox], ...]] = None

    @property
    def num_roles(self) -> int:
        return len(self.roles)

    @property
    def num_annotators(self) -> int:
        return self.annotator_nouns.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SituationFrame):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and self.verb == other.verb
            and self.roles == other.roles
            and np.array_equal(self.annotator_nouns, other.annotator_nouns)
            and self.boxes == other.boxes
        )

    __hash__ = None


def validate_frame(frame: SituationFrame, ontology: Ontology) -> None:
    if not 0 <= frame.verb < len(ontology.verbs):
        raise OntologyError("verb index out of range", frame.image_id)
    expected = tuple(ontology.frame_roles(frame.verb))
    if frame.roles != expected:
        raise OntologyError("roles do not match the verb's frame", frame.image_id)
    nouns = frame.annotator_nouns
    if nouns.ndim != 2 or nouns.shape[0] != len(expected) or nouns.shape[1] < 1:
        raise OntologyError(f"annotator matrix has shape {nouns.shape}", frame.image_id)
    if nouns.min() < 0 or nouns.max() >= len(ontology.nouns):
        raise OntologyError("noun index out of range", frame.image_id)
    if frame.boxes is not None and len(frame.boxes) != len(expected):
        raise OntologyError("box count does not match role count", frame.image_id)


def _noun_id(name: str) -> str:
    return BLANK if name == "" else name


def load_frames(path, ontology: Ontology) -> list[SituationFrame]:
    """Load an imSitu annotation file (``train.json`` / ``dev.json`` / ``test.json``).

    The file maps image ids to ``{"verb": name, "frames": [{role: noun}, ...]}``,
    one ``frames`` entry per annotator. Frames come back sorted by image id.
    """
    data = json.loads(Path(path).read_text())
    out = []
    for image_id in sorted(data):
        entry = data[image_id]
        verb = entry.get("verb")
        if verb not in ontology.verb_index:
            raise OntologyError(f"unknown verb {verb!r}", image_id)
        annotations = entry.get("frames") or []
        if not annotations:
            raise OntologyError("no annotator frames", image_id)
        role_names = ontology.roles_of[verb]
        nouns = np.empty((len(role_names), len(annotations)), dtype=np.int64)
        for j, ann in enumerate(annotations):
            extra = set(ann) - set(role_names)
            if extra:
                raise OntologyError(f"unknown role(s) {sorted(extra)} for verb {verb!r}", image_id)
            for i, role in enumerate(role_names):
                if role not in ann:
                    raise OntologyError(f"annotator {j} missing role {role!r}", image_id)
                noun = _noun_id(ann[role])
                if noun not in ontology.noun_index:
                    raise OntologyError(f"unknown noun {noun!r}", image_id)
                nouns[i, j] = ontology.noun_index[noun]
        nouns.setflags(write=False)
        out.append(
            SituationFrame(
                image_id=image_id,
                verb=ontology.verb_index[verb],
                roles=tuple(ontology.role_index[r] for r in role_names),
                annotator_nouns=nouns,
            )
        )
    return out


def save_frames(frames: Sequence[SituationFrame], ontology: Ontology, path) -> None:
    data = {}
    for f in frames:
        role_names = [ontology.roles[r] for r in f.roles]
        data[f.image_id] = {
            "verb": ontology.verbs[f.verb],
            "frames": [
                {role: ontology.nouns[f.annotator_nouns[i, j]] for i, role in enumerate(role_names)}
                for j in range(f.num_annotators)
            ],
        }
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True))


def attach_swig_boxes(frames: Sequence[SituationFrame], path, ontology: Ontology) -> list[SituationFrame]:
    """Attach SWiG boxes: ``{image_id: {"width", "height", "bb": {role: [x1,y1,x2,y2]}}}``.

    ``[-1, -1, -1, -1]`` or a missing role marks an absent box (stored as None).
    """
    data = json.loads(Path(path).read_text())
    out = []
    for f in frames:
        entry = data.get(f.image_id)
        if entry is None:
            out.append(SituationFrame(f.image_id, f.verb, f.roles, f.annotator_nouns, (None,) * f.num_roles))
            continue
        width, height = entry["width"], entry["height"]
        bb = entry.get("bb", {})
        boxes = []
        for r in f.roles:
            coords = bb.get(ontology.roles[r])
            if coords is None or all(c == -1 for c in coords):
                boxes.append(None)
                continue
            try:
                boxes.append(normalize_box(*coords, width=width, height=height))
            except ValueError as exc:
                raise OntologyError(str(exc), f.image_id) from exc
        out.append(SituationFrame(f.image_id, f.verb, f.roles, f.annotator_nouns, tuple(boxes)))
    return out


# --- video -----------------------------------------------------------------


@dataclass(frozen=True)
class EventAnnotation:
    verb: str
    verb_index: int
    # placeholder -> (verb-specific role name, noun phrase); absent slots are omitted
    args: dict[str, tuple[str, str]]

    def phrase(self, slot: str) -> Optional[str]:
        item = self.args.get(slot)
        return item[1] if item else None


@dataclass(frozen=True)
class VideoSituation:
    video_id: str
    events: tuple[EventAnnotation, ...]
    # further annotators' versions of the events (validation split only)
    alt_events: tuple[tuple[EventAnnotation, ...], ...] = ()

    def __post_init__(self):
        if len(self.events) != NUM_EVENTS:
            raise OntologyError(f"expected {NUM_EVENTS} events, got {len(self.events)}", self.video_id)
        for ev in self.events:
            if len(ev.args) > len(ARG_SLOTS):
                raise OntologyError("too many argument slots", self.video_id)


def _split_slot_key(key: str, video_id: str) -> tuple[str, str]:
    # "Arg0 (driver)" -> ("Arg0", "driver"); "AScn" -> ("AScn", "scene")
    head, _, rest = key.partition(" ")
    head = _SLOT_ALIASES.get(head, head)
    name = rest.strip().strip("()").strip()
    if head not in ARG_SLOTS and head not in DROPPED_SLOTS:
        raise OntologyError(f"unknown placeholder {key!r}", video_id)
    return head, name or head.lower()


def _parse_events(raw: dict, video_id: str, verb_vocab: dict[str, int]) -> tuple[EventAnnotation, ...]:
    keys = sorted(k for k in raw if k.startswith("Ev"))
    events = []
    for k in keys:
        ev = raw[k]
        verb = ev.get("VerbID")
        if verb is None:
            raise OntologyError(f"{k} has no VerbID", video_id)
        if verb not in verb_vocab:
            raise OntologyError(f"unknown verb {verb!r}", video_id)
        args = {}
        for key, phrase in ev.items():
            if key in ("VerbID", "Verb"):
                continue
            slot, name = _split_slot_key(key, video_id)
            if slot in ARG_SLOTS:
                args[slot] = (name, str(phrase))
        events.append(EventAnnotation(verb, verb_vocab[verb], dict(sorted(args.items(), key=lambda kv: ARG_SLOTS.index(kv[0])))))
    if len(events) != NUM_EVENTS:
        raise OntologyError(f"expected {NUM_EVENTS} events, got {len(events)}", video_id)
    return tuple(events)


def _vidsitu_file(path, split) -> Path:
    p = Path(path)
    if p.is_dir():
        p = p / f"vsann_{split}.json"
    return p


def vidsitu_verb_vocab(path, split="train") -> tuple[str, ...]:
    """Sorted verb-sense vocabulary found in a VidSitu annotation file."""
    data = json.loads(_vidsitu_file(path, split).read_text())
    verbs = set()
    for item in data:
        for ann in item if isinstance(item, list) else [item]:
            for k, ev in ann.items():
                if k.startswith("Ev") and "VerbID" in ev:
                    verbs.add(ev["VerbID"])
    return tuple(sorted(verbs))


def load_vidsitu(path, split, verbs: Optional[Sequence[str]] = None) -> list[VideoSituation]:
    """Load VidSitu annotations for ``split``.

    ``path`` is either the JSON file itself or a directory holding
    ``vsann_<split>.json``. Each entry is one annotation dict (``vid_seg_int_id``
    plus ``Ev1``..``Ev5``) or, for multi-annotator splits, a list of them; the
    first annotation becomes ``events`` and the rest ``alt_events``.
    """
    file = _vidsitu_file(path, split)
    if verbs is None:
        verbs = vidsitu_verb_vocab(file, split)
    vocab = {v: i for i, v in enumerate(verbs)}
    data = json.loads(file.read_text())
    out = []
    for item in data:
        anns = item if isinstance(item, list) else [item]
        if not anns:
            raise OntologyError("empty annotation list", str(file))
        video_id = str(anns[0].get("vid_seg_int_id"))
        parsed = [_parse_events(a, video_id, vocab) for a in anns]
        out.append(VideoSituation(video_id, parsed[0], tuple(parsed[1:])))
    return out


def save_vidsitu(videos: Sequence[VideoSituation], path) -> None:
    data = []
    for v in videos:
        anns = []
        for events in (v.events, *v.alt_events):
            ann = {"vid_seg_int_id": v.video_id}
            for i, ev in enumerate(events):
                entry = {"VerbID": ev.verb}
                for slot, (name, phrase) in ev.args.items():
                    entry[f"{slot} ({name})"] = phrase
                ann[f"Ev{i + 1}"] = entry
            anns.append(ann)
        data.append(anns if v.alt_events else anns[0])
    Path(path).write_text(json.dumps(data, indent=1))
