"""Training, checkpointing, evaluation and the situational-summary pipeline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import TrainConfig, from_dict
from .data import (
    ImageTensors,
    Tables,
    event_memory_valid,
    image_tensors,
    per_event_targets,
    video_tensors,
)
from .embeddings import ontology_embeddings
from .heads import RoleHead, VerbMLP, decode_roles, topk_with_ties
from .metrics import EvalReport, cider, rouge_l, score_frames
from .objectives import annotator_ce_loss, bbox_l1, maxe_loss, role_ce, seq_ce
from .ontology import (
    ARG_SLOTS,
    BoundingBox,
    Ontology,
    SituationFrame,
    attach_swig_boxes,
    load_frames,
    load_imsitu_space,
    load_vidsitu,
    vidsitu_verb_vocab,
)
from .srl import Localizer, build_noun_model
from .synthetic import SyntheticSpec, generate_synthetic_dataset, provider_for
from .video import (
    BOS,
    EOS,
    Tokenizer,
    VideoSrlModel,
    corpus_texts,
    event_dicts,
    parse_generated,
    render,
    shift_labels,
    target_tensor,
)

__all__ = [
    "TrainingError",
    "EvalError",
    "SummaryError",
    "Workspace",
    "train",
    "evaluate",
    "summarize",
    "SituationSummary",
    "decode_videos",
    "generation_report",
    "generate_synthetic_dataset",
    "SyntheticSpec",
]

EVAL_BATCH = 256
SETTING_ALIASES = {"gt-verb": "gt-verb", "top1": "top1-verb", "top1-verb": "top1-verb", "top5": "top5-verb", "top5-verb": "top5-verb"}


class TrainingError(RuntimeError):
    pass


class EvalError(RuntimeError):
    pass


class SummaryError(RuntimeError):
    pass


# --- data resolution -------------------------------------------------------


def make_provider(provider: str, data_dir, d: int, seed: int = 0, noise: float = 0.1):
    if provider == "synthetic":
        return provider_for(data_dir, d=d, seed=seed, noise=noise)
    if provider.startswith("clip:") or provider.startswith("xclip:"):
        from .pretrained import PretrainedProvider

        return PretrainedProvider(provider)
    raise ValueError(f"unknown provider {provider!r}")


class Workspace:
    """A dataset directory plus the embedding provider that reads it."""

    def __init__(self, data_dir, provider):
        self.data_dir = Path(data_dir)
        self.provider = provider
        self._ontology: Optional[Ontology] = None
        self._tables: Optional[Tables] = None
        self._frames: dict[str, list[SituationFrame]] = {}
        self._tensors: dict[str, ImageTensors] = {}

    @classmethod
    def from_config(cls, data_dir, config: TrainConfig) -> "Workspace":
        return cls(data_dir, make_provider(config.provider, data_dir, config.d, config.provider_seed, config.provider_noise))

    @property
    def ontology(self) -> Ontology:
        if self._ontology is None:
            self._ontology = load_imsitu_space(self.data_dir / "imsitu_space.json")
        return self._ontology

    @property
    def tables(self) -> Tables:
        if self._tables is None:
            self._tables = Tables.from_embeddings(ontology_embeddings(self.provider, self.ontology))
        return self._tables

    def frames(self, split: str) -> list[SituationFrame]:
        if split not in self._frames:
            path = self.data_dir / f"{split}.json"
            if not path.exists():
                raise FileNotFoundError(f"no {split} split in {self.data_dir}")
            frames = load_frames(path, self.ontology)
            swig = self.data_dir / f"swig_{split}.json"
            if swig.exists():
                frames = attach_swig_boxes(frames, swig, self.ontology)
            self._frames[split] = frames
        return self._frames[split]

    def tensors(self, split: str) -> ImageTensors:
        if split not in self._tensors:
            self._tensors[split] = image_tensors(self.frames(split), self.ontology, self.provider)
        return self._tensors[split]


def provider_extra(config: TrainConfig, data_dir) -> dict:
    return {"data_dir": str(data_dir), "provider": config.provider, "d": config.d, "provider_seed": config.provider_seed, "provider_noise": config.provider_noise}


def workspace_for(ckpt: Checkpoint, data_dir=None) -> Workspace:
    ex = ckpt.extra
    data_dir = Path(data_dir if data_dir is not None else ex["data_dir"])
    return Workspace(data_dir, make_provider(ex["provider"], data_dir, ex["d"], ex["provider_seed"], ex["provider_noise"]))


# --- model assembly --------------------------------------------------------


def components_for(config: TrainConfig) -> list[str]:
    noun = ["noun", "localizer"] if (config.model == "xtf" or (config.model == "stack" and config.noun_model == "xtf")) and config.localize else ["noun"]
    return {
        "verb": ["verb"],
        "role": ["role"],
        "mlp": ["noun"],
        "tf": ["noun"],
        "xtf": noun,
        "stack": ["verb", "role", *noun],
        "video": ["video"],
    }[config.model]


def noun_kind(config: TrainConfig) -> str:
    return config.noun_model if config.model == "stack" else config.model


def build_component(name: str, config: TrainConfig, ontology: Optional[Ontology], d: int, p: int, vocab_size: int = 0) -> nn.Module:
    if name == "verb":
        return VerbMLP(d, len(ontology.verbs), config.verb)
    if name == "role":
        return RoleHead(d, len(ontology.roles), config.role)
    if name == "noun":
        kind = noun_kind(config)
        return build_noun_model(kind, d, len(ontology.nouns), getattr(config, kind), p=p)
    if name == "localizer":
        return Localizer(d, p, config.localizer)
    if name == "video":
        return VideoSrlModel(d, vocab_size, config.video)
    raise ValueError(f"unknown component {name!r}")


@dataclass
class Models:
    config: TrainConfig
    ontology: Optional[Ontology]
    modules: dict[str, nn.Module]
    digest: str = ""
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.modules[name]

    def has(self, name) -> bool:
        return name in self.modules

    def eval(self) -> "Models":
        for m in self.modules.values():
            m.eval()
        return self


def load_models(ckpt: Checkpoint) -> Models:
    config = from_dict(ckpt.config)
    ex = ckpt.extra
    modules = {}
    for name in ckpt.components:
        module = build_component(name, config, ckpt.ontology, ex["d"], ex.get("p", 0), len(ex.get("tokenizer", ())))
        module.load_state_dict(ckpt.state[name])
        modules[name] = module.eval()
    return Models(config, ckpt.ontology, modules, ckpt.digest(), ex)


def _load(ckpt) -> Checkpoint:
    return ckpt if isinstance(ckpt, Checkpoint) else load_checkpoint(ckpt)


# --- training loop ---------------------------------------------------------


def make_optimizer(config: TrainConfig, params):
    if config.optimizer == "adamax":
        return torch.optim.Adamax(params, lr=config.lr)
    if config.optimizer == "adam":
        return torch.optim.Adam(params, lr=config.lr)
    return torch.optim.SGD(params, lr=config.lr)


def fit(
    name: str,
    modules: Sequence[nn.Module],
    n: int,
    loss_fn: Callable[[torch.Tensor], torch.Tensor],
    config: TrainConfig,
    epochs: int,
    generator: torch.Generator,
    log: Optional[Callable[[dict], None]] = None,
) -> list[dict]:
    """Minibatch Adamax with exponential learning-rate decay; returns the per-epoch trace.

    ``loss_fn`` maps a tensor of example indices to a scalar loss.
    """
    params = [p for m in modules for p in m.parameters()]
    opt = make_optimizer(config, params)
    sched = torch.optim.lr_scheduler.ExponentialLR(opt, gamma=config.gamma)
    for m in modules:
        m.train()
    trace = []
    initial = None
    for epoch in range(epochs):
        perm = torch.randperm(n, generator=generator)
        total, steps = 0.0, 0
        lr = opt.param_groups[0]["lr"]
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss = loss_fn(idx)
            if not torch.isfinite(loss):
                raise TrainingError(f"{name}: non-finite loss {loss.item()} at epoch {epoch}, step {steps}; try a lower learning rate")
            opt.zero_grad()
            loss.backward()
            opt.step()
            value = float(loss.detach())
            initial = value if initial is None else initial
            total += value
            steps += 1
        sched.step()
        entry = {"component": name, "epoch": epoch, "loss": total / steps, "initial_loss": initial, "lr": lr}
        trace.append(entry)
        if log is not None:
            log(entry)
    for m in modules:
        m.eval()
    return trace


def _noun_loss(config: TrainConfig, models: dict, data: ImageTensors, tables: Tables):
    noun = models["noun"]
    loc = models.get("localizer")
    base = maxe_loss if config.loss == "maxe" else annotator_ce_loss
    use_boxes = loc is not None and bool(data.present.any())

    def loss_fn(idx):
        verb = tables.verbs[data.verb[idx]]
        roles = tables.role_embs(data.roles[idx])
        mask = data.mask[idx]
        out = noun(data.pooled[idx], data.patches[idx], verb, roles, mask)
        loss = base(out.logits, data.labels[idx], mask)
        if use_boxes:
            boxes = loc(verb, roles, out.attention)
            l1, _ = bbox_l1(boxes, data.boxes[idx], data.present[idx] & mask)
            loss = loss + l1
        return loss

    return loss_fn


def train(config: TrainConfig, data_dir, out_dir=None, resume=None, log=None) -> Checkpoint:
    """Train the components selected by ``config.model`` and optionally save a checkpoint.

    With ``resume`` (a checkpoint path) training continues from its weights;
    the checkpoint must have been trained on the same ontology.
    """
    if config.model == "video":
        return train_video(config, data_dir, out_dir, resume, log)
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    ws = Workspace.from_config(data_dir, config)
    onto = ws.ontology
    prior = None
    if resume is not None:
        prior = load_checkpoint(resume, expect_ontology=onto)
    data = ws.tensors("train")
    tables = ws.tables
    d, p = ws.provider.config.d, ws.provider.config.p
    models = {name: build_component(name, config, onto, d, p) for name in components_for(config)}
    if "localizer" in models:
        models["localizer"].zero_init()
    trace = list(prior.trace) if prior is not None else []
    if prior is not None:
        for name, m in models.items():
            if name not in prior.state:
                raise CheckpointError(f"resume checkpoint lacks component {name!r}")
            m.load_state_dict(prior.state[name])
    n = len(data)
    if "verb" in models:
        head = models["verb"]
        trace += fit("verb", [head], n, lambda i: F.cross_entropy(head(data.pooled[i]), data.verb[i]), config, config.verb_epochs or config.epochs, gen, log)
    if "role" in models:
        rh = models["role"]
        trace += fit("role", [rh], n, lambda i: role_ce(rh(data.pooled[i], tables.verbs[data.verb[i]]), data.role_targets[i]), config, config.role_epochs, gen, log)
    if "noun" in models:
        mods = [models["noun"]] + ([models["localizer"]] if "localizer" in models else [])
        trace += fit("noun", mods, n, _noun_loss(config, models, data, tables), config, config.epochs, gen, log)
    extra = {**provider_extra(config, data_dir), "p": p, "noun_model": noun_kind(config) if "noun" in models else None}
    ckpt = Checkpoint(config.to_dict(), onto, {k: _state(m) for k, m in models.items()}, trace, extra)
    if out_dir is not None:
        save_checkpoint(ckpt, out_dir)
    return ckpt


def _state(module: nn.Module) -> dict[str, torch.Tensor]:
    return {k: v.detach().clone() for k, v in module.state_dict().items()}


# --- image prediction ------------------------------------------------------


@dataclass
class FramePredictions:
    nouns: torch.Tensor  # (N, 6) argmax noun ids under the ground-truth verb and roles
    boxes: Optional[torch.Tensor]  # (N, 6, 4)
    verb_topk: Optional[torch.Tensor]  # (N, 5)
    roles: Optional[list[list[int]]]  # decoded role lists under the ground-truth verb


@torch.no_grad()
def predict_split(models: Models, data: ImageTensors, tables: Tables) -> FramePredictions:
    models.eval()
    nouns, boxes, topk, roles = [], [], [], []
    for start in range(0, len(data), EVAL_BATCH):
        b = data.subset(range(start, min(start + EVAL_BATCH, len(data))))
        verb = tables.verbs[b.verb]
        if models.has("verb"):
            logits = models["verb"](b.pooled)
            topk.append(topk_with_ties(logits, min(5, logits.shape[-1])))
        if models.has("role"):
            rl = models["role"](b.pooled, verb).argmax(-1)
            roles += [decode_roles(row, models["role"].no_role) for row in rl]
        if models.has("noun"):
            r = tables.role_embs(b.roles)
            out = models["noun"](b.pooled, b.patches, verb, r, b.mask)
            nouns.append(out.logits.argmax(-1))
            if models.has("localizer"):
                boxes.append(models["localizer"](verb, r, out.attention))
    cat = lambda xs: torch.cat(xs) if xs else None
    return FramePredictions(cat(nouns), cat(boxes), cat(topk), roles if models.has("role") else None)


def _box_tuple(row) -> BoundingBox:
    cx, cy, h, w = (min(1.0, max(0.0, float(v))) for v in row)
    return BoundingBox(cx, cy, h, w)


def normalize_setting(setting: str) -> str:
    if setting not in SETTING_ALIASES:
        raise EvalError(f"unknown setting {setting!r}; choose from gt-verb, top1, top5")
    return SETTING_ALIASES[setting]


def evaluate(ckpt, split: str = "test", setting: str = "gt-verb", data_dir=None, require_noun: bool = True) -> EvalReport:
    """Score a checkpoint on a split.

    In the top-k settings a frame earns noun credit only when its gold verb is
    among the verb head's top k; its nouns are then the noun model's
    predictions under that verb (the standard imSitu protocol).
    """
    setting = normalize_setting(setting)
    ckpt = _load(ckpt)
    if setting != "gt-verb" and not ckpt.has("verb"):
        raise EvalError(f"setting {setting} requires a verb head, but the checkpoint has none ({', '.join(ckpt.components)})")
    ws = workspace_for(ckpt, data_dir)
    if ws.ontology.digest() != ckpt.ontology.digest():
        raise CheckpointError("checkpoint was trained on a different ontology than the evaluation data")
    models = load_models(ckpt)
    frames = ws.frames(split)
    data = ws.tensors(split)
    pred = predict_split(models, data, ws.tables)
    return report_from_predictions(frames, pred, setting, require_noun)


def report_from_predictions(frames, pred: FramePredictions, setting: str, require_noun: bool = True) -> EvalReport:
    k = {"gt-verb": None, "top1-verb": 1, "top5-verb": 5}[normalize_setting(setting)]
    verb_hits = None
    if k is not None:
        verb_hits = [f.verb in pred.verb_topk[i, :k].tolist() for i, f in enumerate(frames)]
    if pred.nouns is not None:
        nouns = [pred.nouns[i, : f.num_roles].tolist() for i, f in enumerate(frames)]
        boxes = None
        if pred.boxes is not None:
            boxes = [[_box_tuple(r) for r in pred.boxes[i, : f.num_roles]] for i, f in enumerate(frames)]
        rep = score_frames(frames, nouns, boxes, verb_hits, normalize_setting(setting), require_noun)
    else:
        rep = EvalReport(normalize_setting(setting), len(frames))
    if pred.verb_topk is not None:
        for i, f in enumerate(frames):
            rep.add("verb-top1", f.verb == int(pred.verb_topk[i, 0]))
            rep.add("verb-top5", f.verb in pred.verb_topk[i].tolist())
    if pred.roles is not None:
        for f, r in zip(frames, pred.roles):
            rep.add("roles", tuple(r) == f.roles)
    return rep


# --- situational summaries -------------------------------------------------


@dataclass
class SituationSummary:
    image_id: str
    verb: str
    verb_score: float
    roles: list[dict]  # {"role", "noun", optional "box"}
    provenance: dict

    def to_json(self) -> dict:
        return asdict(self)


@torch.no_grad()
def summarize(image_ref: str, ckpt, with_boxes: bool = False, workspace: Optional[Workspace] = None) -> SituationSummary:
    """Verb, roles and nouns (and optionally boxes) for one image.

    The verb is the verb head's top-1, the roles come from the role head under
    that verb's text embedding, and the nouns from the noun model.
    """
    ckpt = _load(ckpt)
    for comp in ("verb", "role", "noun"):
        if not ckpt.has(comp):
            raise SummaryError(f"checkpoint lacks the {comp} component; train with --model stack")
    if with_boxes and not ckpt.has("localizer"):
        raise SummaryError("--with-boxes needs a checkpoint with a localizer")
    ws = workspace or workspace_for(ckpt)
    models = load_models(ckpt)
    onto = ckpt.ontology
    tables = ws.tables
    bundle = ws.provider.embed_image(image_ref)
    pooled = torch.as_tensor(np.asarray(bundle.pooled), dtype=tables.verbs.dtype)[None]
    patches = torch.as_tensor(np.asarray(bundle.patches), dtype=tables.verbs.dtype)[None]
    logits = models["verb"](pooled)[0]
    v = int(topk_with_ties(logits, 1)[0])
    verb = tables.verbs[v][None]
    roles = decode_roles(models["role"](pooled, verb)[0].argmax(-1), models["role"].no_role)
    if not roles:
        raise SummaryError("no frame structure predicted")
    role_ids = torch.tensor([roles])
    r = tables.role_embs(role_ids)
    mask = torch.ones(role_ids.shape, dtype=torch.bool)
    out = models["noun"](pooled, patches, verb, r, mask)
    nouns = out.logits[0].argmax(-1).tolist()
    boxes = models["localizer"](verb, r, out.attention)[0].tolist() if with_boxes else None
    entries = []
    for j, (role, noun) in enumerate(zip(roles, nouns)):
        e = {"role": onto.roles[role], "noun": onto.nouns[noun]}
        if boxes is not None:
            e["box"] = [min(1.0, max(0.0, x)) for x in boxes[j]]
        entries.append(e)
    prov = {"checkpoint": ckpt.digest(), "noun_model": ckpt.extra.get("noun_model"), "provider": ckpt.extra.get("provider")}
    return SituationSummary(image_ref, onto.verbs[v], float(logits[v]), entries, prov)


# --- video -----------------------------------------------------------------


def _video_split(data_dir, split, verbs=None):
    return load_vidsitu(Path(data_dir), split, verbs)


def train_video(config: TrainConfig, data_dir, out_dir=None, resume=None, log=None, limit: Optional[int] = None) -> Checkpoint:
    """Train the event encoder and sequence decoder on ``vsann_train.json``.

    ``limit`` keeps only the first ``limit`` training videos (overfit runs).
    """
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    provider = make_provider(config.provider, data_dir, config.d, config.provider_seed, config.provider_noise)
    verbs = vidsitu_verb_vocab(Path(data_dir), "train")
    videos = _video_split(data_dir, "train", verbs)[:limit]
    prior = load_checkpoint(resume) if resume is not None else None
    if prior is not None:
        tok = Tokenizer(prior.extra["tokenizer"])
    else:
        texts = corpus_texts(videos)
        tok = Tokenizer.fit([t for t in texts], config.video_min_freq)
    data = video_tensors(videos, provider, tok, gt_verbs=config.video_gt_verbs)
    model = VideoSrlModel(provider.config.d, len(tok), config.video)
    if prior is not None:
        if list(prior.extra["tokenizer"]) != tok.itos:
            raise CheckpointError("resume checkpoint has a different vocabulary")
        model.load_state_dict(prior.state["video"])
    pad = tok.pad_id
    if config.per_event:
        seqs = [t for v in videos for t in per_event_targets(v, tok)]
        tokens = target_tensor(seqs, pad)
    else:
        tokens = target_tensor(data.targets, pad)
    if tokens.shape[1] > config.video.decoder.max_len + 1:
        raise TrainingError(f"target of {tokens.shape[1]} tokens exceeds decoder max_len {config.video.decoder.max_len}")
    labels = shift_labels(tokens, pad)

    def loss_fn(idx):
        if config.per_event:
            vid, ev = idx // 5, idx % 5
            memory, valid = model.encode_events(data.pooled[vid], data.unpooled[vid], data.verbs[vid], data.roles[vid], data.slot_mask[vid])
            valid = torch.stack([event_memory_valid(valid[i : i + 1], int(e))[0] for i, e in enumerate(ev)])
        else:
            memory, valid = model.encode_events(data.pooled[idx], data.unpooled[idx], data.verbs[idx], data.roles[idx], data.slot_mask[idx])
        logits = model.decode_teacher_forced(memory, valid, tokens[idx])
        return seq_ce(logits, labels[idx], labels[idx] == pad)

    trace = list(prior.trace) if prior is not None else []
    trace += fit("video", [model], tokens.shape[0], loss_fn, config, config.epochs, gen, log)
    extra = {**provider_extra(config, data_dir), "tokenizer": tok.itos, "video_verbs": list(verbs), "train_videos": len(videos)}
    ckpt = Checkpoint(config.to_dict(), None, {"video": _state(model)}, trace, extra)
    if out_dir is not None:
        save_checkpoint(ckpt, out_dir)
    return ckpt


@torch.no_grad()
def decode_videos(ckpt, split: str = "dev", data_dir=None, limit: Optional[int] = None, max_len: Optional[int] = None) -> list[dict]:
    """Greedy-decode every video of a split into VidSitu-style prediction dicts."""
    ckpt = _load(ckpt)
    if not ckpt.has("video"):
        raise EvalError("checkpoint has no video model")
    config = from_dict(ckpt.config)
    ex = ckpt.extra
    data_dir = Path(data_dir if data_dir is not None else ex["data_dir"])
    provider = make_provider(ex["provider"], data_dir, ex["d"], ex["provider_seed"], ex["provider_noise"])
    tok = Tokenizer(ex["tokenizer"])
    model = VideoSrlModel(ex["d"], len(tok), config.video)
    model.load_state_dict(ckpt.state["video"])
    model.eval()
    videos = _video_split(data_dir, split, ex["video_verbs"])[:limit]
    data = video_tensors(videos, provider, tok, gt_verbs=config.video_gt_verbs)
    memory, valid = model.encode_events(data.pooled, data.unpooled, data.verbs, data.roles, data.slot_mask)
    bos, eos = tok.stoi[BOS], tok.stoi[EOS]
    out = []
    if config.per_event:
        per_video = [[] for _ in videos]
        for e in range(5):
            ids = model.decode_greedy(memory, event_memory_valid(valid, e), bos, eos, max_len)
            for i, seq in enumerate(ids):
                parsed = parse_generated(tok.decode(seq))
                per_video[i].append((parsed.events[0], parsed.warnings, seq))
        for v, items in zip(videos, per_video):
            out.append(_prediction(v.video_id, [it[0] for it in items], sum(it[1] for it in items), [t for it in items for t in tok.decode(it[2])]))
    else:
        ids = model.decode_greedy(memory, valid, bos, eos, max_len)
        for v, seq in zip(videos, ids):
            toks = tok.decode(seq)
            parsed = parse_generated(toks)
            out.append(_prediction(v.video_id, parsed.events, parsed.warnings, toks))
    return out


def _prediction(video_id, events, warnings, tokens) -> dict:
    item = {"vid_seg_int_id": video_id, "warnings": warnings, "tokens": list(tokens)}
    for i, ev in enumerate(events):
        entry = {"VerbID": ev.get("verb", "")}
        entry.update({s: ev[s] for s in ARG_SLOTS if s in ev})
        item[f"Ev{i + 1}"] = entry
    return item


def _template(ev: dict) -> str:
    words = ["verb", ev.get("verb") or ev.get("VerbID", "")]
    for s in ARG_SLOTS:
        if ev.get(s):
            words += [s, ev[s]]
    return " ".join(w for w in words if w)


def generation_report(predictions: Sequence[dict], data_dir, split: str = "dev", verbs=None) -> dict:
    """CIDEr (template), C-Vb, C-Arg and Rouge-L of decoded videos against a split."""
    videos = {v.video_id: v for v in _video_split(data_dir, split, verbs)}
    tmpl_c, tmpl_r = [], []
    verb_c, verb_r, verb_g = [], [], []
    arg_c, arg_r, arg_g = [], [], []
    for pred in predictions:
        video = videos.get(pred["vid_seg_int_id"])
        if video is None:
            raise EvalError(f"prediction for unknown video {pred['vid_seg_int_id']!r}")
        anns = (video.events, *video.alt_events)
        for e in range(5):
            p = pred.get(f"Ev{e + 1}", {})
            gts = [a[e] for a in anns]
            tmpl_c.append(_template(p))
            tmpl_r.append([_template({"verb": g.verb, **{s: g.phrase(s) for s in ARG_SLOTS}}) for g in gts])
            verb_c.append(p.get("VerbID", ""))
            verb_r.append([g.verb for g in gts])
            verb_g.append(gts[0].verb)
            for s in ARG_SLOTS:
                refs = [g.phrase(s) for g in gts if g.phrase(s)]
                if refs:
                    arg_c.append(p.get(s, ""))
                    arg_r.append(refs)
                    arg_g.append(s)
    report = {
        "videos": len(predictions),
        "CIDEr": cider(tmpl_c, tmpl_r),
        "C-Vb": cider(verb_c, verb_r, groups=verb_g),
        "C-Arg": cider(arg_c, arg_r, groups=arg_g) if arg_c else 0.0,
        "R-L": float(np.mean([rouge_l(c, r) for c, r in zip(arg_c, arg_r)])) if arg_c else 0.0,
        "exact": float(np.mean([pr.get("tokens") == _gold_tokens(videos[pr["vid_seg_int_id"]]) for pr in predictions])),
        "warnings": int(sum(pr.get("warnings", 0) for pr in predictions)),
        "lea": "unimplemented",
    }
    return report


def _gold_tokens(video) -> list[str]:
    return render(event_dicts(video.events))[1:]


def write_json(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True))
