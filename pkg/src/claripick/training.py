"""Max-margin training of the grounding towers.

Each step samples a batch of (instruction, object) positives, draws one
incorrect object and one incorrect instruction per positive, and applies
a two-hinge margin loss in the joint space. The destination tower trains
jointly in the same loop with an independent cross-entropy loss. Word
dropout and tail drop perturb target-tower token streams; standard
dropout regularizes embedding outputs, MLP hidden layers, and the visual
featurizer output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .encoders import context_from_scene, encode_object, encode_text, resample_crop
from .errors import ConfigError, NonFiniteError
from .model import GroundingModel, ModelConfig, build_model
from .optim import Adam
from .scenes import Scene, crop_region
from .text import build_vocabulary, tokenize


@dataclass(frozen=True)
class TrainingConfig:
    margin: float = 0.1
    batch_size: int = 32
    iterations: int = 2000
    learning_rate: float = 5e-4
    lr_decay: float = 0.9
    decay_interval: int = 4000
    dropout: float = 0.1
    word_dropout: float = 0.1
    tail_drop: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("dropout", "word_dropout", "tail_drop"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.margin < 0:
            raise ConfigError("margin must be nonnegative")
        if self.batch_size < 1 or self.iterations < 1 or self.decay_interval < 1:
            raise ConfigError("counts must be positive")
        if self.learning_rate <= 0 or not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError("invalid learning-rate schedule")


@dataclass(frozen=True)
class TrainingSample:
    scene_index: int
    object_id: str
    text: str
    destination: int


@dataclass
class SamplePool:
    """All positive pairs of a corpus, indexed for negative sampling."""

    scenes: list[Scene]
    samples: list[TrainingSample]
    by_scene: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        for i, sample in enumerate(self.samples):
            self.by_scene.setdefault(sample.scene_index, []).append(i)


@dataclass(frozen=True)
class NegativeDraw:
    ohat_scene: int
    ohat_object: str
    qhat_scene: int
    qhat_text: str


def build_sample_pool(scenes: list[Scene]) -> SamplePool:
    samples = []
    for si, scene in enumerate(scenes):
        for obj in scene.objects:
            for ann in obj.instructions:
                samples.append(TrainingSample(si, obj.object_id, ann.text, ann.destination_box))
    if not samples:
        raise ConfigError("training corpus contains no instructions")
    return SamplePool(scenes, samples)


def sample_negatives(pool: SamplePool, positive: TrainingSample, rng) -> NegativeDraw | None:
    """Draw one incorrect object and one incorrect instruction.

    Both prefer the positive's own scene; the instruction may fall back
    to any other scene, and so may the object when its scene has no
    rival. Returns None (skip-sample) when either kind is unavailable.
    """
    scene = pool.scenes[positive.scene_index]
    rivals = [o.object_id for o in scene.objects if o.object_id != positive.object_id]
    if rivals:
        ohat = (positive.scene_index, rivals[int(rng.integers(len(rivals)))])
    else:
        cross = [(si, o.object_id) for si, s in enumerate(pool.scenes)
                 for o in s.objects if si != positive.scene_index]
        if not cross:
            return None
        ohat = cross[int(rng.integers(len(cross)))]

    same_scene = [i for i in pool.by_scene[positive.scene_index]
                  if pool.samples[i].object_id != positive.object_id]
    if same_scene:
        qhat = pool.samples[same_scene[int(rng.integers(len(same_scene)))]]
    else:
        cross = [s for s in pool.samples if s.scene_index != positive.scene_index]
        if not cross:
            return None
        qhat = cross[int(rng.integers(len(cross)))]

    return NegativeDraw(ohat[0], ohat[1], qhat.scene_index, qhat.text)


def apply_word_dropout(token_indices: list, rate: float, rng, mode: str = "train") -> list:
    """Drop tokens independently; never return an empty sentence."""
    if mode != "train" or rate == 0.0 or not token_indices:
        return list(token_indices)
    keep = [t for t in token_indices if rng.random() >= rate]
    if not keep:
        keep = [token_indices[int(rng.integers(len(token_indices)))]]
    return keep


def apply_tail_drop(token_indices: list, probability: float, rng, mode: str = "train") -> list:
    """With the given probability, keep only the first ceil(n/2) tokens."""
    if mode != "train" or probability == 0.0 or not token_indices:
        return list(token_indices)
    if rng.random() < probability:
        return list(token_indices[:math.ceil(len(token_indices) / 2)])
    return list(token_indices)


def max_margin_loss(f_qo, f_q_ohat, f_qhat_o, margin: float) -> ad.Node:
    """max{0, m - f(q,o) + f(q,ohat)} + max{0, m - f(q,o) + f(qhat,o)}."""
    f_qo = ad.constant(f_qo) if not isinstance(f_qo, ad.Node) else f_qo
    f_q_ohat = ad.constant(f_q_ohat) if not isinstance(f_q_ohat, ad.Node) else f_q_ohat
    f_qhat_o = ad.constant(f_qhat_o) if not isinstance(f_qhat_o, ad.Node) else f_qhat_o
    hinge_object = ad.relu(ad.shift(ad.sub(f_q_ohat, f_qo), margin))
    hinge_text = ad.relu(ad.shift(ad.sub(f_qhat_o, f_qo), margin))
    return ad.add(hinge_object, hinge_text)


def destination_loss(probs: ad.Node, gold_box: int) -> ad.Node:
    """Cross entropy -log p_gold over the four boxes."""
    if not 0 <= gold_box < 4:
        raise ConfigError(f"gold box {gold_box} outside 0..3")
    p = ad.select(probs, gold_box)
    if float(p.value) <= 0.0:
        clamped = ad.constant(float(-math.log(1e-300)))
        clamped.degenerate = True
        return clamped
    return ad.scale(ad.log(p), -1.0)


@dataclass
class LogRecord:
    iteration: int
    margin_loss: float
    dest_loss: float
    lr: float

    def to_dict(self):
        return {"iteration": self.iteration, "margin_loss": self.margin_loss,
                "dest_loss": self.dest_loss, "lr": self.lr}


def save_training_log(log: list[LogRecord], path) -> None:
    Path(path).write_text("\n".join(json.dumps(r.to_dict()) for r in log) + "\n")


class _SceneCache:
    """Per-scene context and flattened 16x16 crops, computed once."""

    def __init__(self, scenes: list[Scene]):
        self.contexts = [context_from_scene(s) for s in scenes]
        self.crops = []
        for scene in scenes:
            per_object = {}
            if scene.image is not None:
                for obj in scene.objects:
                    per_object[obj.object_id] = resample_crop(crop_region(scene.image, obj.bbox))
            self.crops.append(per_object)

    def encode(self, model, scene_index: int, scene: Scene, object_id: str,
               tape, dropout_rate, rng):
        obj = scene.object_by_id(object_id)
        flat = self.crops[scene_index].get(object_id)
        features = obj.features if flat is None else None
        return encode_object(obj.bbox, self.contexts[scene_index], model.object,
                             mode="train", tape=tape, dropout_rate=dropout_rate,
                             rng=rng, features=features, flat_crop=flat)


def train(train_scenes: list[Scene], config: TrainingConfig,
          model_config: ModelConfig | None = None) -> tuple[GroundingModel, list[LogRecord]]:
    """Run the full recipe and return the trained model with its loss log."""
    if model_config is None:
        model_config = ModelConfig()
    pool = build_sample_pool(train_scenes)
    vocab = build_vocabulary(s.text for s in pool.samples)
    model = build_model(model_config, vocab, seed=config.seed)
    cache = _SceneCache(train_scenes)

    token_cache = [vocab.encode(tokenize(s.text)) for s in pool.samples]
    text_tokens = {s.text: toks for s, toks in zip(pool.samples, token_cache)}

    optimizer = Adam(model.parameters(), lr=config.learning_rate,
                     decay=config.lr_decay, decay_interval=config.decay_interval)
    rng = np.random.default_rng([config.seed, 0x747261])
    log = []

    for iteration in range(1, config.iterations + 1):
        tape = ad.Tape()
        margin_terms, dest_terms = [], []
        picks = rng.integers(len(pool.samples), size=config.batch_size)
        for pick in picks:
            sample = pool.samples[int(pick)]
            draw = sample_negatives(pool, sample, rng)
            if draw is None:
                continue
            scene = pool.scenes[sample.scene_index]

            def target_tokens(text):
                toks = apply_word_dropout(text_tokens.get(text) or vocab.encode(tokenize(text)),
                                          config.word_dropout, rng)
                return apply_tail_drop(toks, config.tail_drop, rng)

            q = encode_text(target_tokens(sample.text), model.text, "train",
                            tape, config.dropout, rng)
            qhat = encode_text(target_tokens(draw.qhat_text), model.text, "train",
                               tape, config.dropout, rng)
            o = cache.encode(model, sample.scene_index, scene, sample.object_id,
                             tape, config.dropout, rng)
            ohat = cache.encode(model, draw.ohat_scene, pool.scenes[draw.ohat_scene],
                                draw.ohat_object, tape, config.dropout, rng)

            margin_terms.append(max_margin_loss(
                ad.cosine(q, o), ad.cosine(q, ohat), ad.cosine(qhat, o), config.margin))

            dest_toks = apply_word_dropout(text_tokens[sample.text], config.word_dropout, rng)
            logits = encode_text(dest_toks, model.destination, "train",
                                 tape, config.dropout, rng)
            dest_terms.append(destination_loss(ad.softmax(logits), sample.destination))

        if not margin_terms:
            continue
        margin_node = ad.mean_all(margin_terms)
        dest_node = ad.mean_all(dest_terms)
        total = ad.add(margin_node, dest_node)
        if not np.isfinite(total.value):
            raise NonFiniteError(
                f"iteration {iteration}: loss is not finite "
                f"(margin {float(margin_node.value)}, dest {float(dest_node.value)})")

        ad.backward(total)
        optimizer.step()
        ad.reset_gradients(model.parameters())
        log.append(LogRecord(iteration, float(margin_node.value),
                             float(dest_node.value), optimizer.effective_lr()))
    return model, log
