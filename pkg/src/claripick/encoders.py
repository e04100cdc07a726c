"""The two towers of the joint embedding space.

The text tower embeds tokens, runs a stacked LSTM, and projects the final
top-layer hidden state through an MLP. The object tower featurizes a
fixed-size crop (or accepts precomputed visual features), concatenates
geometric and relational box features, and projects through its own MLP.
Both land in the same joint dimension so scores can be cosine similarities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import autodiff as ad
from .errors import ConfigError, ShapeError
from .scenes import BoundingBox, Scene, crop_region

CROP_SIZE = 16
VISUAL_INPUT_DIM = CROP_SIZE * CROP_SIZE * 3
GEOMETRIC_DIM = 5
RELATIONAL_DIM = 15


def geometric_features(bbox: BoundingBox, width: float, height: float) -> np.ndarray:
    """[x_min/W, y_min/H, x_max/W, y_max/H, area/(W*H)]."""
    return np.array([
        bbox.x_min / width,
        bbox.y_min / height,
        bbox.x_max / width,
        bbox.y_max / height,
        bbox.area / (width * height),
    ])


def pair_difference(a: BoundingBox, b: BoundingBox, width: float, height: float) -> np.ndarray:
    ax, ay = a.center
    bx, by = b.center
    return np.array([
        (ax - bx) / width,
        (ay - by) / height,
        (a.width - b.width) / width,
        (a.height - b.height) / height,
        (a.area - b.area) / (width * height),
    ])


def relational_features(bbox: BoundingBox, all_bboxes: list[BoundingBox],
                        width: float, height: float) -> np.ndarray:
    """avg, max, min pooling over difference vectors against every other box."""
    self_idx = next((i for i, other in enumerate(all_bboxes) if other is bbox), None)
    if self_idx is None:
        self_idx = next((i for i, other in enumerate(all_bboxes) if other == bbox), None)
    if self_idx is None:
        raise ShapeError("relational_features: bbox is not part of the context set")
    deltas = [pair_difference(bbox, other, width, height)
              for i, other in enumerate(all_bboxes) if i != self_idx]
    if not deltas:
        return np.zeros(RELATIONAL_DIM)
    stack = np.stack(deltas)
    return np.concatenate([stack.mean(axis=0), stack.max(axis=0), stack.min(axis=0)])


# ---------------------------------------------------------------------------
# parameter bundles


@dataclass
class LstmLayerParams:
    wx: ad.Parameter  # (in, 4H)
    wh: ad.Parameter  # (H, 4H)
    b: ad.Parameter   # (4H,)

    def all(self):
        return [self.wx, self.wh, self.b]


@dataclass
class MlpParams:
    w1: ad.Parameter
    b1: ad.Parameter
    w2: ad.Parameter
    b2: ad.Parameter

    def all(self):
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class TextEncoderParams:
    """Embedding table, LSTM stack, and output MLP (joint space or logits)."""

    embedding: ad.Parameter  # (V, E)
    layers: list[LstmLayerParams]
    mlp: MlpParams

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def output_dim(self) -> int:
        return self.mlp.w2.shape[1]

    def all(self):
        out = [self.embedding]
        for layer in self.layers:
            out.extend(layer.all())
        out.extend(self.mlp.all())
        return out


@dataclass
class ObjectEncoderParams:
    visual_w: ad.Parameter  # (768, F_v)
    visual_b: ad.Parameter  # (F_v,)
    mlp: MlpParams          # (F + 20) -> hidden -> D

    @property
    def output_dim(self) -> int:
        return self.mlp.w2.shape[1]

    def all(self):
        return [self.visual_w, self.visual_b] + self.mlp.all()


# ---------------------------------------------------------------------------
# forward passes


def _lstm_cell(x, h, c, layer: LstmLayerParams, tape):
    hidden = layer.wh.value.shape[0]
    wx = ad.leaf(tape, layer.wx)
    wh = ad.leaf(tape, layer.wh)
    b = ad.leaf(tape, layer.b)
    z = ad.affine_pair(x, wx, h, wh, b)
    i = ad.sigmoid(ad.slice_1d(z, 0, hidden))
    f = ad.sigmoid(ad.slice_1d(z, hidden, 2 * hidden))
    g = ad.tanh(ad.slice_1d(z, 2 * hidden, 3 * hidden))
    o = ad.sigmoid(ad.slice_1d(z, 3 * hidden, 4 * hidden))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def _mlp_forward(x, mlp: MlpParams, tape, train, dropout_rate, rng):
    hidden = ad.relu(ad.linear(x, ad.leaf(tape, mlp.w1), ad.leaf(tape, mlp.b1)))
    hidden = ad.dropout(hidden, dropout_rate, rng, train)
    return ad.linear(hidden, ad.leaf(tape, mlp.w2), ad.leaf(tape, mlp.b2))


def encode_text(token_indices, params: TextEncoderParams, mode: str = "infer",
                tape: ad.Tape | None = None, dropout_rate: float = 0.0, rng=None) -> ad.Node:
    """Embed, run the LSTM stack, and project the final hidden state.

    An empty index list yields a zero vector flagged degenerate.
    """
    train = _check_mode(mode, tape)
    for idx in token_indices:
        if not 0 <= idx < params.vocab_size:
            raise ShapeError(f"token index {idx} outside vocabulary of size {params.vocab_size}")
    if not token_indices:
        node = ad.zeros((params.output_dim,), tape)
        node.degenerate = True
        return node

    hidden = params.layers[0].wh.value.shape[0]
    states = [(ad.zeros((hidden,), tape), ad.zeros((hidden,), tape)) for _ in params.layers]
    for idx in token_indices:
        x = ad.embedding_row(tape, params.embedding, int(idx))
        x = ad.dropout(x, dropout_rate, rng, train)
        for li, layer in enumerate(params.layers):
            h, c = _lstm_cell(x, states[li][0], states[li][1], layer, tape)
            states[li] = (h, c)
            x = h
    return _mlp_forward(states[-1][0], params.mlp, tape, train, dropout_rate, rng)


def resample_crop(crop: np.ndarray) -> np.ndarray:
    """Resize a crop to 16x16 RGB in [0,1] and flatten."""
    img = Image.fromarray(np.ascontiguousarray(crop)).resize((CROP_SIZE, CROP_SIZE), Image.BILINEAR)
    return np.asarray(img, dtype=np.float64).reshape(-1) / 255.0


@dataclass
class ObjectContext:
    """Everything the object tower needs about the surrounding scene."""

    width: float
    height: float
    bboxes: list[BoundingBox]
    image: np.ndarray | None = None


def context_from_scene(scene: Scene, bboxes: list[BoundingBox] | None = None) -> ObjectContext:
    if bboxes is None:
        bboxes = [o.bbox for o in scene.objects]
    return ObjectContext(scene.width, scene.height, bboxes, scene.image)


def encode_object(bbox: BoundingBox, context: ObjectContext, params: ObjectEncoderParams,
                  mode: str = "infer", tape: ad.Tape | None = None,
                  dropout_rate: float = 0.0, rng=None,
                  features: np.ndarray | None = None,
                  flat_crop: np.ndarray | None = None) -> ad.Node:
    """Visual features plus geometric and relational context through the MLP.

    ``features`` bypasses the visual featurizer entirely (precomputed
    CNN features); ``flat_crop`` supplies an already-resampled crop so
    repeated encodings of one object skip the resize.
    """
    train = _check_mode(mode, tape)
    if features is not None:
        visual = ad.constant(np.asarray(features, dtype=np.float64), tape)
    elif flat_crop is not None or context.image is not None:
        if flat_crop is None:
            flat_crop = resample_crop(crop_region(context.image, bbox))
        flat = ad.constant(flat_crop, tape)
        visual = ad.relu(ad.linear(flat, ad.leaf(tape, params.visual_w), ad.leaf(tape, params.visual_b)))
        visual = ad.dropout(visual, dropout_rate, rng, train)
    else:
        raise ConfigError("object has neither an image to crop nor precomputed features")

    geo = geometric_features(bbox, context.width, context.height)
    rel = relational_features(bbox, context.bboxes, context.width, context.height)
    side = ad.constant(np.concatenate([geo, rel]), tape)
    combined = ad.concat([visual, side])
    if combined.shape[0] != params.mlp.w1.shape[0]:
        raise ShapeError(
            f"object tower expects input {params.mlp.w1.shape[0]}, got {combined.shape[0]}")
    return _mlp_forward(combined, params.mlp, tape, train, dropout_rate, rng)


def _check_mode(mode: str, tape) -> bool:
    if mode not in ("train", "infer"):
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "train" and tape is None:
        raise ConfigError("train mode requires a tape to record onto")
    return mode == "train"
