"""Model assembly: configuration, parameter initialization, and the registry.

A grounding model bundles three towers over one vocabulary: the text tower
and object tower that share the joint space, and an independent
destination tower that classifies which of the four boxes an instruction
names. Parameters carry dotted names (``text.lstm0.wx``) so checkpoints
and optimizers can address them uniformly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Parameter
from .encoders import (GEOMETRIC_DIM, RELATIONAL_DIM, VISUAL_INPUT_DIM,
                       LstmLayerParams, MlpParams, ObjectEncoderParams,
                       TextEncoderParams)
from .errors import ConfigError
from .proposals import ObjectnessScorerParams
from .text import Vocabulary

N_BOXES = 4
CONTEXT_DIM = GEOMETRIC_DIM + RELATIONAL_DIM


@dataclass(frozen=True)
class ModelConfig:
    embedding_dim: int = 32
    hidden_dim: int = 64
    lstm_layers: int = 1
    joint_dim: int = 64
    visual_dim: int = 64
    mlp_hidden: int = 64
    dest_hidden: int = 64
    object_margin: float = 0.1
    box_margin: float = 0.1
    feature_dim: int | None = None  # precomputed visual features; None = crop path

    def __post_init__(self):
        for name in ("embedding_dim", "hidden_dim", "lstm_layers", "joint_dim",
                     "visual_dim", "mlp_hidden", "dest_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.object_margin < 0 or self.box_margin < 0:
            raise ConfigError("margins must be nonnegative")
        if self.feature_dim is not None and self.feature_dim < 1:
            raise ConfigError("feature_dim must be positive when set")

    @staticmethod
    def paper_scale() -> "ModelConfig":
        return ModelConfig(embedding_dim=128, hidden_dim=512, lstm_layers=3,
                           joint_dim=512, visual_dim=512, mlp_hidden=512,
                           dest_hidden=256)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(raw: dict) -> "ModelConfig":
        return ModelConfig(**raw)


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _init_mlp(rng, prefix: str, d_in: int, d_hidden: int, d_out: int) -> MlpParams:
    return MlpParams(
        w1=Parameter(f"{prefix}.w1", _glorot(rng, d_in, d_hidden)),
        b1=Parameter(f"{prefix}.b1", np.zeros(d_hidden)),
        w2=Parameter(f"{prefix}.w2", _glorot(rng, d_hidden, d_out)),
        b2=Parameter(f"{prefix}.b2", np.zeros(d_out)),
    )


def _init_lstm_stack(rng, prefix: str, d_in: int, hidden: int, layers: int) -> list[LstmLayerParams]:
    stack = []
    k = 1.0 / math.sqrt(hidden)
    for li in range(layers):
        in_dim = d_in if li == 0 else hidden
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0  # forget-gate bias opens the memory path
        stack.append(LstmLayerParams(
            wx=Parameter(f"{prefix}.lstm{li}.wx", rng.uniform(-k, k, size=(in_dim, 4 * hidden))),
            wh=Parameter(f"{prefix}.lstm{li}.wh", rng.uniform(-k, k, size=(hidden, 4 * hidden))),
            b=Parameter(f"{prefix}.lstm{li}.b", bias),
        ))
    return stack


def _init_text_tower(rng, prefix: str, vocab_size: int, embedding_dim: int,
                     hidden: int, layers: int, mlp_hidden: int, out_dim: int) -> TextEncoderParams:
    return TextEncoderParams(
        embedding=Parameter(f"{prefix}.embedding",
                            rng.normal(0.0, 0.1, size=(vocab_size, embedding_dim))),
        layers=_init_lstm_stack(rng, prefix, embedding_dim, hidden, layers),
        mlp=_init_mlp(rng, f"{prefix}.mlp", hidden, mlp_hidden, out_dim),
    )


@dataclass
class GroundingModel:
    config: ModelConfig
    vocab: Vocabulary
    text: TextEncoderParams
    object: ObjectEncoderParams
    destination: TextEncoderParams
    proposal_scorer: ObjectnessScorerParams | None = None

    def parameters(self) -> list[Parameter]:
        return self.text.all() + self.object.all() + self.destination.all()

    def parameter_map(self) -> dict[str, Parameter]:
        out = {}
        for p in self.parameters():
            if p.name in out:
                raise ConfigError(f"duplicate parameter name {p.name!r}")
            out[p.name] = p
        return out


def build_model(config: ModelConfig, vocab: Vocabulary, seed: int = 0) -> GroundingModel:
    """Initialize all three towers deterministically from a seed."""
    rng = np.random.default_rng([seed, 0x6d6f64])
    vocab_size = len(vocab.index)

    text = _init_text_tower(rng, "text", vocab_size, config.embedding_dim,
                            config.hidden_dim, config.lstm_layers,
                            config.mlp_hidden, config.joint_dim)

    visual_out = config.feature_dim if config.feature_dim is not None else config.visual_dim
    obj = ObjectEncoderParams(
        visual_w=Parameter("object.visual.w", _glorot(rng, VISUAL_INPUT_DIM, config.visual_dim)),
        visual_b=Parameter("object.visual.b", np.zeros(config.visual_dim)),
        mlp=_init_mlp(rng, "object.combine", visual_out + CONTEXT_DIM,
                      config.mlp_hidden, config.joint_dim),
    )

    dest = _init_text_tower(rng, "dest", vocab_size, config.embedding_dim,
                            config.dest_hidden, config.lstm_layers,
                            config.dest_hidden, N_BOXES)

    return GroundingModel(config, vocab, text, obj, dest)
