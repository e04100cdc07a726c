"""Checkpoint archive: a zip holding a JSON manifest plus raw parameter payloads.

The manifest records the format version, model configuration, vocabulary,
and the shape of every parameter. Each parameter's values live in a
``params/<dotted-name>`` member as little-endian float64 bytes, so
payloads are exact and the round trip is bitwise.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import GroundingModel, ModelConfig, build_model
from .proposals import ObjectnessScorerParams
from .text import Vocabulary

FORMAT_VERSION = 1


def save_checkpoint(model: GroundingModel, path) -> Path:
    path = Path(path)
    entries = {p.name: p.value for p in model.parameters()}
    if model.proposal_scorer is not None:
        entries["proposals.weights"] = np.asarray(model.proposal_scorer.weights, dtype=np.float64)
        entries["proposals.bias"] = np.asarray([model.proposal_scorer.bias])
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "vocab": model.vocab.index,
        "params": {name: list(arr.shape) for name, arr in entries.items()},
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as archive:
        archive.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
        for name, arr in entries.items():
            archive.writestr(f"params/{name}", np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return path


def load_checkpoint(path) -> GroundingModel:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        archive = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise CheckpointError(f"{path} is not a checkpoint archive: {exc}") from exc

    with archive:
        try:
            manifest = json.loads(archive.read("manifest.json"))
        except KeyError:
            raise CheckpointError("checkpoint has no manifest.json") from None
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"corrupt manifest: {exc}") from exc

        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {version!r} (expected {FORMAT_VERSION})")

        config = ModelConfig.from_dict(manifest["model_config"])
        vocab = Vocabulary({str(k): int(v) for k, v in manifest["vocab"].items()})
        model = build_model(config, vocab, seed=0)

        declared = {name: tuple(shape) for name, shape in manifest["params"].items()}
        for param in model.parameters():
            if param.name not in declared:
                raise CheckpointError(f"checkpoint is missing parameter {param.name!r}")
            param.value[...] = _read_payload(archive, param.name, declared[param.name],
                                             expected_shape=param.shape)

        if "proposals.weights" in declared:
            weights = _read_payload(archive, "proposals.weights", declared["proposals.weights"])
            bias = _read_payload(archive, "proposals.bias", declared["proposals.bias"])
            model.proposal_scorer = ObjectnessScorerParams(weights, float(bias[0]))
    return model


def _read_payload(archive, name: str, shape: tuple, expected_shape: tuple | None = None) -> np.ndarray:
    try:
        raw = archive.read(f"params/{name}")
    except KeyError:
        raise CheckpointError(f"checkpoint payload params/{name} is missing") from None
    count = int(np.prod(shape)) if shape else 1
    if len(raw) != count * 8:
        raise CheckpointError(
            f"payload params/{name} is truncated or corrupt: "
            f"{len(raw)} bytes for declared shape {shape}")
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if expected_shape is not None and arr.shape != tuple(expected_shape):
        raise CheckpointError(
            f"parameter {name} has shape {arr.shape}, model expects {tuple(expected_shape)}")
    if not np.all(np.isfinite(arr)):
        raise CheckpointError(f"parameter {name} contains non-finite values")
    return arr
