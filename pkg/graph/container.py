"""Binary model container.

Layout (little-endian)::

    b"ANMD" | u32 version | u32 manifest length | manifest (UTF-8 JSON) | payloads

The manifest lists every tensor with its dtype tag, shape and byte length;
payloads follow in manifest order. The same chunk format stores Adam
optimizer state next to a checkpoint.
"""
import json
import logging
import struct
from typing import Any, Dict, Tuple

import numpy as np
import torch

from denoiser.block import CONV_NAMES, DenoiserParams
from graph.layers import LayerDesc, LayerKind
from graph.model import ModelGraph
from noise.injection import NoiseSpec
from utils.errors import (BadMagicError, CorruptManifestError, MissingPayloadError, TruncatedPayloadError,
                          VersionMismatchError)

logger = logging.getLogger(__name__)

MAGIC = b"ANMD"
VERSION = 1
_HEADER = struct.Struct("<4sII")

DTYPE_TAGS = {
    torch.float32: ("f32", np.dtype("<f4")),
    torch.float64: ("f64", np.dtype("<f8")),
    torch.int16: ("i16", np.dtype("<i2")),
    torch.int64: ("i64", np.dtype("<i8")),
}
_TAG_LOOKUP = {tag: (torch_dtype, np_dtype) for torch_dtype, (tag, np_dtype) in DTYPE_TAGS.items()}


def write_container(manifest: Dict[str, Any], tensors: Dict[str, torch.Tensor]) -> bytes:
    """Encode a manifest and named tensors into container bytes."""
    index = []
    payloads = []
    for name, tensor in tensors.items():
        tag, np_dtype = DTYPE_TAGS[tensor.dtype]
        raw = tensor.detach().cpu().contiguous().numpy().astype(np_dtype, copy=False).tobytes()
        index.append({"name": name, "dtype": tag, "shape": list(tensor.shape), "nbytes": len(raw)})
        payloads.append(raw)

    document = dict(manifest, tensors=index)
    encoded = json.dumps(document, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, VERSION, len(encoded)) + encoded + b"".join(payloads)


def _decode_manifest(chunk: bytes) -> Dict[str, Any]:
    try:
        manifest = json.loads(chunk.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptManifestError(f"corrupt manifest: {e}") from e
    if not isinstance(manifest, dict) or not isinstance(manifest.get("tensors", []), list):
        raise CorruptManifestError("corrupt manifest: expected an object with a tensor index")
    return manifest


def read_container(data: bytes) -> Tuple[Dict[str, Any], Dict[str, torch.Tensor]]:
    """Decode container bytes into (manifest, tensors).

    Raises:
        BadMagicError, VersionMismatchError, TruncatedPayloadError, CorruptManifestError
    """
    if len(data) < _HEADER.size:
        if not MAGIC.startswith(data[:4]):
            raise BadMagicError("bad magic: not a model container")
        raise TruncatedPayloadError(f"truncated header: {len(data)} bytes")

    magic, version, manifest_length = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic: expected {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise VersionMismatchError(f"version mismatch: container is v{version}, reader supports v{VERSION}")

    offset = _HEADER.size
    if len(data) < offset + manifest_length:
        raise TruncatedPayloadError("truncated manifest chunk")
    manifest = _decode_manifest(data[offset:offset + manifest_length])
    offset += manifest_length

    tensors = {}
    for item in manifest.pop("tensors", []):
        try:
            name, tag, shape, nbytes = item["name"], item["dtype"], item["shape"], int(item["nbytes"])
        except (KeyError, TypeError, ValueError) as e:
            raise CorruptManifestError(f"corrupt manifest: bad tensor entry {item!r}") from e
        if not isinstance(tag, str) or tag not in _TAG_LOOKUP:
            raise CorruptManifestError(f"corrupt manifest: unknown dtype tag '{tag}' for '{name}'")
        end = offset + nbytes
        if len(data) < end:
            raise TruncatedPayloadError(
                f"truncated payload for '{name}': need {nbytes} bytes, "
                f"{max(len(data) - offset, 0)} available"
            )
        torch_dtype, np_dtype = _TAG_LOOKUP[tag]
        try:
            array = np.frombuffer(data[offset:end], dtype=np_dtype).reshape(shape)
        except (TypeError, ValueError) as e:
            raise CorruptManifestError(f"corrupt manifest: '{name}' has {nbytes} bytes, shape {shape}") from e
        tensors[name] = torch.from_numpy(array.copy()).to(torch_dtype)
        offset = end
    return manifest, tensors


def _take(tensors: Dict[str, torch.Tensor], name: str) -> torch.Tensor:
    if name not in tensors:
        raise MissingPayloadError(f"missing payload: manifest references tensor '{name}'")
    return tensors[name]


def _layer_manifest(layer: LayerDesc, prefix: str) -> Dict[str, Any]:
    return {
        "kind": layer.kind.value,
        "name": layer.name,
        "in_channels": layer.in_channels,
        "out_channels": layer.out_channels,
        "kernel": layer.kernel,
        "stride": layer.stride,
        "padding": layer.padding,
        "trainable": layer.trainable,
        "noise_enabled": layer.noise_enabled,
        "params": {key: f"{prefix}.{key}" for key in layer.params()},
    }


def _layer_from_manifest(entry: Dict[str, Any], tensors: Dict[str, torch.Tensor]) -> LayerDesc:
    params = {key: _take(tensors, name) for key, name in entry["params"].items()}
    return LayerDesc(
        kind=LayerKind(entry["kind"]),
        in_channels=entry["in_channels"],
        out_channels=entry["out_channels"],
        kernel=entry["kernel"],
        stride=entry["stride"],
        padding=entry["padding"],
        weight=params.get("weight"),
        bias=params.get("bias"),
        trainable=entry["trainable"],
        noise_enabled=entry["noise_enabled"],
        name=entry["name"],
    )


def save_model(model: ModelGraph) -> bytes:
    """Serialize ``model`` (layers, attachments, noise spec) to container bytes."""
    layers = [_layer_manifest(layer, f"layers.{i}") for i, layer in enumerate(model.layers)]
    attachments = []
    for index in sorted(model.attachments):
        params = model.attachments[index]
        attachments.append({
            "index": index,
            "channels": params.channels,
            "ratio": params.ratio,
            "convs": {
                conv_name: _layer_manifest(layer, f"denoiser.{index}.{conv_name}")
                for conv_name, layer in params.convs().items()
            },
        })

    manifest = {
        "format": "model",
        "name": model.name,
        "classes": model.classes,
        "layers": layers,
        "attachments": attachments,
        "noise_spec": model.noise_spec.model_dump() if model.noise_spec is not None else None,
    }
    return write_container(manifest, model.named_parameters())


def load_model(data: bytes) -> ModelGraph:
    """Rebuild a ModelGraph from container bytes.

    Raises:
        BadMagicError, VersionMismatchError, TruncatedPayloadError, MissingPayloadError,
        CorruptManifestError
    """
    manifest, tensors = read_container(data)
    try:
        layers = [_layer_from_manifest(entry, tensors) for entry in manifest["layers"]]
        attachments = {}
        for item in manifest["attachments"]:
            convs = {name: _layer_from_manifest(item["convs"][name], tensors) for name in CONV_NAMES}
            attachments[item["index"]] = DenoiserParams(channels=item["channels"], ratio=item["ratio"], **convs)
        name, classes = manifest["name"], manifest["classes"]
    except (KeyError, TypeError) as e:
        raise CorruptManifestError(f"corrupt manifest: missing or malformed field {e}") from e

    spec = manifest.get("noise_spec")
    model = ModelGraph(
        layers=layers,
        attachments=attachments,
        name=name,
        classes=classes,
        noise_spec=NoiseSpec.model_validate(spec) if spec is not None else None,
    )
    logger.debug(f"Loaded {model.name}: {len(layers)} layers, {len(attachments)} denoisers")
    return model
