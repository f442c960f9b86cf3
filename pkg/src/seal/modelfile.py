"""Portable Q-network file: magic, JSON header, little-endian float64 payload.

Layout::

    b"SEALQNET"                  8 bytes
    header length (uint32 LE)    4 bytes
    header (UTF-8 JSON)          sorted keys, no whitespace
    payload                      parameters in header order, '<f8'

The header lists ``layers`` as ``[{"name", "shape"}]`` and echoes the
training configuration under ``meta``.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .dqn.network import QNetwork
from .exceptions import ModelFileError

MAGIC = b"SEALQNET"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


def dumps_model(net: QNetwork, meta: dict | None = None) -> bytes:
    layers = []
    for k in range(net.n_layers):
        layers.append({"name": f"W{k}", "shape": list(net.params[2 * k].shape)})
        layers.append({"name": f"b{k}", "shape": list(net.params[2 * k + 1].shape)})
    header = {
        "format_version": FORMAT_VERSION,
        "state_dim": net.state_dim,
        "n_actions": net.n_actions,
        "hidden_sizes": list(net.hidden_sizes),
        "activation": net.activation,
        "layers": layers,
        "meta": meta or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p, dtype=_DTYPE).tobytes() for p in net.params)
    return MAGIC + struct.pack("<I", len(head)) + head + payload


def loads_model(data: bytes):
    """Parse model bytes into ``(QNetwork, meta)``; never returns a partial network."""
    if len(data) < len(MAGIC) + 4 or data[:len(MAGIC)] != MAGIC:
        raise ModelFileError("not a model file (bad magic)")
    (head_len,) = struct.unpack("<I", data[len(MAGIC):len(MAGIC) + 4])
    start = len(MAGIC) + 4
    if len(data) < start + head_len:
        raise ModelFileError("truncated header")
    try:
        header = json.loads(data[start:start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"corrupt header: {exc}") from None

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFileError(f"format_version: unsupported version {version!r}, this reader handles {FORMAT_VERSION}")
    for key in ("state_dim", "n_actions", "hidden_sizes", "activation", "layers"):
        if key not in header:
            raise ModelFileError(f"{key}: missing from header")
    if header["activation"] != QNetwork.activation:
        raise ModelFileError(f"activation: unsupported {header['activation']!r}")

    net = QNetwork(header["state_dim"], header["n_actions"], header["hidden_sizes"], zero=True)
    expected = [list(s) for s in net.shapes]
    declared = [layer.get("shape") for layer in header["layers"]]
    if declared != expected:
        raise ModelFileError(f"layers: declared shapes {declared} inconsistent with "
                             f"state_dim/hidden_sizes/n_actions (expected {expected})")
    payload = data[start + head_len:]
    n_bytes = net.flat.size * _DTYPE.itemsize
    if len(payload) != n_bytes:
        raise ModelFileError(f"payload: expected {n_bytes} bytes, found {len(payload)}")
    flat = np.frombuffer(payload, dtype=_DTYPE).astype(float)
    if not np.isfinite(flat).all():
        raise ModelFileError("payload: non-finite parameter values")
    net.flat[...] = flat
    return net, header.get("meta", {})


def save_model(net: QNetwork, path, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps_model(net, meta))


def load_model(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFileError(f"cannot read {path}: {exc}") from None
    return loads_model(data)
