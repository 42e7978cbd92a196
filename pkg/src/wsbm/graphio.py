"""Binary graph files with a JSON sidecar.

Layout (little endian)::

    magic   4 bytes  b"WSBM"
    version u16      1
    N       u32      node count
    K       u16      number of communities
    kind    u8       0 = discrete (u16 labels), 1 = gaussian (f64 values)
    values           upper triangle, row-major over i < j

The sidecar ``<path>.json`` holds the model spec and the seed.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .generate import DEFAULT_MAX_NODES, ModelSpec, WeightedGraph

MAGIC = b"WSBM"
VERSION = 1
_HEADER = struct.Struct("<4sHIHB")
_KINDS = {"discrete": 0, "gaussian": 1}
_DTYPES = {0: np.dtype("<u2"), 1: np.dtype("<f8")}


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_graph(path, graph: WeightedGraph, spec: ModelSpec, seed: int) -> None:
    code = _KINDS[graph.kind]
    header = _HEADER.pack(MAGIC, VERSION, graph.N, spec.K, code)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(graph.upper.astype(_DTYPES[code], copy=False).tobytes())
    meta = {"format": "WSBM", "version": VERSION, "seed": int(seed), "spec": spec.to_json()}
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_graph(path) -> tuple[WeightedGraph, ModelSpec, int]:
    """Load a graph file and its sidecar; returns ``(graph, spec, seed)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{path}: file too short for a WSBM header")
    magic, version, N, K, code = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    if code not in _DTYPES:
        raise ValidationError(f"{path}: unknown value kind {code}")
    values = np.frombuffer(raw, dtype=_DTYPES[code], offset=_HEADER.size)
    try:
        meta = json.loads(sidecar_path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"missing sidecar {sidecar_path(path)}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid sidecar JSON: {exc}") from exc
    spec = ModelSpec.from_json(meta["spec"], max_nodes=max(N, DEFAULT_MAX_NODES))
    if spec.N != N or spec.K != K:
        raise ValidationError(f"{path}: header (N={N}, K={K}) disagrees with sidecar spec")
    kind = "discrete" if code == 0 else "gaussian"
    if kind != spec.kind:
        raise ValidationError(f"{path}: header kind {kind} disagrees with sidecar spec")
    num_labels = spec.within.num_labels if kind == "discrete" else None
    graph = WeightedGraph(N, kind, values.astype(values.dtype.newbyteorder("="), copy=True), num_labels)
    return graph, spec, int(meta["seed"])
