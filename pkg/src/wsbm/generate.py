"""Random weighted SBM instances and the censored / submatrix adapters."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .dist import LabelDistribution, ScaledFamily, make_scaled_discrete
from .errors import ValidationError

DEFAULT_MAX_NODES = 20000
MAX_LABELS = 1 << 16
_PAIRS_PER_CHUNK = 1 << 20


@dataclass(frozen=True)
class ModelSpec:
    K: int
    n: int
    within: LabelDistribution
    between: LabelDistribution
    max_nodes: int = field(default=DEFAULT_MAX_NODES, compare=False)

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ValidationError(f"K must be an integer >= 2, got {self.K}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be an integer >= 1, got {self.n}")
        if self.within.kind != self.between.kind:
            raise ValidationError("within and between distributions must be of the same kind")
        if self.within.is_discrete:
            if self.within.num_labels != self.between.num_labels:
                raise ValidationError("within and between distributions need the same support size")
            if self.within.num_labels > MAX_LABELS:
                raise ValidationError(f"at most {MAX_LABELS} labels are supported")
        if self.N > self.max_nodes:
            raise ValidationError(
                f"nK = {self.N} exceeds the node cap {self.max_nodes}"
            )

    @property
    def N(self) -> int:
        return self.K * self.n

    @property
    def kind(self) -> str:
        return self.within.kind

    @property
    def L(self) -> int | None:
        return self.within.num_labels - 1 if self.within.is_discrete else None

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "n": self.n,
            "within": self.within.to_json(),
            "between": self.between.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict, max_nodes: int = DEFAULT_MAX_NODES) -> "ModelSpec":
        try:
            return cls(
                K=int(obj["K"]),
                n=int(obj["n"]),
                within=LabelDistribution.from_json(obj["within"]),
                between=LabelDistribution.from_json(obj["between"]),
                max_nodes=max_nodes,
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed model spec: {exc}") from exc


def scaled_model(fam: ScaledFamily, K: int = 2, max_nodes: int = DEFAULT_MAX_NODES) -> ModelSpec:
    p, q = make_scaled_discrete(fam)
    return ModelSpec(K, fam.n, p, q, max_nodes=max_nodes)


class Assignment:
    """Balanced community labels in ``1..K`` for ``N = nK`` nodes."""

    __slots__ = ("classes", "K")

    def __init__(self, classes, K: int):
        arr = np.asarray(classes, dtype=np.int64).copy()
        arr.setflags(write=False)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("assignment must be a non-empty 1-d sequence")
        if arr.size % K:
            raise ValidationError(f"{arr.size} nodes cannot be split into {K} equal classes")
        if arr.min() < 1 or arr.max() > K:
            raise ValidationError(f"class labels must lie in 1..{K}")
        counts = np.bincount(arr, minlength=K + 1)[1:]
        if not np.all(counts == arr.size // K):
            raise ValidationError(f"assignment is not balanced: class sizes {counts.tolist()}")
        self.classes = arr
        self.K = int(K)

    @classmethod
    def truth(cls, K: int, n: int) -> "Assignment":
        """Nodes ``(k-1)n .. kn-1`` (0-based) in community ``k``."""
        return cls(np.repeat(np.arange(1, K + 1), n), K)

    @property
    def N(self) -> int:
        return self.classes.size

    @property
    def n(self) -> int:
        return self.N // self.K

    def canonical(self) -> "Assignment":
        """Relabel so classes are numbered by their least member."""
        _, first = np.unique(self.classes, return_index=True)
        order = np.argsort(first)
        relabel = np.empty(self.K + 1, dtype=np.int64)
        relabel[np.unique(self.classes)[order]] = np.arange(1, self.K + 1)
        return Assignment(relabel[self.classes], self.K)

    def relabel(self, perm) -> "Assignment":
        """Apply ``perm`` (a sequence where ``perm[k-1]`` is the new label of class k)."""
        lookup = np.concatenate(([0], np.asarray(perm, dtype=np.int64)))
        return Assignment(lookup[self.classes], self.K)

    def tolist(self) -> list[int]:
        return self.classes.tolist()

    def __eq__(self, other):
        return isinstance(other, Assignment) and self.K == other.K and np.array_equal(self.classes, other.classes)

    def __hash__(self):
        return hash((self.K, self.classes.tobytes()))

    def __repr__(self):
        return f"Assignment({self.classes.tolist()}, K={self.K})"


class WeightedGraph:
    """Complete graph with one value per unordered node pair.

    Values are stored as the strict upper triangle in row-major ``i < j``
    order: uint16 labels for discrete models, float64 for gaussian ones.
    """

    __slots__ = ("N", "kind", "upper", "num_labels")

    def __init__(self, N: int, kind: str, upper: np.ndarray, num_labels: int | None = None):
        expected = N * (N - 1) // 2
        upper = np.ascontiguousarray(upper)
        if upper.shape != (expected,):
            raise ValidationError(f"expected {expected} pair values for N={N}, got {upper.shape}")
        if kind == "discrete":
            upper = upper.astype(np.uint16, copy=False)
            if num_labels is not None and expected and int(upper.max()) >= num_labels:
                raise ValidationError("edge label outside the label set")
        else:
            upper = upper.astype(np.float64, copy=False)
        upper.setflags(write=False)
        self.N = int(N)
        self.kind = kind
        self.upper = upper
        self.num_labels = num_labels

    def matrix(self) -> np.ndarray:
        """Dense symmetric ``N x N`` matrix; the diagonal is zero and carries no meaning."""
        out = np.zeros((self.N, self.N), dtype=self.upper.dtype)
        iu = np.triu_indices(self.N, 1)
        out[iu] = self.upper
        out[(iu[1], iu[0])] = self.upper
        return out

    def value(self, i: int, j: int):
        if i == j:
            raise IndexError("no self pairs")
        if i > j:
            i, j = j, i
        return self.upper[pair_index(self.N, i, j)]

    def __eq__(self, other):
        return (
            isinstance(other, WeightedGraph)
            and self.N == other.N
            and self.kind == other.kind
            and np.array_equal(self.upper, other.upper)
        )


def pair_index(N: int, i: int, j: int) -> int:
    """Row-major position of pair ``(i, j)``, ``i < j``, in the upper triangle."""
    return i * (2 * N - i - 1) // 2 + (j - i - 1)


def _row_blocks(N: int):
    """Split rows into blocks of roughly ``_PAIRS_PER_CHUNK`` pairs."""
    blocks, start, acc = [], 0, 0
    for i in range(N - 1):
        acc += N - 1 - i
        if acc >= _PAIRS_PER_CHUNK:
            blocks.append((start, i + 1))
            start, acc = i + 1, 0
    if start < N - 1:
        blocks.append((start, N - 1))
    return blocks


def _discrete_sampler(dist: LabelDistribution):
    probs = np.asarray(dist.probs)
    cdf = np.cumsum(probs)
    last = int(np.flatnonzero(probs > 0)[-1])
    cdf[last:] = 1.0
    return cdf


def _fill_block(spec: ModelSpec, key: int, r0: int, r1: int, out: np.ndarray) -> None:
    N, n = spec.N, spec.n
    rows = np.arange(r0, r1)
    lengths = N - 1 - rows
    i = np.repeat(rows, lengths)
    offsets = np.cumsum(lengths) - lengths
    j = np.arange(lengths.sum()) - np.repeat(offsets, lengths) + i + 1
    start = pair_index(N, r0, r0 + 1)
    counters = np.arange(start, start + i.size, dtype=np.uint64)
    same = (i // n) == (j // n)
    if spec.kind == "discrete":
        u = rng.uniforms(key, counters)
        within = np.searchsorted(_discrete_sampler(spec.within), u, side="right")
        between = np.searchsorted(_discrete_sampler(spec.between), u, side="right")
        out[start:start + i.size] = np.where(same, within, between)
    else:
        z = rng.standard_normals(key, counters)
        w, b = spec.within, spec.between
        out[start:start + i.size] = np.where(same, w.mean + w.std * z, b.mean + b.std * z)


def generate_wsbm(spec: ModelSpec, seed: int, workers: int | None = 1) -> tuple[WeightedGraph, Assignment]:
    """Sample a weighted SBM with the canonical block ground truth.

    Pair ``k`` (row-major over ``i < j``) uses counter ``k`` of the key derived
    from ``seed``; the output is therefore identical for any ``workers``.
    """
    N = spec.N
    if N > spec.max_nodes:
        raise ValidationError(f"nK = {N} exceeds the node cap {spec.max_nodes}")
    key = rng.derive_key(seed)
    dtype = np.uint16 if spec.kind == "discrete" else np.float64
    out = np.empty(N * (N - 1) // 2, dtype=dtype)
    blocks = _row_blocks(N)
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or len(blocks) <= 1:
        for r0, r1 in blocks:
            _fill_block(spec, key, r0, r1, out)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda blk: _fill_block(spec, key, *blk, out), blocks))
    num_labels = spec.within.num_labels if spec.kind == "discrete" else None
    return WeightedGraph(N, spec.kind, out, num_labels), Assignment.truth(spec.K, spec.n)


def censored_intensities(n: int, p: float, q1: float, q2: float) -> tuple[list[float], list[float]]:
    """Colour intensities ``(a, b)`` of the censored model in the ``log(n)/n`` scaling."""
    if n < 2:
        raise ValidationError("censored intensities need n >= 2")
    factor = p * n / math.log(n)
    return [factor * (1 - q1), factor * q1], [factor * (1 - q2), factor * q2]


def _check_unit(name: str, x: float) -> None:
    if not (0.0 <= x <= 1.0):
        raise ValidationError(f"{name} must lie in [0, 1], got {x}")


def censored_model(n: int, p: float, q1: float, q2: float, max_nodes: int = DEFAULT_MAX_NODES) -> ModelSpec:
    """Censored block model as a two-colour weighted SBM.

    Label 0 is the erasure symbol, label 1 the channel output 0 and label 2
    the channel output 1. Within-community pairs carry XOR 0, between pairs
    XOR 1.
    """
    for name, x in (("p", p), ("q1", q1), ("q2", q2)):
        _check_unit(name, x)
    within = LabelDistribution.discrete([1 - p, p * (1 - q1), p * q1])
    between = LabelDistribution.discrete([1 - p, p * (1 - q2), p * q2])
    return ModelSpec(2, n, within, between, max_nodes=max_nodes)


def submatrix_model(n: int, K: int, mu: float, sigma: float, max_nodes: int = DEFAULT_MAX_NODES) -> ModelSpec:
    """Square symmetric surrogate of submatrix localization with ``K`` blocks of size ``n``."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    var = float(sigma) ** 2
    return ModelSpec(
        K, n, LabelDistribution.gaussian(mu, var), LabelDistribution.gaussian(0.0, var), max_nodes=max_nodes
    )
