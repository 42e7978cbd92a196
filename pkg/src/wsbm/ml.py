"""Maximum-likelihood community recovery on weighted SBM graphs.

The log-likelihood of a balanced assignment is, up to a constant, the total
log-likelihood-ratio weight ``T(sigma)`` of its within-community pairs.

Infinite weights are never summed. A score is ordered by the key
``(feasible, #(+inf within pairs), finite part)``: an assignment with a
``-inf`` within pair is infeasible and loses to every feasible one, and more
``+inf`` within pairs beats any finite difference.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import rng
from .dist import GaussianWeight, WeightTable
from .errors import InstanceTooLargeError, ValidationError
from .generate import Assignment, WeightedGraph

EXACT_CLASS_CAP = 10_000_000
_BATCH = 1 << 14
_IMPOSSIBLE = (0, 0, -math.inf)


@dataclass(frozen=True)
class MLResult:
    assignment: Assignment
    score: float
    method: str
    restarts_used: int


def _split(a: float) -> tuple[float, float]:
    t = 134217729.0 * a  # 2**27 + 1
    hi = t - (t - a)
    return hi, a - hi


def _two_product(a: float, b: float) -> tuple[float, float]:
    """``a * b`` as an unevaluated sum of two doubles (exact, barring overflow)."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _count_dot(counts, weights) -> float:
    """Correctly rounded ``sum(c * w)``, equal to summing each weight ``c`` times."""
    parts = []
    for c, w in zip(counts, weights):
        if c and w is not None and math.isfinite(w):
            parts.extend(_two_product(float(c), float(w)))
    return math.fsum(parts)


class PairWeights:
    """Upper-triangle edge weights split into finite part and infinity counts."""

    def __init__(self, W: WeightedGraph, table):
        self.N = W.N
        if W.kind == "discrete":
            if not isinstance(table, WeightTable):
                raise ValidationError("discrete graphs need a WeightTable")
            if W.num_labels is not None and len(table) != W.num_labels:
                raise ValidationError(
                    f"table has {len(table)} entries but the graph uses {W.num_labels} labels"
                )
            w = np.asarray(table.weights, dtype=np.float64)
            if W.upper.size and int(W.upper.max()) >= w.size:
                raise ValidationError("graph contains labels outside the weight table")
            self.labels = W.upper
            self.num_labels = w.size
            self.table = w
            finite = np.where(np.isfinite(w), w, 0.0)
            self.finite = finite[W.upper]
            self.pos = (w == math.inf)[W.upper]
            self.neg = (w == -math.inf)[W.upper]
        else:
            if not isinstance(table, GaussianWeight):
                raise ValidationError("gaussian graphs need a GaussianWeight")
            self.labels = None
            self.finite = np.asarray(table(W.upper), dtype=np.float64)
            self.pos = np.zeros(W.upper.size, dtype=bool)
            self.neg = np.zeros(W.upper.size, dtype=bool)
        self.has_inf = bool(self.pos.any() or self.neg.any())
        self.rows, self.cols = np.triu_indices(self.N, 1)

    def dense(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros((self.N, self.N), dtype=np.float64)
        out[self.rows, self.cols] = values
        out[self.cols, self.rows] = values
        return out

    def key(self, classes: np.ndarray) -> tuple:
        same = classes[self.rows] == classes[self.cols]
        if self.neg[same].any():
            return _IMPOSSIBLE
        pos = int(self.pos[same].sum())
        if self.labels is not None:
            counts = np.bincount(self.labels[same], minlength=self.num_labels)
            finite = _count_dot(counts, self.table)
        else:
            finite = math.fsum(self.finite[same])
        return (1, pos, finite)


def key_to_score(key: tuple) -> float:
    if key[0] == 0:
        return -math.inf
    if key[1] > 0:
        return math.inf
    return key[2]


def _check_assignment(W: WeightedGraph, sigma: Assignment) -> None:
    if sigma.N != W.N:
        raise ValidationError(f"assignment covers {sigma.N} nodes, graph has {W.N}")


def score_key(W: WeightedGraph, table, sigma: Assignment) -> tuple:
    """Total-order key of ``T(sigma)``; see the module docstring."""
    _check_assignment(W, sigma)
    return PairWeights(W, table).key(sigma.classes)


def score(W: WeightedGraph, table, sigma: Assignment) -> float:
    """``T(sigma)``: summed weight of within-community pairs.

    Returns ``-inf`` when a within pair carries a ``-inf`` weight and ``+inf``
    when one carries ``+inf`` (use :func:`score_key` to compare such cases).
    The finite part is a correctly rounded sum, so it is exactly invariant
    under relabelling the communities.
    """
    return key_to_score(score_key(W, table, sigma))


def num_equivalence_classes(K: int, n: int) -> int:
    """Number of balanced partitions of ``nK`` nodes into ``K`` unlabeled classes of size ``n``."""
    return math.factorial(n * K) // (math.factorial(n) ** K * math.factorial(K))


def _partitions(N: int, K: int, n: int, row: np.ndarray):
    # restricted growth strings with every class of size n, filled position by
    # position with the smallest label first, hence lexicographic order; any
    # prefix with class sizes <= n can be completed, so there are no dead ends
    counts = [0] * (K + 1)

    def fill(pos: int, used: int):
        if pos == N:
            yield row
            return
        for label in range(1, min(used + 1, K) + 1):
            if counts[label] == n:
                continue
            row[pos] = label
            counts[label] += 1
            yield from fill(pos + 1, max(used, label))
            counts[label] -= 1

    yield from fill(0, 0)


def canonical_partitions(K: int, n: int, batch: int = _BATCH) -> Iterator[np.ndarray]:
    """Yield batches (rows) of canonical balanced assignments in lexicographic order.

    Each class is numbered by its least member, so every unlabeled partition
    appears exactly once.
    """
    N = n * K
    rows = []
    for row in _partitions(N, K, n, np.zeros(N, dtype=np.int8)):
        rows.append(row.copy())
        if len(rows) == batch:
            yield np.stack(rows)
            rows = []
    if rows:
        yield np.stack(rows)


def _batch_keys(pw: PairWeights, block: np.ndarray):
    """Vectorised keys for a batch of assignments (rows of ``block``)."""
    same = (block[:, pw.rows] == block[:, pw.cols]).astype(np.float64)
    feasible = np.ones(len(block), dtype=np.int64)
    pos = np.zeros(len(block), dtype=np.int64)
    if pw.has_inf:
        feasible = (same @ pw.neg.astype(np.float64) == 0).astype(np.int64)
        pos = np.rint(same @ pw.pos.astype(np.float64)).astype(np.int64) * feasible
    if pw.labels is not None:
        onehot = np.zeros((pw.labels.size, pw.num_labels))
        onehot[np.arange(pw.labels.size), pw.labels] = 1.0
        counts = np.rint(same @ onehot).astype(np.int64)
        uniq, inverse = np.unique(counts, axis=0, return_inverse=True)
        table = [(float(w) if math.isfinite(w) else None) for w in pw.table]
        exact = np.array([_count_dot(u, table) for u in uniq])
        finite = exact[inverse.reshape(-1)]
        return feasible, pos, finite, None
    approx = same @ pw.finite
    return feasible, pos, approx, same


def _best_in_batch(pw: PairWeights, block: np.ndarray):
    """Best key in a batch; ties go to the earliest row."""
    feasible, pos, finite, same = _batch_keys(pw, block)
    finite = np.where(feasible == 1, finite, -math.inf)
    top_f = feasible.max()
    cand = feasible == top_f
    top_p = pos[cand].max()
    cand &= pos == top_p
    if same is None:
        top = finite[cand].max()
        idx = int(np.flatnonzero(cand & (finite == top))[0])
        return (int(top_f), int(top_p), float(top)), idx
    # gaussian: matmul sums are approximate, re-score near-maximal rows exactly
    top = finite[cand].max()
    if top_f == 0:
        return _IMPOSSIBLE, int(np.flatnonzero(cand)[0])
    slack = 1e-9 * (1.0 + float(np.abs(pw.finite).sum()))
    best_key, best_idx = None, None
    for idx in np.flatnonzero(cand & (finite >= top - slack)):
        k = (1, int(top_p), math.fsum(pw.finite[block[idx][pw.rows] == block[idx][pw.cols]]))
        if best_key is None or k > best_key:
            best_key, best_idx = k, int(idx)
    return best_key, best_idx


def exact_ml(W: WeightedGraph, table, K: int, n: int, cap: int = EXACT_CLASS_CAP) -> MLResult:
    """Exhaustive maximum likelihood over balanced partitions.

    Enumerates one representative per unlabeled partition and returns the
    highest-scoring one; ties go to the lexicographically smallest canonical
    assignment.

    Raises:
        InstanceTooLargeError: if there are more than ``cap`` partitions.
    """
    if n * K != W.N:
        raise ValidationError(f"nK = {n * K} does not match graph size {W.N}")
    total = num_equivalence_classes(K, n)
    if total > cap:
        raise InstanceTooLargeError(
            f"{total} balanced partitions exceed the exact-enumeration cap {cap}; use local_search_ml"
        )
    pw = PairWeights(W, table)
    best_key, best_row = None, None
    for block in canonical_partitions(K, n):
        key, idx = _best_in_batch(pw, block)
        if best_key is None or key > best_key:
            best_key, best_row = key, block[idx].astype(np.int64)
    sigma = Assignment(best_row, K)
    return MLResult(sigma, key_to_score(pw.key(sigma.classes)), "exact", 0)


def _random_balanced(key: int, K: int, n: int) -> np.ndarray:
    perm = rng.random_permutation(key, n * K)
    classes = np.empty(n * K, dtype=np.int64)
    classes[perm] = np.arange(n * K) // n + 1
    return classes


class _SwapSearch:
    """Best-improvement pair swapping on dense weight matrices."""

    def __init__(self, pw: PairWeights, K: int):
        self.K = K
        self.D = pw.dense(pw.finite)
        self.tol = 1e-9 * (1.0 + float(np.abs(self.D).max(initial=0.0)) * pw.N / K)
        if pw.has_inf:
            self.P = pw.dense(pw.pos.astype(np.float64))
            self.Q = pw.dense(pw.neg.astype(np.float64))
        else:
            self.P = self.Q = None

    @staticmethod
    def _class_sums(D, classes, K):
        onehot = np.zeros((classes.size, K))
        onehot[np.arange(classes.size), classes - 1] = 1.0
        return D @ onehot

    def _gain_blocks(self, D, M, members, a, b):
        A, B = members[a], members[b]
        ga = M[A, b] - M[A, a]
        gb = M[B, a] - M[B, b]
        return ga[:, None] + gb[None, :] - 2.0 * D[np.ix_(A, B)]

    def best_swap(self, classes, sums):
        """Best cross-class swap ``(i, j, gain_key)`` or None if nothing improves."""
        members = [np.flatnonzero(classes == k + 1) for k in range(self.K)]
        best = None
        for a, b in itertools.combinations(range(self.K), 2):
            Gf = self._gain_blocks(self.D, sums[0], members, a, b)
            if self.P is None:
                flat = int(np.argmax(Gf))
                r, c = divmod(flat, Gf.shape[1])
                key = (0, 0, float(Gf[r, c]))
            else:
                Gq = -self._gain_blocks(self.Q, sums[2], members, a, b)
                Gp = self._gain_blocks(self.P, sums[1], members, a, b)
                cand = Gq == Gq.max()
                cand &= Gp == Gp[cand].max()
                masked = np.where(cand, Gf, -np.inf)
                flat = int(np.argmax(masked))
                r, c = divmod(flat, Gf.shape[1])
                key = (round(Gq[r, c]), round(Gp[r, c]), float(Gf[r, c]))
            if best is None or key > best[2]:
                best = (int(members[a][r]), int(members[b][c]), key)
        if best is None:
            return None
        gq, gp, gf = best[2]
        if (gq, gp) > (0, 0) or ((gq, gp) == (0, 0) and gf > self.tol):
            return best
        return None

    def run(self, classes: np.ndarray) -> np.ndarray:
        classes = classes.copy()
        mats = [self.D] if self.P is None else [self.D, self.P, self.Q]
        sums = [self._class_sums(m, classes, self.K) for m in mats]
        if self.P is None:
            sums += [None, None]
        while True:
            move = self.best_swap(classes, sums)
            if move is None:
                return classes
            i, j, _ = move
            a, b = classes[i] - 1, classes[j] - 1
            for m, s in zip(mats, sums):
                delta = m[:, j] - m[:, i]
                s[:, a] += delta
                s[:, b] -= delta
            classes[i], classes[j] = b + 1, a + 1


def local_search_ml(
    W: WeightedGraph, table, K: int, n: int, restarts: int = 10, seed: int = 0
) -> MLResult:
    """Multi-start best-improvement swap search for ``argmax T``.

    Restart ``r`` starts from a random balanced assignment keyed by
    ``(seed, r)``, so the result is a pure function of the inputs.
    """
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    if n * K != W.N:
        raise ValidationError(f"nK = {n * K} does not match graph size {W.N}")
    pw = PairWeights(W, table)
    search = _SwapSearch(pw, K)
    best_key, best = None, None
    for r in range(restarts):
        start = _random_balanced(rng.derive_trial_seed(seed, r), K, n)
        local = Assignment(search.run(start), K).canonical()
        key = pw.key(local.classes)
        # ties: keep the lexicographically smaller canonical assignment
        if best is None or key > best_key or (key == best_key and local.tolist() < best.tolist()):
            best_key, best = key, local
    return MLResult(best, key_to_score(best_key), "local_search", restarts)


def hamming_mod_perm(s1: Assignment, s2: Assignment, K: int | None = None) -> int:
    """Smallest number of disagreeing nodes over all relabellings of ``s1``."""
    if s1.N != s2.N:
        raise ValidationError("assignments differ in length")
    K = K or max(s1.K, s2.K)
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (s1.classes - 1, s2.classes - 1), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return int(s1.N - confusion[rows, cols].sum())


def is_exact_recovery(estimate: Assignment, truth: Assignment) -> bool:
    return hamming_mod_perm(estimate, truth) == 0


def swap_certificate(W: WeightedGraph, table, truth: Assignment):
    """Look for a cross-community swap that strictly beats the ground truth.

    For every pair of communities ``(A, B)`` and ``i in A``, ``j in B`` the
    swap gain is ``S(i, B\\{j}) + S(j, A\\{i}) - S(i, A\\{i}) - S(j, B\\{j})``
    with ``S(i, H)`` the summed weight from ``i`` to ``H``. Returns the
    0-based pair ``(i, j)`` with the largest gain if that gain is positive
    (beyond a small relative rounding allowance), otherwise ``None``.
    """
    _check_assignment(W, truth)
    pw = PairWeights(W, table)
    search = _SwapSearch(pw, truth.K)
    classes = truth.classes
    mats = [search.D] if search.P is None else [search.D, search.P, search.Q]
    sums = [search._class_sums(m, classes, truth.K) for m in mats]
    if search.P is None:
        sums += [None, None]
    move = search.best_swap(classes, sums)
    if move is None:
        return None
    return move[0], move[1]


def apply_swap(sigma: Assignment, i: int, j: int) -> Assignment:
    classes = sigma.classes.copy()
    classes[i], classes[j] = classes[j], classes[i]
    return Assignment(classes, sigma.K)
