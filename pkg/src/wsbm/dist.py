"""Edge-weight distributions and the divergence functionals built on them.

Two kinds of distribution are supported: discrete label distributions over
``{0, ..., L}`` (label 0 conventionally means "no edge") and univariate
Gaussians. Everything here is immutable and side-effect free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import InfiniteDivergenceError, ValidationError

SUM_TOL = 1e-12
QUAD_TOL = 1e-10
QUAD_SPAN = 12.0

DISCRETE = "discrete"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class LabelDistribution:
    """Probability law of a single edge value.

    Use :meth:`discrete` or :meth:`gaussian` rather than the raw constructor.
    """

    kind: str
    probs: tuple[float, ...] = ()
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if self.kind == DISCRETE:
            if len(self.probs) < 1:
                raise ValidationError("discrete distribution needs at least one label")
            if any(not math.isfinite(x) or x < 0 for x in self.probs):
                raise ValidationError(f"probabilities must be finite and >= 0, got {self.probs}")
            total = math.fsum(self.probs)
            if abs(total - 1.0) > SUM_TOL:
                raise ValidationError(f"probabilities sum to {total!r}, expected 1")
        elif self.kind == GAUSSIAN:
            if not math.isfinite(self.mean):
                raise ValidationError(f"mean must be finite, got {self.mean}")
            if not (self.variance > 0 and math.isfinite(self.variance)):
                raise ValidationError(f"variance must be positive, got {self.variance}")
        else:
            raise ValidationError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def discrete(cls, probs: Sequence[float]) -> "LabelDistribution":
        return cls(DISCRETE, probs=tuple(float(x) for x in probs))

    @classmethod
    def gaussian(cls, mean: float, variance: float) -> "LabelDistribution":
        return cls(GAUSSIAN, mean=float(mean), variance=float(variance))

    @classmethod
    def point_mass(cls, label: int, size: int) -> "LabelDistribution":
        """Discrete distribution putting all mass on ``label`` out of ``size`` labels."""
        probs = [0.0] * size
        probs[label] = 1.0
        return cls.discrete(probs)

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE

    @property
    def num_labels(self) -> int:
        """Support size ``L + 1`` for discrete distributions."""
        if not self.is_discrete:
            raise ValidationError("gaussian distributions have no label set")
        return len(self.probs)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def logpdf(self, x: float) -> float:
        """Log density (gaussian only)."""
        if self.is_discrete:
            raise ValidationError("logpdf is only defined for gaussian distributions")
        return -0.5 * math.log(2 * math.pi * self.variance) - (x - self.mean) ** 2 / (2 * self.variance)

    def to_json(self) -> dict:
        if self.is_discrete:
            return {"kind": DISCRETE, "probs": list(self.probs)}
        return {"kind": GAUSSIAN, "mean": self.mean, "variance": self.variance}

    @classmethod
    def from_json(cls, obj: dict) -> "LabelDistribution":
        try:
            kind = obj["kind"]
            if kind == DISCRETE:
                return cls.discrete(obj["probs"])
            if kind == GAUSSIAN:
                return cls.gaussian(obj["mean"], obj["variance"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed distribution object {obj!r}") from exc
        raise ValidationError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True)
class ScaledFamily:
    """Sparse discrete family with label masses ``a_l * log(n) / n``.

    ``a`` and ``b`` hold the within- and between-community intensities of the
    colours ``1..L``; label 0 receives the remaining mass.
    """

    a: tuple[float, ...]
    b: tuple[float, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if len(self.a) < 1 or len(self.a) != len(self.b):
            raise ValidationError(
                f"a and b must be non-empty and of equal length, got {len(self.a)} and {len(self.b)}"
            )
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"community size n must be a positive integer, got {self.n}")
        if any(not math.isfinite(x) or x < 0 for x in self.a + self.b):
            raise ValidationError("intensities must be finite and non-negative")
        s = self.scale
        for name, vec in (("a", self.a), ("b", self.b)):
            total = math.fsum(vec)
            if total * s > 1.0 or any(x * s > 1.0 for x in vec):
                raise ValidationError(
                    f"{name}={list(vec)} at n={self.n}: total mass {total * s:.6g} exceeds 1"
                )

    @property
    def L(self) -> int:
        return len(self.a)

    @property
    def u(self) -> float:
        return math.fsum(self.a)

    @property
    def v(self) -> float:
        return math.fsum(self.b)

    @property
    def scale(self) -> float:
        """``log(n) / n``."""
        return math.log(self.n) / self.n

    def with_n(self, n: int) -> "ScaledFamily":
        return ScaledFamily(self.a, self.b, n)

    def to_json(self) -> dict:
        return {"a": list(self.a), "b": list(self.b), "n": self.n}


@dataclass(frozen=True)
class WeightTable:
    """Per-label log-likelihood ratios ``log(p(l) / q(l))``.

    Entries may be ``+inf`` (label only possible within communities) or
    ``-inf`` (label only possible between communities). These markers are
    kept as they are; see ``ml`` for how they are ordered.
    """

    weights: tuple[float, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, label: int) -> float:
        return self.weights[label]

    @property
    def all_finite(self) -> bool:
        return all(math.isfinite(w) for w in self.weights)

    @property
    def max_weight(self) -> float:
        """Largest entry; the finite upper bound on the weights when all entries are finite."""
        return max(self.weights)


def make_scaled_discrete(fam: ScaledFamily) -> tuple[LabelDistribution, LabelDistribution]:
    """Expand a scaled family into its within/between label distributions."""
    s = fam.scale
    p = [1.0 - fam.u * s] + [x * s for x in fam.a]
    q = [1.0 - fam.v * s] + [x * s for x in fam.b]
    # 1 - u*s can dip below zero by an ulp when u*s == 1 exactly.
    p[0] = max(p[0], 0.0)
    q[0] = max(q[0], 0.0)
    return LabelDistribution.discrete(p), LabelDistribution.discrete(q)


def _check_pair(p: LabelDistribution, q: LabelDistribution) -> None:
    if p.kind != q.kind:
        raise ValidationError(f"distribution kinds differ: {p.kind} vs {q.kind}")
    if p.is_discrete and len(p.probs) != len(q.probs):
        raise ValidationError(
            f"support sizes differ: {len(p.probs)} vs {len(q.probs)}"
        )


def _root_products(p: LabelDistribution, q: LabelDistribution) -> list[float]:
    # sqrt(p)*sqrt(q) rather than sqrt(p*q): no underflow for tiny masses
    return [math.sqrt(x) * math.sqrt(y) for x, y in zip(p.probs, q.probs) if x > 0 and y > 0]


def _gaussian_log_bc(p: LabelDistribution, q: LabelDistribution) -> float:
    avg_var = 0.5 * (p.variance + q.variance)
    gap = p.mean - q.mean
    return 0.5 * math.log(math.sqrt(p.variance * q.variance) / avg_var) - gap * gap / (8.0 * avg_var)


def bhattacharyya(p: LabelDistribution, q: LabelDistribution) -> float:
    """Bhattacharyya coefficient ``sum_l sqrt(p(l) q(l))`` (or its integral)."""
    _check_pair(p, q)
    if p.is_discrete:
        return min(math.fsum(_root_products(p, q)), 1.0)
    return math.exp(_gaussian_log_bc(p, q))


def renyi_half(p: LabelDistribution, q: LabelDistribution) -> float:
    """Renyi divergence of order 1/2 in nats, ``-2 log bhattacharyya(p, q)``.

    Raises:
        InfiniteDivergenceError: if the supports are disjoint.
    """
    _check_pair(p, q)
    if not p.is_discrete:
        return max(-2.0 * _gaussian_log_bc(p, q), 0.0)
    roots = _root_products(p, q)
    if not roots:
        raise InfiniteDivergenceError("distributions have disjoint support")
    # 1 - BC as half the squared Hellinger sum: exact zero for p == q and no
    # cancellation when BC is close to 1
    gap = 0.5 * math.fsum((math.sqrt(x) - math.sqrt(y)) ** 2 for x, y in zip(p.probs, q.probs))
    if gap >= 1.0:
        raise InfiniteDivergenceError("bhattacharyya coefficient underflowed to zero")
    return max(-2.0 * math.log1p(-gap), 0.0)


def adaptive_simpson(
    f: Callable[[float], float], lo: float, hi: float, tol: float = QUAD_TOL, max_depth: int = 50
) -> float:
    """Adaptive Simpson quadrature with Richardson correction.

    Uses an explicit stack; the tolerance is split between halves at every level.
    """
    def simpson(a, fa, b, fb):
        m = 0.5 * (a + b)
        fm = f(m)
        return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb = f(lo), f(hi)
    m, fm, whole = simpson(lo, fa, hi, fb)
    stack = [(lo, fa, hi, fb, m, fm, whole, tol, 0)]
    pieces = []
    while stack:
        a, fa, b, fb, m, fm, whole, eps, depth = stack.pop()
        lm, flm, left = simpson(a, fa, m, fm)
        rm, frm, right = simpson(m, fm, b, fb)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            pieces.append(left + right + delta / 15.0)
        else:
            stack.append((a, fa, m, fm, lm, flm, left, eps / 2, depth + 1))
            stack.append((m, fm, b, fb, rm, frm, right, eps / 2, depth + 1))
    return math.fsum(pieces)


def bhattacharyya_quadrature(p: LabelDistribution, q: LabelDistribution, tol: float = QUAD_TOL) -> float:
    """Numerically integrate ``sqrt(p(x) q(x))`` for two gaussians.

    The window is ``[min mean - 12 sd_max, max mean + 12 sd_max]``. It is cut
    into a few fixed panels first so that a narrow peak cannot be skipped by
    the very first Simpson estimate.
    """
    _check_pair(p, q)
    if p.is_discrete:
        raise ValidationError("quadrature applies to gaussian distributions only")
    sd = max(p.std, q.std)
    lo = min(p.mean, q.mean) - QUAD_SPAN * sd
    hi = max(p.mean, q.mean) + QUAD_SPAN * sd

    def integrand(x):
        return math.exp(0.5 * (p.logpdf(x) + q.logpdf(x)))

    panels = 32
    edges = [lo + (hi - lo) * k / panels for k in range(panels + 1)]
    return math.fsum(
        adaptive_simpson(integrand, edges[k], edges[k + 1], tol / panels) for k in range(panels)
    )


def renyi_half_quadrature(p: LabelDistribution, q: LabelDistribution) -> float:
    """Gaussian Renyi-1/2 divergence from numeric quadrature (independent of the closed form)."""
    return -2.0 * math.log(bhattacharyya_quadrature(p, q))


def sqrt_gap_sum(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise ValidationError(f"length mismatch: {len(a)} vs {len(b)}")
    if any(x < 0 for x in list(a) + list(b)):
        raise ValidationError("intensities must be non-negative")
    return math.fsum((math.sqrt(x) - math.sqrt(y)) ** 2 for x, y in zip(a, b))


def renyi_asymptotic(fam: ScaledFamily) -> float:
    """First-order term ``C log(n)/n`` of the divergence of a scaled family."""
    return sqrt_gap_sum(fam.a, fam.b) * fam.scale


def llr_table(p: LabelDistribution, q: LabelDistribution) -> WeightTable:
    _check_pair(p, q)
    if not p.is_discrete:
        raise ValidationError("llr_table needs discrete distributions")
    weights = []
    for x, y in zip(p.probs, q.probs):
        if x > 0 and y > 0:
            weights.append(math.log(x) - math.log(y))
        elif x > 0:
            weights.append(math.inf)
        elif y > 0:
            weights.append(-math.inf)
        else:
            weights.append(0.0)
    return WeightTable(tuple(weights))


@dataclass(frozen=True)
class GaussianWeight:
    """Per-edge log-likelihood ratio ``x -> c0 + c1 x + c2 x**2`` for gaussian pairs.

    Plays the role of :class:`WeightTable` when edge values are continuous.
    """

    c0: float
    c1: float
    c2: float

    def __call__(self, x):
        return self.c0 + x * (self.c1 + self.c2 * x)


def gaussian_llr(p: LabelDistribution, q: LabelDistribution) -> GaussianWeight:
    _check_pair(p, q)
    if p.is_discrete:
        raise ValidationError("gaussian_llr needs gaussian distributions")
    c2 = 0.5 / q.variance - 0.5 / p.variance
    c1 = p.mean / p.variance - q.mean / q.variance
    c0 = (
        0.5 * math.log(q.variance / p.variance)
        - p.mean ** 2 / (2 * p.variance)
        + q.mean ** 2 / (2 * q.variance)
    )
    return GaussianWeight(c0, c1, c2)


def edge_weights(p: LabelDistribution, q: LabelDistribution):
    """Log-likelihood-ratio weighting for either distribution kind."""
    return llr_table(p, q) if p.is_discrete else gaussian_llr(p, q)


def _logsumexp(xs: Sequence[float]) -> float:
    top = max(xs)
    return top + math.log(math.fsum(math.exp(x - top) for x in xs))


def mgf(p: LabelDistribution, q: LabelDistribution, t: float) -> float:
    """Moment generating function of ``d(Y) - d(X)`` with ``Y ~ q``, ``X ~ p``.

    ``M(t) = (sum (p/q)^t q) * (sum (p/q)^-t p)``, evaluated in log space.
    Requires mutual absolute continuity and ``0 < t < 1``.
    """
    _check_pair(p, q)
    if not p.is_discrete:
        raise ValidationError("mgf is implemented for discrete distributions")
    if not 0.0 < t < 1.0:
        raise ValidationError(f"t must lie in (0, 1), got {t}")
    logs = []
    for label, (x, y) in enumerate(zip(p.probs, q.probs)):
        if (x > 0) != (y > 0):
            raise ValidationError(
                f"label {label} has mass in only one distribution; absolute continuity required"
            )
        if x > 0:
            logs.append((math.log(x), math.log(y)))
    first = _logsumexp([t * lp + (1 - t) * lq for lp, lq in logs])
    second = _logsumexp([(1 - t) * lp + t * lq for lp, lq in logs])
    return math.exp(first + second)
