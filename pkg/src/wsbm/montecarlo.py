"""Monte Carlo failure-rate experiments: trials, Wilson intervals, sweeps, CSV."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import rng
from .bounds import failure_bound, threshold_C
from .dist import ScaledFamily, edge_weights, renyi_half
from .errors import InfiniteDivergenceError, ValidationError
from .generate import (
    ModelSpec,
    censored_intensities,
    censored_model,
    generate_wsbm,
    scaled_model,
    submatrix_model,
)
from .ml import (
    EXACT_CLASS_CAP,
    apply_swap,
    exact_ml,
    hamming_mod_perm,
    local_search_ml,
    num_equivalence_classes,
    score_key,
    swap_certificate,
)

SOLVERS = ("exact", "local_search", "certificate_only")
WILSON_Z = 1.959963984540054  # two-sided 95% normal quantile
DEFAULT_TRIALS = 200
DEFAULT_RESTARTS = 20

CSV_HEADER = (
    "n,K,L,a,b,C,I,n_I_over_log_n,thm_bound,trials,failures,failure_rate,"
    "ci_low,ci_high,certificate_rate,solver,base_seed"
).split(",")


class TrialError(RuntimeError):
    """A single trial failed; the message names the trial index."""


@dataclass(frozen=True)
class TrialConfig:
    """One experimental setting.

    ``a``/``b`` are the colour intensities when the model came from a scaled or
    censored family; ``params`` keeps any other descriptive parameters
    (``mu``, ``p``, ...) for reporting.
    """

    spec: ModelSpec
    solver: str = "exact"
    trials: int = DEFAULT_TRIALS
    base_seed: int = 0
    restarts: int = DEFAULT_RESTARTS
    a: tuple[float, ...] | None = None
    b: tuple[float, ...] | None = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValidationError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValidationError(f"trials must be an integer >= 1, got {self.trials}")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.solver == "exact":
            classes = num_equivalence_classes(self.spec.K, self.spec.n)
            if classes > EXACT_CLASS_CAP:
                raise ValidationError(
                    f"exact solver needs {classes} enumerations (cap {EXACT_CLASS_CAP}); "
                    "use local_search or certificate_only"
                )

    @classmethod
    def from_family(cls, fam: ScaledFamily, K: int = 2, **kw) -> "TrialConfig":
        return cls(scaled_model(fam, K), a=fam.a, b=fam.b, **kw)

    @classmethod
    def from_json(cls, obj: dict, defaults: dict | None = None) -> "TrialConfig":
        """Build a config from a grid entry.

        Recognised model forms: ``{"a", "b"}`` (scaled family), ``{"p", "q1",
        "q2"}`` (censored), ``{"mu", "sigma"}`` (submatrix), or an explicit
        ``{"within", "between"}`` distribution pair. ``n`` is always required;
        ``K`` defaults to 2.
        """
        merged = dict(defaults or {})
        merged.update(obj)
        known = {
            "n", "K", "a", "b", "p", "q1", "q2", "mu", "sigma", "within", "between",
            "solver", "trials", "base_seed", "restarts",
        }
        unknown = set(merged) - known
        if unknown:
            raise ValidationError(f"unknown grid keys: {sorted(unknown)}")
        try:
            n = int(merged["n"])
            K = int(merged.get("K", 2))
            run = {
                "solver": merged.get("solver", "exact"),
                "trials": int(merged.get("trials", DEFAULT_TRIALS)),
                "base_seed": int(merged.get("base_seed", 0)),
                "restarts": int(merged.get("restarts", DEFAULT_RESTARTS)),
            }
            if "a" in merged or "b" in merged:
                return cls.from_family(ScaledFamily(merged["a"], merged["b"], n), K, **run)
            if "p" in merged:
                if K != 2:
                    raise ValidationError("the censored model has K = 2")
                p, q1, q2 = float(merged["p"]), float(merged["q1"]), float(merged["q2"])
                a, b = censored_intensities(n, p, q1, q2)
                return cls(
                    censored_model(n, p, q1, q2), a=tuple(a), b=tuple(b),
                    params={"p": p, "q1": q1, "q2": q2}, **run,
                )
            if "mu" in merged:
                mu, sigma = float(merged["mu"]), float(merged.get("sigma", 1.0))
                return cls(submatrix_model(n, K, mu, sigma), params={"mu": mu, "sigma": sigma}, **run)
            if "within" in merged:
                spec = ModelSpec.from_json(
                    {"K": K, "n": n, "within": merged["within"], "between": merged["between"]}
                )
                return cls(spec, **run)
        except KeyError as exc:
            raise ValidationError(f"grid entry missing key {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad grid entry {obj!r}: {exc}") from exc
        raise ValidationError(f"grid entry {obj!r} names no model (a/b, p/q1/q2, mu, within/between)")


@dataclass(frozen=True)
class TrialRecord:
    index: int
    recovered: bool | None
    certificate_found: bool
    hamming: int | None
    score_gap: float | None


def key_gap(k1: tuple, k2: tuple) -> float:
    """Signed score difference of two score keys; infinite when their infinity tiers differ."""
    if k1[:2] == k2[:2]:
        return 0.0 if k1[0] == 0 else k1[2] - k2[2]
    return math.inf if k1 > k2 else -math.inf


def trial_seed(config: TrialConfig, index: int) -> int:
    return rng.derive_trial_seed(config.base_seed, index)


def run_trial(config: TrialConfig, trial_index: int) -> TrialRecord:
    """Generate, solve and judge one instance; a pure function of its arguments.

    ``certificate_only`` skips the solver: ``recovered`` and ``hamming`` are
    ``None`` and ``score_gap`` is the gain of the certifying swap, if any.
    """
    try:
        seed = trial_seed(config, trial_index)
        spec = config.spec
        W, truth = generate_wsbm(spec, seed)
        table = edge_weights(spec.within, spec.between)
        cert = swap_certificate(W, table, truth)
        if config.solver == "certificate_only":
            gap = None
            if cert is not None:
                gap = key_gap(score_key(W, table, apply_swap(truth, *cert)), score_key(W, table, truth))
            return TrialRecord(trial_index, None, cert is not None, None, gap)
        if config.solver == "exact":
            result = exact_ml(W, table, spec.K, spec.n)
        else:
            result = local_search_ml(
                W, table, spec.K, spec.n, restarts=config.restarts, seed=rng.mix64(seed ^ 0x5EA4C4)
            )
        hamming = hamming_mod_perm(result.assignment, truth, spec.K)
        gap = key_gap(score_key(W, table, result.assignment), score_key(W, table, truth))
        return TrialRecord(trial_index, hamming == 0, cert is not None, hamming, gap)
    except TrialError:
        raise
    except Exception as exc:
        raise TrialError(f"trial {trial_index}: {exc}") from exc


def wilson_interval(failures: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials < 1:
        raise ValidationError("Wilson interval needs at least one trial")
    phat = failures / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (phat + z2 / (2 * trials)) / denom
    half = z / denom * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials))
    return max(0.0, min(phat, centre - half)), min(1.0, max(phat, centre + half))


@dataclass(frozen=True)
class FailureEstimate:
    failures: int
    certificates: int
    trials: int
    p_hat: float
    ci: tuple[float, float]

    @property
    def certificate_rate(self) -> float:
        return self.certificates / self.trials


def aggregate(records: Iterable[TrialRecord], solver: str) -> FailureEstimate:
    """Fold trial records into counts; order of ``records`` does not matter.

    In ``certificate_only`` mode a trial counts as a failure when a
    certificate was found, which lower-bounds the exact-ML failure count.
    """
    failures = certificates = trials = 0
    for rec in records:
        trials += 1
        certificates += rec.certificate_found
        if solver == "certificate_only":
            failures += rec.certificate_found
        else:
            failures += not rec.recovered
    return FailureEstimate(failures, certificates, trials, failures / trials, wilson_interval(failures, trials))


def worker_count(workers: int | None = None) -> int:
    """Worker cap: explicit argument, else ``WSBM_THREADS``, else the CPU count."""
    if workers is None:
        env = os.environ.get("WSBM_THREADS")
        if env:
            try:
                workers = int(env)
            except ValueError as exc:
                raise ValidationError(f"WSBM_THREADS must be an integer, got {env!r}") from exc
        else:
            workers = os.cpu_count() or 1
    return max(1, int(workers))


def _run_chunk(args):
    config, indices = args
    return [run_trial(config, i) for i in indices]


def run_trials(config: TrialConfig, workers: int | None = None) -> list[TrialRecord]:
    """All trial records of ``config`` in index order."""
    workers = worker_count(workers)
    indices = list(range(config.trials))
    if workers == 1 or config.trials == 1:
        return [run_trial(config, i) for i in indices]
    chunks = [(config, indices[k::workers]) for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        records = [rec for part in pool.map(_run_chunk, chunks) for rec in part]
    return sorted(records, key=lambda r: r.index)


def estimate_failure(config: TrialConfig, workers: int | None = None) -> FailureEstimate:
    """Failure probability estimate with a Wilson 95% interval."""
    return aggregate(run_trials(config, workers), config.solver)


@dataclass
class SweepRow:
    n: int
    K: int
    L: int | None
    a: tuple[float, ...] | None
    b: tuple[float, ...] | None
    C: float
    I: float
    n_I_over_log_n: float
    thm_bound: float
    trials: int
    failures: int | None
    failure_rate: float
    ci_low: float
    ci_high: float
    certificate_rate: float
    solver: str
    base_seed: int
    params: dict = field(default_factory=dict)
    error: str | None = None


def _discrete_intensities(spec: ModelSpec):
    scale = math.log(spec.n) / spec.n
    return (
        tuple(x / scale for x in spec.within.probs[1:]),
        tuple(x / scale for x in spec.between.probs[1:]),
    )


def describe(config: TrialConfig) -> dict:
    """Model-level columns of a sweep row: ``L, a, b, C, I, n_I_over_log_n, thm_bound``.

    For gaussian models there are no intensities and ``C`` is reported as
    ``n I / log n``, the quantity that plays the same role.
    """
    spec = config.spec
    a, b = config.a, config.b
    if a is None and spec.kind == "discrete" and spec.n >= 2:
        a, b = _discrete_intensities(spec)
    try:
        I = renyi_half(spec.within, spec.between)
    except InfiniteDivergenceError:
        I = math.inf
    ratio = spec.n * I / math.log(spec.n) if spec.n >= 2 else math.nan
    C = threshold_C(a, b) if a is not None else ratio
    bound = failure_bound(spec.n, spec.K, I) if spec.n >= 2 else math.nan
    return {"L": spec.L, "a": a, "b": b, "C": C, "I": I, "n_I_over_log_n": ratio, "thm_bound": bound}


def sweep_row(config: TrialConfig, workers: int | None = None) -> SweepRow:
    spec = config.spec
    base = dict(
        n=spec.n, K=spec.K, trials=config.trials, solver=config.solver,
        base_seed=config.base_seed, params=dict(config.params),
    )
    try:
        model = describe(config)
    except Exception as exc:  # recorded, the sweep goes on
        model = {"L": spec.L, "a": config.a, "b": config.b, "C": math.nan, "I": math.nan,
                 "n_I_over_log_n": math.nan, "thm_bound": math.nan}
        return SweepRow(**base, **model, failures=None, failure_rate=math.nan, ci_low=math.nan,
                        ci_high=math.nan, certificate_rate=math.nan, error=str(exc))
    try:
        est = estimate_failure(config, workers)
    except Exception as exc:
        return SweepRow(**base, **model, failures=None, failure_rate=math.nan, ci_low=math.nan,
                        ci_high=math.nan, certificate_rate=math.nan, error=str(exc))
    return SweepRow(
        **base, **model, failures=est.failures, failure_rate=est.p_hat, ci_low=est.ci[0],
        ci_high=est.ci[1], certificate_rate=est.certificate_rate,
    )


def sweep(grid: Sequence[TrialConfig], workers: int | None = None) -> list[SweepRow]:
    """One row per config, in grid order; failing rows carry ``error`` instead of aborting."""
    if not grid:
        raise ValidationError("sweep grid is empty")
    return [sweep_row(config, workers) for config in grid]


def load_grid(obj) -> list[TrialConfig]:
    """Parse a grid document: a list of entries or ``{"defaults": {...}, "configs": [...]}``."""
    if isinstance(obj, dict):
        defaults = obj.get("defaults", {})
        entries = obj.get("configs")
        extra = set(obj) - {"defaults", "configs"}
        if extra:
            raise ValidationError(f"unknown top-level grid keys: {sorted(extra)}")
    else:
        defaults, entries = {}, obj
    if not isinstance(entries, list) or not entries:
        raise ValidationError("grid must contain a non-empty list of configs")
    return [TrialConfig.from_json(e, defaults) for e in entries]


def fmt_float(x: float | None) -> str:
    """Nine significant digits, locale independent."""
    if x is None:
        return ""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".9g")


def _fmt_vec(v) -> str:
    return "" if v is None else ";".join(fmt_float(x) for x in v)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([
            r.n, r.K, "" if r.L is None else r.L, _fmt_vec(r.a), _fmt_vec(r.b),
            fmt_float(r.C), fmt_float(r.I), fmt_float(r.n_I_over_log_n), fmt_float(r.thm_bound),
            r.trials, "" if r.failures is None else r.failures, fmt_float(r.failure_rate),
            fmt_float(r.ci_low), fmt_float(r.ci_high), fmt_float(r.certificate_rate),
            r.solver, r.base_seed,
        ])
    return buf.getvalue()
