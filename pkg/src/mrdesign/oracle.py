"""Brute-force ground truth by exhaustive enumeration of equiprobable
assignments, plus a seeded Monte-Carlo counterpart with jackknife errors."""

from __future__ import annotations

import functools
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .core import (
    SMRD_TYPES,
    TYPE_CODE,
    AxisAssignments,
    ExposureType,
    MRDError,
    PopulationDims,
    TypeMatrix,
    classify_cells,
    stream_rng,
)
from .designs import DesignSpec, draw
from .estimators import spillover_estimates, type_means
from .outcomes import PotentialOutcomeBank, realize
from .variance import EFFECTS, sigma_hat, spillover_variance_bounds


class SupportTooLargeError(MRDError):
    pass


Statistic = Callable[[np.ndarray, TypeMatrix, PopulationDims], float]


def _mean_stat(w: ExposureType) -> Statistic:
    def f(Y, types, dims):
        mask = types.mask(w)
        return float(Y[mask].mean())
    return f


def _effect_stat(name: str) -> Statistic:
    def f(Y, types, dims):
        return float(getattr(spillover_estimates(type_means(Y, types)), name))
    return f


def _sigma_stat(w: ExposureType) -> Statistic:
    def f(Y, types, dims):
        return sigma_hat(Y, types, dims, w).value
    return f


def _bound_stat(effect: str, side: str, cross_weight: float = 2.0) -> Statistic:
    def f(Y, types, dims):
        sig = {w: sigma_hat(Y, types, dims, w).value for w in SMRD_TYPES}
        b = spillover_variance_bounds(sig, cross_weight)[effect]
        return b.lo if side == "lo" else b.hi
    return f


STATISTICS: dict[str, Statistic] = {}
for _w in SMRD_TYPES:
    STATISTICS[f"Y_{_w.value}"] = _mean_stat(_w)
    STATISTICS[f"sigma_{_w.value}"] = _sigma_stat(_w)
for _name in EFFECTS:
    STATISTICS[_name] = _effect_stat(_name)
    STATISTICS[f"lo_{_name}"] = _bound_stat(_name, "lo")
    STATISTICS[f"hi_{_name}"] = _bound_stat(_name, "hi")


def resolve_statistics(statistics: Sequence[str | Statistic]) -> list[tuple[str, Statistic]]:
    out = []
    for s in statistics:
        if callable(s):
            out.append((getattr(s, "__name__", "custom"), s))
        elif s in STATISTICS:
            out.append((s, STATISTICS[s]))
        else:
            raise MRDError(f"unknown statistic {s!r}")
    return out


@dataclass(frozen=True)
class EnumerationResult:
    support_size: int
    names: tuple[str, ...]
    mean: dict[str, float]
    var: dict[str, float]
    cov: np.ndarray
    table: np.ndarray | None = None
    se_mean: dict[str, float] | None = None
    se_var: dict[str, float] | None = None

    def covariance(self, a: str, b: str) -> float:
        return float(self.cov[self.names.index(a), self.names.index(b)])


# Support enumeration ---------------------------------------------------------

def _smrd_support_size(d: PopulationDims) -> int:
    return math.comb(d.I, d.I_T) * math.comb(d.J, d.J_T)


def support_size(spec: DesignSpec) -> int:
    d = spec.dims
    if spec.kind.startswith("SMRD"):
        return _smrd_support_size(d)
    if spec.kind == "buyerSRD":
        return math.comb(d.I, d.I_T)
    if spec.kind == "sellerSRD":
        return math.comb(d.J, d.J_T)
    if spec.kind == "CRMD":
        return math.comb(d.J, d.J_T) ** d.I  # candidates scanned, not the support
    raise MRDError(f"enumeration not available for design kind {spec.kind!r}")


def _indicator(n: int, idx: Sequence[int]) -> np.ndarray:
    v = np.zeros(n, dtype=np.int64)
    v[list(idx)] = 1
    return v


def _binary_types(W: np.ndarray) -> TypeMatrix:
    return TypeMatrix(np.where(W, TYPE_CODE[ExposureType.T], TYPE_CODE[ExposureType.C]))


def iter_supports(spec: DesignSpec) -> Iterator[TypeMatrix]:
    """Every equiprobable type matrix of a design, in lexicographic subset order."""
    d = spec.dims
    if spec.kind.startswith("SMRD"):
        rule = spec.kind.split("-", 1)[1]
        d.require_interior()
        for rows in itertools.combinations(range(d.I), d.I_T):
            b = _indicator(d.I, rows)
            for cols in itertools.combinations(range(d.J), d.J_T):
                yield classify_cells(AxisAssignments(b, _indicator(d.J, cols)), rule)
    elif spec.kind == "buyerSRD":
        for rows in itertools.combinations(range(d.I), d.I_T):
            yield _binary_types(np.repeat(_indicator(d.I, rows)[:, None], d.J, 1).astype(bool))
    elif spec.kind == "sellerSRD":
        for cols in itertools.combinations(range(d.J), d.J_T):
            yield _binary_types(np.repeat(_indicator(d.J, cols)[None, :], d.I, 0).astype(bool))
    elif spec.kind == "CRMD":
        c = d.I_T
        for choice in itertools.product(itertools.combinations(range(d.J), d.J_T), repeat=d.I):
            W = np.zeros((d.I, d.J), dtype=bool)
            for i, cols in enumerate(choice):
                W[i, list(cols)] = True
            if (W.sum(axis=0) == c).all():
                yield _binary_types(W)
    else:
        raise MRDError(f"enumeration not available for design kind {spec.kind!r}")


CACHE_LIMIT = 20_000


@functools.lru_cache(maxsize=16)
def _support_list(kind: str, dims: PopulationDims) -> tuple[TypeMatrix, ...]:
    return tuple(iter_supports(DesignSpec(kind, dims)))


def supports(spec: DesignSpec) -> Iterator[TypeMatrix]:
    """iter_supports, memoised for small designs (supports do not depend on params)."""
    if support_size(spec) <= CACHE_LIMIT and spec.kind != "CRMD":
        return iter(_support_list(spec.kind, spec.dims))
    return iter_supports(spec)


# Moment accumulation ---------------------------------------------------------

@dataclass
class _Moments:
    n: int
    mean: np.ndarray
    m2: np.ndarray  # centred cross-product sums

    @classmethod
    def of(cls, x: np.ndarray) -> "_Moments":
        mu = x.mean(axis=0)
        z = x - mu
        return cls(x.shape[0], mu, z.T @ z)

    def merge(self, other: "_Moments") -> "_Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + np.outer(delta, delta) * (self.n * other.n / n)
        return _Moments(n, mean, m2)


def _tree_merge(parts: list[_Moments]) -> _Moments:
    while len(parts) > 1:
        nxt = [parts[k].merge(parts[k + 1]) for k in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _evaluate(bank, types_list, stats, dims) -> np.ndarray:
    rows = []
    for types in types_list:
        Y = realize(bank, types)
        rows.append([f(Y, types, dims) for _, f in stats])
    return np.array(rows, dtype=float).reshape(len(types_list), len(stats))


def enumerate_design_moments(
    spec: DesignSpec,
    bank: PotentialOutcomeBank,
    statistics: Sequence[str | Statistic],
    cap: int = 10**7,
    keep_table: bool = False,
    threads: int = 1,
    chunk: int = 256,
) -> EnumerationResult:
    """Exact mean, variance and covariance of each statistic over the
    uniform design distribution.

    Supports are evaluated in fixed-size chunks whose moments are merged in
    a fixed binary tree, so results do not depend on ``threads``.
    """
    size = support_size(spec)
    if size > cap:
        raise SupportTooLargeError(
            f"support size {size} exceeds cap {cap}; use montecarlo_design_moments"
        )
    stats = resolve_statistics(statistics)
    dims = spec.dims
    chunks: list[list[TypeMatrix]] = []
    cur: list[TypeMatrix] = []
    for t in supports(spec):
        cur.append(t)
        if len(cur) == chunk:
            chunks.append(cur)
            cur = []
    if cur:
        chunks.append(cur)
    if not chunks:
        raise MRDError("design has an empty support")

    def work(ch):
        return _evaluate(bank, ch, stats, dims)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            tables = list(ex.map(work, chunks))
    else:
        tables = [work(ch) for ch in chunks]
    mom = _tree_merge([_Moments.of(t) for t in tables])
    names = tuple(n for n, _ in stats)
    cov = mom.m2 / mom.n
    return EnumerationResult(
        support_size=mom.n,
        names=names,
        mean={n: float(mom.mean[k]) for k, n in enumerate(names)},
        var={n: float(cov[k, k]) for k, n in enumerate(names)},
        cov=cov,
        table=np.vstack(tables) if keep_table else None,
    )


def jackknife_se(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jackknife standard errors of the column means and sample variances."""
    n = x.shape[0]
    mu = x.mean(axis=0)
    dev = x - mu
    ss = (dev**2).sum(axis=0)
    loo_mean = (x.sum(axis=0) - x) / (n - 1)
    se_mean = np.sqrt((n - 1) / n * ((loo_mean - loo_mean.mean(axis=0)) ** 2).sum(axis=0))
    if n < 3:
        return se_mean, np.full(x.shape[1], np.nan)
    loo_ss = ss - dev**2 * n / (n - 1)
    loo_var = loo_ss / (n - 2)
    se_var = np.sqrt((n - 1) / n * ((loo_var - loo_var.mean(axis=0)) ** 2).sum(axis=0))
    return se_mean, se_var


def montecarlo_design_moments(
    spec: DesignSpec,
    bank: PotentialOutcomeBank,
    statistics: Sequence[str | Statistic],
    replicas: int,
    seed: int,
    threads: int = 1,
) -> EnumerationResult:
    """Monte-Carlo estimate of the same moments; replica r uses its own
    stream derived from ``seed`` so the result ignores ``threads``."""
    if replicas < 2:
        raise MRDError("Monte-Carlo moments need at least 2 replicas")
    stats = resolve_statistics(statistics)
    dims = spec.dims

    def one(r: int) -> list[float]:
        d = draw(spec, stream_rng(seed, "oracle", r))
        types = d.types if d.types is not None else _binary_types(d.W.cells)
        Y = realize(bank, types)
        return [f(Y, types, dims) for _, f in stats]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, range(replicas)))
    else:
        rows = [one(r) for r in range(replicas)]
    x = np.array(rows, dtype=float)
    names = tuple(n for n, _ in stats)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    se_m, se_v = jackknife_se(x)
    return EnumerationResult(
        support_size=replicas,
        names=names,
        mean={n: float(x[:, k].mean()) for k, n in enumerate(names)},
        var={n: float(cov[k, k]) for k, n in enumerate(names)},
        cov=cov,
        table=x,
        se_mean={n: float(se_m[k]) for k, n in enumerate(names)},
        se_var={n: float(se_v[k]) for k, n in enumerate(names)},
    )
