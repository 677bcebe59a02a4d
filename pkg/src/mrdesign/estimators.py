"""Point estimators computed from one realized draw."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .core import SMRD_TYPES, TYPE_ORDER, ExposureType, MRDError, TypeMatrix, as_type


class EmptyTypeError(MRDError):
    pass


class DesignMismatchError(MRDError):
    pass


ESTIMATE_COLUMNS = (
    "N_c", "N_ib", "N_is", "N_t",
    "Y_c", "Y_ib", "Y_is", "Y_t",
    "tau_direct", "tau_spill_B", "tau_spill_S", "tau", "theta",
)


@dataclass(frozen=True)
class TypeMeans:
    means: dict[ExposureType, float]
    counts: dict[ExposureType, int]

    def __getitem__(self, omega: ExposureType | str) -> float:
        return self.means[as_type(omega)]


@dataclass(frozen=True)
class SpilloverEstimates:
    tau_direct: float
    tau_spill_B: float
    tau_spill_S: float
    tau: float
    theta: float | None
    theta_note: str | None = None


def type_means(
    observed: np.ndarray,
    types: TypeMatrix,
    declared: Iterable[ExposureType | str] | None = None,
) -> TypeMeans:
    """Average observed outcome per type.

    ``declared`` defaults to the four SMRD types, plus ibs when present.
    A declared type with no cells raises EmptyTypeError.
    """
    Y = np.asarray(observed, dtype=float)
    if Y.shape != types.shape:
        raise MRDError(f"observed shape {Y.shape} != type matrix shape {types.shape}")
    if declared is None:
        declared = SMRD_TYPES + ((ExposureType.IBS,) if types.counts[ExposureType.IBS] else ())
    declared = tuple(as_type(w) for w in declared)
    flat = types.codes.ravel()
    n = np.bincount(flat, minlength=len(TYPE_ORDER))
    s = np.bincount(flat, weights=Y.ravel(), minlength=len(TYPE_ORDER))
    means, counts = {}, {}
    for k, w in enumerate(TYPE_ORDER):
        if w not in declared:
            continue
        if n[k] == 0:
            raise EmptyTypeError(f"type {w} has no cells")
        counts[w] = int(n[k])
        means[w] = float(s[k] / n[k])
    return TypeMeans(means, counts)


def spillover_estimates(means: TypeMeans | Mapping[ExposureType, float]) -> SpilloverEstimates:
    m = means.means if isinstance(means, TypeMeans) else {as_type(k): v for k, v in means.items()}
    missing = [w.value for w in SMRD_TYPES if w not in m]
    if missing:
        raise DesignMismatchError(f"spillover estimates need types {missing}")
    c, ib, is_, t = (m[w] for w in SMRD_TYPES)
    theta, note = None, None
    if c == 0:
        note = "lift undefined: control mean is zero"
    else:
        theta = (t - c) / c
    return SpilloverEstimates(
        tau_direct=t - ib - is_ + c,
        tau_spill_B=ib - c,
        tau_spill_S=is_ - c,
        tau=t - c,
        theta=theta,
        theta_note=note,
    )


def estimates_row(means: TypeMeans, est: SpilloverEstimates) -> list[float]:
    """Values in ESTIMATE_COLUMNS order; an undefined lift is NaN."""
    return (
        [means.counts[w] for w in SMRD_TYPES]
        + [means.means[w] for w in SMRD_TYPES]
        + [est.tau_direct, est.tau_spill_B, est.tau_spill_S, est.tau,
           math.nan if est.theta is None else est.theta]
    )


# Equilibrium design --------------------------------------------------------

EQUILIBRIUM_COMPARISONS = ("CC;S", "TC;S", "CT;S", "C.;B")


@dataclass(frozen=True)
class EquilibriumComparisons:
    averages: dict[str, float]
    counts: dict[str, int]
    indirect_promotion: float
    direct_control_promotion: float
    note: str = (
        "promotion levels are approximated by the buyer's treated fraction; "
        "no cutoff for a 'high' fraction is applied"
    )


def equilibrium_comparisons(observed: np.ndarray, labels: np.ndarray) -> EquilibriumComparisons:
    """Averages over the comparison sets and the two contrasts
    TC;S - CC;S (indirect, through promotions) and CT;S - CC;S (direct,
    under control promotions)."""
    Y = np.asarray(observed, dtype=float)
    lab = np.asarray(labels)
    avg, cnt = {}, {}
    for name in EQUILIBRIUM_COMPARISONS:
        mask = lab == name
        if not mask.any():
            raise EmptyTypeError(f"comparison set {name} is empty")
        cnt[name] = int(mask.sum())
        avg[name] = float(Y[mask].mean())
    return EquilibriumComparisons(
        averages=avg,
        counts=cnt,
        indirect_promotion=avg["TC;S"] - avg["CC;S"],
        direct_control_promotion=avg["CT;S"] - avg["CC;S"],
    )


# Synergistic design --------------------------------------------------------

@dataclass(frozen=True)
class SynergyResult:
    statistic: float
    detected: bool | None


def synergy_statistic(
    means: TypeMeans | Mapping[ExposureType | str, float], binary: bool = True
) -> SynergyResult:
    """Plug-in Y(ibs) - Y(c) - Y(is) - Y(ib).

    A positive value signals synergistic spillover when outcomes are binary;
    for other outcomes the detection flag is None.
    """
    m = means.means if isinstance(means, TypeMeans) else {as_type(k): v for k, v in means.items()}
    need = (ExposureType.IBS, ExposureType.C, ExposureType.IS, ExposureType.IB)
    if ExposureType.IBS not in m:
        raise DesignMismatchError("synergy statistic needs the ibs type")
    missing = [w.value for w in need if w not in m]
    if missing:
        raise DesignMismatchError(f"synergy statistic needs types {missing}")
    stat = m[ExposureType.IBS] - m[ExposureType.C] - m[ExposureType.IS] - m[ExposureType.IB]
    return SynergyResult(stat, bool(stat > 0) if binary else None)
