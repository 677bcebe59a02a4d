"""Finite-population moments of SMRD type means, the unbiased variance
estimator Sigma-hat, delta-method lift variance and Cauchy-Schwarz bounds.

Conventions: a type omega sits on the selected (T) or non-selected (C) side
of each axis; t = (T, T), ib = (T, C), is = (C, T), c = (C, C). With
deviations split into buyer, seller and interaction parts, the covariance of
two type means is

    C = k_B * X_B + k_S * X_S + k_B * k_S * X_BS

where X_* are cross-products of the deviations with the usual finite
population denominators and k_B is I_C/(I_T I) when both types are on the
T side, I_T/(I_C I) when both are on the C side and -1/I otherwise
(k_S likewise on the seller axis).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    SMRD_TYPES,
    TYPE_SIDES,
    ExposureType,
    MRDError,
    PopulationDims,
    TypeMatrix,
    as_type,
)
from .outcomes import PotentialOutcomeBank, UndefinedLiftError


class InsufficientReplicationError(MRDError):
    pass


C_, IB, IS, T_ = SMRD_TYPES

# Effect coefficients over (c, ib, is, t).
EFFECTS: dict[str, tuple[float, float, float, float]] = {
    "tau_direct": (1.0, -1.0, -1.0, 1.0),
    "tau_spill_B": (-1.0, 1.0, 0.0, 0.0),
    "tau_spill_S": (-1.0, 0.0, 1.0, 0.0),
    "tau": (-1.0, 0.0, 0.0, 1.0),
}


def _pair(a: ExposureType, b: ExposureType) -> tuple[ExposureType, ExposureType]:
    order = {w: k for k, w in enumerate(SMRD_TYPES)}
    return (a, b) if order[a] <= order[b] else (b, a)


PAIRS = tuple(itertools.combinations(SMRD_TYPES, 2))


@dataclass(frozen=True)
class DeviationDecomposition:
    """Y_ij(w) = grand(w) + buyer_i(w) + seller_j(w) + inter_ij(w)."""

    types: tuple[ExposureType, ...]
    grand: np.ndarray
    buyer: np.ndarray
    seller: np.ndarray
    inter: np.ndarray

    def index(self, omega: ExposureType | str) -> int:
        return self.types.index(as_type(omega))

    def reconstruct(self) -> np.ndarray:
        return (
            self.grand[:, None, None]
            + self.buyer[:, :, None]
            + self.seller[:, None, :]
            + self.inter
        )


def decompose(bank: PotentialOutcomeBank) -> DeviationDecomposition:
    Y = bank.values
    grand = Y.mean(axis=(1, 2))
    rows = Y.mean(axis=2)
    cols = Y.mean(axis=1)
    buyer = rows - grand[:, None]
    seller = cols - grand[:, None]
    inter = Y - rows[:, :, None] - cols[:, None, :] + grand[:, None, None]
    return DeviationDecomposition(bank.types, grand, buyer, seller, inter)


@dataclass(frozen=True)
class VarianceComponents:
    """S^2 components per type and per unordered pair of types.

    Pair components are the components of the difference Y(w) - Y(w').
    """

    I: int
    J: int
    B: dict[ExposureType, float]
    S: dict[ExposureType, float]
    BS: dict[ExposureType, float]
    pair_B: dict[tuple[ExposureType, ExposureType], float] = field(default_factory=dict)
    pair_S: dict[tuple[ExposureType, ExposureType], float] = field(default_factory=dict)
    pair_BS: dict[tuple[ExposureType, ExposureType], float] = field(default_factory=dict)

    def cross(self, a: ExposureType, b: ExposureType) -> tuple[float, float, float]:
        """Cross-products of deviations, recovered by polarization."""
        if a == b:
            return self.B[a], self.S[a], self.BS[a]
        p = _pair(a, b)
        return (
            0.5 * (self.B[a] + self.B[b] - self.pair_B[p]),
            0.5 * (self.S[a] + self.S[b] - self.pair_S[p]),
            0.5 * (self.BS[a] + self.BS[b] - self.pair_BS[p]),
        )


def population_variance_components(decomp: DeviationDecomposition, I: int, J: int) -> VarianceComponents:
    if I < 2 or J < 2:
        raise MRDError(f"variance components need I, J >= 2, got I={I}, J={J}")
    d = decomp

    def comps(b, s, e):
        return (
            float((b**2).sum() / (I - 1)),
            float((s**2).sum() / (J - 1)),
            float((e**2).sum() / ((I - 1) * (J - 1))),
        )

    B, S, BS = {}, {}, {}
    for k, w in enumerate(d.types):
        B[w], S[w], BS[w] = comps(d.buyer[k], d.seller[k], d.inter[k])
    pB, pS, pBS = {}, {}, {}
    for a, b in itertools.combinations(d.types, 2):
        ka, kb = d.index(a), d.index(b)
        p = _pair(a, b) if a in SMRD_TYPES and b in SMRD_TYPES else (a, b)
        pB[p], pS[p], pBS[p] = comps(
            d.buyer[ka] - d.buyer[kb], d.seller[ka] - d.seller[kb], d.inter[ka] - d.inter[kb]
        )
    return VarianceComponents(I, J, B, S, BS, pB, pS, pBS)


def axis_coefficient(side_a: int, side_b: int, n: int, n_T: int) -> float:
    """Covariance weight on one axis for two types with the given sides."""
    n_C = n - n_T
    if side_a and side_b:
        return n_C / (n_T * n)
    if not side_a and not side_b:
        return n_T / (n_C * n)
    return -1.0 / n


@dataclass(frozen=True)
class MomentReport:
    """Exact variances and covariances of the type means and effects."""

    V: dict[ExposureType, float]
    C: dict[tuple[ExposureType, ExposureType], float]
    matrix: np.ndarray
    effects: dict[str, float]
    lift: float | None = None

    @property
    def V_tau(self) -> float:
        return self.effects["tau"]


def effect_variance(matrix: np.ndarray, coef: tuple[float, ...]) -> float:
    a = np.asarray(coef, dtype=float)
    return float(a @ matrix @ a)


def closed_form_moments(components: VarianceComponents, dims: PopulationDims) -> MomentReport:
    """V(Y_w) and C(Y_w, Y_w') for the four SMRD type means; effect
    variances follow from V(aX + bY) = a^2 V(X) + b^2 V(Y) + 2ab C(X, Y)."""
    dims.require_interior()
    I, J = dims.I, dims.J
    M = np.zeros((4, 4))
    for ka, a in enumerate(SMRD_TYPES):
        for kb, b in enumerate(SMRD_TYPES):
            if kb < ka:
                continue
            (ba, sa), (bb, sb) = TYPE_SIDES[a], TYPE_SIDES[b]
            kB = axis_coefficient(ba, bb, I, dims.I_T)
            kS = axis_coefficient(sa, sb, J, dims.J_T)
            xB, xS, xBS = components.cross(a, b)
            M[ka, kb] = M[kb, ka] = kB * xB + kS * xS + kB * kS * xBS
    V = {w: float(M[k, k]) for k, w in enumerate(SMRD_TYPES)}
    C = {
        (a, b): float(M[SMRD_TYPES.index(a), SMRD_TYPES.index(b)]) for a, b in PAIRS
    }
    effects = {name: effect_variance(M, coef) for name, coef in EFFECTS.items()}
    return MomentReport(V=V, C=C, matrix=M, effects=effects)


def tau_variance_expansion(components: VarianceComponents, dims: PopulationDims) -> float:
    """V(Y_t - Y_c) written term by term in the t, c and (t, c) components.

    This is an independent path to ``closed_form_moments(...).effects['tau']``.
    """
    I, J, IT, JT, IC, JC = dims.I, dims.J, dims.I_T, dims.J_T, dims.I_C, dims.J_C
    c = components
    p = _pair(C_, T_)
    return (
        c.B[T_] / IT + c.B[C_] / IC - c.pair_B[p] / I
        + c.S[T_] / JT + c.S[C_] / JC - c.pair_S[p] / J
        + (IC * JC - IT * JT) / (IT * I * JT * J) * c.BS[T_]
        + (IT * JT - IC * JC) / (IC * I * JC * J) * c.BS[C_]
        + c.pair_BS[p] / (I * J)
    )


def bank_moments(bank: PotentialOutcomeBank, dims: PopulationDims) -> MomentReport:
    """Closed-form moments straight from a bank, with the lift variance
    when the control mean is non-zero."""
    d = decompose(bank)
    comps = population_variance_components(d, dims.I, dims.J)
    rep = closed_form_moments(comps, dims)
    means = {w: float(bank[w].mean()) for w in SMRD_TYPES}
    try:
        lv = lift_variance(rep, means)
    except UndefinedLiftError:
        lv = None
    return MomentReport(rep.V, rep.C, rep.matrix, rep.effects, lv)


def lift_variance(moments: MomentReport, means: Mapping[ExposureType, float]) -> float:
    """Delta-method approximation to V((Y_t - Y_c) / Y_c)."""
    c, t = means[C_], means[T_]
    if c == 0:
        raise UndefinedLiftError("average control outcome is zero")
    return (
        c**2 * moments.V[T_] + t**2 * moments.V[C_] - 2 * c * t * moments.C[(C_, T_)]
    ) / c**4


# Variance estimation -------------------------------------------------------

@dataclass(frozen=True)
class SigmaHat:
    """Unbiased estimate of V(Y_w) with its ingredients."""

    omega: ExposureType
    value: float
    alpha_B: float
    alpha_S: float
    b_B: float
    b_S: float
    I_w: int
    J_w: int


def type_block(types: TypeMatrix, omega: ExposureType | str) -> tuple[np.ndarray, np.ndarray]:
    """Occupied rows and columns of a type; the type must fill their product."""
    mask = types.mask(omega)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if mask.sum() != rows.size * cols.size:
        raise MRDError(f"type {as_type(omega)} does not occupy a rectangular block")
    return rows, cols


def sigma_hat_block(Z: np.ndarray, I: int, J: int, omega: ExposureType = T_) -> SigmaHat:
    """Sigma-hat from the I_w x J_w block of observed outcomes of one type.

    alpha_B^2 = (I - I_w)/((I - 1) I_w) and alpha_S^2 likewise; Gamma is the
    alpha-weighted sum of the between-row, between-column and interaction
    dispersions (divisors I_w, J_w, I_w J_w); b_B and b_S average the
    unbiased within-row and within-column estimates of the sampling
    variance of a row or column mean.
    """
    m, n = Z.shape
    if m < 2 or n < 2:
        raise InsufficientReplicationError(
            f"type {omega} needs at least 2 rows and 2 columns, got {m} x {n}"
        )
    r = Z.mean(axis=1)
    c = Z.mean(axis=0)
    g = Z.mean()
    within_r = Z - r[:, None]
    within_c = Z - c[None, :]
    resid = within_r - c[None, :] + g
    s_B = float(((r - g) ** 2).sum() / m)
    s_S = float(((c - g) ** 2).sum() / n)
    s_BS = float((resid**2).sum() / (m * n))
    x = (I - m) / ((I - 1) * m)
    y = (J - n) / ((J - 1) * n)
    gamma = x * s_B + y * s_S + x * y * s_BS
    b_B = float(((J - n) / (n * J) * (within_r**2).sum(axis=1) / (n - 1)).mean())
    b_S = float(((I - m) / (m * I) * (within_c**2).sum(axis=0) / (m - 1)).mean())
    value = gamma / ((1 - x) * (1 - y)) - x / (1 - x) * b_B - y / (1 - y) * b_S
    return SigmaHat(omega, value, math.sqrt(x), math.sqrt(y), b_B, b_S, m, n)


def sigma_hat(
    observed: np.ndarray, types: TypeMatrix, dims: PopulationDims, omega: ExposureType | str
) -> SigmaHat:
    w = as_type(omega)
    rows, cols = type_block(types, w)
    if rows.size == 0:
        raise InsufficientReplicationError(f"type {w} has no cells")
    return sigma_hat_block(np.asarray(observed)[np.ix_(rows, cols)], dims.I, dims.J, w)


@dataclass(frozen=True)
class Bounds:
    lo: float
    hi: float
    clamped: bool


@dataclass(frozen=True)
class VarianceEstimate:
    sigma: dict[ExposureType, SigmaHat]
    bounds: dict[str, Bounds]


def spillover_variance_bounds(
    sigma: Mapping[ExposureType | str, float], cross_weight: float = 2.0
) -> dict[str, Bounds]:
    """Lower and upper variance bounds for every effect.

    For an effect sum_k a_k Y_k the variance is sum_k a_k^2 V_k plus
    2 a_k a_l C_kl over pairs. Each unknown covariance is bounded by
    Cauchy-Schwarz, |C_kl| <= sqrt(V_k V_l), with the sign that lowers or
    raises the total. The linear part uses the raw estimates; the square
    roots use estimates clamped at zero, and ``clamped`` records whether a
    clamp was needed. ``cross_weight=1`` gives the narrower form
    sum -/+ sqrt(S_a S_b) for two-term effects.
    """
    raw = {as_type(k): float(v) for k, v in sigma.items()}
    pos = {k: max(v, 0.0) for k, v in raw.items()}
    out = {}
    for name, coef in EFFECTS.items():
        terms = [(w, a) for w, a in zip(SMRD_TYPES, coef) if a != 0]
        base = sum(a * a * raw[w] for w, a in terms)
        cross = sum(
            abs(a1 * a2) * math.sqrt(pos[w1] * pos[w2])
            for (w1, a1), (w2, a2) in itertools.combinations(terms, 2)
        )
        out[name] = Bounds(
            base - cross_weight * cross,
            base + cross_weight * cross,
            any(raw[w] < 0 for w, _ in terms),
        )
    return out


def estimate_variances(
    observed: np.ndarray, types: TypeMatrix, dims: PopulationDims, cross_weight: float = 2.0
) -> VarianceEstimate:
    sig = {w: sigma_hat(observed, types, dims, w) for w in SMRD_TYPES}
    return VarianceEstimate(sig, spillover_variance_bounds({w: v.value for w, v in sig.items()}, cross_weight))
