"""Potential-outcome banks, the additive local interference (ALI) model,
interference-class checks and population estimands."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .core import (
    SMRD_TYPES,
    TYPE_CODE,
    TYPE_ORDER,
    AssignmentMatrix,
    ExposureType,
    MRDError,
    PopulationDims,
    TypeMatrix,
    as_type,
)


class CoverageError(MRDError):
    pass


class UndefinedLiftError(MRDError):
    pass


Spillover = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ALIModel:
    """Additive local interference: Y_ij(W) = h_ij(w_ij) + h^B_ij(wbar^B_i) + h^S_ij(wbar^S_j).

    ``h_B`` and ``h_S`` map an I x J array of treated fractions to an I x J
    array of contributions, cell by cell, and must vanish at zero.
    """

    h_C: np.ndarray
    h_T: np.ndarray
    h_B: Spillover
    h_S: Spillover

    def __post_init__(self) -> None:
        zero = np.zeros(np.shape(self.h_C))
        if np.shape(self.h_C) != np.shape(self.h_T):
            raise MRDError("h_C and h_T must have the same shape")
        if np.any(self.h_B(zero) != 0) or np.any(self.h_S(zero) != 0):
            raise MRDError("ALI spillover functions must vanish at fraction 0")

    @property
    def shape(self) -> tuple[int, int]:
        return np.shape(self.h_C)

    @classmethod
    def linear(cls, h_C, h_T, slope_B, slope_S) -> "ALIModel":
        """Spillovers linear in the treated fraction with per-cell slopes."""
        gB = np.array(slope_B, dtype=float)
        gS = np.array(slope_S, dtype=float)
        return cls(np.asarray(h_C, float), np.asarray(h_T, float), lambda f: gB * f, lambda f: gS * f)

    def outcome(self, W: AssignmentMatrix | np.ndarray) -> np.ndarray:
        """Outcome matrix Y(W) for an arbitrary assignment."""
        w = W.cells if isinstance(W, AssignmentMatrix) else np.asarray(W, dtype=bool)
        I, J = w.shape
        fb = np.broadcast_to(w.mean(axis=1, keepdims=True), (I, J))
        fs = np.broadcast_to(w.mean(axis=0, keepdims=True), (I, J))
        return np.where(w, self.h_T, self.h_C) + self.h_B(fb) + self.h_S(fs)

    def all_treated(self) -> np.ndarray:
        ones = np.ones(self.shape)
        return self.h_T + self.h_B(ones) + self.h_S(ones)

    def all_control(self) -> np.ndarray:
        return np.asarray(self.h_C, dtype=float)

    def smrd_bank(self, dims: PopulationDims) -> "PotentialOutcomeBank":
        """Bank for a conjunctive SMRD with the counts in ``dims``.

        A selected buyer sees a fraction J_T/J of treated sellers and a
        selected seller a fraction I_T/I of treated buyers.
        """
        full = np.ones(self.shape)
        row_frac = full * dims.J_T / dims.J
        col_frac = full * dims.I_T / dims.I
        hB, hS = self.h_B(row_frac), self.h_S(col_frac)
        values = np.stack([self.h_C, self.h_C + hB, self.h_C + hS, self.h_T + hB + hS])
        return PotentialOutcomeBank(values, SMRD_TYPES, dims.p_B, dims.p_S, ali=self)


@dataclass(frozen=True)
class PotentialOutcomeBank:
    """Y_ij(omega) for every cell and every declared type; values[k] is the
    I x J matrix for types[k]."""

    values: np.ndarray
    types: tuple[ExposureType, ...] = SMRD_TYPES
    p_B: float | None = None
    p_S: float | None = None
    ali: ALIModel | None = None

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        types = tuple(as_type(t) for t in self.types)
        if v.ndim != 3 or v.shape[0] != len(types):
            raise MRDError("bank values must have shape (n_types, I, J)")
        if len(set(types)) != len(types):
            raise MRDError("duplicate type in bank")
        if not np.isfinite(v).all():
            raise MRDError("bank values must be finite")
        order = sorted(range(len(types)), key=lambda k: TYPE_CODE[types[k]])
        v = v[order]
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "types", tuple(types[k] for k in order))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    def __getitem__(self, omega: ExposureType | str) -> np.ndarray:
        w = as_type(omega)
        if w not in self.types:
            raise CoverageError(f"bank has no values for type {w}")
        return self.values[self.types.index(w)]

    def relabel(self, rows: np.ndarray, cols: np.ndarray) -> "PotentialOutcomeBank":
        return PotentialOutcomeBank(self.values[:, rows][:, :, cols], self.types, self.p_B, self.p_S)


@dataclass(frozen=True)
class GaussianALIParams:
    """Location and scale of the components F_0, F_B, F_S, F_1.

    Component F_l is N(p^l mu_l, sigma_l^2) with p^0 = p^1 = 1. Type
    outcomes are sums: c = F_0, ib = F_0 + F_B, is = F_0 + F_S,
    t = F_1 + F_B + F_S.
    """

    mu_0: float
    sigma_0: float
    mu_B: float
    sigma_B: float
    mu_S: float
    sigma_S: float
    mu_1: float
    sigma_1: float

    def __post_init__(self) -> None:
        for name in ("sigma_0", "sigma_B", "sigma_S", "sigma_1"):
            if getattr(self, name) < 0:
                raise MRDError(f"{name} must be >= 0")

    @classmethod
    def from_type_params(cls, mu: Mapping[str, float], sigma: Mapping[str, float]) -> "GaussianALIParams":
        """Build from per-type labels: c -> F_0, ib -> F_B, is -> F_S, t -> F_1."""
        return cls(
            mu["c"], sigma["c"], mu["ib"], sigma["ib"], mu["is"], sigma["is"], mu["t"], sigma["t"]
        )

    def type_means(self, p_B: float, p_S: float) -> dict[ExposureType, float]:
        b, s = p_B * self.mu_B, p_S * self.mu_S
        return {
            ExposureType.C: self.mu_0,
            ExposureType.IB: self.mu_0 + b,
            ExposureType.IS: self.mu_0 + s,
            ExposureType.T: self.mu_1 + b + s,
        }


def gaussian_ali_bank(
    dims: PopulationDims,
    params: GaussianALIParams,
    rng: np.random.Generator,
    shared: bool = False,
) -> PotentialOutcomeBank:
    """Draw a Gaussian ALI bank.

    By default every (cell, type) outcome gets fresh component draws. With
    ``shared=True`` each cell draws the four components once and reuses
    them across types; the bank then carries an ALIModel whose spillovers are
    linear in the treated fraction and reproduce the bank at this design.
    """
    I, J = dims.shape
    pB, pS = dims.p_B, dims.p_S
    P = params

    def comp(mu: float, sd: float) -> np.ndarray:
        return rng.normal(mu, sd, size=(I, J)) if sd > 0 else np.full((I, J), float(mu))

    if shared:
        z0 = comp(P.mu_0, P.sigma_0)
        zB = comp(pB * P.mu_B, P.sigma_B)
        zS = comp(pS * P.mu_S, P.sigma_S)
        z1 = comp(P.mu_1, P.sigma_1)
        if dims.J_T == 0 or dims.I_T == 0:
            raise MRDError("shared mode needs I_T > 0 and J_T > 0")
        # buyer spillover enters through the row fraction J_T/J, seller through I_T/I
        model = ALIModel.linear(z0, z1, zB / (dims.J_T / J), zS / (dims.I_T / I))
        bank = model.smrd_bank(dims)
        return bank
    c = comp(P.mu_0, P.sigma_0)
    ib = comp(P.mu_0, P.sigma_0) + comp(pB * P.mu_B, P.sigma_B)
    is_ = comp(P.mu_0, P.sigma_0) + comp(pS * P.mu_S, P.sigma_S)
    t = comp(P.mu_1, P.sigma_1) + comp(pB * P.mu_B, P.sigma_B) + comp(pS * P.mu_S, P.sigma_S)
    return PotentialOutcomeBank(np.stack([c, ib, is_, t]), SMRD_TYPES, pB, pS)


def realize(bank: PotentialOutcomeBank, types: TypeMatrix) -> np.ndarray:
    """Observed matrix Y_ij = Y_ij(T_ij)."""
    if bank.shape != types.shape:
        raise MRDError(f"bank shape {bank.shape} != type matrix shape {types.shape}")
    codes = types.codes
    lookup = np.full(len(TYPE_ORDER), -1, dtype=np.int64)
    for k, w in enumerate(bank.types):
        lookup[TYPE_CODE[w]] = k
    idx = lookup[codes]
    if (idx < 0).any():
        missing = sorted({TYPE_ORDER[c].value for c in np.unique(codes[idx < 0])})
        raise CoverageError(f"bank has no values for types {missing}")
    I, J = types.shape
    return bank.values[idx, np.arange(I)[:, None], np.arange(J)[None, :]]


@dataclass(frozen=True)
class PopulationEstimands:
    """Population targets; lift fields are None without an attached ALI model."""

    means: dict[ExposureType, float]
    tau: float
    tau_direct: float
    tau_spill_B: float
    tau_spill_S: float
    theta: float | None = None
    theta_B: float | None = None
    theta_S: float | None = None
    ate: float | None = None
    ate_B: float | None = None
    ate_S: float | None = None


def population_estimands(bank: PotentialOutcomeBank) -> PopulationEstimands:
    m = {w: float(bank[w].mean()) for w in bank.types}
    missing = [w.value for w in SMRD_TYPES if w not in m]
    if missing:
        raise CoverageError(f"bank lacks SMRD types {missing}")
    c, ib, is_, t = (m[w] for w in SMRD_TYPES)
    out = dict(
        means=m,
        tau=t - c,
        tau_direct=t - ib - is_ + c,
        tau_spill_B=ib - c,
        tau_spill_S=is_ - c,
    )
    if bank.ali is not None:
        out.update(lift_estimands(bank.ali.all_treated(), bank.ali.all_control()))
    return PopulationEstimands(**out)


def lift_estimands(y1: np.ndarray, y0: np.ndarray) -> dict[str, float]:
    """ATE and lift from all-treated and all-control outcomes through three
    aggregation paths: pairs, buyer totals and seller totals."""
    I, J = y0.shape
    if y0.mean() == 0:
        raise UndefinedLiftError("average control outcome is zero")
    ate = float((y1 - y0).mean())
    theta = ate / float(y0.mean())
    rb1, rb0 = y1.sum(axis=1), y0.sum(axis=1)
    cs1, cs0 = y1.sum(axis=0), y0.sum(axis=0)
    ate_B = float((rb1 - rb0).sum() / I)
    ate_S = float((cs1 - cs0).sum() / J)
    theta_B = float((rb1 - rb0).sum() / rb0.sum())
    theta_S = float((cs1 - cs0).sum() / cs0.sum())
    return dict(theta=theta, theta_B=theta_B, theta_S=theta_S, ate=ate, ate_B=ate_B, ate_S=ate_S)


def binary_synergy_bank(
    I: int, J: int, rng: np.random.Generator, synergy: bool, p: float = 0.5
) -> PotentialOutcomeBank:
    """Binary five-type bank for the synergy detection check.

    Without synergy, Y(c), Y(ib), Y(is) and Y(t) are Bernoulli(p) and
    Y(ibs) = max(Y(c), Y(ib), Y(is)), so no cell responds to ibs beyond what
    it shows under one of the single-side types. With synergy only ibs
    responds: Y(ibs) = 1 and every other type is 0.
    """
    if synergy:
        vals = np.zeros((5, I, J))
        vals[TYPE_ORDER.index(ExposureType.IBS)] = 1.0
        return PotentialOutcomeBank(vals, TYPE_ORDER)
    c, ib, is_, t = (rng.random((I, J)) < p for _ in range(4))
    ibs = c | ib | is_
    vals = np.stack([c, ib, is_, t, ibs]).astype(float)
    return PotentialOutcomeBank(vals, TYPE_ORDER)


# Bank CSV ------------------------------------------------------------------

def write_bank_csv(path: str | Path, bank: PotentialOutcomeBank) -> None:
    I, J = bank.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "type", "value"])
        for i in range(I):
            for j in range(J):
                for k, t in enumerate(bank.types):
                    w.writerow([i + 1, j + 1, t.value, repr(float(bank.values[k, i, j]))])


def read_bank_csv(path: str | Path, p_B: float | None = None, p_S: float | None = None) -> PotentialOutcomeBank:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"i", "j", "type", "value"}:
        raise MRDError(f"{path}: expected columns i, j, type, value")
    types = sorted({as_type(r["type"]) for r in rows}, key=lambda w: TYPE_CODE[w])
    I = max(int(r["i"]) for r in rows)
    J = max(int(r["j"]) for r in rows)
    vals = np.full((len(types), I, J), np.nan)
    for r in rows:
        vals[types.index(as_type(r["type"])), int(r["i"]) - 1, int(r["j"]) - 1] = float(r["value"])
    if np.isnan(vals).any():
        raise CoverageError(f"{path}: bank is incomplete")
    return PotentialOutcomeBank(vals, tuple(types), p_B, p_S)


# Interference classes ------------------------------------------------------

INTERFERENCE_CLASSES = ("strong", "sellers", "buyers", "local")
Generator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InterferenceCheck:
    passed: bool
    mode: str
    comparisons: int
    counterexample: tuple[np.ndarray, np.ndarray, int, int] | None = None


def _cell_keys(Ws: np.ndarray, cls: str) -> np.ndarray:
    """Integer key per (matrix, cell); equal keys mean the class's equality
    conditions hold for that cell."""
    n, I, J = Ws.shape
    w = Ws.astype(np.int64)
    if cls == "strong":
        return w
    if cls == "buyers":
        row_code = (w * (1 << np.arange(J))[None, None, :]).sum(axis=2)
        return np.broadcast_to(row_code[:, :, None], (n, I, J))
    if cls == "sellers":
        col_code = (w * (1 << np.arange(I))[None, :, None]).sum(axis=1)
        return np.broadcast_to(col_code[:, None, :], (n, I, J))
    rs = w.sum(axis=2, keepdims=True)
    cs = w.sum(axis=1, keepdims=True)
    return (w * (J + 1) + rs) * (I + 1) + cs


def _perturb(W: np.ndarray, i: int, j: int, cls: str, rng: np.random.Generator) -> np.ndarray:
    """Random W' meeting the class's equality conditions at cell (i, j)."""
    I, J = W.shape
    V = rng.integers(0, 2, size=(I, J)).astype(bool)
    if cls == "strong":
        V[i, j] = W[i, j]
    elif cls == "buyers":
        V[i, :] = W[i, :]
    elif cls == "sellers":
        V[:, j] = W[:, j]
    else:
        others_r = [k for k in range(J) if k != j]
        others_c = [k for k in range(I) if k != i]
        V[i, j] = W[i, j]
        V[i, others_r] = rng.permutation(W[i, others_r])
        V[others_c, j] = rng.permutation(W[others_c, j])
    return V


def verify_interference_class(
    generator: Generator,
    I: int,
    J: int,
    cls: str,
    rng: np.random.Generator | None = None,
    n_samples: int = 2000,
    atol: float = 1e-12,
) -> InterferenceCheck:
    """Check that Y_ij(W) = Y_ij(W') whenever (W, W') meet the class's
    equality conditions at (i, j).

    All 2^(IJ) matrices are visited when IJ <= 12, which covers every
    qualifying pair; larger instances (up to IJ = 16) use ``n_samples``
    random qualifying pairs.
    """
    if cls not in INTERFERENCE_CLASSES:
        raise MRDError(f"unknown interference class {cls!r}")
    if I * J > 16:
        raise MRDError(f"instance too large for the checker: I*J = {I * J} > 16")
    if I * J <= 12:
        bits = np.array(list(itertools.product((0, 1), repeat=I * J)), dtype=bool)
        Ws = bits.reshape(-1, I, J)
        Ys = np.stack([np.asarray(generator(W), dtype=float) for W in Ws])
        keys = _cell_keys(Ws, cls)
        comparisons = 0
        for i in range(I):
            for j in range(J):
                _, first, inv = np.unique(keys[:, i, j], return_index=True, return_inverse=True)
                ref = first[inv]
                bad = np.flatnonzero(np.abs(Ys[:, i, j] - Ys[ref, i, j]) > atol)
                comparisons += Ws.shape[0]
                if bad.size:
                    k = int(bad[0])
                    return InterferenceCheck(False, "exhaustive", comparisons, (Ws[ref[k]], Ws[k], i, j))
        return InterferenceCheck(True, "exhaustive", comparisons)
    rng = rng if rng is not None else np.random.default_rng(0)
    for n in range(n_samples):
        W = rng.integers(0, 2, size=(I, J)).astype(bool)
        i, j = int(rng.integers(I)), int(rng.integers(J))
        V = _perturb(W, i, j, cls, rng)
        if abs(float(generator(W)[i, j]) - float(generator(V)[i, j])) > atol:
            return InterferenceCheck(False, "sampled", n + 1, (W, V, i, j))
    return InterferenceCheck(True, "sampled", n_samples)


def direct_generator(effect: float = 1.0) -> Generator:
    """Y_ij = effect * w_ij: no interference of any kind."""
    return lambda W: effect * np.asarray(W, dtype=float)


def row_count_generator() -> Generator:
    """Y_ij = number of treated cells in row i."""
    return lambda W: np.broadcast_to(np.asarray(W).sum(axis=1, keepdims=True), np.shape(W)).astype(float)


def neighbour_generator() -> Generator:
    """Y_ij = w_{i, j+1 mod J}: depends on a specific neighbour, not on fractions."""
    return lambda W: np.roll(np.asarray(W, dtype=float), -1, axis=1)
