"""Domain types shared by every module: populations, assignment and type
matrices, axis labels and consistency diagnostics.

Matrices are stored as read-only numpy arrays so that values can be shared
across threads once constructed.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class MRDError(ValueError):
    """Base class for all library errors."""


class InvalidAxisError(MRDError):
    pass


class DegenerateDesignError(MRDError):
    pass


class ExposureType(str, Enum):
    """Exposure type of a (buyer, seller) cell."""

    C = "c"
    IB = "ib"
    IS = "is"
    T = "t"
    IBS = "ibs"

    def __str__(self) -> str:
        return self.value


# Fixed order used for arrays, CSV columns and reports.
TYPE_ORDER: tuple[ExposureType, ...] = (
    ExposureType.C,
    ExposureType.IB,
    ExposureType.IS,
    ExposureType.T,
    ExposureType.IBS,
)
SMRD_TYPES: tuple[ExposureType, ...] = TYPE_ORDER[:4]
TYPE_CODE = {w: k for k, w in enumerate(TYPE_ORDER)}

# Side of each SMRD type on the buyer and seller axis (1 = selected).
TYPE_SIDES = {
    ExposureType.C: (0, 0),
    ExposureType.IB: (1, 0),
    ExposureType.IS: (0, 1),
    ExposureType.T: (1, 1),
}


def as_type(value: ExposureType | str) -> ExposureType:
    if isinstance(value, ExposureType):
        return value
    return ExposureType(str(value))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PopulationDims:
    """Population sizes with selected counts on each axis."""

    I: int
    J: int
    I_T: int = 0
    J_T: int = 0

    def __post_init__(self) -> None:
        if self.I < 1 or self.J < 1:
            raise MRDError(f"I and J must be >= 1, got I={self.I}, J={self.J}")
        if not 0 <= self.I_T <= self.I:
            raise MRDError(f"I_T={self.I_T} outside [0, {self.I}]")
        if not 0 <= self.J_T <= self.J:
            raise MRDError(f"J_T={self.J_T} outside [0, {self.J}]")

    @property
    def I_C(self) -> int:
        return self.I - self.I_T

    @property
    def J_C(self) -> int:
        return self.J - self.J_T

    @property
    def p_B(self) -> float:
        return self.I_T / self.I

    @property
    def p_S(self) -> float:
        return self.J_T / self.J

    @property
    def shape(self) -> tuple[int, int]:
        return (self.I, self.J)

    def require_interior(self) -> None:
        """Raise unless 0 < I_T < I and 0 < J_T < J."""
        if not (0 < self.I_T < self.I and 0 < self.J_T < self.J):
            raise DegenerateDesignError(
                f"need 0 < I_T < I and 0 < J_T < J, got {self}"
            )


@dataclass(frozen=True, eq=False)
class AssignmentMatrix:
    """I x J treatment grid; True means T."""

    cells: np.ndarray

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AssignmentMatrix) and np.array_equal(self.cells, other.cells)

    def __hash__(self) -> int:
        return hash((self.cells.shape, self.cells.tobytes()))

    def __post_init__(self) -> None:
        a = np.asarray(self.cells)
        if a.ndim != 2:
            raise MRDError("assignment matrix must be two-dimensional")
        if a.dtype != bool:
            if not np.isin(a, (0, 1)).all():
                raise MRDError("assignment cells must be C/T (0/1)")
            a = a.astype(bool)
        object.__setattr__(self, "cells", _frozen(a))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def n_treated(self) -> int:
        return int(self.cells.sum())

    def to_labels(self) -> np.ndarray:
        return np.where(self.cells, "T", "C")


@dataclass(frozen=True)
class AxisAssignments:
    """Integer labels for buyers (W^B) and sellers (W^S)."""

    buyer: np.ndarray
    seller: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "buyer", _frozen(np.asarray(self.buyer, dtype=np.int64)))
        object.__setattr__(self, "seller", _frozen(np.asarray(self.seller, dtype=np.int64)))
        if self.buyer.ndim != 1 or self.seller.ndim != 1:
            raise InvalidAxisError("axis labels must be one-dimensional")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.buyer.size, self.seller.size)

    def is_binary(self) -> bool:
        b, s = self.buyer, self.seller
        return bool(((b == 0) | (b == 1)).all() and ((s == 0) | (s == 1)).all())


@dataclass(frozen=True, eq=False)
class TypeMatrix:
    """I x J grid of exposure types, stored as codes into TYPE_ORDER."""

    codes: np.ndarray
    counts: dict[ExposureType, int] = field(init=False)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TypeMatrix) and np.array_equal(self.codes, other.codes)

    def __hash__(self) -> int:
        return hash((self.codes.shape, self.codes.tobytes()))

    def __post_init__(self) -> None:
        c = np.asarray(self.codes)
        if c.ndim != 2:
            raise MRDError("type matrix must be two-dimensional")
        if c.size and (c.min() < 0 or c.max() >= len(TYPE_ORDER)):
            raise MRDError("unknown type code")
        c = _frozen(c.astype(np.int8))
        object.__setattr__(self, "codes", c)
        tally = np.bincount(c.ravel(), minlength=len(TYPE_ORDER))
        object.__setattr__(
            self, "counts", {w: int(tally[k]) for k, w in enumerate(TYPE_ORDER)}
        )

    @classmethod
    def from_names(cls, names: Sequence[Sequence[str]]) -> "TypeMatrix":
        return cls(np.vectorize(lambda s: TYPE_CODE[as_type(s)])(np.asarray(names, dtype=object)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape

    def mask(self, omega: ExposureType | str) -> np.ndarray:
        return self.codes == TYPE_CODE[as_type(omega)]

    def present(self) -> tuple[ExposureType, ...]:
        return tuple(w for w in TYPE_ORDER if self.counts[w] > 0)

    def to_names(self) -> np.ndarray:
        names = np.array([w.value for w in TYPE_ORDER], dtype=object)
        return names[self.codes]

    def treated(self) -> AssignmentMatrix:
        return AssignmentMatrix(self.codes == TYPE_CODE[ExposureType.T])


@dataclass(frozen=True)
class ConsistencyReport:
    """Treated fractions per buyer and seller, kept as exact rationals."""

    buyer_fractions: tuple[Fraction, ...]
    seller_fractions: tuple[Fraction, ...]
    grand_fraction: Fraction
    V_B: frozenset[Fraction]
    V_S: frozenset[Fraction]


def classify_cells(axis: AxisAssignments, rule: str = "conjunctive") -> TypeMatrix:
    """Map binary axis labels to SMRD exposure types.

    Conjunctive: t=(1,1), ib=(1,0), is=(0,1), c=(0,0). Disjunctive designs
    are the conjunctive design on complemented labels with C and T swapped,
    so the types are computed from the complemented labels.
    """
    if not axis.is_binary():
        raise InvalidAxisError("SMRD classification requires labels in {0, 1}")
    if rule not in ("conjunctive", "disjunctive"):
        raise InvalidAxisError(f"unknown rule {rule!r}")
    b = axis.buyer[:, None]
    s = axis.seller[None, :]
    if rule == "disjunctive":
        b, s = 1 - b, 1 - s
    codes = np.empty((axis.buyer.size, axis.seller.size), dtype=np.int8)
    codes[...] = TYPE_CODE[ExposureType.C]
    codes[np.broadcast_to((b == 1) & (s == 0), codes.shape)] = TYPE_CODE[ExposureType.IB]
    codes[np.broadcast_to((b == 0) & (s == 1), codes.shape)] = TYPE_CODE[ExposureType.IS]
    codes[np.broadcast_to((b == 1) & (s == 1), codes.shape)] = TYPE_CODE[ExposureType.T]
    return TypeMatrix(codes)


def smrd_assignment(axis: AxisAssignments, rule: str = "conjunctive") -> AssignmentMatrix:
    """Treatment matrix of a simple MRD from binary labels."""
    if not axis.is_binary():
        raise InvalidAxisError("SMRD assignment requires labels in {0, 1}")
    b = axis.buyer[:, None].astype(bool)
    s = axis.seller[None, :].astype(bool)
    return AssignmentMatrix((b & s) if rule == "conjunctive" else (b | s))


def infer_conjunctive_axes(W: AssignmentMatrix) -> AxisAssignments | None:
    """Axis labels of a conjunctive SMRD matrix, or None when W is not one.

    A treated cell marks both its buyer and seller as selected, so the
    labels are recoverable whenever at least one cell is treated.
    """
    b = W.cells.any(axis=1)
    s = W.cells.any(axis=0)
    if not b.any() or not np.array_equal(W.cells, b[:, None] & s[None, :]):
        return None
    return AxisAssignments(b.astype(np.int64), s.astype(np.int64))


def consistency_report(W: AssignmentMatrix) -> ConsistencyReport:
    I, J = W.shape
    rows = W.cells.sum(axis=1)
    cols = W.cells.sum(axis=0)
    bf = tuple(Fraction(int(r), J) for r in rows)
    sf = tuple(Fraction(int(c), I) for c in cols)
    return ConsistencyReport(
        buyer_fractions=bf,
        seller_fractions=sf,
        grand_fraction=Fraction(W.n_treated, I * J),
        V_B=frozenset(bf),
        V_S=frozenset(sf),
    )


def stream_rng(seed: int, *key: int | str) -> np.random.Generator:
    """Philox generator for an independent named stream of a master seed.

    String key parts are folded to integers with CRC-32 so that stream
    identities are stable across processes and Python versions.
    """
    parts = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key]
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(parts))
    return np.random.Generator(np.random.Philox(ss))


# CSV serialization ---------------------------------------------------------

def write_matrix_csv(path: str | Path, cells: np.ndarray) -> None:
    """Write a grid of strings: header row of seller indices, one row per buyer."""
    grid = np.asarray(cells)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["buyer"] + [str(j + 1) for j in range(grid.shape[1])])
        for i, row in enumerate(grid):
            w.writerow([str(i + 1)] + [str(x) for x in row])


def read_matrix_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MRDError(f"{path}: empty matrix file")
    body = [r[1:] for r in rows[1:]]
    if any(len(r) != len(rows[0]) - 1 for r in body):
        raise MRDError(f"{path}: ragged matrix rows")
    return np.array(body, dtype=object)


def assignment_from_labels(grid: Iterable[Iterable[str]]) -> AssignmentMatrix:
    g = np.asarray([[str(x).strip().upper() for x in row] for row in grid])
    if not np.isin(g, ("C", "T")).all():
        raise MRDError("assignment cells must be 'C' or 'T'")
    return AssignmentMatrix(g == "T")
