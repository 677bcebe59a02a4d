"""Samplers for the design classes.

Every sampler takes an explicit ``numpy.random.Generator``; nothing here
touches global random state. Subsets are drawn with ``Generator.choice``
without replacement, which is a uniform draw over k-subsets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .core import (
    TYPE_CODE,
    AssignmentMatrix,
    AxisAssignments,
    DegenerateDesignError,
    ExposureType,
    MRDError,
    PopulationDims,
    TypeMatrix,
    classify_cells,
    smrd_assignment,
)


class InfeasibleDesignError(MRDError):
    pass


class InvalidCombinatorError(MRDError):
    pass


DESIGN_KINDS = (
    "buyerSRD",
    "sellerSRD",
    "CRMD",
    "SMRD-conjunctive",
    "SMRD-disjunctive",
    "generalMRD",
    "equilibriumMixed",
    "synergistic",
    "clustered",
    "tensor",
)


@dataclass(frozen=True)
class DesignSpec:
    """Declarative description of a design: kind, sizes and kind-specific parameters."""

    kind: str
    dims: PopulationDims
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in DESIGN_KINDS:
            raise MRDError(f"unknown design kind {self.kind!r}")


@dataclass(frozen=True)
class DesignDraw:
    """One draw from a design. Fields not produced by a design are None."""

    W: AssignmentMatrix
    axis: AxisAssignments | None = None
    types: TypeMatrix | None = None
    labels: Mapping[str, np.ndarray] = field(default_factory=dict)


def choose_subset(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """0/1 vector of length n with a uniformly random k-subset set to 1."""
    out = np.zeros(n, dtype=np.int64)
    out[rng.choice(n, size=k, replace=False)] = 1
    return out


def _fixed_count_labels(counts: Mapping[int, int], rng: np.random.Generator) -> np.ndarray:
    levels = np.repeat(
        np.array(list(counts.keys()), dtype=np.int64),
        np.array(list(counts.values()), dtype=np.int64),
    )
    return rng.permutation(levels)


# Single randomized designs -------------------------------------------------

def sample_srd(dims: PopulationDims, axis: str, rng: np.random.Generator) -> AssignmentMatrix:
    """Buyer or seller experiment: whole rows (or columns) treated."""
    if axis == "buyer":
        if not 0 < dims.I_T < dims.I:
            raise DegenerateDesignError(f"buyer experiment needs 0 < I_T < I, got {dims}")
        rows = choose_subset(dims.I, dims.I_T, rng).astype(bool)
        return AssignmentMatrix(np.repeat(rows[:, None], dims.J, axis=1))
    if axis == "seller":
        if not 0 < dims.J_T < dims.J:
            raise DegenerateDesignError(f"seller experiment needs 0 < J_T < J, got {dims}")
        cols = choose_subset(dims.J, dims.J_T, rng).astype(bool)
        return AssignmentMatrix(np.repeat(cols[None, :], dims.I, axis=0))
    raise MRDError(f"axis must be 'buyer' or 'seller', got {axis!r}")


# Completely randomized MRD -------------------------------------------------

def crmd_start(I: int, J: int, r: int) -> np.ndarray:
    """Cyclic matrix with r ones per row and I*r/J ones per column."""
    W = np.zeros((I, J), dtype=bool)
    for i in range(I):
        W[i, (i * r + np.arange(r)) % J] = True
    return W


def sample_crmd(
    dims: PopulationDims, rng: np.random.Generator, swaps: int | None = None
) -> AssignmentMatrix:
    """Matrix with constant row and column treated fractions.

    Starts from a cyclic feasible matrix with permuted rows and columns and
    runs ``swaps`` steps (default 50*I*J) of the checkerboard swap chain,
    which preserves all margins. Uniformity is exact only in the chain limit.
    """
    I, J = dims.I, dims.J
    if dims.I_T * J != dims.J_T * I:
        raise InfeasibleDesignError(
            f"CRMD needs I_T/I == J_T/J, got {dims.I_T}/{I} and {dims.J_T}/{J}"
        )
    r = dims.J_T  # treated cells per row
    if not 0 < r < J:
        raise DegenerateDesignError(f"CRMD needs a treated fraction in (0, 1), got {dims}")
    W = crmd_start(I, J, r)
    W = W[rng.permutation(I)][:, rng.permutation(J)]
    n_steps = 50 * I * J if swaps is None else int(swaps)
    if I >= 2 and J >= 2:
        rows = rng.integers(0, I, size=(n_steps, 2))
        cols = rng.integers(0, J, size=(n_steps, 2))
        for (i1, i2), (j1, j2) in zip(rows, cols):
            a, b = W[i1, j1], W[i1, j2]
            if a != b and W[i2, j1] == b and W[i2, j2] == a and i1 != i2:
                W[i1, j1], W[i1, j2], W[i2, j1], W[i2, j2] = b, a, a, b
    return AssignmentMatrix(W)


# Simple MRD ----------------------------------------------------------------

def sample_smrd_axes(dims: PopulationDims, rng: np.random.Generator) -> AxisAssignments:
    dims.require_interior()
    return AxisAssignments(
        choose_subset(dims.I, dims.I_T, rng), choose_subset(dims.J, dims.J_T, rng)
    )


def sample_smrd(
    dims: PopulationDims, rule: str, rng: np.random.Generator
) -> tuple[AxisAssignments, AssignmentMatrix, TypeMatrix]:
    """Independent uniform I_T-subset of buyers and J_T-subset of sellers."""
    axis = sample_smrd_axes(dims, rng)
    return axis, smrd_assignment(axis, rule), classify_cells(axis, rule)


# General MRD ---------------------------------------------------------------

Combinator = Callable[..., bool] | Mapping[tuple, bool]


def _combinator_table(f: Combinator, level_sets: Sequence[Sequence[int]]) -> dict[tuple, bool]:
    table: dict[tuple, bool] = {}
    for combo in itertools.product(*level_sets):
        if callable(f):
            v = f(*combo)
        else:
            if combo not in f:
                raise InvalidCombinatorError(f"combinator undefined at {combo}")
            v = f[combo]
        if v in ("T", "C"):
            v = v == "T"
        if not isinstance(v, (bool, np.bool_, int, np.integer)) or int(v) not in (0, 1):
            raise InvalidCombinatorError(f"combinator returned {v!r} at {combo}")
        table[combo] = bool(v)
    return table


def general_mrd_matrix(axis: AxisAssignments, f: Combinator) -> AssignmentMatrix:
    """Cell treatment f(W^B_i, W^S_j) for given axis labels."""
    levels = (sorted(set(axis.buyer.tolist())), sorted(set(axis.seller.tolist())))
    table = _combinator_table(f, levels)
    W = np.array([[table[(b, s)] for s in axis.seller.tolist()] for b in axis.buyer.tolist()])
    return AssignmentMatrix(W.reshape(axis.shape))


def sample_general_mrd(
    buyer_counts: Mapping[int, int],
    seller_counts: Mapping[int, int],
    f: Combinator,
    rng: np.random.Generator,
) -> tuple[AxisAssignments, AssignmentMatrix]:
    """Axis labels with fixed multiplicity per level, cells f(W^B, W^S).

    The combinator is checked on the full level product so that a partial
    rule fails even when a draw happens not to need the missing entry.
    """
    _combinator_table(f, (sorted(buyer_counts), sorted(seller_counts)))
    axis = AxisAssignments(_fixed_count_labels(buyer_counts, rng), _fixed_count_labels(seller_counts, rng))
    return axis, general_mrd_matrix(axis, f)


# Equilibrium design --------------------------------------------------------

EQUILIBRIUM_SETS = ("CC;S", "TC;S", "CT;S", "TT;S", "C.;B", "T.;B")


@dataclass(frozen=True)
class EquilibriumAxis:
    """Seller groups X^S (True = group B) and the two sub-experiment labels."""

    group_B: np.ndarray
    W_B: np.ndarray
    W_S: np.ndarray


def equilibrium_matrix(eq: EquilibriumAxis) -> tuple[AssignmentMatrix, np.ndarray]:
    """Assignment matrix and per-cell comparison-set labels.

    Group-B columns copy the buyer assignment; group-S columns copy the
    seller assignment. Labels are 'xy;S' (buyer label x, seller label y) on
    group-S columns and 'x.;B' on group-B columns.
    """
    gB = np.asarray(eq.group_B, dtype=bool)
    wb = np.asarray(eq.W_B, dtype=bool)
    ws = np.asarray(eq.W_S, dtype=bool)
    I, J = wb.size, gB.size
    W = np.where(gB[None, :], wb[:, None], ws[None, :])
    W = np.broadcast_to(W, (I, J))
    b = np.where(wb, "T", "C")[:, None]
    s = np.where(ws, "T", "C")[None, :]
    lab_S = np.char.add(np.char.add(b, s), ";S")
    lab_B = np.char.add(b, ".;B")
    labels = np.where(gB[None, :], np.broadcast_to(lab_B, (I, J)), lab_S)
    return AssignmentMatrix(W), labels


def sample_equilibrium(
    I: int,
    J: int,
    n_group_B: int,
    n_treated_buyers: int,
    n_treated_S_sellers: int,
    rng: np.random.Generator,
) -> tuple[EquilibriumAxis, AssignmentMatrix, np.ndarray]:
    """Split sellers into groups B and S with fixed counts, then run a buyer
    experiment on group B and a seller experiment on group S."""
    n_S = J - n_group_B
    if n_group_B < 1 or n_S < 1:
        raise MRDError(f"both seller groups must be non-empty (B={n_group_B}, S={n_S})")
    if not 0 < n_treated_buyers < I:
        raise DegenerateDesignError("buyer experiment needs 0 < treated buyers < I")
    if not 0 <= n_treated_S_sellers <= n_S:
        raise MRDError("treated group-S sellers outside [0, group size]")
    gB = choose_subset(J, n_group_B, rng).astype(bool)
    wb = choose_subset(I, n_treated_buyers, rng).astype(bool)
    ws = np.zeros(J, dtype=bool)
    s_idx = np.flatnonzero(~gB)
    ws[s_idx[rng.choice(n_S, size=n_treated_S_sellers, replace=False)]] = True
    eq = EquilibriumAxis(gB, wb, ws)
    W, labels = equilibrium_matrix(eq)
    return eq, W, labels


# Synergistic design --------------------------------------------------------

def synergistic_types(axis: AxisAssignments) -> TypeMatrix:
    """Five exposure types from labels in {-1, 0, 1}."""
    b = axis.buyer[:, None]
    s = axis.seller[None, :]
    if not (np.isin(axis.buyer, (-1, 0, 1)).all() and np.isin(axis.seller, (-1, 0, 1)).all()):
        raise MRDError("synergistic labels must lie in {-1, 0, 1}")
    prod = b * s
    codes = np.full(prod.shape, TYPE_CODE[ExposureType.C], dtype=np.int8)
    codes[(b != 0) & (s == 0)] = TYPE_CODE[ExposureType.IB]
    codes[(b == 0) & (s != 0)] = TYPE_CODE[ExposureType.IS]
    codes[prod == -1] = TYPE_CODE[ExposureType.IBS]
    codes[prod == 1] = TYPE_CODE[ExposureType.T]
    return TypeMatrix(codes)


def sample_synergistic(
    I: int,
    J: int,
    pi: float,
    q: float,
    rng: np.random.Generator,
    fixed_counts: tuple[Mapping[int, int], Mapping[int, int]] | None = None,
) -> tuple[AxisAssignments, TypeMatrix]:
    """Three-level axes with P(+1)=P(-1)=pi/2 for buyers and q/2 for sellers.

    With ``fixed_counts`` the labels are a uniform permutation of the given
    per-level multiplicities instead of i.i.d. draws.
    """
    if not (0.0 < pi < 1.0 and 0.0 < q < 1.0):
        raise MRDError(f"pi and q must lie in (0, 1), got pi={pi}, q={q}")
    if fixed_counts is not None:
        bc, sc = fixed_counts
        if sum(bc.values()) != I or sum(sc.values()) != J:
            raise MRDError("fixed counts must add up to I and J")
        axis = AxisAssignments(_fixed_count_labels(bc, rng), _fixed_count_labels(sc, rng))
    else:
        levels = np.array([-1, 0, 1])
        axis = AxisAssignments(
            rng.choice(levels, size=I, p=[pi / 2, 1 - pi, pi / 2]),
            rng.choice(levels, size=J, p=[q / 2, 1 - q, q / 2]),
        )
    return axis, synergistic_types(axis)


# Clustered designs ---------------------------------------------------------

CLUSTER_VARIANTS = {
    3: "buyer-unit",
    4: "buyer-cluster",
    5: "per-seller-cluster",
    6: "mixed-randomization",
    7: "mixed-buyer-seller",
}


@dataclass(frozen=True)
class ClusterMap:
    """Cluster id (0-based) for each buyer."""

    cluster_of: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.cluster_of, dtype=np.int64)
        if c.ndim != 1 or c.size == 0:
            raise MRDError("cluster map must be a non-empty vector")
        ids = np.unique(c)
        if ids[0] != 0 or ids[-1] != ids.size - 1:
            raise MRDError("cluster ids must be 0..K-1 with every cluster non-empty")
        object.__setattr__(self, "cluster_of", c)

    @property
    def num_clusters(self) -> int:
        return int(self.cluster_of.max()) + 1

    @classmethod
    def equal(cls, n_clusters: int, size: int) -> "ClusterMap":
        return cls(np.repeat(np.arange(n_clusters), size))


def _treated_count(fraction: float, n: int, what: str) -> int:
    k = int(np.floor(fraction * n))
    if not 0 < k < n:
        raise InfeasibleDesignError(
            f"{what}: floor({fraction} * {n}) = {k} leaves no contrast"
        )
    return k


def _cluster_rows(cm: ClusterMap, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = choose_subset(cm.num_clusters, k, rng).astype(bool)
    return chosen[cm.cluster_of]


def sample_clustered(
    variant: int,
    clusters: ClusterMap,
    J: int,
    rng: np.random.Generator,
    treated_fraction: float = 0.5,
    seller_split: float = 0.5,
    seller_treated_fraction: float = 0.5,
) -> DesignDraw:
    """Clustered buyer designs with optional seller-side randomization.

    Treated counts are floor(fraction * count). Variants:
    3 unit buyer experiment; 4 cluster buyer experiment; 5 independent
    cluster draw per seller column; 6 sellers split into cluster-randomized
    ('c') and unit-randomized ('u') columns, each column drawn
    independently; 7 sellers split into a clustered buyer experiment ('B')
    sharing one draw and a seller experiment ('S').
    """
    if variant not in CLUSTER_VARIANTS:
        raise MRDError(f"unknown clustered variant {variant}")
    I = clusters.cluster_of.size
    K = clusters.num_clusters
    labels: dict[str, np.ndarray] = {}
    if variant == 3:
        rows = choose_subset(I, _treated_count(treated_fraction, I, "treated buyers"), rng)
        W = np.repeat(rows.astype(bool)[:, None], J, axis=1)
    elif variant == 4:
        rows = _cluster_rows(clusters, _treated_count(treated_fraction, K, "treated clusters"), rng)
        W = np.repeat(rows[:, None], J, axis=1)
    elif variant == 5:
        k = _treated_count(treated_fraction, K, "treated clusters")
        W = np.stack([_cluster_rows(clusters, k, rng) for _ in range(J)], axis=1)
    elif variant == 6:
        n_c = _treated_count(seller_split, J, "cluster-randomized sellers")
        is_c = choose_subset(J, n_c, rng).astype(bool)
        kc = _treated_count(treated_fraction, K, "treated clusters")
        ku = _treated_count(treated_fraction, I, "treated buyers")
        cols = [
            _cluster_rows(clusters, kc, rng) if is_c[j] else choose_subset(I, ku, rng).astype(bool)
            for j in range(J)
        ]
        W = np.stack(cols, axis=1)
        labels["R_S"] = np.where(is_c, "c", "u")
    else:
        n_B = _treated_count(seller_split, J, "buyer-experiment sellers")
        is_B = choose_subset(J, n_B, rng).astype(bool)
        rows = _cluster_rows(clusters, _treated_count(treated_fraction, K, "treated clusters"), rng)
        n_S = J - n_B
        ws = np.zeros(J, dtype=bool)
        s_idx = np.flatnonzero(~is_B)
        ks = _treated_count(seller_treated_fraction, n_S, "treated sellers")
        ws[s_idx[rng.choice(n_S, size=ks, replace=False)]] = True
        W = np.where(is_B[None, :], rows[:, None], ws[None, :])
        labels["T_V"] = np.where(is_B, "B", "S")
    return DesignDraw(W=AssignmentMatrix(W), labels=labels)


# Tensor design -------------------------------------------------------------

@dataclass(frozen=True)
class TensorAssignment:
    """I x J x K treatment tensor with the axis labels that generated it."""

    cells: np.ndarray
    labels: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.cells.shape

    def slice_k(self, k: int) -> AssignmentMatrix:
        return AssignmentMatrix(self.cells[:, :, k])


def sample_tensor(
    counts: Sequence[Mapping[int, int]],
    f3: Combinator,
    rng: np.random.Generator,
) -> TensorAssignment:
    """Three independent fixed-count axis randomizations; cells f3(W^B, W^S, W^K)."""
    if len(counts) != 3:
        raise MRDError("tensor design needs exactly three axes")
    table = _combinator_table(f3, [sorted(c) for c in counts])
    labs = tuple(_fixed_count_labels(c, rng) for c in counts)
    lut_keys = [sorted(c) for c in counts]
    idx = [np.searchsorted(np.array(k), l) for k, l in zip(lut_keys, labs)]
    lut = np.zeros([len(k) for k in lut_keys], dtype=bool)
    for combo, v in table.items():
        lut[tuple(lut_keys[a].index(combo[a]) for a in range(3))] = v
    cells = lut[np.ix_(idx[0], idx[1], idx[2])]
    return TensorAssignment(cells=cells, labels=labs)


# Dispatcher ----------------------------------------------------------------

def draw(spec: DesignSpec, rng: np.random.Generator) -> DesignDraw:
    """Draw once from a design spec."""
    d, p = spec.dims, spec.params
    if spec.kind in ("buyerSRD", "sellerSRD"):
        return DesignDraw(W=sample_srd(d, "buyer" if spec.kind == "buyerSRD" else "seller", rng))
    if spec.kind == "CRMD":
        return DesignDraw(W=sample_crmd(d, rng, p.get("swaps")))
    if spec.kind.startswith("SMRD"):
        rule = spec.kind.split("-", 1)[1]
        axis, W, types = sample_smrd(d, rule, rng)
        return DesignDraw(W=W, axis=axis, types=types)
    if spec.kind == "generalMRD":
        bc = {int(k): int(v) for k, v in p["buyer_counts"].items()}
        sc = {int(k): int(v) for k, v in p["seller_counts"].items()}
        thr = p.get("threshold")
        f = p.get("f") or (lambda b, s: b + s >= thr)
        axis, W = sample_general_mrd(bc, sc, f, rng)
        return DesignDraw(W=W, axis=axis)
    if spec.kind == "equilibriumMixed":
        eq, W, labels = sample_equilibrium(
            d.I, d.J, int(p["n_group_B"]), d.I_T, int(p["n_treated_S_sellers"]), rng
        )
        return DesignDraw(W=W, labels={"group": labels})
    if spec.kind == "synergistic":
        axis, types = sample_synergistic(d.I, d.J, float(p["pi"]), float(p["q"]), rng)
        return DesignDraw(W=types.treated(), axis=axis, types=types)
    if spec.kind == "clustered":
        cm = ClusterMap(np.asarray(p["cluster_of"]))
        if cm.cluster_of.size != d.I:
            raise MRDError("cluster map length must equal I")
        return sample_clustered(
            int(p["variant"]),
            cm,
            d.J,
            rng,
            treated_fraction=float(p.get("treated_fraction", 0.5)),
            seller_split=float(p.get("seller_split", 0.5)),
            seller_treated_fraction=float(p.get("seller_treated_fraction", 0.5)),
        )
    raise MRDError(f"kind {spec.kind!r} has no matrix draw; use sample_tensor")
