from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mrdesign.core import (
    SMRD_TYPES,
    TYPE_ORDER,
    AssignmentMatrix,
    AxisAssignments,
    DegenerateDesignError,
    ExposureType,
    InvalidAxisError,
    MRDError,
    PopulationDims,
    TypeMatrix,
    assignment_from_labels,
    classify_cells,
    consistency_report,
    infer_conjunctive_axes,
    read_matrix_csv,
    smrd_assignment,
    stream_rng,
    write_matrix_csv,
)


def test_type_order_is_fixed():
    assert [w.value for w in TYPE_ORDER] == ["c", "ib", "is", "t", "ibs"]
    assert SMRD_TYPES == TYPE_ORDER[:4]


@pytest.mark.parametrize(
    "I,J,I_T,J_T",
    [(0, 3, 0, 1), (3, 0, 1, 0), (3, 3, 4, 1), (3, 3, 1, -1)],
)
def test_population_dims_rejects_bad_counts(I, J, I_T, J_T):
    with pytest.raises(MRDError):
        PopulationDims(I, J, I_T, J_T)


def test_population_dims_derived():
    d = PopulationDims(5, 8, 3, 4)
    assert (d.I_C, d.J_C, d.p_B, d.p_S, d.shape) == (2, 4, 0.6, 0.5, (5, 8))


@pytest.mark.parametrize("dims", [PopulationDims(3, 3, 0, 1), PopulationDims(3, 3, 3, 1)])
def test_require_interior(dims):
    with pytest.raises(DegenerateDesignError):
        dims.require_interior()


def test_five_by_eight_type_counts():
    # buyers 3-5 and sellers 5-8 selected
    axis = AxisAssignments([0, 0, 1, 1, 1], [0, 0, 0, 0, 1, 1, 1, 1])
    types = classify_cells(axis)
    counts = {w.value: types.counts[w] for w in SMRD_TYPES}
    assert counts == {"t": 12, "ib": 12, "is": 8, "c": 8}
    W = smrd_assignment(axis)
    assert W.n_treated == 12
    assert types.treated() == W


def test_is_type_means_seller_selected_only():
    types = classify_cells(AxisAssignments([0, 1], [1, 0]))
    assert types.to_names().tolist() == [["is", "c"], ["t", "ib"]]


@given(
    st.lists(st.integers(0, 1), min_size=1, max_size=7),
    st.lists(st.integers(0, 1), min_size=1, max_size=7),
)
def test_disjunctive_is_complemented_conjunctive(b, s):
    axis = AxisAssignments(b, s)
    flip = AxisAssignments(1 - np.array(b), 1 - np.array(s))
    assert np.array_equal(classify_cells(axis, "disjunctive").codes, classify_cells(flip).codes)
    assert np.array_equal(
        smrd_assignment(axis, "disjunctive").cells, ~smrd_assignment(flip).cells
    )


@given(
    st.lists(st.integers(0, 1), min_size=1, max_size=8),
    st.lists(st.integers(0, 1), min_size=1, max_size=8),
)
def test_type_counts_are_axis_products(b, s):
    b, s = np.array(b), np.array(s)
    t = classify_cells(AxisAssignments(b, s))
    nb, ns = b.sum(), s.sum()
    assert t.counts[ExposureType.T] == nb * ns
    assert t.counts[ExposureType.IB] == nb * (len(s) - ns)
    assert t.counts[ExposureType.IS] == (len(b) - nb) * ns
    assert t.counts[ExposureType.C] == (len(b) - nb) * (len(s) - ns)


def test_classify_rejects_non_binary_and_unknown_rule():
    with pytest.raises(InvalidAxisError):
        classify_cells(AxisAssignments([0, 2], [1]))
    with pytest.raises(InvalidAxisError):
        classify_cells(AxisAssignments([0, 1], [1]), "exclusive")


def test_seller_experiment_consistency_sets():
    W = np.zeros((4, 8), dtype=bool)
    W[:, [1, 7]] = True
    rep = consistency_report(AssignmentMatrix(W))
    assert rep.V_B == {Fraction(1, 4)}
    assert rep.V_S == {Fraction(0), Fraction(1)}
    assert rep.grand_fraction == Fraction(1, 4)


def test_buyer_experiment_consistency_sets():
    W = np.zeros((4, 8), dtype=bool)
    W[1, :] = True
    rep = consistency_report(AssignmentMatrix(W))
    assert rep.V_B == {Fraction(0), Fraction(1)}
    assert rep.V_S == {Fraction(1, 4)}


def test_crmd_example_has_constant_fractions():
    rows = ["CTCCTCCC", "CCTTCCCC", "TCCCCTCC", "CCCCCCTT"]
    W = assignment_from_labels([list(r) for r in rows])
    rep = consistency_report(W)
    assert rep.V_B == {Fraction(1, 4)} and rep.V_S == {Fraction(1, 4)}


def test_fractions_are_exact():
    W = AssignmentMatrix(np.eye(3, dtype=bool))
    assert consistency_report(W).V_B == {Fraction(1, 3)}


def test_matrices_are_immutable():
    W = AssignmentMatrix(np.eye(2, dtype=bool))
    with pytest.raises(ValueError):
        W.cells[0, 0] = False
    t = TypeMatrix(np.zeros((2, 2), dtype=int))
    with pytest.raises(ValueError):
        t.codes[0, 0] = 1


def test_type_matrix_rejects_unknown_code():
    with pytest.raises(MRDError):
        TypeMatrix(np.array([[7]]))


def test_assignment_labels_validate():
    with pytest.raises(MRDError):
        assignment_from_labels([["C", "X"]])


def test_matrix_csv_roundtrip(tmp_path):
    t = classify_cells(AxisAssignments([1, 0, 1], [0, 1]))
    p = tmp_path / "types.csv"
    write_matrix_csv(p, t.to_names())
    text = p.read_text().splitlines()
    assert text[0] == "buyer,1,2"
    assert text[1] == "1,ib,t"
    back = TypeMatrix.from_names(read_matrix_csv(p))
    assert back == t


def test_matrix_csv_ragged(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("buyer,1,2\n1,C\n")
    with pytest.raises(MRDError):
        read_matrix_csv(p)


def test_stream_rng_is_deterministic_and_keyed():
    a = stream_rng(7, "replica", 3).random(4)
    b = stream_rng(7, "replica", 3).random(4)
    c = stream_rng(7, "replica", 4).random(4)
    d = stream_rng(8, "replica", 3).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_infer_conjunctive_axes():
    axis = AxisAssignments([1, 0, 1], [0, 1, 1, 0])
    got = infer_conjunctive_axes(smrd_assignment(axis))
    assert np.array_equal(got.buyer, axis.buyer) and np.array_equal(got.seller, axis.seller)
    assert infer_conjunctive_axes(AssignmentMatrix(np.eye(2, dtype=bool))) is None
    assert infer_conjunctive_axes(AssignmentMatrix(np.zeros((2, 2), dtype=bool))) is None
