import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrdesign.core import AxisAssignments, ExposureType, TypeMatrix, classify_cells
from mrdesign.designs import equilibrium_matrix, EquilibriumAxis, sample_synergistic
from mrdesign.estimators import (
    ESTIMATE_COLUMNS,
    DesignMismatchError,
    EmptyTypeError,
    equilibrium_comparisons,
    estimates_row,
    spillover_estimates,
    synergy_statistic,
    type_means,
)
from mrdesign.outcomes import binary_synergy_bank, realize

from oracles import cell_type, naive_effects


@given(
    st.integers(2, 6),
    st.integers(2, 6),
    st.data(),
)
@settings(max_examples=40)
def test_type_means_match_naive_loop(I, J, data):
    b = data.draw(st.lists(st.integers(0, 1), min_size=I, max_size=I).filter(lambda v: 0 < sum(v) < len(v)))
    s = data.draw(st.lists(st.integers(0, 1), min_size=J, max_size=J).filter(lambda v: 0 < sum(v) < len(v)))
    Y = np.random.default_rng(I * 31 + J).normal(size=(I, J))
    m = type_means(Y, classify_cells(AxisAssignments(b, s)))
    acc = {}
    for i in range(I):
        for j in range(J):
            acc.setdefault(cell_type(b[i], s[j]), []).append(Y[i, j])
    naive = {w: math.fsum(v) / len(v) for w, v in acc.items()}
    for w, v in naive.items():
        assert m[w] == pytest.approx(v, abs=1e-12)
        assert m.counts[ExposureType(w)] == len(acc[w])
    est = spillover_estimates(m)
    for k, v in naive_effects(naive).items():
        assert getattr(est, k) == pytest.approx(v, abs=1e-12)


def test_empty_declared_type_raises():
    types = classify_cells(AxisAssignments([1, 1], [0, 1]))
    with pytest.raises(EmptyTypeError):
        type_means(np.zeros((2, 2)), types)
    assert set(type_means(np.zeros((2, 2)), types, ["ib", "t"]).means) == {ExposureType.IB, ExposureType.T}


def test_spillover_needs_all_four_types():
    with pytest.raises(DesignMismatchError):
        spillover_estimates({"c": 1.0, "t": 2.0})


def test_lift_is_none_for_zero_control():
    est = spillover_estimates({"c": 0.0, "ib": 1.0, "is": 1.0, "t": 2.0})
    assert est.theta is None and "zero" in est.theta_note
    types = classify_cells(AxisAssignments([0, 1], [0, 1]))
    row = estimates_row(type_means(np.array([[0.0, 1], [1, 2]]), types), est)
    assert len(row) == len(ESTIMATE_COLUMNS) and math.isnan(row[-1])


def test_known_estimates():
    est = spillover_estimates({"c": 2.0, "ib": 3.0, "is": 5.0, "t": 10.0})
    assert (est.tau_direct, est.tau_spill_B, est.tau_spill_S, est.tau, est.theta) == (4, 1, 3, 8, 4)


def test_equilibrium_comparisons():
    eq = EquilibriumAxis(
        group_B=np.array([1, 1, 0, 0, 0, 0], bool),
        W_B=np.array([1, 0, 1, 0], bool),
        W_S=np.array([0, 0, 1, 0, 1, 0], bool),
    )
    W, labels = equilibrium_matrix(eq)
    Y = np.where(W.cells, 10.0, 0.0) + np.arange(4)[:, None]
    res = equilibrium_comparisons(Y, labels)
    # CC;S rows 1,3 at seller cols 3,5: values 1,3 -> mean 2
    assert res.averages["CC;S"] == 2.0
    assert res.averages["TC;S"] == 1.0
    assert res.averages["CT;S"] == 12.0
    assert res.indirect_promotion == -1.0 and res.direct_control_promotion == 10.0
    assert res.counts["C.;B"] == 4


def test_equilibrium_comparison_set_empty():
    eq = EquilibriumAxis(np.array([1, 0], bool), np.array([1, 1], bool), np.array([0, 1], bool))
    W, labels = equilibrium_matrix(eq)
    with pytest.raises(EmptyTypeError):
        equilibrium_comparisons(np.zeros((2, 2)), labels)


def test_synergy_statistic_requires_ibs():
    with pytest.raises(DesignMismatchError):
        synergy_statistic({"c": 0, "ib": 0, "is": 0, "t": 0})


def test_synergy_non_binary_has_no_detection_flag():
    r = synergy_statistic({"c": 0, "ib": 0, "is": 0, "ibs": 3.0}, binary=False)
    assert r.statistic == 3.0 and r.detected is None


@pytest.mark.parametrize("seed", range(20))
def test_synergy_null_and_alternative(seed):
    rng = np.random.default_rng(seed)
    _, types = sample_synergistic(12, 12, 0.5, 0.5, rng)
    if any(types.counts[w] == 0 for w in (ExposureType.C, ExposureType.IB, ExposureType.IS, ExposureType.IBS)):
        pytest.skip("a synergy type is empty for this draw")
    null = binary_synergy_bank(12, 12, rng, synergy=False)
    alt = binary_synergy_bank(12, 12, rng, synergy=True)
    ns = synergy_statistic(type_means(realize(null, types), types))
    assert ns.statistic <= 0 and not ns.detected
    a = synergy_statistic(type_means(realize(alt, types), types))
    assert a.statistic == 1.0 and a.detected


def test_type_means_shape_mismatch():
    with pytest.raises(Exception):
        type_means(np.zeros((3, 3)), TypeMatrix(np.zeros((2, 2), dtype=int)))
