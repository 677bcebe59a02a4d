import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrdesign.core import SMRD_TYPES, TYPE_ORDER, ExposureType, MRDError, PopulationDims, stream_rng
from mrdesign.designs import sample_smrd
from mrdesign.outcomes import (
    ALIModel,
    CoverageError,
    GaussianALIParams,
    PotentialOutcomeBank,
    UndefinedLiftError,
    binary_synergy_bank,
    direct_generator,
    gaussian_ali_bank,
    lift_estimands,
    neighbour_generator,
    population_estimands,
    read_bank_csv,
    realize,
    row_count_generator,
    verify_interference_class,
    write_bank_csv,
)

PARAMS = GaussianALIParams(0.0, 2.0, 1.0, 0.5, 3.0, 0.2, 4.0, 8.0)


def nonlinear_ali(I, J, seed=0):
    rng = np.random.default_rng(seed)
    gB = rng.normal(size=(I, J))
    gS = rng.normal(size=(I, J))
    return ALIModel(rng.normal(size=(I, J)), rng.normal(size=(I, J)) + 1,
                    lambda f: gB * np.sin(3 * f), lambda f: gS * f**2)


def test_ali_rejects_nonzero_spillover_at_zero():
    with pytest.raises(MRDError):
        ALIModel(np.zeros((2, 2)), np.zeros((2, 2)), lambda f: f + 1, lambda f: f)


def test_ali_smrd_bank_reproduces_outcomes():
    d = PopulationDims(4, 5, 2, 3)
    model = nonlinear_ali(4, 5)
    bank = model.smrd_bank(d)
    for s in range(20):
        _, W, types = sample_smrd(d, "conjunctive", stream_rng(s, "t"))
        assert np.allclose(realize(bank, types), model.outcome(W), atol=1e-14)


def test_shared_gaussian_bank_is_ali():
    d = PopulationDims(6, 7, 2, 3)
    bank = gaussian_ali_bank(d, PARAMS, np.random.default_rng(1), shared=True)
    assert bank.ali is not None
    for s in range(10):
        _, W, types = sample_smrd(d, "conjunctive", stream_rng(s, "t"))
        assert np.allclose(realize(bank, types), bank.ali.outcome(W), atol=1e-13)


def test_gaussian_bank_component_means():
    d = PopulationDims(200, 200, 100, 100)
    bank = gaussian_ali_bank(d, PARAMS, np.random.default_rng(2))
    want = PARAMS.type_means(d.p_B, d.p_S)
    for w in SMRD_TYPES:
        sd = {"c": 2, "ib": np.hypot(2, .5), "is": np.hypot(2, .2), "t": np.sqrt(64 + .25 + .04)}[w.value]
        assert abs(bank[w].mean() - want[w]) < 4 * sd / 200


def test_type_params_mapping():
    p = GaussianALIParams.from_type_params(
        {"c": 0, "ib": 1, "is": 3, "t": 4}, {"c": 2, "ib": 0.5, "is": 0.2, "t": 8}
    )
    assert p == PARAMS
    with pytest.raises(MRDError):
        GaussianALIParams(0, -1, 0, 0, 0, 0, 0, 0)


def test_bank_orders_types_and_rejects_bad_values():
    v = np.arange(8, dtype=float).reshape(2, 2, 2)
    bank = PotentialOutcomeBank(v, ("t", "c"))
    assert bank.types == (ExposureType.C, ExposureType.T)
    assert bank["c"][0, 0] == 4
    with pytest.raises(MRDError):
        PotentialOutcomeBank(v, ("c", "c"))
    with pytest.raises(MRDError):
        PotentialOutcomeBank(v * np.nan, ("c", "t"))
    with pytest.raises(CoverageError):
        bank["ib"]


def test_realize_needs_coverage():
    d = PopulationDims(3, 3, 1, 1)
    bank = PotentialOutcomeBank(np.zeros((2, 3, 3)), ("c", "t"))
    _, _, types = sample_smrd(d, "conjunctive", np.random.default_rng(0))
    with pytest.raises(CoverageError):
        realize(bank, types)


@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**20))
@settings(max_examples=30)
def test_lift_identity_on_random_ali(I, J, seed):
    model = nonlinear_ali(I, J, seed)
    model = ALIModel(np.abs(model.h_C) + 1, model.h_T, model.h_B, model.h_S)
    e = lift_estimands(model.all_treated(), model.all_control())
    assert e["theta"] == pytest.approx(e["theta_B"], rel=1e-12, abs=1e-12)
    assert e["theta"] == pytest.approx(e["theta_S"], rel=1e-12, abs=1e-12)


def test_lift_undefined_for_zero_control():
    with pytest.raises(UndefinedLiftError):
        lift_estimands(np.ones((2, 2)), np.zeros((2, 2)))


def test_population_estimands():
    v = np.stack([np.full((2, 2), x) for x in (1.0, 2.0, 4.0, 8.0)])
    e = population_estimands(PotentialOutcomeBank(v))
    assert (e.tau, e.tau_direct, e.tau_spill_B, e.tau_spill_S) == (7.0, 3.0, 1.0, 3.0)
    assert e.theta is None


def test_bank_csv_roundtrip(tmp_path):
    bank = gaussian_ali_bank(PopulationDims(3, 4, 1, 2), PARAMS, np.random.default_rng(0))
    p = tmp_path / "bank.csv"
    write_bank_csv(p, bank)
    assert p.read_text().splitlines()[0] == "i,j,type,value"
    back = read_bank_csv(p)
    assert np.array_equal(back.values, bank.values) and back.types == bank.types


def test_binary_synergy_banks():
    null = binary_synergy_bank(5, 5, np.random.default_rng(0), synergy=False)
    c, ib, is_, t, ibs = (null[w] for w in TYPE_ORDER)
    assert np.array_equal(ibs, np.maximum(np.maximum(c, ib), is_))
    alt = binary_synergy_bank(5, 5, np.random.default_rng(0), synergy=True)
    assert alt["ibs"].min() == 1 and alt["c"].max() == 0


@pytest.mark.parametrize("I,J", [(2, 2), (2, 3), (3, 4), (2, 6)])
def test_ali_generators_satisfy_local_interference(I, J):
    model = nonlinear_ali(I, J)
    res = verify_interference_class(model.outcome, I, J, "local")
    assert res.passed and res.mode == "exhaustive" and res.counterexample is None


@pytest.mark.parametrize("cls", ["strong", "buyers", "sellers", "local"])
def test_direct_generator_passes_every_class(cls):
    assert verify_interference_class(direct_generator(2.0), 2, 3, cls).passed


def test_row_count_generator_is_buyer_level_not_strong():
    assert verify_interference_class(row_count_generator(), 3, 3, "buyers").passed
    assert verify_interference_class(row_count_generator(), 3, 3, "local").passed
    assert not verify_interference_class(row_count_generator(), 3, 3, "strong").passed


def test_counterexample_generator_fails_with_pair():
    res = verify_interference_class(neighbour_generator(), 3, 4, "local")
    assert not res.passed
    W, V, i, j = res.counterexample
    g = neighbour_generator()
    assert g(W)[i, j] != g(V)[i, j]
    assert W[i, j] == V[i, j]
    assert W[i].sum() == V[i].sum() and W[:, j].sum() == V[:, j].sum()


def test_sampled_mode_finds_counterexample():
    res = verify_interference_class(neighbour_generator(), 4, 4, "local", np.random.default_rng(0))
    assert res.mode == "sampled" and not res.passed
    ok = verify_interference_class(nonlinear_ali(4, 4).outcome, 4, 4, "local", np.random.default_rng(0),
                                   n_samples=300)
    assert ok.passed and ok.mode == "sampled"


def test_checker_rejects_large_or_unknown():
    with pytest.raises(MRDError):
        verify_interference_class(direct_generator(), 5, 5, "local")
    with pytest.raises(MRDError):
        verify_interference_class(direct_generator(), 2, 2, "global")
