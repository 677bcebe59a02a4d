import numpy as np
import pytest

from mrdesign.core import SMRD_TYPES, MRDError, PopulationDims
from mrdesign.designs import DesignSpec
from mrdesign.oracle import (
    SupportTooLargeError,
    enumerate_design_moments,
    iter_supports,
    jackknife_se,
    montecarlo_design_moments,
    support_size,
    supports,
)
from mrdesign.outcomes import PotentialOutcomeBank
from mrdesign.variance import bank_moments

import oracles

STATS = ["Y_c", "Y_ib", "Y_is", "Y_t", "tau", "tau_spill_B"]


def smrd(*dims):
    return DesignSpec("SMRD-conjunctive", PopulationDims(*dims))


def normal_bank(d, seed=0):
    return PotentialOutcomeBank(np.random.default_rng(seed).normal(size=(4, d.I, d.J)))


@pytest.mark.parametrize("dims,size", [((4, 4, 2, 2), 36), ((2, 2, 1, 1), 4), ((3, 5, 1, 2), 30), ((5, 5, 2, 2), 100)])
def test_support_sizes(dims, size):
    spec = smrd(*dims)
    assert support_size(spec) == size
    seen = {t.codes.tobytes() for t in iter_supports(spec)}
    assert len(seen) == size


def test_srd_supports():
    d = PopulationDims(4, 3, 2, 1)
    assert len(list(iter_supports(DesignSpec("buyerSRD", d)))) == 6
    assert len(list(iter_supports(DesignSpec("sellerSRD", d)))) == 3


def test_crmd_enumeration_is_all_margin_matrices():
    # 3x3 with one treated cell per row and column: the 6 permutation matrices
    got = {t.codes.tobytes() for t in iter_supports(DesignSpec("CRMD", PopulationDims(3, 3, 1, 1)))}
    assert len(got) == 6


def test_enumeration_matches_naive_loop():
    spec = smrd(4, 4, 2, 2)
    bank = normal_bank(spec.dims, 3)
    res = enumerate_design_moments(spec, bank, STATS)
    b = {w.value: bank[w].tolist() for w in SMRD_TYPES}
    vals = oracles.naive_enumerate(b, 2, 2, lambda m, r, c: {**{f"Y_{k}": v for k, v in m.items()},
                                                              **oracles.naive_effects(m)})
    mean, cov = oracles.moments(vals)
    for s in STATS:
        assert res.mean[s] == pytest.approx(mean[s], abs=1e-12)
        assert res.var[s] == pytest.approx(cov[(s, s)], abs=1e-12)
    assert res.covariance("Y_c", "Y_t") == pytest.approx(cov[("Y_c", "Y_t")], abs=1e-12)


@pytest.mark.parametrize("threads,chunk", [(1, 256), (4, 256), (1, 7), (3, 5)])
def test_enumeration_invariant_to_threads_and_chunks(threads, chunk):
    spec = smrd(5, 5, 2, 2)
    bank = normal_bank(spec.dims, 1)
    ref = enumerate_design_moments(spec, bank, STATS)
    res = enumerate_design_moments(spec, bank, STATS, threads=threads, chunk=chunk)
    for s in STATS:
        assert res.mean[s] == pytest.approx(ref.mean[s], abs=1e-12)
        assert res.var[s] == pytest.approx(ref.var[s], abs=1e-12)


def test_enumeration_table_order_is_reproducible():
    spec = smrd(3, 4, 1, 2)
    bank = normal_bank(spec.dims, 2)
    a = enumerate_design_moments(spec, bank, STATS, keep_table=True, threads=2, chunk=4)
    b = enumerate_design_moments(spec, bank, STATS, keep_table=True)
    assert np.array_equal(a.table, b.table)


def test_cap_raises():
    with pytest.raises(SupportTooLargeError):
        enumerate_design_moments(smrd(6, 6, 3, 3), normal_bank(PopulationDims(6, 6, 3, 3)), STATS, cap=100)


def test_unknown_statistic():
    with pytest.raises(MRDError):
        enumerate_design_moments(smrd(2, 2, 1, 1), normal_bank(PopulationDims(2, 2, 1, 1)), ["nope"])


def test_custom_statistic_callable():
    def corner(Y, types, dims):
        return float(Y[0, 0])

    res = enumerate_design_moments(smrd(2, 2, 1, 1), normal_bank(PopulationDims(2, 2, 1, 1)), [corner])
    assert res.names == ("corner",)


def test_constant_bank_zero_variance():
    bank = PotentialOutcomeBank(np.full((4, 4, 4), 2.5))
    res = enumerate_design_moments(smrd(4, 4, 2, 2), bank, STATS + ["sigma_t"])
    assert all(abs(res.var[s]) < 1e-28 for s in STATS)
    assert res.mean["Y_t"] == 2.5 and abs(res.mean["sigma_t"]) < 1e-15


def test_montecarlo_within_four_standard_errors():
    spec = smrd(6, 6, 3, 3)
    bank = normal_bank(spec.dims, 4)
    mc = montecarlo_design_moments(spec, bank, STATS, replicas=2000, seed=11)
    exact = bank_moments(bank, spec.dims)
    for w in SMRD_TYPES:
        s = f"Y_{w.value}"
        assert abs(mc.mean[s] - bank[w].mean()) <= 4 * mc.se_mean[s]
        assert abs(mc.var[s] - exact.V[w]) <= 4 * mc.se_var[s]


def test_montecarlo_ignores_threads():
    spec = smrd(4, 5, 2, 2)
    bank = normal_bank(spec.dims)
    a = montecarlo_design_moments(spec, bank, STATS, 50, seed=3, threads=1)
    b = montecarlo_design_moments(spec, bank, STATS, 50, seed=3, threads=4)
    assert np.array_equal(a.table, b.table)


def test_jackknife_matches_textbook_mean_se():
    x = np.random.default_rng(0).normal(size=(40, 2))
    se_m, se_v = jackknife_se(x)
    assert np.allclose(se_m, x.std(axis=0, ddof=1) / np.sqrt(40))
    assert np.all(se_v > 0)


def test_cached_supports_match_fresh_enumeration():
    spec = smrd(4, 5, 2, 3)
    fresh = [t.codes.tobytes() for t in iter_supports(spec)]
    assert [t.codes.tobytes() for t in supports(spec)] == fresh
    assert [t.codes.tobytes() for t in supports(spec)] == fresh
