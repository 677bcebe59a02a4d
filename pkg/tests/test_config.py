import json

import pytest

from mrdesign.config import DEFAULT_LADDER, ConfigError, build_config, load_config

BASE = {
    "seed": 3,
    "design": {"kind": "SMRD-conjunctive", "dims": {"I": 10, "J": 12, "I_T": 4, "J_T": 5}},
    "outcome": {"model": "gaussian_ali", "mu": {"c": 0, "ib": 1, "is": 3, "t": 4},
                "sigma": {"c": 2, "ib": 0.5, "is": 0.2, "t": 8}},
}


def test_defaults_are_applied():
    cfg = build_config(BASE)
    assert cfg.replicas == 1000 and cfg.quantiles == (0.025, 0.975)
    assert cfg.cross_weight == 2.0 and cfg.histogram_bins == 50 and cfg.figures
    assert cfg.ladder == DEFAULT_LADDER and cfg.ladder_fractions == (0.2, 0.4)
    assert cfg.oracle == {"budget": 100, "banks": 5, "fault_injection": False}
    assert cfg.design.dims.I_T == 4


@pytest.mark.parametrize(
    "patch,where",
    [
        ({"replica": 5}, "config"),
        ({"outcome": {**BASE["outcome"], "sigma": {"c": 1, "ib": 1, "is": 1}}}, "config.outcome.sigma"),
        ({"design": {**BASE["design"], "colour": 1}}, "config.design"),
        ({"design": {**BASE["design"], "dims": {"I": 0, "J": 2, "I_T": 0, "J_T": 1}}}, "config.design.dims.I"),
        ({"quantiles": [0.1]}, "config.quantiles"),
        ({"outcome": {"model": "bank_file"}}, "config.outcome"),
    ],
)
def test_invalid_documents_name_the_path(patch, where):
    with pytest.raises(ConfigError) as exc:
        build_config({**BASE, **patch})
    assert where in str(exc.value)


def test_infeasible_dims_are_config_errors():
    doc = {**BASE, "design": {"kind": "SMRD-conjunctive", "dims": {"I": 3, "J": 3, "I_T": 5, "J_T": 1}}}
    with pytest.raises(ConfigError, match="config.design"):
        build_config(doc)


def test_seed_required_and_overridable():
    doc = {k: v for k, v in BASE.items() if k != "seed"}
    with pytest.raises(ConfigError, match="seed"):
        build_config(doc)
    assert build_config(doc, seed=9).seed == 9
    assert build_config(BASE, seed=11).seed == 11
    with pytest.raises(ConfigError):
        build_config(BASE, seed=-1)


def test_digest_tracks_effective_config():
    a = build_config(BASE)
    assert a.digest == build_config(json.loads(json.dumps(BASE))).digest
    assert a.digest != build_config(BASE, seed=4).digest
    assert a.digest == build_config({**BASE, "replicas": 1000}).digest


def test_load_config_resolves_relative_paths(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**BASE, "outcome": {"model": "bank_file", "path": "bank.csv"}}))
    cfg = load_config(p)
    assert cfg.resolve("bank.csv") == tmp_path / "bank.csv"


def test_load_config_reports_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
