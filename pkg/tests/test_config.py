import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from goiot.config import ScenarioConfig, from_dict, load_config, save_config
from goiot.errors import ConfigInvalid


@pytest.mark.parametrize("scenario", ["sensing", "inference", "fl"])
def test_round_trip_is_identity(scenario, tmp_path):
    cfg = ScenarioConfig.default(scenario)
    path = tmp_path / "c.yaml"
    save_config(cfg, path)
    again = load_config(path)
    assert again == cfg
    assert again.to_yaml() == cfg.to_yaml()


@settings(max_examples=50, deadline=None)
@given(V=st.floats(0, 1e6), seed=st.integers(0, 2**31), slots=st.integers(0, 10**6),
       target=st.floats(0, 0.99), F=st.integers(1, 40))
def test_round_trip_random_sensing(V, seed, slots, target, F):
    cfg = ScenarioConfig.default("sensing", V=V, seed=seed, slots=slots, effectiveness_target=target,
                                 subspace_dimension=F)
    assert from_dict(yaml.safe_load(cfg.to_yaml())) == cfg


def test_partial_config_gets_defaults():
    cfg = from_dict({"scenario": "inference", "V": 10, "inference": {"accuracy_target": 0.9}})
    assert cfg.params.accuracy_target == 0.9 and cfg.params.n_devices == 5
    assert cfg.radio.pathloss_exponent == 3.5 and cfg.slots == 20000


@pytest.mark.parametrize("data", [
    {"scenario": "nope"},
    {"scenario": "fl", "bogus": 1},
    {"scenario": "fl", "fl": {"bogus": 1}},
    {"scenario": "fl", "radio": {"bogus": 1}},
    {"scenario": "fl", "sensing": {}},
    {"scenario": "fl", "slots": -1},
    {"scenario": "fl", "slots": 1.5},
    {"scenario": "fl", "V": -1.0},
    {"scenario": "fl", "burn_in": 1.0},
    {"scenario": "fl", "fl": {"schedule": [[5, 0.7]]}},
    {"scenario": "fl", "fl": {"bits_grid": [0, 4]}},
    {"scenario": "fl", "fl": {"A_max": 1.5}},
    {"scenario": "sensing", "sensing": {"effectiveness_target": 1.0}},
    {"scenario": "sensing", "sensing": {"subspace_dimension": 500}},
    {"scenario": "sensing", "sensing": {"normalization": "max"}},
    {"scenario": "sensing", "sensing": {"n_devices": 0}},
    {"scenario": "inference", "inference": {"family": "jpeg"}},
    {"scenario": "inference", "inference": {"arrivals": "bursty"}},
    {"scenario": "inference", "inference": {"distance_min": 700.0}},
    {"scenario": "inference", "inference": {"levels": [[100, 1, 0.9]]}},
    {"scenario": "inference", "radio": {"pathloss_exponent": 1.0}},
    {"scenario": "inference", "radio": {"noise_psd": 0}},
])
def test_invalid_configs_rejected(data):
    with pytest.raises(ConfigInvalid):
        from_dict(data)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: [unclosed")
    with pytest.raises(ConfigInvalid):
        load_config(bad)


def test_replace_validates():
    cfg = ScenarioConfig.default("fl")
    assert cfg.replace(V=3.0).V == 3.0
    with pytest.raises(ConfigInvalid):
        cfg.replace(latency_bound=-1.0)
    with pytest.raises(ConfigInvalid):
        cfg.replace(nonsense=1)


def test_exponent_floats_without_dot_are_numbers(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("scenario: fl\nradio: {bandwidth_per_device: 1e6, noise_psd: 1e-17}\nfl: {es_kappa: 1e-29}\n")
    cfg = load_config(path)
    assert cfg.radio.bandwidth_per_device == 1e6 and cfg.params.es_kappa == 1e-29
