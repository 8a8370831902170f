import pytest

from tinyml_sim import SimConfig
from tinyml_sim.config import KEYS, ConfigError, dump_config, load_config, parse_config


def test_empty_is_defaults():
    cfg = parse_config("")
    assert cfg == SimConfig()
    assert cfg.energy_table.upload == 3000
    assert cfg.battery_capacity == 17_500_000
    assert cfg.anomaly_ratio == 0.05


def test_none_path_is_defaults():
    assert load_config(None) == SimConfig()


def test_upload_key():
    assert parse_config("upload_uwh = 3000").energy_table.upload == 3000
    assert parse_config("upload_uwh = 4_500").energy_table.upload == 4500


def test_comments_and_blank_lines():
    text = "# node\n\nanomaly_ratio = 0.2   # fraction\npolicy = dynamic\n"
    cfg = parse_config(text)
    assert (cfg.anomaly_ratio, cfg.policy) == (0.2, "dynamic")


def test_ratio_out_of_range_points_at_line():
    with pytest.raises(ConfigError) as err:
        parse_config("seed = 3\nanomaly_ratio = 1.5\n")
    assert err.value.line == 2 and err.value.key == "anomaly_ratio"
    assert "line 2" in str(err.value)


@pytest.mark.parametrize("text,line,key", [
    ("bogus = 1", 1, "bogus"),
    ("seed = x", 1, "seed"),
    ("\nonline_learning = maybe", 2, "online_learning"),
    ("seed = 1\nseed = 2", 2, "seed"),
    ("policy = random", 1, "policy"),
    ("upload_uwh = 0", 1, "upload_uwh"),
    ("just text", 1, None),
])
def test_errors(text, line, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert (err.value.line, err.value.key) == (line, key)


def test_cross_key_energy_rule():
    # each value is fine alone; together upload no longer exceeds capture
    with pytest.raises(ConfigError) as err:
        parse_config("capture_uwh = 5000\nupload_uwh = 4000")
    assert err.value.line is None


def test_energy_keys_validated_together():
    cfg = parse_config("upload_uwh = 100\ncapture_uwh = 50")
    assert cfg.energy_table.upload == 100 and cfg.energy_table.image_capture == 50


def test_anomaly_value_none():
    assert parse_config("anomaly_value_uwh = none").anomaly_value_uwh is None


def test_dump_round_trip():
    cfg = SimConfig(anomaly_ratio=0.3, policy="dynamic", seed=7, anomaly_value_uwh=None,
                    online_learning=True)
    assert parse_config(dump_config(cfg)) == cfg
    assert len(dump_config(cfg).splitlines()) == len(KEYS)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_load_file(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("battery_capacity_uwh = 1000000\n")
    assert load_config(p).battery_capacity == 1_000_000
