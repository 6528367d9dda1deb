import json

import pytest

from loggpctl.harness.config import CONFIG_SCHEMA, OUT_DIR_ENV, ExperimentConfig, load_config, save_config
from loggpctl.validation import ConfigError


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.substeps == 20 and cfg.tau == 0.005 and cfg.dt == 2.5e-4
    assert cfg.n_ticks == 10_000
    assert cfg.gains_for("high").kp == 600.0


def test_round_trip(tmp_path):
    cfg = ExperimentConfig(output_dir="elsewhere", u_max=35.0)
    save_config(cfg, tmp_path / "c.json")
    assert json.loads((tmp_path / "c.json").read_text())["schema"] == CONFIG_SCHEMA
    assert load_config(tmp_path / "c.json", env={}) == cfg


def test_partial_file_uses_defaults(tmp_path):
    (tmp_path / "c.json").write_text('{"schema": "%s", "gp": {"max_points": 50}}' % CONFIG_SCHEMA)
    cfg = load_config(tmp_path / "c.json", env={})
    assert cfg.gp.max_points == 50 and cfg.gp.sigma_f == ExperimentConfig().gp.sigma_f


@pytest.mark.parametrize("text, match", [
    ('{"schema": "loggpctl.config/99"}', "schema"),
    ('{"bogus": 1}', "unknown keys"),
    ('{"gp": {"lengthscales": [1, 2]}}', "lengthscales"),
    ('{"gp": {"rate_hz": 300}}', "divide"),
    ('{"plant": {"kind": "boat"}}', "plant.kind"),
    ('{"study": {"variants": ["low", "nope"]}}', "nope"),
    ('{"reference": {"period": -1}}', "period"),
    ("{not json", "invalid JSON"),
])
def test_rejects_bad_files(tmp_path, text, match):
    (tmp_path / "c.json").write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config(tmp_path / "c.json", env={})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json", env={})


def test_env_overrides_only_output_dir(tmp_path):
    cfg = ExperimentConfig(u_max=30.0)
    save_config(cfg, tmp_path / "c.json")
    env = {OUT_DIR_ENV: str(tmp_path / "o"), "LOGGPCTL_U_MAX": "1.0"}
    loaded = load_config(tmp_path / "c.json", env=env)
    assert loaded.output_dir == str(tmp_path / "o")
    assert loaded.replace(output_dir=cfg.output_dir) == cfg
    assert load_config(None, env=env).output_dir == str(tmp_path / "o")
    assert load_config(None, env={OUT_DIR_ENV: ""}).output_dir == "out"


def test_summary_json_accepted_as_config(tmp_path):
    cfg = ExperimentConfig(u_max=33.0)
    (tmp_path / "s.json").write_text(json.dumps({"schema": "loggpctl.summary/1", "config": cfg.to_dict()}))
    assert load_config(tmp_path / "s.json", env={}) == cfg
