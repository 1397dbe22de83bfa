# tests/test_config.py

import pathlib

import pytest

from ocs_arc.config import default_config, load_config
from ocs_arc.settings import ExperimentConfig, expand_grid, parse_config, validate_config
from ocs_arc.selection_runtime.utils import ConfigError

ROOT = pathlib.Path(__file__).resolve().parents[1]

ENV_VARS = ("OCS_LOG_LEVEL", "OCS_LOG_JSON", "OCS_OUT_DIR", "OCS_WORKERS", "OCS_BASE_SEED")


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _raw(**sections):
    cfg = default_config()
    for section, values in sections.items():
        cfg[section].update(values)
    return cfg


def _fields(diagnostics):
    return {d.field for d in diagnostics}


def _write_yaml(tmp_path, text: str):
    path = tmp_path / "exp.yaml"
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def test_defaults_are_valid():
    assert validate_config(default_config()) == []
    cfg = parse_config(default_config())
    assert cfg.selection.r == [0.99]
    assert cfg.selection.clip_constant == 1000.0
    assert (cfg.split.n_train, cfg.split.n_cal, cfg.split.n_test) == (1000, [1000], 600)


@pytest.mark.parametrize("q", [1.5, 0.0, -0.2])
def test_out_of_range_level_is_reported_on_q(q):
    assert "selection.q" in _fields(validate_config(_raw(selection={"q": q})))


def test_scalar_sweep_values_become_lists():
    cfg = parse_config(_raw(selection={"q": 0.2, "r": 0.993}, split={"n_cal": 2000}))
    assert cfg.selection.q == [0.2]
    assert cfg.selection.r == [0.993]
    assert cfg.split.n_cal == [2000]


def test_unknown_keys_are_rejected():
    raw = _raw()
    raw["selection"]["alpha"] = 0.1
    assert "selection.alpha" in _fields(validate_config(raw))


def test_mocs_without_region_is_reported_on_region():
    raw = _raw(data={"source": "bivariate"}, selection={"methods": ["mocs_arc"], "scores": ["regional"]})
    assert "selection.region" in _fields(validate_config(raw))


@pytest.mark.parametrize(
    "region",
    [
        {"lower": [0.0], "upper": ["inf", "inf"]},
        {"lower": [1.0, 0.0], "upper": [0.0, "inf"]},
        {"lower": ["zero", 0.0], "upper": ["inf", "inf"]},
    ],
)
def test_malformed_regions_are_reported(region):
    raw = _raw(
        data={"source": "bivariate"},
        selection={"methods": ["mocs_arc"], "scores": ["regional"], "region": region},
    )
    assert "selection.region" in _fields(validate_config(raw))


@pytest.mark.parametrize(
    "sections, field",
    [
        ({"selection": {"methods": ["ocs_arc"], "scores": ["regional"]}}, "selection.methods"),
        ({"data": {"source": "bivariate"}}, "data.source"),
        ({"data": {"source": "csv"}}, "data.csv.path"),
        ({"evaluation": {"checkpoints": [100, 700]}}, "evaluation.checkpoints"),
        ({"model": {"kind": "forest"}}, "model.kind"),
    ],
)
def test_cross_field_problems_name_their_field(sections, field):
    assert field in _fields(validate_config(_raw(**sections)))


def test_parse_config_raises_with_every_diagnostic():
    raw = _raw(selection={"q": 2.0, "r": 1.0})
    with pytest.raises(ConfigError) as err:
        parse_config(raw)
    assert {"selection.q", "selection.r"} <= _fields(err.value.diagnostics)


# ---------------------------------------------------------------------------
# Loading and environment overrides
# ---------------------------------------------------------------------------

def test_load_config_merges_over_defaults(tmp_path):
    path = _write_yaml(tmp_path, "selection:\n  q: 0.2\n")
    raw = load_config(path)
    assert raw["selection"]["q"] == 0.2
    assert raw["selection"]["r"] == [0.99]
    assert raw["split"]["n_test"] == 600


def test_env_overrides_win(tmp_path, monkeypatch):
    monkeypatch.setenv("OCS_WORKERS", "4")
    monkeypatch.setenv("OCS_LOG_JSON", "yes")
    monkeypatch.setenv("OCS_LOG_LEVEL", "debug")
    cfg = parse_config(load_config(_write_yaml(tmp_path, "runtime:\n  workers: 2\n")))
    assert cfg.runtime.workers == 4
    assert cfg.logging.json_lines is True
    assert cfg.logging.level == "DEBUG"


def test_env_overrides_do_not_leak_into_defaults(monkeypatch):
    monkeypatch.setenv("OCS_OUT_DIR", "/tmp/elsewhere")
    assert default_config()["output"]["dir"] == "/tmp/elsewhere"
    monkeypatch.delenv("OCS_OUT_DIR")
    assert default_config()["output"]["dir"] == "runs/default"


def test_bad_env_value_is_a_config_error(tmp_path, monkeypatch):
    monkeypatch.setenv("OCS_WORKERS", "many")
    with pytest.raises(ConfigError):
        load_config(_write_yaml(tmp_path, "{}\n"))


@pytest.mark.parametrize("text", ["selection: [unclosed\n", "- just\n- a list\n"])
def test_unreadable_yaml_is_a_config_error(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write_yaml(tmp_path, text))


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize(
    "name",
    [
        "ocs_config.yaml",
        "experiments/synthetic.yaml",
        "experiments/arc_violation.yaml",
        "experiments/sensitivity.yaml",
        "experiments/multivariate.yaml",
        "experiments/candidates_csv.yaml",
    ],
)
def test_bundled_configs_validate(name):
    assert validate_config(load_config(ROOT / name)) == []


# ---------------------------------------------------------------------------
# Experiment grid
# ---------------------------------------------------------------------------

def test_grid_is_the_cartesian_product_in_fixed_order():
    cfg = parse_config(_raw(data={"setting": [1, 2], "sigma": [0.5, 1.0]}, selection={"r": [0.99, 0.999]}))
    ids = [c.experiment_id for c in expand_grid(cfg)]
    assert len(ids) == 8
    assert ids[0] == "s1-sigma0.5-ncal1000-q0.1-r0.99"
    assert ids[1] == "s1-sigma0.5-ncal1000-q0.1-r0.999"
    assert ids[-1] == "s2-sigma1-ncal1000-q0.1-r0.999"


def test_sensitivity_grid_has_twenty_four_cells():
    cfg = parse_config(load_config(ROOT / "experiments/sensitivity.yaml"))
    assert len(expand_grid(cfg)) == 2 * 3 * 4


def test_duplicate_sweep_values_are_rejected():
    cfg = parse_config(_raw(selection={"q": [0.1, 0.1]}))
    with pytest.raises(ConfigError):
        expand_grid(cfg)


def test_echo_round_trips_through_validation():
    cfg = parse_config(load_config(ROOT / "experiments/multivariate.yaml"))
    again = ExperimentConfig.model_validate(cfg.echo())
    assert again == cfg
    assert cfg.echo()["logging"]["json"] is False
