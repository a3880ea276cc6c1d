import json

import pytest

from sto_lab.cli import main, sanitize
from sto_lab.config import SCHEMA, build_model, load_config, shipped_configs

SMALL = {
    "id": "small",
    "seed": 3,
    "model": {"max_mode": 8, "map": {"degree": 2, "epsilon": 0.05, "perturbation": {"sin": {"1": 1.0}}},
              "coupling": {"variant": "translation", "delta": 1.0, "H": {"cos": {"1": 1.0}}}},
    "experiment": {"type": "losc", "ensemble": 4, "n_steps": 8},
}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=2))
    return str(p)


def with_changes(**parts):
    cfg = json.loads(json.dumps(SMALL))
    for key, value in parts.items():
        cfg[key].update(value) if isinstance(value, dict) else cfg.__setitem__(key, value)
    return cfg


def test_shipped_configs_validate():
    names = shipped_configs()
    assert len(names) >= 10
    for path in names.values():
        cfg = load_config(path)
        build_model(cfg)


def test_zero_modes_is_schema_error(tmp_path, capsys):
    cfg = with_changes(model={"max_mode": 0})
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "max_mode" in err and "cfg.json:" in err


def test_unknown_keys_rejected(tmp_path, capsys):
    cfg = with_changes(experiment={"multistart": 4})
    assert main(["validate", write(tmp_path, cfg)]) == 2
    assert "$.experiment.multistart" in capsys.readouterr().err
    cfg = with_changes(extra=1)
    assert main(["validate", write(tmp_path, cfg)]) == 2


def test_wrong_coupling_fields_rejected(tmp_path):
    cfg = with_changes(model={"coupling": {"variant": "stochastic", "delta": 0.1, "sigma": 0.3,
                                           "H": {}}})
    assert main(["validate", write(tmp_path, cfg)]) == 2


def test_bad_json_reports_position(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{"id": "x",\n  "model": }')
    assert main(["validate", str(p)]) == 2
    assert "broken.json:2:" in capsys.readouterr().err


def test_non_expanding_model_is_usage_error(tmp_path):
    cfg = with_changes(model={"map": {"degree": 2, "epsilon": 0.2, "perturbation": {"sin": {"1": 1.0}}}})
    assert main(["validate", write(tmp_path, cfg)]) == 2


def test_run_writes_summary_and_traces(tmp_path):
    assert main(["run", write(tmp_path, SMALL), "--out", str(tmp_path)]) == 0
    out = tmp_path / "small"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["flags"]["delta=1/gamma_positive"]
    assert (out / "losc_delta_1.csv").read_text().startswith("n,value,bound")


def test_determinism(tmp_path):
    path = write(tmp_path, SMALL)
    main(["run", path, "--out", str(tmp_path / "a")])
    main(["run", path, "--out", str(tmp_path / "b"), "--threads", "2"])
    a = (tmp_path / "a" / "small" / "summary.json").read_bytes()
    b = (tmp_path / "b" / "small" / "summary.json").read_bytes()
    assert a == b


def test_nonconvergence_exits_1_with_partial_summary(tmp_path):
    cfg = with_changes()
    cfg["experiment"] = {"type": "fixed-point", "solver": "picard", "max_iter": 1, "tol": 1e-14,
                         "f0": {"cos": {"8": 0.3}}}
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == 1
    summary = json.loads((tmp_path / "small" / "summary.json").read_text())
    assert summary["flags"]["converged"] is False and not summary["passed"]
    assert summary["results"]["fixed_point"]["iterations"] == 1


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("STO_LAB_THREADS", "2")
    assert main(["run", write(tmp_path, SMALL), "--out", str(tmp_path)]) == 0
    assert main(["run", write(tmp_path, SMALL), "--threads", "0"]) == 2


def test_list_examples(capsys):
    assert main(["list-examples"]) == 0
    assert "linear_translation_losc.json" in capsys.readouterr().out


def test_stochastic_multistart_config(tmp_path):
    assert main(["run", "stochastic_weak_multistart", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "stochastic_weak_multistart" / "summary.json").read_text())
    assert summary["results"]["unique_fixed_point"] is True


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(shipped_configs()))
def test_shipped_config_exit_status(name, tmp_path):
    cfg = load_config(shipped_configs()[name])
    assert main(["run", name, "--out", str(tmp_path)]) == cfg.get("expect_exit", 0)


def test_sanitize():
    assert sanitize({"a": float("nan"), "b": [float("inf"), 1.5], "c": (1, True)}) == \
        {"a": None, "b": [None, 1.5], "c": [1, True]}


def test_schema_lists_every_experiment():
    assert set(SCHEMA["properties"]["experiment"]["properties"]["type"]["enum"]) == \
        {"fixed-point", "differential", "losc", "sweep", "memory", "audit", "ensemble"}
