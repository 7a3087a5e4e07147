import json

import pytest

from hermitelab.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from hermitelab.config import ConfigError, ExperimentConfig, dumps
from hermitelab.process import SamplePath

SMALL_SCAN = ["--T-grid", "[8,16,32,64,128]", "--replications", "200", "--dt", "0.5"]


def run(tmp_path, *argv):
    code = main(list(argv) + ["--output-root", str(tmp_path)])
    dirs = [d for d in tmp_path.iterdir()]
    return code, dirs


def write_config(tmp_path, data):
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps(data))
    return str(f)


def test_rank_example(tmp_path, capsys):
    code, dirs = run(tmp_path, "rank", "--polynomial", "0,0,0,1")
    assert code == EXIT_OK
    out = json.loads((dirs[0] / "result.json").read_text())
    assert out["rank"] == 1 and out["expansion"] == {"1": 3, "3": 1}
    line = capsys.readouterr().out.strip()
    assert line.startswith("rank: 1") and "\n" not in line


def test_power_count_example(tmp_path):
    code, dirs = run(tmp_path, "power-count", "--dimension", "1", "--functionals", "[[1]]",
                     "--exponents", "[[-1, -2]]")
    out = json.loads((dirs[0] / "result.json").read_text())
    assert code == EXIT_OK
    assert out["finite"] == "CONDITIONS_VIOLATED" and out["witness"]["d0"] == 0


def test_config_echo_and_flag_precedence(tmp_path):
    cfg = write_config(tmp_path, {"schema_version": 1, "subcommand": "combinatorics",
                                  "params": {"n": 2, "q": 3}})
    out_root = tmp_path / "out"
    code = main(["combinatorics", "--config", cfg, "--q", "2", "--name", "combo",
                 "--output-root", str(out_root)])
    assert code == EXIT_OK
    echoed = json.loads((out_root / "combo" / "config.json").read_text())
    assert echoed["params"] == {"n": 2, "q": 2, "order": None}
    assert json.loads((out_root / "combo" / "result.json").read_text())["count"] == 3


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("HERMITELAB_OUTPUT_ROOT", str(tmp_path / "env"))
    assert main(["rank", "--polynomial", "[0,0,1]", "--name", "r"]) == EXIT_OK
    assert (tmp_path / "env" / "r" / "result.json").exists()


@pytest.mark.parametrize("data,match", [
    ({"schema_version": 2, "params": {}}, "schema_version"),
    ({"params": {"nope": 1}}, "unknown"),
    ({"extra": 1}, "unknown top-level"),
    ({"params": {"replications": "many"}}, "integer"),
    ({"subcommand": "rank"}, "not 'scan-scaling'"),
])
def test_config_validation(data, match):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_dict(data, subcommand="scan-scaling")


def test_validation_exit_code_and_no_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, {"params": {"nope": 1}})
    (tmp_path / "o").mkdir()
    code, dirs = run(tmp_path / "o", "rank", "--config", cfg)
    assert code == EXIT_CONFIG and dirs == []
    assert "invalid configuration" in capsys.readouterr().out


def test_precondition_exit_code(tmp_path):
    (tmp_path / "o").mkdir()
    code, dirs = run(tmp_path / "o", "scan-scaling", "--replications", "50")
    assert code == EXIT_CONFIG and dirs == []


def test_numerical_failure_removes_partial_outputs(tmp_path):
    (tmp_path / "o").mkdir()
    code, dirs = run(tmp_path / "o", "scan-scaling", *SMALL_SCAN, "--q", "1", "--H", "0.6",
                     "--kernel", '{"kind": "tabulated", "samples": [0.0], "dt": 0.5}', "--plot", "false")
    assert code == EXIT_NUMERIC
    assert dirs == []


def test_scan_outputs_and_rerun_is_byte_identical(tmp_path):
    args = ["scan-scaling", *SMALL_SCAN, "--q", "2", "--H", "0.8", "--internal-per-step", "2",
            "--pilot-paths", "2", "--name", "s"]
    files = {}
    for threads in ("1", "3"):
        root = tmp_path / threads
        assert main(args + ["--threads", threads, "--output-root", str(root)]) == EXIT_OK
        files[threads] = {p.name: p.read_bytes() for p in (root / "s").iterdir()}
    assert files["1"] == files["3"]
    assert set(files["1"]) == {"config.json", "result.json", "scaling.csv", "scaling.svg"}
    result = json.loads(files["1"]["result.json"])
    assert result["report"]["predicted_slope"] == pytest.approx(1.6)
    assert "slope_se" in result["report"]
    header = files["1"]["scaling.csv"].decode().splitlines()[0]
    assert header == "T,var,se,replications"
    assert files["1"]["scaling.svg"].startswith(b"<svg")


def test_simulate_binary_round_trip(tmp_path):
    code, dirs = run(tmp_path, "simulate", "--q", "2", "--H", "0.75", "--t-max", "4", "--dt", "0.25",
                     "--format", "binary", "--seed", "3")
    assert code == EXIT_OK
    path = SamplePath.from_binary(dirs[0] / "path.hlsp")
    assert path.values.size == 17 and path.seed == 3 and path.values[0] == 0.0


def test_simulate_moving_average_csv(tmp_path):
    code, dirs = run(tmp_path, "simulate", "--q", "1", "--H", "0.7", "--kernel", '{"kind": "exponential"}',
                     "--t-max", "8", "--dt", "0.5")
    assert code == EXIT_OK
    lines = (dirs[0] / "path.csv").read_text().splitlines()
    assert lines[0] == "time,value" and len(lines) == 18
    assert json.loads((dirs[0] / "result.json").read_text())["exact_stationary_variance"] > 0


def test_hou_small(tmp_path):
    code, dirs = run(tmp_path, "hou", "--q", "1", "--H", "0.7", "--T", "64", "--dt", "0.5",
                     "--replications", "4")
    assert code == EXIT_OK
    out = json.loads((dirs[0] / "result.json").read_text())
    assert out["target"] == pytest.approx(out["rho0"])
    assert len((dirs[0] / "averages.csv").read_text().splitlines()) == 5


@pytest.mark.parametrize("quantity,extra,key", [
    ("c_Hq", [], "closed_form"),
    ("hls", ["--alpha", "[1]"], "status"),
    ("limit", ["--q", "3", "--polynomial", "0,0,0,1"], "K1"),
    ("ma_covariance", ["--lag", "2.0"], "value"),
    ("breuer_major", ["--H", "0.55"], "value"),
])
def test_constants_quantities(tmp_path, quantity, extra, key):
    code, dirs = run(tmp_path, "constants", "--quantity", quantity, *extra)
    assert code == EXIT_OK
    assert key in json.loads((dirs[0] / "result.json").read_text())


def test_constants_unknown_quantity(tmp_path):
    code, dirs = run(tmp_path, "constants", "--quantity", "nope")
    assert code == EXIT_CONFIG and dirs == []


def test_dumps_uses_round_trip_floats():
    x = 0.1 + 0.2
    assert json.loads(dumps({"x": x}))["x"] == x
    assert repr(x) in dumps({"x": x})
