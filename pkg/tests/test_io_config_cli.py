import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from conftest import junction_cavity, sawtooth_spec
from weaklink import io
from weaklink.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from weaklink.config import load_config
from weaklink.errors import ConfigError
from weaklink.fitting import curve_model

SHIPPED = sorted(p.name for p in resources.files("weaklink").joinpath("configs").iterdir()
                 if p.name.endswith(".json"))

CIRCUIT = {"e_c_sigma": 0.0074, "e_c_delta": 0.97, "e_ls": 568.0, "e_lp": 452.0,
           "weak_link": {"type": "jj", "e0": 973.0, "chi": 0.99995}}
CAVITY = {"f_a": 8.07, "f_b": 12.02, "g_a": 1.73, "g_b": 2.12}


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err):
    return json.loads(err.strip().splitlines()[-1])


# configuration ----------------------------------------------------------------


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_configs_load(name):
    load_config(resources.files("weaklink").joinpath("configs", name))


def test_malformed_json_names_the_document(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"circuit": {')
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.key == "<json>"


@pytest.mark.parametrize("patch,key", [
    ({"circuit": {**CIRCUIT, "e_ls": -1.0}}, "circuit.e_ls"),
    ({"circuit": {**CIRCUIT, "weak_link": {"type": "jj", "e0": 973.0, "chi": 1.5}}},
     "circuit.weak_link.chi"),
    ({"cavity": {**CAVITY, "f_a": "8"}}, "cavity.f_a"),
    ({"sweep": {"start": 0.0}}, "sweep.stop"),
    ({"sweep": {"start": 0.0, "stop": 1.0, "direction": "sideways"}}, "sweep.direction"),
    ({"qps": {"ramp_rate": -1.0}}, "qps.ramp_rate"),
    ({"bogus": 1}, "bogus"),
    ({"fit": {"free": ["e0"], "bounds": {"e0": [2.0, 1.0]}}}, "fit.bounds.e0"),
    ({"fit": {"free": ["nonsense"], "bounds": {}}}, "fit.free[0]"),
])
def test_schema_errors_name_the_key(tmp_path, patch, key):
    data = {"circuit": CIRCUIT, "cavity": CAVITY, **patch}
    with pytest.raises(ConfigError) as exc:
        load_config(write_config(tmp_path, data))
    assert exc.value.key == key


def test_config_error_exit_code_and_json(tmp_path, capsys):
    path = write_config(tmp_path, {"circuit": {**CIRCUIT, "e_lp": 0.0}})
    code, _, err = run(["cpr", "--config", path, "--out", str(tmp_path)], capsys)
    assert code == EXIT_CONFIG
    payload = error_of(err)
    assert payload["error"] == "config" and payload["key"] == "circuit.e_lp"


def test_missing_config_file_is_io_error(tmp_path, capsys):
    code, _, err = run(["cpr", "--config", str(tmp_path / "absent.json")], capsys)
    assert code == EXIT_IO
    assert error_of(err)["error"] == "io"


def test_missing_required_block(tmp_path, capsys):
    path = write_config(tmp_path, {"circuit": CIRCUIT})
    code, _, err = run(["sweep", "--config", path, "--out", str(tmp_path)], capsys)
    assert code == EXIT_CONFIG and error_of(err)["key"] == "sweep"


def test_numerical_failure_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, {"circuit": CIRCUIT,
                                   "sweep": {"start": 0.0, "stop": 0.02, "step": 0.01, "initial_well": 4}})
    code, _, err = run(["sweep", "--config", path, "--out", str(tmp_path)], capsys)
    assert code == EXIT_NUMERIC
    assert "VanishedWellError" in error_of(err)["message"]


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(["cpr", "--bogus"], capsys)
    assert code == EXIT_CONFIG and error_of(err)["error"] == "usage"


# io helpers -------------------------------------------------------------------


def test_csv_round_trip_with_hash_and_footer(tmp_path):
    path = io.write_csv(tmp_path / "t.csv", "a,b", [(1.0, 2.5), (np.nan, 3)], "abc",
                        footer=[("censored", 1, 0.5)])
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256=abc"
    assert lines[-1] == "censored,1,0.5"
    header, cols = io.read_csv(path)
    assert header == ["a", "b"]
    assert cols["b"].tolist() == [2.5, 3.0] and np.isnan(cols["a"][1])


def test_config_hash_is_order_independent():
    assert io.config_hash({"a": 1, "b": [1, 2]}) == io.config_hash({"b": [1, 2], "a": 1})
    assert io.config_hash({"a": 1}) != io.config_hash({"a": 2})


# commands ---------------------------------------------------------------------


def cpr_config(tmp_path):
    return write_config(tmp_path, {"circuit": CIRCUIT,
                                   "cpr": {"phi_min": -3.0, "phi_max": 3.0, "n_points": 41,
                                           "chi_values": [0.0, 0.99995]}})


def test_cpr_outputs_are_bit_identical(tmp_path, capsys):
    cfg = cpr_config(tmp_path)
    files = {}
    for run_dir in ("a", "b"):
        out = tmp_path / run_dir
        code, stdout, _ = run(["cpr", "--config", cfg, "--out", str(out), "--format", "both"], capsys)
        assert code == EXIT_OK
        assert sorted(Path(p).name for p in json.loads(stdout)["outputs"]) == ["cpr.csv", "cpr.svg"]
        files[run_dir] = {p.name: p.read_bytes() for p in out.iterdir()}
    assert files["a"] == files["b"]
    digest = json.loads(stdout)["config_sha256"]
    assert files["a"]["cpr.csv"].decode().startswith(f"# config_sha256={digest}")
    assert f"config_sha256={digest}".encode() in files["a"]["cpr.svg"]


def test_cpr_table_contents(tmp_path, capsys):
    code, _, _ = run(["cpr", "--config", cpr_config(tmp_path), "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    header, cols = io.read_csv(tmp_path / "cpr.csv")
    assert header[:2] == ["phi_rad", "chi"]
    sine = cols["chi"] == 0.0
    assert np.allclose(cols["current_ghz_per_rad"][sine], 973.0 * np.sin(cols["phi_rad"][sine]))


def test_cpr_empty_range_is_usage_error(tmp_path, capsys):
    code, _, err = run(["cpr", "--config", cpr_config(tmp_path), "--phi-min", "1", "--phi-max", "1"],
                       capsys)
    assert code == EXIT_CONFIG and error_of(err)["error"] == "usage"


def test_environment_overrides_and_flag_precedence(tmp_path, capsys, monkeypatch):
    cfg = cpr_config(tmp_path)
    monkeypatch.setenv("WEAKLINK_CONFIG", cfg)
    monkeypatch.setenv("WEAKLINK_OUT", str(tmp_path / "env"))
    monkeypatch.setenv("WEAKLINK_FORMAT", "svg")
    assert run(["cpr"], capsys)[0] == EXIT_OK
    assert [p.name for p in (tmp_path / "env").iterdir()] == ["cpr.svg"]
    assert run(["cpr", "--out", str(tmp_path / "flag"), "--format", "csv"], capsys)[0] == EXIT_OK
    assert [p.name for p in (tmp_path / "flag").iterdir()] == ["cpr.csv"]
    monkeypatch.setenv("WEAKLINK_SEED", "x")
    code, _, err = run(["cpr"], capsys)
    assert code == EXIT_CONFIG and error_of(err)["key"] == "WEAKLINK_SEED"


def test_sweep_command_writes_curves(tmp_path, capsys):
    cfg = write_config(tmp_path, {"circuit": CIRCUIT, "cavity": CAVITY,
                                  "sweep": {"start": 1.5, "stop": 1.6, "step": 0.01,
                                            "initial_well": 0, "direction": "up"}})
    code, _, _ = run(["sweep", "--config", cfg, "--out", str(tmp_path), "--format", "both"], capsys)
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert len(summary["up"]["jump_fluxes"]) == 1
    assert 1.56 < summary["up"]["jump_fluxes"][0] <= 1.6
    _, cols = io.read_csv(tmp_path / "sweep_up.csv")
    assert cols["flux_phi0"].size == 11
    assert (tmp_path / "sweep.svg").exists()


def test_phase_slip_sweep_command(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "circuit": {"e_c_sigma": 0.0052, "e_c_delta": 0.97, "e_ls": 840.0, "e_lp": 305.0,
                    "weak_link": {"type": "qps", "e_q": 60.0, "e_lq": 20432.68910084765}},
        "sweep": {"start": 1.4, "stop": 1.7, "step": 0.05, "initial_well": 0}})
    code, _, _ = run(["sweep", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    jumps = json.loads((tmp_path / "sweep_summary.json").read_text())["up"]["jump_fluxes"]
    assert len(jumps) == 1 and jumps[0] == pytest.approx(1.56, abs=0.05)


def test_spectrum_command(tmp_path, capsys):
    cfg = write_config(tmp_path, {"spectrum": {
        "e_c": 1.0, "e_l": 0.5, "e_j": 1.0, "chi": 0.5, "e_lq": 3.0, "e_q": 1.0,
        "flux_min": 0.0, "flux_max": 0.5, "n_flux": 2, "n_levels": 4, "compare_levels": 2}})
    code, _, _ = run(["spectrum", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "spectrum_summary.json").read_text())
    assert len(summary["delta_ghz"]) == 2
    assert summary["unconverged_points"] == {"jj": 0, "qps": 0}
    _, cols = io.read_csv(tmp_path / "spectrum_jj.csv")
    assert cols["level"].size == 8


def test_fit_command(tmp_path, capsys):
    flux = np.linspace(0.0, 1.5, 10)
    io.write_csv(tmp_path / "data.csv", "flux_phi0,f_ghz",
                 zip(flux, curve_model(flux)(sawtooth_spec(), junction_cavity())))
    cfg = write_config(tmp_path, {"circuit": {**CIRCUIT, "weak_link": {"type": "jj", "e0": 1000.0,
                                                                       "chi": 0.99995}},
                                  "cavity": CAVITY, "sweep": {"start": 0.0, "stop": 1.5, "initial_well": 0},
                                  "fit": {"free": ["e0"], "bounds": {"e0": [900.0, 1100.0]},
                                          "max_iter": 60}})
    code, _, _ = run(["fit", "--config", cfg, "--data", str(tmp_path / "data.csv"),
                      "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    report = json.loads((tmp_path / "fit_report.json").read_text())
    assert report["parameters"]["e0"] == pytest.approx(973.0, rel=1e-3)


def test_synthetic_traces_to_lifetimes(tmp_path, capsys):
    traces = tmp_path / "traces"
    code, _, _ = run(["synth-traces", "--rate", str(np.log(1 / 0.59) / 400), "--window", "400",
                      "--count", "40", "--dt", "2", "--seed", "3", "--out", str(traces)], capsys)
    assert code == EXIT_OK
    assert len(list(traces.glob("trace_*.csv"))) == 40
    protocol = str(resources.files("weaklink").joinpath("configs", "lifetimes_protocol.json"))
    out = tmp_path / "hist"
    code, _, _ = run(["lifetimes", str(traces / "trace_*.csv"), "--config", protocol,
                      "--out", str(out), "--format", "both"], capsys)
    assert code == EXIT_OK
    lines = (out / "histogram.csv").read_text().splitlines()
    footer = lines[-1].split(",")
    assert footer[0] == "censored"
    with (out / "lifetimes.csv").open() as fh:
        per_trace = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
    assert len(per_trace) == 40
    assert int(footer[1]) == sum(int(r["censored"]) for r in per_trace)
    assert float(footer[2]) == pytest.approx(int(footer[1]) / 40)
    _, hist = io.read_csv(out / "histogram.csv")
    assert hist["count"].sum() + int(footer[1]) == 40
    assert (out / "histogram.svg").exists()


def test_lifetimes_without_matches_is_io_error(tmp_path, capsys):
    protocol = str(resources.files("weaklink").joinpath("configs", "lifetimes_protocol.json"))
    code, _, err = run(["lifetimes", str(tmp_path / "none_*.csv"), "--config", protocol,
                        "--out", str(tmp_path)], capsys)
    assert code == EXIT_IO


def test_calibrate_command(tmp_path, capsys):
    period, offset = 0.37, 0.12
    paths = []
    for direction in (1, -1):
        # both sweeps start at zero flux
        v = offset + direction * np.linspace(0.0, 1.5, 301)
        flux = (v - offset) / period
        # resonance snaps back up once per period past +-0.56 along the sweep
        f = 6.7 - 0.01 * ((direction * flux - 0.56) % 1.0)
        p = tmp_path / f"sweep_{direction:+d}.csv"
        io.write_csv(p, "voltage_v,f_ghz", zip(v, f))
        paths.append(str(p))
    code, _, _ = run(["calibrate", *paths, "--min-step", "5e-3", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    res = json.loads((tmp_path / "calibration.json").read_text())
    assert res["volts_per_phi0"] == pytest.approx(period, abs=0.005)
    assert res["zero_offset_volts"] == pytest.approx(offset, abs=0.005)


def test_calibrate_with_single_jump_branch_fails(tmp_path, capsys):
    v = np.linspace(0.0, 0.5, 51)
    f = np.where(v > 0.25, 6.71, 6.70)
    p = tmp_path / "one.csv"
    io.write_csv(p, "voltage_v,f_ghz", zip(v, f))
    code, _, err = run(["calibrate", str(p), str(p), "--min-step", "5e-3"], capsys)
    assert code == EXIT_CONFIG


def test_read_csv_stops_at_footer_with_same_width(tmp_path):
    path = io.write_csv(tmp_path / "h.csv", "lo,hi,count", [(0.0, 1.0, 3)], footer=[("censored", 2, 0.4)])
    _, cols = io.read_csv(path)
    assert cols["count"].tolist() == [3.0]
