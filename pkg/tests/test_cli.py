import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from qsdvib import cli, observables, qsd


GAUSSIAN_PAPER_RUN = """\
mode = "qsd"

[initial]
kind = "gaussian"
x0_angstrom = 2.4

[bath]
lam = 1e-3
lam_unit = "au"

[propagation]
t_final_fs = 1600.0

[ensemble]
n_realizations = 2500
master_seed = 7
"""


def _tiny_config(tmp_path, mode="qsd", **extra):
    lines = [
        f'mode = "{mode}"',
        "[initial]",
        'kind = "superposition"',
        "level_m = 0", "level_n = 3", "weight_m = 0.4", "weight_n = 0.6",
        "[bath]",
        "lam = 1e-4", 'lam_unit = "au"',
        "[propagation]",
        "dt_fs = 0.1", "t_final_fs = 2.0", "record_every = 10",
        "[ensemble]",
        "n_realizations = 4", "master_seed = 3", "n_blocks = 2",
    ]
    for k, v in extra.items():
        lines.append(f"{k} = {v}")
    p = tmp_path / "cfg.toml"
    p.write_text("\n".join(lines) + "\n")
    return p


def test_parse_config_roundtrip():
    cfg = cli.parse_config(GAUSSIAN_PAPER_RUN)
    assert cfg.x0_angstrom == 2.4
    assert cfg.lam == 1e-3 and cfg.lam_unit == "au"
    assert cfg.n_realizations == 2500
    assert cfg.t_final_fs == 1600.0
    again = cli.RunConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_parse_config_unknown_keys():
    with pytest.raises(cli.ConfigError, match="bananas"):
        cli.parse_config('bananas = 1\n[bath]\nlam = 0.0\nlam_unit = "au"\n')
    with pytest.raises(cli.ConfigError, match="bath.frobnicate"):
        cli.parse_config('[bath]\nlam = 0.0\nlam_unit = "au"\nfrobnicate = 2\n')


def test_parse_config_bath_exclusivity():
    with pytest.raises(cli.ConfigError, match="not both"):
        cli.parse_config(
            '[bath]\nlam = 1e-3\nlam_unit = "au"\neta_e = 0.05\n'
            'temperature_K = 300.0\n')
    with pytest.raises(cli.ConfigError, match="lam_unit"):
        cli.parse_config("[bath]\nlam = 1e-3\n")
    with pytest.raises(cli.ConfigError):
        cli.parse_config("[bath]\neta_e = 0.05\n")


def test_friction_config_xi():
    cfg = cli.parse_config(
        "[bath]\neta_e = 0.05\ntemperature_K = 300.0\n")
    bath = cfg.bath()
    assert bath.xi == pytest.approx(15.0)
    assert bath.lam == pytest.approx(1244.61, rel=1e-4)


def test_run_writes_artifacts_and_manifest(tmp_path):
    cfg_path = _tiny_config(tmp_path)
    out = tmp_path / "out"
    result = CliRunner().invoke(cli.main, ["run", "-c", str(cfg_path),
                                           "-o", str(out)])
    assert result.exit_code == 0, result.output
    obs = out / "observables.csv"
    assert obs.exists()
    header = obs.read_text().splitlines()
    assert header[0].startswith("# schema_version=")
    assert header[1].split(",")[:5] == ["t_fs", "x_mean_angstrom", "purity",
                                        "purity_se", "residual"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 3
    assert manifest["lam_au"] == pytest.approx(1e-4)
    assert manifest["config"]["n_realizations"] == 4
    # checksums match the files on disk
    for name, digest in manifest["artifacts"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest


def test_run_deterministic_bytes(tmp_path):
    cfg_path = _tiny_config(tmp_path)
    runner = CliRunner()
    for d in ("a", "b"):
        r = runner.invoke(cli.main, ["run", "-c", str(cfg_path),
                                     "-o", str(tmp_path / d)])
        assert r.exit_code == 0, r.output
    assert (tmp_path / "a/observables.csv").read_bytes() == \
           (tmp_path / "b/observables.csv").read_bytes()


def test_cli_flag_overrides_config(tmp_path):
    cfg_path = _tiny_config(tmp_path)
    out = tmp_path / "out"
    r = CliRunner().invoke(cli.main, ["run", "-c", str(cfg_path),
                                      "-o", str(out), "--seed", "99"])
    assert r.exit_code == 0, r.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 99


def test_exit_code_2_on_bad_config(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[bath]\nlam = 1e-3\n")     # missing unit
    r = CliRunner().invoke(cli.main, ["run", "-c", str(p)])
    assert r.exit_code == 2


def test_exit_code_2_on_stability_violation(tmp_path):
    # a dt/lam combination violating the stability guard is a config error
    cfg_path = _tiny_config(tmp_path)
    text = cfg_path.read_text().replace("lam = 1e-4", "lam = 5e-3")
    cfg_path.write_text(text)
    out = tmp_path / "out"
    r = CliRunner().invoke(cli.main, ["run", "-c", str(cfg_path),
                                      "-o", str(out)])
    assert r.exit_code == 2
    err = json.loads((out / "error.json").read_text())
    assert err["exit_code"] == 2
    assert "stability" in err["message"]


def test_exit_code_3_on_numerical_failure(tmp_path, monkeypatch):
    cfg_path = _tiny_config(tmp_path)
    out = tmp_path / "out"

    def boom(cfg, outdir):
        raise qsd.PropagatorError("diffusive step unstable")

    monkeypatch.setattr(cli, "execute", boom)
    r = CliRunner().invoke(cli.main, ["run", "-c", str(cfg_path),
                                      "-o", str(out)])
    assert r.exit_code == 3
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "PropagatorError"


def test_exit_code_4_on_compare_failure(tmp_path, monkeypatch):
    cfg_path = _tiny_config(tmp_path, mode="compare")
    monkeypatch.setattr(cli, "execute", lambda cfg, outdir: 4)
    r = CliRunner().invoke(cli.main, ["run", "-c", str(cfg_path),
                                      "-o", str(tmp_path / "out")])
    assert r.exit_code == 4


def test_compare_mode_small(tmp_path):
    cfg_path = _tiny_config(tmp_path, mode="compare")
    text = cfg_path.read_text().replace(
        "n_realizations = 4", "n_realizations = 32").replace(
        "n_blocks = 2", "n_blocks = 4").replace(
        "record_every = 10", "record_every = 5")
    cfg_path.write_text(text)
    out = tmp_path / "out"
    r = CliRunner().invoke(cli.main, ["compare", "-c", str(cfg_path),
                                      "-o", str(out)])
    assert r.exit_code == 0, r.output
    data = cli.read_observables_csv(out / "compare.csv")
    assert "purity_diff" in data and "zeta_0_3_se" in data
    assert (out / "observables_oracle.csv").exists()


def test_friction_manifest_records_validity(tmp_path):
    # rate is huge, so a single femtosecond-scale step would violate the
    # stability guard; one ~5e-8 fs step keeps it valid
    p = tmp_path / "cfg.toml"
    p.write_text(
        "[bath]\neta_e = 0.05\ntemperature_K = 300.0\n"
        "[propagation]\ndt_fs = 5e-8\nt_final_fs = 5e-8\nrecord_every = 1\n"
        "[ensemble]\nn_realizations = 2\nmaster_seed = 1\nn_blocks = 1\n")
    out = tmp_path / "out"
    r = CliRunner().invoke(cli.main, ["run", "-c", str(p), "-o", str(out)])
    assert r.exit_code == 0, r.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["xi"] == pytest.approx(15.0)
    assert manifest["markov_ratio"] == pytest.approx(3.8908, rel=1e-3)
    assert manifest["markov_valid"] is False


def test_table1_output(tmp_path):
    out = tmp_path / "table1.csv"
    r = CliRunner().invoke(cli.main, ["table1", "-o", str(out)])
    assert r.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "lam_au,t_fs,coherence_length_angstrom"
    vals = [float(ln.split(",")[2]) for ln in lines[1:]]
    printed = ["0.21", "0.11", "0.073", "0.066", "0.036", "0.023"]
    for v, p in zip(vals, printed):
        assert abs(v - float(p)) <= 10.0 ** (-len(p.split(".")[1]))


def test_fit_subcommand(tmp_path):
    t = np.linspace(0.0, 2000.0, 201)
    y = 0.5 * np.exp(-t / 400.0) + 0.5
    series = observables.ObservableSeries(
        times_fs=t, purity=y, populations=np.full((t.size, 1), 0.5),
        coherence_pairs={}, residual=np.zeros(t.size))
    p = tmp_path / "obs.csv"
    cli.write_observables_csv(p, series, [])
    r = CliRunner().invoke(cli.main, ["fit", str(p), "--column", "purity",
                                      "-o", str(tmp_path / "fit.json")])
    assert r.exit_code == 0, r.output
    report = json.loads((tmp_path / "fit.json").read_text())
    assert report["decay_times_fs"][0] == pytest.approx(400.0, rel=1e-4)
    assert report["converged"]
    r2 = CliRunner().invoke(cli.main, ["fit", str(p), "--column", "nope"])
    assert r2.exit_code == 2


def test_read_write_roundtrip(tmp_path):
    t = np.array([0.0, 1.0, 2.0])
    series = observables.ObservableSeries(
        times_fs=t, purity=np.array([1.0, 0.9, 0.8]),
        populations=np.array([[0.4, 0.6], [0.5, 0.5], [0.6, 0.4]]),
        coherence_pairs={(0, 1): np.array([0.2, 0.1, 0.05])},
        x_mean=np.array([1.0, 2.0, 3.0]), residual=np.zeros(3))
    p = tmp_path / "obs.csv"
    cli.write_observables_csv(p, series, [(0, 1)])
    data = cli.read_observables_csv(p)
    assert np.array_equal(data["t_fs"], t)
    assert np.array_equal(data["P_1"], series.populations[:, 1])
    assert np.array_equal(data["zeta_0_1"], series.coherence_pairs[(0, 1)])
