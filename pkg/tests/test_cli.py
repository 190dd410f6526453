import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from oam_direct import cli, pipeline
from oam_direct.config import build_config, default_ini, load_config, parse_ini
from oam_direct.errors import ConfigError

FAST = "[measurement]\nruns = 3\n[output]\ncounts = true\n"

BAD_VALUES = [
    ("state", "delta_theta", "0"), ("state", "delta_theta", "-1"), ("state", "delta_theta", "7"),
    ("state", "delta_theta", "abc"), ("state", "delta_theta", "nan"), ("state", "theta0", "4"),
    ("state", "theta0", "pi*2"), ("state", "l_max", "0"), ("state", "l_max", "1.5"),
    ("state", "l_max", "x"), ("measurement", "alpha", "0"), ("measurement", "alpha", "2"),
    ("measurement", "alpha", "inf"), ("measurement", "alpha", "__import__('os')"),
    ("measurement", "theta_index", "-1"), ("measurement", "theta_index", "27"),
    ("measurement", "runs", "0"), ("measurement", "runs", "ten"), ("measurement", "defocus", "1e400"),
    ("measurement", "tilt", "1/0"), ("noise", "photons_per_setting", "-5"),
    ("noise", "photons_per_setting", "1e5"), ("noise", "dark_rate_hz", "-100"),
    ("noise", "background_rate_hz", "-1e-3"), ("noise", "integration_s", "-1"),
    ("noise", "seed", "-1"), ("noise", "seed", str(2**64)), ("noise", "noiseless", "maybe"),
    ("sorter", "grid", "1023"), ("sorter", "grid", "32"), ("sorter", "pitch_m", "0"),
    ("sorter", "wavelength_m", "-633e-9"), ("sorter", "waist_m", "1e-5", "sorter.l_range"), ("sorter", "f_m", "0"),
    ("sorter", "n_index", "1"), ("sorter", "n_index", "2.5"), ("sorter", "strip_fraction", "1.1"),
    ("sorter", "a_m", "-1"), ("sorter", "b_m", "none"), ("sorter", "l_range", "500"),
    ("sorter", "fanout", "2"), ("sorter", "copies", "4"), ("sorter", "uniformity_tol", "1"),
    ("sorter", "window_fraction", "1.5"), ("sorter", "window_fraction", "0"), ("sorter", "pad", "1"),
    ("output", "formats", "xml"), ("output", "formats", ""), ("output", "counts", "sometimes"),
]
STRUCTURAL = [
    ("[bogus]\nx = 1\n", "bogus"),
    ("[state]\nwidth = 2\n", "state.width"),
    ("[state]\nl_max = 13\nl_max = 12\n", "<file>"),
    ("l_max = 13\n", "<file>"),
]
CORPUS = [(f"[{sec}]\n{key} = {val}\n", f"{sec}.{key}" if not rest else rest[0])
          for sec, key, val, *rest in BAD_VALUES] + STRUCTURAL


def test_corpus_size():
    assert len(CORPUS) >= 50


@pytest.fixture
def no_compute(monkeypatch):
    def boom(*args, **kwargs):
        raise AssertionError("computation started")
    for name in ("run_direct_measurement", "run_sorter_characterization", "measure_scans",
                 "characterize_sorter"):
        monkeypatch.setattr(pipeline, name, boom)


@pytest.mark.parametrize("text,key", CORPUS)
def test_malformed_config_rejected_before_compute(tmp_path, capsys, no_compute, text, key):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    for command in ("measure", "sorter"):
        assert cli.main([command, "--config", str(path), "--out", str(tmp_path / "o")]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["exit_code"] == 2 and err["key"] == key
    assert not (tmp_path / "o").exists()


def test_default_ini_round_trip():
    assert parse_ini(default_ini()).to_dict() == build_config({}).to_dict()


def test_pi_expressions():
    cfg = parse_ini("[state]\ndelta_theta = 2*pi/9\n[measurement]\nalpha = pi/18\n")
    assert cfg["state"]["delta_theta"] == pytest.approx(2 * np.pi / 9)
    assert cfg["measurement"]["alpha"] == pytest.approx(np.pi / 18)


def test_undersampled_sorter_rejected():
    with pytest.raises(ConfigError) as err:
        build_config({"sorter": {"pitch_m": "2e-4"}})
    assert err.value.key == "sorter.l_range"


def test_manifest_without_config(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text("{}")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file_is_io_error(tmp_path, capsys):
    assert cli.main(["measure", "--config", str(tmp_path / "nope.ini")]) == 4
    assert json.loads(capsys.readouterr().err)["exit_code"] == 4


def test_missing_bundle_is_io_error(tmp_path, capsys):
    assert cli.main(["analyze", str(tmp_path)]) == 4
    assert cli.main(["plotdata", str(tmp_path)]) == 4
    assert "reconstruction_unrotated.csv" in json.loads(capsys.readouterr().err.splitlines()[0])["message"]


def test_numerical_failure_exit_code(tmp_path, capsys):
    # no photons: nothing survives nuisance subtraction
    path = tmp_path / "dark.ini"
    path.write_text("[noise]\nphotons_per_setting = 0\n[measurement]\nruns = 1\n")
    assert cli.main(["measure", "--config", str(path), "--out", str(tmp_path / "o")]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "InsufficientSignalError" and "ell" in err


def read_dir(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(Path(path).rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "fast.ini"
    cfg.write_text(FAST)
    assert cli.main(["measure", "--config", str(cfg), "--seed", "5", "--out", str(root / "a")]) == 0
    return root


def test_bundle_contents(bundle):
    files = read_dir(bundle / "a")
    for name in ("fits.json", "summary.json", "run.log", "manifest.json", "scan_plus.csv",
                 "reconstruction_minus.csv", "counts_unrotated_run0.csv"):
        assert name in files
    assert all(b"\r\n" not in data for data in files.values())
    manifest = json.loads(files["manifest.json"])
    assert manifest["config"]["noise"]["seed"] == 5 and manifest["command"] == "measure"
    assert set(manifest["files"]) == set(files) - {"manifest.json"}


def test_same_seed_byte_identical(bundle):
    cfg = bundle / "fast.ini"
    assert cli.main(["measure", "--config", str(cfg), "--seed", "5", "--out", str(bundle / "b")]) == 0
    assert read_dir(bundle / "a") == read_dir(bundle / "b")


def test_rerun_from_manifest(bundle):
    out = bundle / "from_manifest"
    assert cli.main(["measure", "--config", str(bundle / "a" / "manifest.json"), "--out", str(out)]) == 0
    assert read_dir(bundle / "a") == read_dir(out)


def test_analyze_reproduces_fits(bundle, tmp_path):
    assert cli.main(["analyze", str(bundle / "a"), "--out", str(tmp_path)]) == 0
    for name in ("fits.json", "summary.json"):
        assert (tmp_path / name).read_bytes() == (bundle / "a" / name).read_bytes()


def load_table(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


def test_plotdata(bundle, tmp_path):
    assert cli.main(["plotdata", str(bundle / "a"), "--out", str(tmp_path)]) == 0
    plot = tmp_path / "plotdata"
    expected = {f"fig2{c}.csv" for c in "abc"} | {f"fig3{c}.csv" for c in "abcdef"}
    assert expected <= {p.name for p in plot.iterdir()}
    fig2b = load_table(plot / "fig2b.csv")
    assert list(fig2b[0]) == ["x", "y", "yerr", "series"]
    assert len(fig2b) == 27
    assert sum(float(r["y"]) for r in fig2b) == pytest.approx(1.0, abs=1e-12)

    recon = {name: load_table(bundle / "a" / f"reconstruction_{name}.csv") for name in ("unrotated", "plus")}
    fig3c = load_table(plot / "fig3c.csv")
    for row, ref, rot in zip(fig3c, recon["unrotated"], recon["plus"]):
        diff = float(rot["phase"]) - float(ref["phase"])
        assert np.exp(1j * float(row["y"])) == pytest.approx(np.exp(1j * diff), abs=1e-12)


def test_runs_one_matches_first_run(bundle, tmp_path):
    single = tmp_path / "one.ini"
    single.write_text(FAST.replace("runs = 3", "runs = 1"))
    assert cli.main(["measure", "--config", str(single), "--seed", "5", "--out", str(tmp_path / "one")]) == 0
    for name in ("unrotated", "plus", "minus"):
        a = (tmp_path / "one" / f"counts_{name}_run0.csv").read_bytes()
        assert a == (bundle / "a" / f"counts_{name}_run0.csv").read_bytes()


def test_averaged_errors_shrink_with_runs():
    cfg = build_config({"measurement": {"runs": 1}})
    one, _ = pipeline.measure_scans(cfg)
    many, _ = pipeline.measure_scans(cfg.replace("measurement", runs=50))
    ratio = np.median(many["unrotated"].err_re / one["unrotated"].err_re)
    assert ratio == pytest.approx(1 / np.sqrt(50), rel=0.2)


def test_noiseless_measure(tmp_path):
    cfg = build_config({"noise": {"noiseless": True}})
    files = pipeline.run_direct_measurement(cfg)
    summary = json.loads(files["summary.json"])
    assert summary["sinc_width"][0] == pytest.approx(9.0, abs=0.05)
    assert summary["pi_jumps"]["unrotated"] == [-9, 9]
    assert summary["slopes"]["plus"][0] == pytest.approx(-summary["slopes"]["minus"][0], rel=1e-9)


def test_small_sorter_run(tmp_path):
    path = tmp_path / "sorter.ini"
    path.write_text("[sorter]\ngrid = 256\npitch_m = 40e-6\nl_range = 3\npad = 4\n")
    assert cli.main(["sorter", "--config", str(path), "--out", str(tmp_path / "s")]) == 0
    out = tmp_path / "s"
    summary = json.loads((out / "sorter_summary.json").read_text())
    assert summary["with_fanout"]["mean_neighbor_overlap"] < summary["without_fanout"]["mean_neighbor_overlap"]
    rows = (out / "crosstalk_with_fanout.csv").read_text().splitlines()
    assert rows[0] == "ell,-3,-2,-1,0,1,2,3"
    r1 = np.load(out / "masks" / "r1.npy")
    assert r1.dtype == np.float32 and r1.shape == (256, 256)
    assert json.loads((out / "masks" / "r1.json").read_text())["pitch_m"] == pytest.approx(40e-6)
