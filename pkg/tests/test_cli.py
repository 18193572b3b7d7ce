import csv
import json
from pathlib import Path

import pytest
import yaml

from nlspsd.cli import EXIT_CONFIG, EXIT_NUMERIC, ConfigError, load_config, run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = {
    "seed": 3,
    "grid": {"period": {"value": 32, "unit": "1"}, "n": 32},
    "link": {"coeff": 1.0},
    "input": {"kind": "gaussian_process", "psd": {"shape": "gaussian", "amplitude": 0.3, "width": 1.0}},
    "z": {"value": 1.0, "unit": "1"},
    "realizations": 130,
}


def _write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return p


def _read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "# nlspsd csv v1"
    return list(csv.reader(lines[1:]))


def test_quartets_square_dispersion_trivial_only(tmp_path):
    out = tmp_path / "q.csv"
    assert run(["quartets", "--zeta", "k^2", "--box", "4", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert rows and all(r["trivial"] == "1" and r["resonant"] == "1" for r in rows)


def test_quartets_stdout(capsys):
    assert run(["quartets", "--zeta", "k^3+3k^2", "--box", "3"]) == 0
    assert "1,-3,0,-2,NON_DEGENERATE_FWM,0,1" in capsys.readouterr().out


def test_quartets_bad_input(capsys):
    assert run(["quartets", "--zeta", "k^", "--box", "3"]) == EXIT_NUMERIC
    assert run(["quartets", "--zeta", "k^2", "--box", "0"]) == EXIT_CONFIG


def test_schema_errors_are_line_anchored(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(
        "grid:\n"
        "  period: {value: 32, unit: '1'}\n"
        "  n: 2\n"
        "link: {coeff: 1.0}\n"
        "input: {kind: pulse}\n"
        "z: {value: 1.0, unit: furlong}\n"
    )
    with pytest.raises(ConfigError) as info:
        load_config(p)
    msg = str(info.value)
    assert f"{p}:3:6: grid/n" in msg
    assert f"{p}:6:" in msg and "furlong" in msg


def test_yaml_syntax_error_location(tmp_path):
    p = tmp_path / "broken.yaml"
    p.write_text("grid: {period: [1,\n")
    with pytest.raises(ConfigError, match=r"broken.yaml:\d+:\d+"):
        load_config(p)


def test_unit_mixing_rejected(tmp_path, capsys):
    cfg = dict(SMALL, z={"value": 1.0, "unit": "km"})
    assert run(["gn", str(_write(tmp_path, cfg)), "-o", str(tmp_path)]) == EXIT_CONFIG
    assert "mixing" in capsys.readouterr().err


def test_missing_file_is_config_error(tmp_path):
    assert run(["gn", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_numeric_failure_exit_code(tmp_path, capsys):
    # a huge amplitude with a forbidden refinement overflows the step bound
    cfg = dict(SMALL, input={"kind": "pulse", "amplitude": {"value": 1e200, "unit": "1"}})
    cfg["grid"] = {"period": {"value": 40, "unit": "1"}, "n": 64}
    code = run(["oracle", str(_write(tmp_path, cfg)), "-o", str(tmp_path)])
    assert code == EXIT_NUMERIC
    assert "nlspsd oracle:" in capsys.readouterr().err


def test_gn_and_kz_outputs(tmp_path):
    p = _write(tmp_path, SMALL)
    assert run(["gn", str(p), "-o", str(tmp_path)]) == 0
    assert run(["kz", str(p), "-o", str(tmp_path)]) == 0
    gn = _read_csv(tmp_path / "gn.csv")
    kz = _read_csv(tmp_path / "kz.csv")
    assert gn[0] == ["k", "S0", "S_GN", "correction"] and len(gn) == 33
    assert abs(sum(float(r[3]) for r in kz[1:])) < 1e-12
    assert "plot" in (tmp_path / "plot.gp").read_text()


def test_compare_is_byte_identical_across_threads(tmp_path):
    p = _write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["compare", str(p), "-o", str(a), "--threads", "1"]) == 0
    assert run(["compare", str(p), "-o", str(b), "--threads", "3"]) == 0
    for name in ("compare.csv", "compare.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = tmp_path / "c"
    assert run(["compare", str(p), "-o", str(c), "--seed", "4"]) == 0
    assert (c / "compare.csv").read_bytes() != (a / "compare.csv").read_bytes()


def test_threads_validation(tmp_path):
    assert run(["gn", str(_write(tmp_path, SMALL)), "--threads", "0"]) == EXIT_CONFIG


def test_perturb_and_modes(tmp_path):
    cfg = {
        "grid": {"period": {"value": 40, "unit": "1"}, "n": 128},
        "link": {"coeff": 1.0},
        "input": {"kind": "pulse", "amplitude": {"value": 0.5, "unit": "1"}, "amplitudes": [0.1, 0.5]},
        "z": {"value": 1.0, "unit": "1"},
        "z_samples": [0.0, 0.5, 1.0],
        "modes": [0, 5],
    }
    p = _write(tmp_path, cfg)
    assert run(["perturb", str(p), "-o", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "perturb.csv")
    assert rows[0] == ["amplitude", "a", "e"] and len(rows) == 3
    assert run(["modes", str(p), "-o", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "modes.csv")
    assert rows[0] == ["z", "abs_q[0]", "abs_q[5]", "energy"] and len(rows) == 4


def test_wdm_command(tmp_path, capsys):
    assert run(["wdm", str(CONFIGS / "wdm.yaml"), "-o", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "wdm.json").read_text())
    assert set(rep) == {"GN", "KZ"}
    assert rep["GN"]["s4"] == pytest.approx(-0.05**2)
    rows = _read_csv(tmp_path / "wdm.csv")
    assert rows[0] == ["k", "S0", "S_GN", "S_GN_gaussian", "S_KZ", "S_KZ_gaussian"]


def test_multispan_command(tmp_path):
    assert run(["multispan", str(CONFIGS / "multispan.yaml"), "-o", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "multispan.csv")
    s0 = [float(r[1]) for r in rows[1:]]
    gn = [float(r[2]) for r in rows[1:]]
    assert all(g >= s for g, s in zip(gn, s0))
    assert json.loads((tmp_path / "multispan.json").read_text()) == {"n_spans": 4}


@pytest.mark.parametrize("name", ["psds_desk", "qpert", "two_modes", "wdm", "multispan"])
def test_shipped_configs_validate(name):
    load_config(CONFIGS / f"{name}.yaml")


def test_json_config_accepted(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    assert run(["gn", str(p), "-o", str(tmp_path)]) == 0
