import csv
import json
import math

import numpy as np
import pytest

import oracles
from hmdesign.cli import main
from hmdesign.constellation import HqamParams, hqam, new_natural

CELL_FLAGS = ["--ps", "66", "--pn", "-95", "--radius", "4", "--sigma", "8"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_coverage_percent_and_inverse(capsys, tmp_path):
    code, doc, _ = run(capsys, "coverage", "--percent", "90", *CELL_FLAGS)
    assert code == 0 and abs(doc["snr_db"] - 2.92) < 0.05
    code, doc, _ = run(capsys, "coverage", "--snr", "2.92", *CELL_FLAGS)
    assert code == 0 and abs(doc["fraction"] - 0.90) < 0.002
    assert (tmp_path / "coverage.manifest.json").exists()


def test_coverage_rejects_bad_fraction(capsys):
    code, _, err = run(capsys, "coverage", "--fraction", "1.5")
    assert code == 2 and "fraction must be in (0,1)" in err
    code, _, err = run(capsys, "coverage", "--percent", "150")
    assert code == 2 and "fraction must be in (0,1)" in err


def test_argument_errors_exit_2(capsys):
    assert main(["coverage", "--percent", "90", "--snr", "3"]) == 2
    assert main(["optimize", "--mh", "2"]) == 2
    assert main(["nonsense"]) == 2
    capsys.readouterr()


def test_capacity_gray_qpsk(capsys, tmp_path):
    f = tmp_path / "qpsk.json"
    f.write_text(new_natural(2, 0, np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / math.sqrt(2)).to_json())
    code, doc, _ = run(capsys, "capacity", "--constellation", str(f), "--snr-h", "10")
    assert code == 0
    assert abs(doc["r_h"] - oracles.gray_qpsk_rate(10.0)) < 1e-5
    assert doc["r_l"] is None
    code, doc, _ = run(capsys, "capacity", "--constellation", str(f), "--snr-h", "10", "--snr-l", "12")
    assert code == 3


def test_capacity_collapsed_hqam_and_mc_check(capsys, tmp_path):
    f = tmp_path / "h.json"
    f.write_text(hqam(HqamParams(0.7, 0.0)).to_json())
    code, doc, _ = run(capsys, "capacity", "--constellation", str(f), "--snr-h", "3", "--snr-l", "12")
    assert code == 0 and doc["r_l"] < 1e-6
    g = tmp_path / "g.json"
    g.write_text(hqam(HqamParams(0.6, 0.3)).to_json())
    code, doc, _ = run(capsys, "capacity", "--constellation", str(g), "--snr-h", "3", "--snr-l", "12",
                       "--mc-check", "--mc-samples", "100000")
    assert code == 0
    assert all(e["within_3se"] for e in doc["mc_check"]["hp"] + doc["mc_check"]["lp"])
    assert doc["power"] == pytest.approx(2 * (0.36 + 0.09))


def test_capacity_malformed_file(capsys, tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{"m_h": 2, "m_l": 0, "points": [[1, 0]]}')
    code, _, _ = run(capsys, "capacity", "--constellation", str(f), "--snr-h", "3")
    assert code == 2
    code, _, _ = run(capsys, "capacity", "--constellation", str(tmp_path / "missing.json"), "--snr-h", "3")
    assert code == 2


def test_optimize_example_and_replay(capsys, tmp_path):
    out = tmp_path / "opt.json"
    code, doc, _ = run(capsys, "optimize", "--mh", "2", "--ml", "2", "--snr-h", "2.92", "--snr-l", "10.05",
                       "--rstar", "1.2", "--power", "1", "--starts", "8", "--seed", "7", "--out", str(out))
    assert code == 0
    assert doc["r_h"] >= 1.2 - 1e-5
    assert doc["power"] == pytest.approx(1.0, abs=1e-6)
    first = out.read_bytes()
    manifest = json.loads((tmp_path / "opt.json.manifest.json").read_text())
    assert manifest["command"] == "optimize" and manifest["seed"] == 7
    assert manifest["params"]["rstar"] == 1.2
    code, rep, _ = run(capsys, "replay", str(tmp_path / "opt.json.manifest.json"))
    assert code == 0 and rep["identical"], rep
    assert out.read_bytes() == first


def test_optimize_infeasible(capsys, tmp_path):
    code, doc, _ = run(capsys, "optimize", "--mh", "2", "--ml", "2", "--snr-h", "2.92", "--snr-l", "10.05",
                       "--rstar", "2.0", "--out", str(tmp_path / "x.json"))
    assert code == 4
    assert doc["error"] == "infeasible" and doc["best_r_h"] > 1.4
    assert not (tmp_path / "x.json").exists()


def test_optimize_semantic_error(capsys, tmp_path):
    code, _, _ = run(capsys, "optimize", "--mh", "2", "--ml", "2", "--snr-h", "12", "--snr-l", "3",
                     "--rstar", "0.5", "--out", str(tmp_path / "x.json"))
    assert code == 3


def test_hqam_command(capsys, tmp_path):
    code, doc, _ = run(capsys, "hqam", "--ml", "2", "--snr-h", "2.92", "--snr-l", "10.05", "--rstar", "0",
                       "--power", "1", "--starts", "4", "--out", str(tmp_path / "h.json"))
    assert code == 0
    assert doc["power"] == pytest.approx(2 * (doc["d1"] ** 2 + doc["d2"] ** 2), abs=1e-9)
    assert abs(doc["r_l"] - oracles.hqam_grid_oracle(0.0, 2.92, 10.05)["refined"]) < 1e-3
    code, _, _ = run(capsys, "hqam", "--ml", "4", "--snr-h", "2.92", "--snr-l", "10.05", "--rstar", "0.5")
    assert code == 3


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_region_fast_schemes(capsys, tmp_path):
    out = tmp_path / "region.csv"
    code, doc, _ = run(capsys, "region", "--mh", "2", "--ml", "2", "--snr-h", "2.92", "--snr-l", "10.05",
                       "--power", "1", "--points", "4", "--schemes", "hqam,td,hull", "--starts", "3",
                       "--out", str(out))
    assert code == 0
    td = _read_csv(tmp_path / "region_td.csv")
    assert list(td[0].keys()) == ["scheme", "r_star", "r_h", "r_l", "power", "papr"]
    assert float(td[0]["r_l"]) == pytest.approx(math.log2(1 + 10 ** 1.005), rel=1e-8)
    assert float(td[-1]["r_h"]) == pytest.approx(math.log2(1 + 10 ** 0.292), rel=1e-8)
    hq = _read_csv(tmp_path / "region_hqam.csv")
    assert len(hq) >= 3 and all(r["scheme"] == "hqam_optimized" for r in hq)
    assert (tmp_path / "region_hull.csv").exists()
    assert json.loads((tmp_path / "region_summary.json").read_text())["solved"] == doc["solved"]
    code, rep, _ = run(capsys, "replay", str(tmp_path / "region.csv.manifest.json"),
                       "--outdir", str(tmp_path / "again"))
    assert code == 0 and rep["identical"], rep


def test_region_scenario_two_has_shadow_point(capsys, tmp_path):
    code, doc, _ = run(capsys, "region", "--mh", "2", "--ml", "3", "--snr-h", "2.92", "--snr-l", "15.29",
                       "--points", "5", "--schemes", "hm,td", "--starts", "1", "--out", str(tmp_path / "r2.csv"))
    assert code == 0
    assert doc["witnesses"], doc
    assert all(w["gap"] > 0.01 for w in doc["witnesses"])


def test_region_rejects_bad_arguments(capsys, tmp_path):
    base = ["region", "--mh", "2", "--ml", "2", "--snr-h", "2.92", "--snr-l", "10.05", "--out", str(tmp_path / "r.csv")]
    assert main(base + ["--points", "1"]) == 2
    assert main(base + ["--points", "3", "--schemes", "hm,foo"]) == 2
    capsys.readouterr()
