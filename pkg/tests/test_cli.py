import json
import subprocess
import sys
from importlib.resources import files

import numpy as np
import pytest

from foloc.cli import main
from foloc.measurements import read_csv

DEMO = str(files("foloc") / "data" / "demo_system.json")
DEMO_SOURCE_BUS = 3


@pytest.fixture(scope="module")
def demo_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("demo") / "demo.csv"
    assert main(["simulate", "--input", DEMO, "--output", str(path)]) == 0
    return path


def test_simulate_writes_measurement_csv(demo_csv):
    Y = read_csv(demo_csv)
    assert Y.sample_rate_hz == 60.0
    assert Y.n_samples == 601


def test_simulate_components(tmp_path):
    out = tmp_path / "comp"
    csv = tmp_path / "y.csv"
    assert main(["simulate", "--input", DEMO, "--output", str(csv), "--duration-s", "2",
                 "--components-dir", str(out)]) == 0
    for name in ("real", "beat", "resonance", "resonance_free"):
        lines = (out / f"{name}.csv").read_text().splitlines()
        assert lines[0] == "time,channel,value"
        assert len(lines) == 1 + 121 * read_csv(csv).n_channels


def test_simulate_with_noise_is_seeded(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", "--input", DEMO, "--output", str(p), "--snr-db", "20",
                     "--seed", "4", "--duration-s", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_localize_names_demo_source(demo_csv, tmp_path):
    report = tmp_path / "r.json"
    code = main(["localize", "--input", str(demo_csv), "--output", str(report),
                 "--topology", DEMO, "--n0", "1"])
    assert code == 0
    doc = json.loads(report.read_text())
    assert doc["source_bus"] == DEMO_SOURCE_BUS
    assert DEMO_SOURCE_BUS in doc["vicinity"]
    assert doc["config"]["xi"] == "auto" and doc["config"]["window_s"] == 10.0


def test_localize_is_byte_identical(demo_csv, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        main(["localize", "--input", str(demo_csv), "--output", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_localize_to_stdout(demo_csv, capsys):
    assert main(["localize", "--input", str(demo_csv)]) == 0
    assert json.loads(capsys.readouterr().out)["source_bus"] == DEMO_SOURCE_BUS


def test_config_precedence(demo_csv, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"window_s": 5, "xi": 0.07}))
    main(["localize", "--input", str(demo_csv), "--config", str(cfg), "--xi", "0.06"])
    doc = json.loads(capsys.readouterr().out)
    assert doc["config"]["window_s"] == 5.0
    assert doc["xi"] == 0.06
    assert doc["window_columns"] == 301


def test_config_unknown_key(demo_csv, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"window": 5}))
    assert main(["localize", "--input", str(demo_csv), "--config", str(cfg)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_localize_ragged_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("# fs_hz=60.0,start_s=0.0\nt,bus:1/Vm,bus:2/Vm\n0,1,2\n0.1,1,2\n0.2,1\n")
    assert main(["localize", "--input", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "line 5" in err and "bad.csv" in err


def test_missing_file(tmp_path, capsys):
    assert main(["localize", "--input", str(tmp_path / "none.csv")]) == 2
    assert "none.csv" in capsys.readouterr().err


def test_unknown_flag_rejected(demo_csv):
    with pytest.raises(SystemExit) as info:
        main(["localize", "--input", str(demo_csv), "--bogus"])
    assert info.value.code == 2


def test_subcommand_required():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_non_convergence_exit_code(demo_csv, tmp_path):
    path = tmp_path / "r.json"
    assert main(["localize", "--input", str(demo_csv), "--output", str(path),
                 "--max-iters", "1"]) == 3
    doc = json.loads(path.read_text())
    assert doc["converged"] is False and doc["warnings"]


def test_decompose(demo_csv, tmp_path):
    out = tmp_path / "dec"
    assert main(["decompose", "--input", str(demo_csv), "--output", str(out)]) == 0
    L, S = read_csv(out / "L.csv"), read_csv(out / "S.csv")
    Y = read_csv(demo_csv)
    Yn = Y.data / np.abs(Y.data).max()
    assert np.abs(L.data + S.data - Yn).max() < 1e-5
    assert json.loads((out / "rpca.json").read_text())["converged"] is True


def test_verify_rank(capsys):
    assert main(["verify-rank", "--input", DEMO]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    ratio = float(out.split("sigma_3/sigma_1 = ")[1].split()[0])
    assert ratio < 1e-10


def test_verify_rank_failure_exit(capsys):
    assert main(["verify-rank", "--input", DEMO, "--threshold", "0"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_add_noise(demo_csv, tmp_path):
    out = tmp_path / "noisy.csv"
    assert main(["add-noise", "--input", str(demo_csv), "--output", str(out),
                 "--snr-db", "30", "--seed", "1"]) == 0
    clean, noisy = read_csv(demo_csv), read_csv(out)
    ratio = np.mean(clean.data ** 2, axis=1) / np.mean((noisy.data - clean.data) ** 2, axis=1)
    assert np.all(np.abs(10 * np.log10(ratio) - 30) < 0.6)


def test_evaluate_manifest(demo_csv, tmp_path, capsys):
    manifest = tmp_path / "suite.txt"
    manifest.write_text(f"# demo case\n{demo_csv} {DEMO} {DEMO_SOURCE_BUS}\n"
                        f"{demo_csv} - {DEMO_SOURCE_BUS + 1}\n")
    assert main(["evaluate", "--suite", str(manifest), "--topology", DEMO, "--n0", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["n_cases"] == 2
    assert doc["exact_accuracy"] == 0.5
    assert doc["cases"][0]["exact_hit"] is True


def test_evaluate_bad_manifest(tmp_path, capsys):
    manifest = tmp_path / "suite.txt"
    manifest.write_text("only_two fields\n")
    assert main(["evaluate", "--suite", str(manifest)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_console_script_entry_point(demo_csv):
    proc = subprocess.run([sys.executable, "-m", "foloc.cli", "localize", "--input",
                           str(demo_csv)], capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["source_bus"] == DEMO_SOURCE_BUS
