import csv
import os
import subprocess
import sys

import pytest

from eemcs.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, main
from eemcs.config import ConfigError, RunConfig, emit_config, load_config, parse_config

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

SMALL = """
model = mixture
means = [[0.2, 0.2], [0.75, 0.3], [0.3, 0.8], [0.8, 0.85]]
sigma = 0.1
energy_levels = [1.38, 2.2, 3.2, 5.0]
temperatures = [1, 2, 4, 8]
s0 = 0.15
burn_in_N = 100
n_values = [600, 900]
replications = 2
seed = 3
"""


def test_defaults():
    cfg = parse_config("model = double-well\nenergy_levels = [0, 0.3]\ntemperatures = [1, 2]\n")
    assert (cfg.theta, cfg.gamma0, cfg.c, cfg.p_ee) == (0.5, 1.0, 0.2, 0.1)
    assert cfg.burn_in_N == 1000 and cfg.replications == 20 and cfg.seed == 0
    assert cfg.build_ladder().n_rings == 2
    assert cfg.active_functionals == ("mean_x1", "mean_x1_sq")
    mix = parse_config(SMALL)
    assert mix.active_functionals == ("mean_x1", "mean_x2", "mean_x2_sq", "prob_discs")


def test_all_errors_are_collected():
    text = ("model = mixture\nmeans = [[0, 0]]\nenergy_levels = [0, 1]\n"
            "temperatures = [1, 3, 2]\nbogus = 1\nreplications = 1\n")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    msgs = exc.value.errors
    assert any("ladder: temperatures not increasing" in m for m in msgs)
    assert any("unknown key 'bogus'" in m for m in msgs)
    assert any(m.startswith("replications") for m in msgs)


@pytest.mark.parametrize("line, key", [
    ("theta = 1.5", "theta"),
    ("p_ee = -0.1", "p_ee"),
    ("c = 1", "c"),
    ("gamma0 = 0", "gamma0"),
    ("seed = -4", "seed"),
    ("sigma = abc", "sigma"),
    ("n_values = [50]", "n_values"),
    ("functionals = [prob_discs]", "functionals"),
    ("means = [[0, 0], [1]]", "means"),
])
def test_invalid_values(line, key):
    base = "model = double-well\nenergy_levels = [0, 0.3]\ntemperatures = [1, 2]\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(base + line + "\n")
    assert any(m.startswith(key) or key in m for m in exc.value.errors)


def test_duplicate_and_malformed_lines():
    with pytest.raises(ConfigError) as exc:
        parse_config("model = mixture\nmodel = mixture\nno equals sign\n")
    assert any("duplicate" in m for m in exc.value.errors)
    assert any("expected 'key = value'" in m for m in exc.value.errors)


def test_round_trip_of_shipped_configs():
    for name in ("mixture20.conf", "desk.conf", "kernel_lab.conf"):
        cfg = load_config(os.path.join(ROOT, "configs", name))
        assert parse_config(emit_config(cfg)) == cfg


def test_round_trip_with_quoted_strings():
    cfg = RunConfig(scenario="custom", kernel_file="my kernel.txt", out="/tmp/a b")
    assert parse_config(emit_config(cfg)) == cfg


def _write(tmp_path, text, name="c.conf"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_missing_config_file_is_config_error(tmp_path, capsys):
    rc = main(["run", "ee", "--config", str(tmp_path / "absent.conf"), "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    path = _write(tmp_path, "model = mixture\ntemperatures = [2, 1]\n")
    assert main(["run", "mcs", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_missing_out_and_bad_seed(tmp_path):
    path = _write(tmp_path, SMALL)
    assert main(["run", "ee", "--config", path]) == EXIT_CONFIG
    assert main(["run", "ee", "--config", path, "--out", str(tmp_path), "--seed",
                 str(2 ** 64)]) == EXIT_CONFIG


def test_ee_outputs_byte_identical_for_same_seed(tmp_path):
    path = _write(tmp_path, SMALL)
    outs = []
    for k in range(2):
        out = tmp_path / f"ee{k}"
        assert main(["run", "ee", "--config", path, "--out", str(out), "--trace"]) == EXIT_OK
        outs.append(out)
    for name in ("samples.csv", "estimates.csv", "ring_probs.csv", "trace.csv", "config.txt"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    other = tmp_path / "ee_other"
    main(["run", "ee", "--config", path, "--out", str(other), "--seed", "4"])
    assert (other / "samples.csv").read_bytes() != (outs[0] / "samples.csv").read_bytes()


def test_mcs_outputs_byte_identical_for_same_seed(tmp_path):
    path = _write(tmp_path, SMALL.replace("n_values = [600, 900]", "n_values = [3000]"))
    outs = []
    for k in range(2):
        out = tmp_path / f"m{k}"
        assert main(["run", "mcs", "--config", path, "--out", str(out), "--trace"]) == EXIT_OK
        outs.append(out)
    for name in ("weights.csv", "trace.csv", "samples.csv", "estimates.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    header = (outs[0] / "weights.csv").read_text().splitlines()[0]
    assert header == "step,stage,temp,ring0,ring1,ring2,ring3"


def test_mcs_without_stage_advance_is_check_failure(tmp_path):
    text = SMALL.replace("n_values = [600, 900]", "n_values = [150]")
    path = _write(tmp_path, text + "min_stage_factor = 1000\n")
    assert main(["run", "mcs", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_CHECK


def test_compare_schema(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    out = tmp_path / "cmp"
    assert main(["run", "compare", "--config", path, "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader(open(out / "comparison.csv")))
    assert rows[0] == ["N", "E(X1)", "E(X2)", "E(X2^2)", "Pr(X in B)"]
    assert [r[0] for r in rows[1:]] == ["600", "900"]
    for r in rows[1:]:
        assert all(v != "undefined" for v in r[1:])
    raw = list(csv.DictReader(open(out / "raw_estimates.csv")))
    assert len(raw) == 2 * 2 * 2 * 4
    assert "E(X1)" in capsys.readouterr().out


def test_kernel_lab_custom_bad_kernel_fails(tmp_path):
    (tmp_path / "k.txt").write_text("0 1\n1 0\n")
    path = _write(tmp_path, f"scenario = custom\nkernel_file = {tmp_path / 'k.txt'}\n")
    assert main(["run", "kernel-lab", "--config", path, "--out", str(tmp_path / "o")]) \
        == EXIT_CHECK


def test_kernel_lab_single_scenario(tmp_path):
    path = _write(tmp_path, "scenario = limit-kernel\n")
    out = tmp_path / "kl"
    assert main(["run", "kernel-lab", "--config", path, "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(open(out / "kernel_lab.csv")))
    assert {r["scenario"] for r in rows} == {"limit-kernel"}
    assert all(r["passed"] == "1" for r in rows)


def test_module_entry_point(tmp_path):
    path = _write(tmp_path, "scenario = limit-kernel\n")
    proc = subprocess.run([sys.executable, "-m", "eemcs", "run", "kernel-lab", "--config", path,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS stationary[0]" in proc.stdout
