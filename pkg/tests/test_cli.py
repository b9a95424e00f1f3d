import csv
import json

import pytest

from treecast.cli import run
from treecast.inference import bp_root
from treecast.tree import SpinVector, TreeShape


def out_lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


def test_simulate_prints_root_and_leaves(capsys):
    code = run(["simulate", "--b", "2", "--t", "2", "--epsilon", "0.3",
                "--trials", "5", "--seed", "1"])
    assert code == 0
    lines = out_lines(capsys)
    assert len(lines) == 5
    for line in lines:
        root, leaves = line.split()
        assert root in "+-" and len(leaves) == 4
        assert set(leaves) <= {"+", "-"}


def test_simulate_forced_root(capsys):
    run(["simulate", "--b", "2", "--t", "1", "--epsilon", "0.9",
         "--trials", "20", "--root", "+", "--seed", "2"])
    for line in out_lines(capsys):
        assert line.startswith("+ ")


def test_simulate_is_deterministic(capsys):
    argv = ["simulate", "--b", "3", "--t", "2", "--epsilon", "0.5",
            "--trials", "4", "--seed", "9"]
    run(argv)
    first = out_lines(capsys)
    run(argv)
    assert out_lines(capsys) == first


def test_infer_matches_library(capsys):
    code = run(["infer", "--b", "3", "--t", "1", "--epsilon", "0.3",
                "--leaves", "++-"])
    assert code == 0
    shape = TreeShape(3, 1)
    want = bp_root(SpinVector.from_string("++-", start=shape.leaf_start),
                   0.3, shape).bias
    assert float(out_lines(capsys)[0]) == pytest.approx(want, abs=1e-12)


def test_infer_rejects_wrong_leaf_count(capsys):
    assert run(["infer", "--b", "2", "--t", "2", "--epsilon", "0.3",
                "--leaves", "++-"]) == 2


def test_epsilon_out_of_range_is_config_error(capsys):
    assert run(["simulate", "--b", "2", "--t", "1",
                "--epsilon", "1.5"]) == 2
    assert "config error" in capsys.readouterr().err


def test_attack_signpush_output(capsys):
    code = run(["attack", "--b", "2", "--t", "2", "--epsilon", "0.4",
                "--leaves", "+-+-", "--strategy", "signpush",
                "--rho", "0.99", "--target", "-", "--seed", "0"])
    assert code == 0
    lines = out_lines(capsys)
    fields = dict(line.split(" ", 1) for line in lines)
    assert set(fields) == {"flips", "attacked", "root_bias"}
    assert set(fields["attacked"]) <= {"+", "-"}


def test_attack_spread_needs_its_arguments(capsys):
    # spread without --c/--k is a usage error, not a crash
    assert run(["attack", "--b", "2", "--t", "2", "--epsilon", "0.4",
                "--leaves", "++++", "--strategy", "spread"]) == 2


def test_couple_prints_coupled_draw(capsys):
    code = run(["couple", "--b", "2", "--t", "2", "--epsilon", "0.25",
                "--seed", "4"])
    assert code == 0
    fields = dict(line.split(None, 1) for line in out_lines(capsys))
    assert {"x", "pi", "flips", "marked"} <= set(fields)


def test_couple_epsilon_cap_is_tighter(capsys):
    # the coupling construction needs epsilon < 1/2
    assert run(["couple", "--b", "2", "--t", "2", "--epsilon", "0.5"]) == 2


def test_couple_with_budget(capsys):
    code = run(["couple", "--b", "2", "--t", "2", "--epsilon", "0.2",
                "--rho", "0.5", "--seed", "4"])
    assert code == 0
    out = capsys.readouterr().out
    assert "coupled" in out and "flip_count" in out


def test_experiment_writes_csv_and_sidecar(tmp_path, capsys):
    cfg = tmp_path / "ks.cfg"
    cfg.write_text("experiment.name=ks_threshold\n"
                   "b=2\nepsilon=0.3\nt=1,2\ntrials=300\nengine=exact\n"
                   "run.seed=5\n")
    code = run(["experiment", "--config", str(cfg),
                "--out", str(tmp_path / "out")])
    assert code == 0
    lines = out_lines(capsys)
    assert lines[0].startswith("wrote ") and "(2 rows)" in lines[0]
    with open(tmp_path / "out" / "ks_threshold.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["t"] for r in rows] == ["1", "2"]
    assert all(r["experiment"] == "ks_threshold" for r in rows)
    doc = json.loads((tmp_path / "out" / "ks_threshold.json").read_text())
    assert doc["ci_method"] == "normal-approx-95"
    assert doc["config"]["experiment.b"] == "2"
    assert "b_eps2" in doc["report"]


def test_experiment_cli_overrides_win(tmp_path, capsys):
    cfg = tmp_path / "ks.cfg"
    cfg.write_text("experiment.name=ks_threshold\n"
                   "b=2\nepsilon=0.3\nt=1\ntrials=200\nengine=exact\n")
    code = run(["experiment", "--config", str(cfg), "trials=150",
                "--seed", "8", "--out", str(tmp_path / "o")])
    assert code == 0
    with open(tmp_path / "o" / "ks_threshold.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["trials"] == "150"
    assert rows[0]["seed"] == "8"


def test_experiment_unknown_name_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment.name=unheard_of\n")
    assert run(["experiment", "--config", str(cfg)]) == 2
    assert "config error" in capsys.readouterr().err


def test_experiment_missing_file_exits_2(capsys):
    assert run(["experiment", "--config", "/does/not/exist.cfg"]) == 2


def test_usage_error_exits_2(capsys):
    # argparse rejects the unknown subcommand
    assert run(["frobnicate"]) == 2


def test_verify_passes(capsys):
    code = run(["verify", "--instances", "40", "--seed", "0"])
    assert code == 0
    assert out_lines(capsys)[-1] == "ok"
