import csv
import json
from pathlib import Path

import numpy as np
import pytest

from hazard_bayes import cli, formats
from hazard_bayes.nested import NestedSamplingError

FAST = ["--particles", "30", "--mcmc-steps", "20", "--samples", "300"]

DATA = """player,score
# two short careers
Ann,12
Ann,0
Ann,45*
Ann,DNB
Ann,7
Ann,88
Ann,23
Ann,3
Bo,51
Bo,9
Bo,0
Bo,131
Bo,17*
Bo,64
"""


def digests(directory: Path, skip_manifests=True) -> dict:
    return {p.name: formats.sha256_file(p) for p in sorted(directory.iterdir())
            if p.is_file() and not (skip_manifests and p.name.endswith("_manifest.json"))}


def read_column(path, name):
    with open(path, newline="") as fh:
        return np.array([float(r[name]) for r in csv.DictReader(fh)])


@pytest.fixture
def data_file(tmp_path):
    path = tmp_path / "innings.csv"
    path.write_text(DATA, encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def analyzed(tmp_path_factory):
    root = tmp_path_factory.mktemp("analyzed")
    data = root / "innings.csv"
    data.write_text(DATA, encoding="utf-8")
    out = root / "out"
    assert cli.run(["analyze", "--data", str(data), "--out-dir", str(out), "--seed", "42", *FAST]) == 0
    return data, out


# ---- analyze ----

def test_analyze_writes_expected_files(analyzed):
    _, out = analyzed
    names = set(digests(out))
    for slug in ("Ann", "Bo"):
        assert {f"{slug}_posterior.csv", f"{slug}_summary.json", f"{slug}_evidence.json"} <= names
    assert (out / "analyze_manifest.json").exists()
    header = (out / "Ann_posterior.csv").read_text().splitlines()[0]
    assert header == "mu1,mu2,L,C,D"
    summary = json.loads((out / "Ann_summary.json").read_text())
    assert set(summary["params"]) == {"mu1", "mu2", "L"}
    assert set(summary["params"]["mu2"]) == {"median", "plus_err", "minus_err", "ci68"}
    assert summary["career"]["innings"] == 7 and summary["career"]["not_outs"] == 1
    evidence = json.loads((out / "Ann_evidence.json").read_text())
    assert evidence["log_bayes_factor"] == pytest.approx(evidence["log_z"] - evidence["log_z0"])


def test_analyze_is_byte_identical(analyzed, tmp_path):
    data, out = analyzed
    again = tmp_path / "again"
    assert cli.run(["analyze", "--data", str(data), "--out-dir", str(again), "--seed", "42", *FAST]) == 0
    assert digests(out) == digests(again)
    m1 = json.loads((out / "analyze_manifest.json").read_text())
    m2 = json.loads((again / "analyze_manifest.json").read_text())
    assert m1["outputs"] == m2["outputs"] and m1["inputs"] == m2["inputs"]


def test_analyze_worker_count_does_not_change_results(analyzed, tmp_path):
    data, out = analyzed
    serial = tmp_path / "serial"
    assert cli.run(["analyze", "--data", str(data), "--out-dir", str(serial), "--seed", "42",
                    "--workers", "1", *FAST]) == 0
    assert digests(out) == digests(serial)


def test_analyze_player_filter(data_file, tmp_path):
    out = tmp_path / "only"
    assert cli.run(["analyze", "--data", str(data_file), "--player", "Bo", "--out-dir", str(out), *FAST]) == 0
    assert not (out / "Ann_posterior.csv").exists() and (out / "Bo_posterior.csv").exists()
    assert cli.run(["analyze", "--data", str(data_file), "--player", "Zed", "--out-dir", str(out),
                    *FAST]) == cli.EXIT_INVALID


def test_env_seed_fallback(data_file, tmp_path, monkeypatch):
    flag, env = tmp_path / "flag", tmp_path / "env"
    args = ["analyze", "--data", str(data_file), "--player", "Ann", *FAST]
    assert cli.run(args + ["--out-dir", str(flag), "--seed", "9"]) == 0
    monkeypatch.setenv(cli.SEED_ENV, "9")
    assert cli.run(args + ["--out-dir", str(env)]) == 0
    assert digests(flag) == digests(env)
    assert json.loads((env / "analyze_manifest.json").read_text())["seed"] == 9
    monkeypatch.setenv(cli.SEED_ENV, "nine")
    assert cli.run(args + ["--out-dir", str(tmp_path / "bad")]) == cli.EXIT_INVALID


# ---- compare / curve / hier ----

def test_self_comparison(analyzed, tmp_path):
    _, out = analyzed
    post = str(out / "Ann_posterior.csv")
    assert cli.run(["compare", post, post, "--param", "mu2", "--out-dir", str(tmp_path)]) == 0
    result = json.loads((tmp_path / "comparison.json").read_text())
    assert result["p_a_greater"] == pytest.approx(0.5, abs=1e-3)
    assert result["a"] == result["b"] == "Ann"


def test_curve_output(analyzed, tmp_path):
    _, out = analyzed
    assert cli.run(["curve", "--posterior", str(out / "Bo_posterior.csv"), "--x-max", "120",
                    "--out-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "Bo_curve.csv").read_text().splitlines()
    assert lines[0].split(",")[:6] == ["x", "median", "lo68", "hi68", "lo95", "hi95"]
    assert len(lines) == 122
    lo95, hi95 = read_column(tmp_path / "Bo_curve.csv", "lo95"), read_column(tmp_path / "Bo_curve.csv", "hi95")
    assert np.all(lo95 <= hi95)


def test_hier_outputs(analyzed, tmp_path):
    _, out = analyzed
    assert cli.run(["hier", "--posteriors-dir", str(out), "--grid-nu", "40", "--grid-sigma", "30",
                    "--draws", "20000", "--out-dir", str(tmp_path), "--seed", "3"]) == 0
    grid = formats.read_grid_csv(tmp_path / "hypergrid.csv")
    assert grid.normalized_mass.shape == (40, 30)
    assert abs(grid.normalized_mass.sum() - 1) < 1e-10
    marg = json.loads((tmp_path / "marginals.json").read_text())
    assert marg["players"] == ["Ann", "Bo"]
    nxt = json.loads((tmp_path / "next_player.json").read_text())
    assert set(nxt["params"]) == {"mu1", "mu2", "L"}
    ell = json.loads((tmp_path / "ellipses.json").read_text())
    assert set(ell["ellipses"]) == {"0.68", "0.95"}
    assert len(ell["players"]) == 2
    again = tmp_path / "again"
    assert cli.run(["hier", "--data", str(out), "--grid-nu", "40", "--grid-sigma", "30",
                    "--draws", "20000", "--out-dir", str(again), "--seed", "3"]) == 0
    assert digests(tmp_path) == digests(again)


# ---- simulate / recover ----

def test_simulate_then_analyze_recovers_truth(tmp_path):
    assert cli.run(["simulate", "--mu1", "10", "--mu2", "40", "--L", "5", "--n", "500", "--seed", "7",
                    "--out-dir", str(tmp_path), "--out", "sim.csv"]) == 0
    out = tmp_path / "fit"
    assert cli.run(["analyze", "--data", str(tmp_path / "sim.csv"), "--particles", "100",
                    "--mcmc-steps", "100", "--seed", "7", "--out-dir", str(out)]) == 0
    post = out / "simulated_posterior.csv"
    for name, truth in (("mu1", 10), ("mu2", 40), ("L", 5)):
        lo, hi = np.percentile(read_column(post, name), [2.5, 97.5])
        assert lo <= truth <= hi


def test_simulated_file_parses(tmp_path):
    assert cli.run(["simulate", "--mu1", "5", "--mu2", "30", "--L", "3", "--n", "50", "--censor-prob",
                    "0.3", "--player", "Sim One", "--out-dir", str(tmp_path), "--seed", "1"]) == 0
    from hazard_bayes.ingest import parse_innings_file
    players = parse_innings_file((tmp_path / "simulated.csv").read_text()).players
    assert list(players) == ["Sim One"] and len(players["Sim One"]) == 50


def test_simulate_censor_modes(tmp_path):
    base = ["simulate", "--mu1", "10", "--mu2", "40", "--L", "5", "--n", "400", "--censor-prob", "0.5",
            "--seed", "4", "--out-dir", str(tmp_path)]
    assert cli.run(base + ["--out", "closure.csv"]) == 0
    assert cli.run(base + ["--out", "flag.csv", "--censor-mode", "at-score"]) == 0
    from hazard_bayes.ingest import career_summary, parse_innings_file
    closure, flag = (career_summary(parse_innings_file((tmp_path / f).read_text()).players["simulated"])
                     for f in ("closure.csv", "flag.csv"))
    assert flag.not_outs > closure.not_outs
    assert cli.run(base + ["--censor-mode", "sometimes"]) == cli.EXIT_USAGE


def test_recover_report(tmp_path):
    assert cli.run(["recover", "--mu1", "10", "--mu2", "40", "--L", "5", "--n", "40", "--repeats", "2",
                    "--particles", "20", "--mcmc-steps", "10", "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "recovery.json").read_text())
    assert report["repeats"] == 2 and set(report["coverage95"]) == {"mu1", "mu2", "L"}
    assert len((tmp_path / "recovery.csv").read_text().splitlines()) == 3


# ---- errors ----

def test_usage_errors(capsys):
    assert cli.run(["analyze", "--bogus"]) == cli.EXIT_USAGE
    assert cli.run(["nonsense"]) == cli.EXIT_USAGE
    assert cli.run([]) == cli.EXIT_USAGE


def test_missing_file(tmp_path):
    code = cli.run(["analyze", "--data", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)])
    assert code == cli.EXIT_MISSING_FILE
    assert cli.run(["hier", "--posteriors-dir", str(tmp_path / "nodir")]) == cli.EXIT_MISSING_FILE


def test_malformed_csv(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("player,score\nA,12\nA,twelve\n")
    assert cli.run(["analyze", "--data", str(bad), "--out-dir", str(tmp_path), *FAST]) == cli.EXIT_MALFORMED
    post = tmp_path / "x_posterior.csv"
    for row in ("1,2,3,oops,0.5", "1,2,3,1.5,0.5", "1,nan,3,0.5,0.5"):
        post.write_text(f"mu1,mu2,L,C,D\n{row}\n")
        assert cli.run(["curve", "--posterior", str(post), "--out-dir", str(tmp_path)]) == cli.EXIT_MALFORMED


def test_sampler_failure(data_file, tmp_path, monkeypatch):
    def broken(*a, **k):
        raise NestedSamplingError("no finite-likelihood particle found")

    monkeypatch.setattr(cli, "analyze_player", broken)
    code = cli.run(["analyze", "--data", str(data_file), "--player", "Ann", "--workers", "1",
                    "--out-dir", str(tmp_path), *FAST])
    assert code == cli.EXIT_SAMPLER


def test_invalid_parameters(tmp_path):
    code = cli.run(["simulate", "--mu1", "50", "--mu2", "40", "--L", "5", "--n", "10",
                    "--out-dir", str(tmp_path)])
    assert code == cli.EXIT_INVALID
    assert cli.run(["analyze", "--data", "x.csv", "--particles", "1"]) in (cli.EXIT_INVALID,
                                                                         cli.EXIT_MISSING_FILE)


def test_exit_codes_are_distinct():
    codes = [cli.EXIT_OK, cli.EXIT_ERROR, cli.EXIT_USAGE, cli.EXIT_MISSING_FILE, cli.EXIT_MALFORMED,
             cli.EXIT_SAMPLER, cli.EXIT_INVALID, cli.EXIT_REPLAY_MISMATCH]
    assert len(set(codes)) == len(codes)


# ---- manifests ----

def test_manifest_lists_every_output(analyzed):
    _, out = analyzed
    manifest = json.loads((out / "analyze_manifest.json").read_text())
    assert set(manifest["outputs"]) == set(digests(out))
    for name, digest in manifest["outputs"].items():
        assert formats.sha256_file(out / name) == digest
    assert manifest["seed"] == 42 and "--out-dir" not in manifest["argv"]
    assert manifest["command"] == "analyze" and manifest["config"]["particles"] == 30


def test_replay_reproduces_outputs(analyzed):
    _, out = analyzed
    assert cli.run(["replay", "--manifest", str(out / "analyze_manifest.json")]) == cli.EXIT_OK


def test_replay_detects_changed_input(data_file, tmp_path):
    out = tmp_path / "out"
    assert cli.run(["simulate", "--mu1", "5", "--mu2", "30", "--L", "3", "--n", "20",
                    "--out-dir", str(out), "--seed", "2"]) == 0
    assert cli.run(["replay", "--manifest", str(out / "simulate_manifest.json")]) == cli.EXIT_OK
    assert cli.run(["analyze", "--data", str(data_file), "--player", "Ann", "--out-dir", str(out),
                    *FAST]) == 0
    data_file.write_text(DATA + "Ann,4\n", encoding="utf-8")
    code = cli.run(["replay", "--manifest", str(out / "analyze_manifest.json")])
    assert code == cli.EXIT_REPLAY_MISMATCH


def test_replay_detects_changed_output_record(analyzed, tmp_path):
    _, out = analyzed
    manifest = json.loads((out / "analyze_manifest.json").read_text())
    manifest["outputs"]["Ann_posterior.csv"] = "0" * 64
    path = tmp_path / "tampered_manifest.json"
    path.write_text(json.dumps(manifest))
    assert cli.run(["replay", "--manifest", str(path)]) == cli.EXIT_REPLAY_MISMATCH


def test_inputs_are_not_mutated(analyzed, tmp_path):
    data, out = analyzed
    watched = [data, *sorted(out.glob("*_posterior.csv")), *sorted(out.glob("*_evidence.json"))]
    before = {p: formats.sha256_file(p) for p in watched}
    post = str(out / "Ann_posterior.csv")
    runs = [
        ["analyze", "--data", str(data), "--player", "Ann", "--out-dir", str(tmp_path / "a"), *FAST],
        ["compare", post, str(out / "Bo_posterior.csv"), "--out-dir", str(tmp_path / "b")],
        ["curve", "--posterior", post, "--x-max", "50", "--out-dir", str(tmp_path / "c")],
        ["hier", "--posteriors-dir", str(out), "--grid-nu", "20", "--grid-sigma", "20", "--draws", "5000",
         "--out-dir", str(tmp_path / "d")],
    ]
    for argv in runs:
        assert cli.run(argv) == 0
    assert {p: formats.sha256_file(p) for p in watched} == before
