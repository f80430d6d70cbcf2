import json
import subprocess
import sys

import pytest

from rhythmnmf.cli import main

SMALL = """\
seed: 3
solver: {restarts: 4, max_iterations: 100}
rank: {k_min: 2, k_max: 4, runs_per_k: 3}
window: {start_week: 2, end_week: 9}
synth: {n_persons: 24, weeks: 8}
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "cfg.yaml").write_text(SMALL)
    assert main(["synth", "--config", str(tmp_path / "cfg.yaml"), "--out-dir", str(tmp_path / "syn")]) == 0
    return tmp_path


def run(workdir, *args):
    return main([*args, "--config", str(workdir / "cfg.yaml")])


def snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_synth_outputs(workdir):
    files = snapshot(workdir / "syn")
    assert set(files) == {"events.csv", "ground_truth.json"}
    truth = json.loads(files["ground_truth.json"])
    assert len(truth["person_ids"]) == 24


def test_stage_by_stage(workdir, capsys):
    events = str(workdir / "syn" / "events.csv")
    out = workdir / "out"
    assert run(workdir, "ingest", events, "--out-dir", str(out)) == 0
    assert run(workdir, "rank", str(out / "rhythms.csv"), "--out-dir", str(out)) == 0
    k = int(capsys.readouterr().out.strip().splitlines()[-1])
    assert 2 <= k <= 4
    assert run(workdir, "decompose", str(out / "rhythms.csv"), "--k", "3", "--out-dir", str(out)) == 0
    assert run(workdir, "sleep", events, "--out-dir", str(out)) == 0
    assert run(workdir, "report", "--weights", str(out / "weights_W.csv"),
               "--sleep", str(out / "sleep_summary.csv"), "--out-dir", str(out)) == 0
    names = set(snapshot(out))
    assert {"rhythms.csv", "filter_report.json", "rank_curve.csv", "rank_selection.json",
            "components_H.csv", "weights_W.csv", "weights_normalized.csv", "factorization.json",
            "population_average.csv", "sleep_summary.csv", "weight_correlations.csv",
            "sleep_correlations.csv", "hist_weights.json", "hist_sleep.json"} <= names
    assert not any(n.startswith(".") for n in names)


def test_pipeline_deterministic_across_jobs(workdir):
    events = str(workdir / "syn" / "events.csv")
    assert run(workdir, "pipeline", events, "--out-dir", str(workdir / "a")) == 0
    assert run(workdir, "pipeline", events, "--out-dir", str(workdir / "b"), "--jobs", "2") == 0
    assert snapshot(workdir / "a") == snapshot(workdir / "b")


def test_usage_errors_exit_1(workdir, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["decompose"])
    assert exc.value.code == 1
    bad = workdir / "bad.yaml"
    bad.write_text("solver: {bogus: 1}\n")
    assert main(["synth", "--config", str(bad), "--out-dir", str(workdir / "x")]) == 1
    assert main(["synth", "--set", "rank.k_min", "--out-dir", str(workdir / "x")]) == 1
    assert main(["decompose", str(workdir / "nothing.csv"), "--out-dir", str(workdir / "x")]) == 2
    assert not (workdir / "x").exists()


def test_invalid_k_exit_1(workdir):
    events = str(workdir / "syn" / "events.csv")
    out = workdir / "out"
    assert run(workdir, "ingest", events, "--out-dir", str(out)) == 0
    before = snapshot(out)
    assert run(workdir, "decompose", str(out / "rhythms.csv"), "--k", "0", "--out-dir", str(out)) == 1
    assert snapshot(out) == before


def test_data_errors_exit_2(workdir):
    junk = workdir / "junk.csv"
    junk.write_text("a,b\n" * 200)
    out = workdir / "out"
    assert run(workdir, "ingest", str(junk), "--out-dir", str(out)) == 2
    neg = workdir / "neg.csv"
    neg.write_text("person_id,comp_1,comp_2\na,-1,2\n")
    assert run(workdir, "report", "--weights", str(neg), "--sleep", str(neg), "--out-dir", str(out)) == 2
    assert not out.exists()


def test_alignment_error_exit_2(workdir):
    events = str(workdir / "syn" / "events.csv")
    out = workdir / "out"
    assert run(workdir, "pipeline", events, "--k", "2", "--out-dir", str(out)) == 0
    lines = (out / "sleep_summary.csv").read_text().splitlines()
    (workdir / "short.csv").write_text("\n".join(lines[:-1]) + "\n")
    rep = workdir / "rep"
    assert run(workdir, "report", "--weights", str(out / "weights_W.csv"),
               "--sleep", str(workdir / "short.csv"), "--out-dir", str(rep)) == 2
    assert not rep.exists()


def test_degenerate_exit_3(workdir):
    w = workdir / "w.csv"
    w.write_text("person_id,comp_1,comp_2\na,0,0\nb,1,2\nc,2,1\n")
    s = workdir / "s.csv"
    s.write_text("person_id,sleep_time,wake_time,mid_sleep,mean_duration,nights_used\n"
                 "a,23.0,7.0,3.0,8.0,5\nb,0.0,8.0,4.0,8.0,5\nc,1.0,9.0,5.0,8.0,5\n")
    out = workdir / "out"
    assert run(workdir, "report", "--weights", str(w), "--sleep", str(s), "--out-dir", str(out)) == 3
    assert not out.exists()


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "rhythmnmf", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "pipeline" in proc.stdout


def test_commands_are_idempotent(workdir):
    events = str(workdir / "syn" / "events.csv")
    out = workdir / "out"
    assert run(workdir, "ingest", events, "--out-dir", str(out)) == 0
    first = snapshot(out)
    assert run(workdir, "ingest", events, "--out-dir", str(out)) == 0
    assert snapshot(out) == first
