import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from engagenet import example_paths
from engagenet.cli import main
from engagenet.pipeline import OUTPUT_FILES

GOLDEN = Path(__file__).parent / "golden" / "pipeline"
LOG, CONFIG = (str(p) for p in example_paths())
GOLDEN_ARGS = ["--seed", "7", "--iterations", "10"]


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["pipeline", "--log", LOG, "--config", CONFIG, "--out-dir", str(out), *GOLDEN_ARGS])
    assert code == 0
    return out


def test_pipeline_writes_five_files(pipeline_dir):
    assert sorted(p.name for p in pipeline_dir.iterdir()) == sorted(OUTPUT_FILES)


@pytest.mark.parametrize("name", OUTPUT_FILES)
def test_pipeline_matches_golden(pipeline_dir, name):
    assert (pipeline_dir / name).read_bytes() == (GOLDEN / name).read_bytes()


def test_report_command_rebuilds_report(pipeline_dir, tmp_path):
    code = main(["report", "--out-dir", str(pipeline_dir), "--out", str(tmp_path / "r.md")])
    assert code == 0
    assert (tmp_path / "r.md").read_bytes() == (pipeline_dir / "report.md").read_bytes()


def test_report_command_to_stdout(pipeline_dir, capsys):
    assert main(["report", "--out-dir", str(pipeline_dir), "--query", "P(sub_6=1 | sub_5=1)"]) == 0
    out = capsys.readouterr().out
    assert r"| P(sub_6=1 \| sub_5=1) |" in out
    assert "quiz_2" not in out.split("## Queries")[1]


def test_consensus_json_records_settings(pipeline_dir):
    doc = json.loads((pipeline_dir / "consensus.json").read_text())
    s = doc["settings"]
    assert (s["seed"], s["iterations"], s["window_days"], s["exclusion_rate"]) == (7, 10, 14, 0.95)
    assert [r for r, _ in s["excluded"]] == ["ln_1", "ln_2", "ln_3"]
    assert s["ingest"]["total"] == s["ingest"]["mapped"] + s["ingest"]["unmapped"] + s["ingest"]["malformed_time"]


def test_missing_config_is_usage_error():
    proc = subprocess.run(
        [sys.executable, "-m", "engagenet", "pipeline", "--log", LOG, "--out-dir", "x"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert proc.stderr.startswith("usage:")
    assert "--config" in proc.stderr


def test_no_mappable_rows_exit_2(tmp_path, capsys):
    log = tmp_path / "log.csv"
    log.write_text(
        "Time,User full name,Event context,Component,Event name\n"
        "2022-10-04T10:00:00Z,Ada,Forum: Announcements,Forum,Post created\n"
    )
    code = main(["pipeline", "--log", str(log), "--config", CONFIG, "--out-dir", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "Mapping rules" in err and "Chapter 1 Quiz" in err


def test_bad_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"resources": [], "window_days": -1}')
    assert main(["ingest", "--log", LOG, "--config", str(cfg)]) == 2
    assert "window_days" in capsys.readouterr().err


def test_bad_threshold_exit_2(tmp_path):
    assert main(["pipeline", "--log", LOG, "--config", CONFIG, "--out-dir", str(tmp_path),
                 "--threshold", "1.5"]) == 2


def test_ingest_prints_diagnostics(capsys):
    assert main(["ingest", "--log", LOG, "--config", CONFIG]) == 0
    diag = json.loads(capsys.readouterr().out)
    assert diag == {"total": 9843, "mapped": 8953, "unmapped": 890, "malformed_time": 0}


def test_matrix_then_learn_then_query(tmp_path, pipeline_dir, capsys):
    matrix = tmp_path / "m.csv"
    assert main(["matrix", "--log", LOG, "--config", CONFIG, "--out", str(matrix)]) == 0
    assert matrix.read_bytes() == (pipeline_dir / "matrix.csv").read_bytes()

    learned = tmp_path / "learn"
    assert main(["learn", "--matrix", str(matrix), "--out-dir", str(learned), *GOLDEN_ARGS]) == 0
    assert (learned / "strengths.csv").read_bytes() == (pipeline_dir / "strengths.csv").read_bytes()
    a = json.loads((learned / "consensus.json").read_text())
    b = json.loads((pipeline_dir / "consensus.json").read_text())
    assert a["arcs"] == b["arcs"]

    capsys.readouterr()
    assert main(["query", "--matrix", str(matrix), "--consensus", str(learned / "consensus.json"),
                 "P(sub_6=1 | sub_5=1)"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("P(sub_6=1 | sub_5=1)\tmodel=0.789\tempirical=0.795 support=88")


def test_query_rejects_bad_syntax(pipeline_dir):
    assert main(["query", "--matrix", str(pipeline_dir / "matrix.csv"),
                 "--consensus", str(pipeline_dir / "consensus.json"), "P(sub_6)"]) == 2


def test_simulate_then_pipeline(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--students", "60", "--seed", "3", "--async-rate", "0.2",
                 "--unmapped-rate", "0.1", "--out-dir", str(sim)]) == 0
    names = {"log.csv", "config.json", "truth_matrix.csv", "ground_truth.json", "ground_truth.md"}
    assert {p.name for p in sim.iterdir()} == names
    out = tmp_path / "run"
    assert main(["pipeline", "--log", str(sim / "log.csv"), "--config", str(sim / "config.json"),
                 "--iterations", "3", "--out-dir", str(out)]) == 0
    truth = (sim / "truth_matrix.csv").read_text().splitlines()
    parsed = (out / "matrix.csv").read_text().splitlines()
    # same header and, row for row up to hashed ids, the same cells
    assert truth[0] == parsed[0]
    strip = lambda lines: sorted(l.split(",", 1)[1] for l in lines[1:])
    assert strip(truth) == strip(parsed)


def test_simulate_rejects_bad_rate(tmp_path):
    assert main(["simulate", "--async-rate", "2", "--out-dir", str(tmp_path)]) == 2


def test_sensitivity_command(tmp_path):
    out = tmp_path / "sens"
    assert main(["sensitivity", "--log", LOG, "--config", CONFIG, "--windows", "7,21",
                 "--iterations", "3", "--out-dir", str(out)]) == 0
    doc = json.loads((out / "sensitivity.json").read_text())
    assert doc["windows"] == [7, 21]
    assert (out / "sensitivity.md").read_text().startswith("# Window sensitivity")


def test_sensitivity_rejects_single_window(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sensitivity", "--log", LOG, "--config", CONFIG, "--windows", "7", "--out-dir", str(tmp_path)])
    assert exc.value.code == 1


def test_fixture_can_be_copied_and_run(tmp_path):
    # the bundled files do not depend on their install location
    log = shutil.copy(LOG, tmp_path / "log.csv")
    cfg = shutil.copy(CONFIG, tmp_path / "config.json")
    assert main(["matrix", "--log", str(log), "--config", str(cfg), "--out", str(tmp_path / "m.csv")]) == 0
    assert (tmp_path / "m.csv").read_bytes() == (GOLDEN / "matrix.csv").read_bytes()
