"""File formats, CSV, config parsing, the runner's artifact verification
(including deliberate tampering), and the command-line surface."""

import json
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from domatic_forge import (VertexColoring, build_from_generators,
                           make_block_graph, proper_edge_coloring,
                           truncated_geometric_law)
from domatic_forge.cli_reporting import (ConfigError, ExperimentConfig,
                                         parse_config, run, verify_artifacts)
from domatic_forge.cli_reporting.cli import main
from domatic_forge.cli_reporting.config import GraphSpec, validate_config
from domatic_forge.cli_reporting.files import (read_coloring,
                                               read_edge_coloring, read_graph,
                                               read_vertex_set, write_coloring,
                                               write_edge_coloring,
                                               write_graph, write_vertex_set)
from domatic_forge.cli_reporting.reporting import (read_csv,
                                                   sample_coverage_hits,
                                                   write_coverage_mc_csv,
                                                   write_csv)
from domatic_forge.cli_reporting.runner import verify_artifacts_report

from conftest import coloring_of, complete_graph, uniform_weights


# ---------------------------------------------------------------- file formats

def test_graph_round_trip(tmp_path):
    g = make_block_graph(2, 30, 3, seed=4)
    path = tmp_path / "g.txt"
    write_graph(path, g)
    h = read_graph(path)
    assert h.vertex_count == g.vertex_count
    assert h.weights == g.weights
    assert np.array_equal(h.indptr, g.indptr)
    assert np.array_equal(h.indices, g.indices)
    assert len(h.generators) == len(g.generators)


def test_graph_round_trip_non_uniform_weights(tmp_path):
    weights = [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]
    g = build_from_generators(weights, [[0, 2, 1]])
    path = tmp_path / "g.txt"
    write_graph(path, g)
    h = read_graph(path)
    assert h.weights == g.weights
    assert [tuple(e) for e in h.edge_list()] == [(1, 2)]


def test_graph_file_validation(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("vertices 2 generators 0\nweight 1/2\nweight 1/3\n")
    with pytest.raises(ValueError, match="sum to exactly 1"):
        read_graph(path)
    path.write_text("vertices 2 generators 1\nweight 1/2\nweight 1/2\nperm 0 0\n")
    with pytest.raises(ValueError, match="bijective"):
        read_graph(path)
    path.write_text("vertices 2\n")
    with pytest.raises(ValueError):
        read_graph(path)


def test_coloring_round_trip(tmp_path):
    f = coloring_of([0, 2, 1], 4)
    path = tmp_path / "f.txt"
    write_coloring(path, f)
    h = read_coloring(path)
    assert h.palette == 4 and h.colors.tolist() == [0, 2, 1]


def test_coloring_without_declared_palette(tmp_path):
    f = VertexColoring(np.array([3, 0, 9]))
    path = tmp_path / "f.txt"
    write_coloring(path, f)
    h = read_coloring(path)
    assert h.palette is None and h.colors.tolist() == [3, 0, 9]


def test_coloring_file_rejects_palette_escape(tmp_path):
    path = tmp_path / "f.txt"
    path.write_text("coloring 2 palette 2\n0\n5\n")
    with pytest.raises(ValueError, match="outside declared palette"):
        read_coloring(path)


def test_vertex_set_round_trip(tmp_path, c5):
    path = tmp_path / "s.txt"
    write_vertex_set(path, c5, np.array([True, False, True, False, True]))
    n, idx = read_vertex_set(path)
    assert n == 5 and idx.tolist() == [0, 2, 4]
    write_vertex_set(path, c5, [])
    n, idx = read_vertex_set(path)
    assert n == 5 and idx.size == 0


def test_vertex_set_file_validation(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("vertexset 5 size 3\n0 1 7\n")
    with pytest.raises(ValueError, match="outside"):
        read_vertex_set(path)
    path.write_text("vertexset 5 size 3\n0 1 1\n")
    with pytest.raises(ValueError, match="duplicate"):
        read_vertex_set(path)


def test_edge_coloring_round_trip(tmp_path, k4):
    ec = proper_edge_coloring(k4)
    path = tmp_path / "e.txt"
    write_edge_coloring(path, ec)
    h = read_edge_coloring(path)
    assert h.proper == ec.proper
    assert np.array_equal(h.edges, ec.edges)
    assert np.array_equal(h.colors, ec.colors)
    assert h.vertex_count == 4


# ------------------------------------------------------------------------- csv

def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [[1, "x"], [2, "y"]])
    header, rows = read_csv(path)
    assert header == ["a", "b"] and rows == [["1", "x"], ["2", "y"]]


def test_csv_rejects_unsafe_cells(tmp_path):
    path = tmp_path / "t.csv"
    with pytest.raises(ValueError):
        write_csv(path, ["a"], [["x,y"]])
    with pytest.raises(ValueError):
        write_csv(path, ["a"], [["x\ny"]])


def test_csv_rejects_ragged_rows(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1\n")
    with pytest.raises(ValueError, match="ragged"):
        read_csv(path)


def test_coverage_mc_csv_contents(tmp_path):
    path = tmp_path / "mc.csv"
    results = write_coverage_mc_csv(path, [(2, 3)], trials=4000, master_seed=9)
    (k, m, q, hits), = results
    assert (k, m) == (2, 3) and q == Fraction(2, 3)
    assert abs(hits / 4000 - float(q)) < 4 * (q * (1 - q) / 4000) ** Fraction(1, 2)
    header, rows = read_csv(path)
    assert header[:5] == ["k", "m", "law", "trials", "hits"]
    assert rows[0][4] == str(hits)


def test_coverage_hits_worker_and_chunk_invariant():
    law = truncated_geometric_law(3)
    a = sample_coverage_hits(law, 6, 2500, 7, workers=1)
    b = sample_coverage_hits(law, 6, 2500, 7, workers=4)
    assert a == b


# ---------------------------------------------------------------------- config

CONFIG_TEXT = """\
# demo configuration
operation=pipeline
seed=11
out_dir={out}
graph.file={graph}
k=2
stages=3
n0=1
t=1
trials=6
"""


def test_config_parse_and_echo_round_trip(tmp_path):
    text = CONFIG_TEXT.format(out=tmp_path / "o", graph=tmp_path / "g.txt")
    config = parse_config(text)
    assert config.operation == "pipeline" and config.stages == 3
    assert config.tail_start == 1 and config.membership_cap == 1
    again = parse_config(config.echo())
    assert again == config
    assert again.echo() == config.echo()


def test_config_rejects_unknown_and_duplicate_keys():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config("operation=oracle\nseed=0\nout_dir=o\nk=2\nm=3\nwat=1\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("operation=oracle\nseed=0\nseed=1\nout_dir=o\nk=2\nm=3\n")


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="trials must be at least 1"):
        validate_config(ExperimentConfig("oracle", 0, "o", k=2, m=3, trials=0))
    with pytest.raises(ConfigError, match="k must be at least 1"):
        validate_config(ExperimentConfig("recolor", 0, "o",
                                         graph=GraphSpec(file="g"),
                                         coloring_file="f"))
    with pytest.raises(ConfigError, match="stages"):
        validate_config(ExperimentConfig("pipeline", 0, "o",
                                         graph=GraphSpec(file="g"), k=2))
    with pytest.raises(ConfigError):
        validate_config(ExperimentConfig("pipeline", 0, "o",
                                         graph=GraphSpec(file="g"), k=2,
                                         stages=3, tail_start=5))


def test_config_requires_exactly_one_graph_source():
    with pytest.raises(ConfigError, match="graph"):
        validate_config(ExperimentConfig("pipeline", 0, "o", k=2, stages=3))
    with pytest.raises(ConfigError):
        validate_config(ExperimentConfig(
            "pipeline", 0, "o", k=2, stages=3,
            graph=GraphSpec(file="g", kind="torus", dims=(3,), steps=((1,),))))


# ------------------------------------------------------- runner + verification

@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    """One green pipeline run through the config runner, reused read-only."""
    root = tmp_path_factory.mktemp("run")
    graph_path = root / "g.txt"
    write_graph(graph_path, make_block_graph(2, 120, 12, seed=7))
    out = root / "out"
    config = parse_config(CONFIG_TEXT.format(out=out, graph=graph_path))
    record = run(config)
    return out, record


def test_runner_produces_verifiable_artifacts(pipeline_run):
    out, record = pipeline_run
    assert record.exit_status == 0
    assert record.operation == "pipeline"
    assert (out / "run_record.json").exists()
    for rel in ["graph.txt", "stage0.coloring.txt", "stage2.class.set.txt",
                "stable.set.txt", "sparse.set.txt", "certified.set.txt",
                "encoded.coloring.txt", "final.coloring.txt", "report.csv",
                "pipeline.csv", "sensitivity.csv", "trials.csv", "summary.txt"]:
        assert (out / rel).exists(), rel
    ok, problems = verify_artifacts_report(out)
    assert ok, problems
    assert verify_artifacts(out)


def test_runner_record_is_reproducible_json(pipeline_run):
    out, record = pipeline_run
    payload = json.loads((out / "run_record.json").read_text())
    assert payload["exit_status"] == 0
    assert payload["operation"] == "pipeline"
    assert parse_config(payload["config"]).echo() == payload["config"]
    assert payload["summary"]["certified_ok"] is True


def _copy_run(out: Path, dst: Path) -> Path:
    dst.mkdir()
    for p in out.iterdir():
        (dst / p.name).write_bytes(p.read_bytes())
    # the record's csv paths point at the original directory; rewrite them
    record = json.loads((dst / "run_record.json").read_text())
    record["csv_paths"] = [str(dst / Path(p).name) for p in record["csv_paths"]]
    (dst / "run_record.json").write_text(json.dumps(record))
    return dst


def test_verify_catches_out_of_palette_color(pipeline_run, tmp_path):
    out, _ = pipeline_run
    work = _copy_run(out, tmp_path / "tampered")
    path = work / "stage1.coloring.txt"
    header, body = path.read_text().splitlines()
    cells = body.split()
    cells[0] = "9"  # stage 1 has palette 2; declare an impossible color
    path.write_text(header + "\n" + " ".join(cells) + "\n")
    ok, problems = verify_artifacts_report(work)
    assert not ok
    assert any("stage 1: invalid coloring" in p for p in problems)


def test_verify_catches_wrong_class_set(pipeline_run, tmp_path):
    out, _ = pipeline_run
    work = _copy_run(out, tmp_path / "tampered")
    path = work / "stage2.class.set.txt"
    n, idx = read_vertex_set(path)
    swap = next(v for v in range(n) if v not in set(idx.tolist()))
    body = " ".join(str(v) for v in sorted([swap, *idx.tolist()[1:]]))
    path.write_text(f"vertexset {n} size {len(idx)}\n{body}\n")
    ok, problems = verify_artifacts_report(work)
    assert not ok
    assert any("lightest class differs" in p for p in problems)


def test_verify_captures_truncated_set_file(pipeline_run, tmp_path):
    out, _ = pipeline_run
    work = _copy_run(out, tmp_path / "tampered")
    path = work / "certified.set.txt"
    path.write_text(path.read_text().rsplit(" ", 1)[0] + "\n")
    ok, problems = verify_artifacts_report(work)
    assert not ok and problems


def test_verify_catches_config_tampering(pipeline_run, tmp_path):
    out, _ = pipeline_run
    work = _copy_run(out, tmp_path / "tampered")
    record = json.loads((work / "run_record.json").read_text())
    record["config"] = record["config"] + "# trailing note\n"
    (work / "run_record.json").write_text(json.dumps(record))
    ok, problems = verify_artifacts_report(work)
    assert not ok
    assert any("round-trip" in p for p in problems)


def test_verify_catches_final_coloring_tampering(pipeline_run, tmp_path):
    out, _ = pipeline_run
    work = _copy_run(out, tmp_path / "tampered")
    path = work / "final.coloring.txt"
    header, body = path.read_text().splitlines()
    cells = body.split()
    cells[0] = "1" if cells[0] == "0" else "0"
    path.write_text(header + "\n" + " ".join(cells) + "\n")
    ok, problems = verify_artifacts_report(work)
    assert not ok
    assert any("final coloring" in p for p in problems)


def test_verify_raises_on_missing_record(tmp_path):
    with pytest.raises(FileNotFoundError):
        verify_artifacts(tmp_path / "nope")


# ------------------------------------------------------------------------- cli

def test_cli_oracle_prints_exact_value(capsys):
    assert main(["oracle", "coverage", "--k", "2", "--m", "3"]) == 0
    assert "2/3" in capsys.readouterr().out


def test_cli_oracle_accepts_pmf_flag_spelling(capsys):
    assert main(["oracle", "coverage", "--k", "2", "--m", "3",
                 "--pmf", "uniform"]) == 0
    assert "3/4" in capsys.readouterr().out


def test_cli_color_report_writes_spectrum_csv(tmp_path, capsys):
    gp = tmp_path / "g.txt"
    cp = tmp_path / "f.txt"
    write_graph(gp, complete_graph(4))
    write_coloring(cp, coloring_of([0, 1, 2, 3], 4))
    out = tmp_path / "spectra.csv"
    rc = main(["color", "report", "--graph", str(gp), "--coloring", str(cp),
               "--k", "2", "--out", str(out)])
    assert rc == 0
    # only vertices 2 and 3 see both colors 0 and 1 among their neighbors
    assert "fraction: 1/2" in capsys.readouterr().out
    header, rows = read_csv(out)
    assert header == ["kind", "vertex", "value_num", "value_den", "value_float"]
    assert [r for r in rows if r[0] == "spectrum"] == [
        ["spectrum", str(v), "3", "1", "3.0"] for v in range(4)]
    assert rows[-1] == ["fraction", "all", "1", "2", "0.5"]


def test_cli_invalid_config_file_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("operation=pipeline\nseed=0\nout_dir=o\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_cli_missing_file_exits_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "absent.txt")]) == 2


def test_cli_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["pipeline"])  # required arguments missing
    assert info.value.code == 2


def test_cli_tailgraph_threshold_failure_exits_1(capsys):
    assert main(["tailgraph", "check", "--universe", "6", "--length", "3"]) == 0
    assert main(["tailgraph", "check", "--universe", "6", "--length", "3",
                 "--threshold", "3"]) == 1


def test_cli_supplier_failure_exits_1(tmp_path, capsys):
    g = complete_graph(4)  # far too small for a 4-color stage
    gp = tmp_path / "g.txt"
    write_graph(gp, g)
    rc = main(["pipeline", "--graph", str(gp), "--stages", "3", "--k-target",
               "2", "--trials", "2", "--seed", "1",
               "--out-dir", str(tmp_path / "o")])
    assert rc == 1


def test_cli_full_run_and_verify(tmp_path, capsys):
    gp = tmp_path / "g.txt"
    write_graph(gp, make_block_graph(2, 120, 12, seed=7))
    out = tmp_path / "o"
    rc = main(["pipeline", "--graph", str(gp), "--stages", "3", "--n0", "1",
               "--t", "1", "--k-target", "2", "--trials", "6", "--seed", "11",
               "--out-dir", str(out)])
    assert rc == 0
    capsys.readouterr()
    assert main(["verify", "--dir", str(out)]) == 0
    assert "ok" in capsys.readouterr().out


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "domatic_forge", "oracle", "coverage",
         "--k", "2", "--m", "3"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert "2/3" in proc.stdout
