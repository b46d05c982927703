from __future__ import annotations

import json

import pytest

from src.cli import EXIT_OK, EXIT_PLACEMENT, build_parser, main, resolve_config
from src.pipeline import validate_report

FAST = ["--max_iterations", "30", "--refine_iteration", "1", "--schedule_iteration", "20", "--log_interval", "0"]


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    # keeps the repository's own [tool.gsp_placer] table out of the runs
    monkeypatch.chdir(tmp_path)


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 4\n[placer]\ntarget_density = 0.8\n", encoding="utf-8")
    args = build_parser().parse_args(["eval", "d.aux", "--config", str(cfg), "--target-density", "0.7", "--skip-refine"])
    config = resolve_config(args)
    assert config.seed == 4
    assert config.target_density == 0.7
    assert config.skip_refine is True


def test_generate_then_run_pipeline(tmp_path):
    design = tmp_path / "design"
    assert main(["gen-synthetic", "--out", str(design), "--name", "syn", "--cells", "60", "--macros", "1", "--io", "4"]) == EXIT_OK
    aux = design / "syn.aux"
    assert aux.exists()
    assert json.loads((design / "syn.synthetic.json").read_text())

    work = tmp_path / "work"
    assert main(["pipeline", str(aux), "--workdir", str(work), "--plot", *FAST]) == EXIT_OK
    report = json.loads((work / "syn.metrics.json").read_text())
    assert validate_report(report) == []
    assert report["flow"] == "full"
    assert (work / "syn.gp.pl").exists()
    assert (work / "syn.gp.svg").exists()


def test_init_writes_placement_and_edges(tmp_path, tiny_aux):
    edges = tmp_path / "edges.txt"
    assert main(["init", str(tiny_aux), "--workdir", str(tmp_path), "--dump-edges", str(edges)]) == EXIT_OK
    assert (tmp_path / "tiny.init.pl").exists()
    lines = edges.read_text().split("\n")
    assert lines[0].split()[:2] == ["0", "1"]


def test_eval_prints_metrics(tiny_aux, tmp_path, capsys):
    assert main(["eval", str(tiny_aux), "--workdir", str(tmp_path)]) == EXIT_OK
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["design"] == "tiny"
    assert metrics["num_fixed"] == 1
    assert metrics["hpwl"] > 0


def test_schedule_dump_writes_frames(tmp_path, tiny_aux):
    assert main(["schedule-dump", str(tiny_aux), "--workdir", str(tmp_path), "--frames", "3", "--num_bins", "16"]) == EXIT_OK
    assert (tmp_path / "tiny.schedule.exp-restoration.svg").exists()
    assert (tmp_path / "tiny.schedule.exp-restoration.csv").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "{aux}", "--config", "missing.toml"],
        ["schedule-dump", "{aux}", "--skip-schedule"],
        ["eval", "no_such_design.aux"],
    ],
)
def test_placement_errors_exit_with_two(argv, tiny_aux, tmp_path):
    argv = [a.format(aux=tiny_aux) for a in argv] + ["--workdir", str(tmp_path)]
    assert main(argv) == EXIT_PLACEMENT


def test_plot_with_density_map(tmp_path, tiny_aux):
    out = tmp_path / "tiny.svg"
    assert main(["plot", str(tiny_aux), "--workdir", str(tmp_path), "--out", str(out), "--density"]) == EXIT_OK
    assert out.exists()
    assert (tmp_path / "tiny.density.svg").exists()
