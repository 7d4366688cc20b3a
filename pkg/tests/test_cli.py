import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from ssvepkit.cli import main
from ssvepkit.filterbank import load_bank_config, save_bank_config, seeded_bank
from ssvepkit.signals import WindowPlan


def run(*argv):
    return main([str(a) for a in argv])


def synth_args(out, seed=7, trials=3, extra=()):
    return (
        "synth", "--targets", "8,14,28", "--trials-per-target", trials,
        "--duration", "10", "--rate", "128", "--seed", seed, "--out", out,
        "--name", "demo", *extra,
    )


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "ds"
    assert run(*synth_args(out)) == 0
    return out / "manifest.yaml"


class TestSynth:
    def test_writes_manifest_and_trials(self, tmp_path):
        out = tmp_path / "ds"
        assert run(*synth_args(out, trials=5)) == 0
        assert (out / "manifest.yaml").exists()
        assert len(list(out.rglob("trial_*.csv"))) == 15

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(*synth_args(a)) == 0
        assert run(*synth_args(b)) == 0
        assert tree_bytes(a) == tree_bytes(b)

    def test_existing_output_needs_force(self, tmp_path, capsys):
        out = tmp_path / "ds"
        assert run(*synth_args(out)) == 0
        assert run(*synth_args(out)) == 1
        assert "force" in capsys.readouterr().err
        assert run(*synth_args(out, extra=("--force",))) == 0

    def test_nyquist_violation_fails(self, tmp_path, capsys):
        code = run("synth", "--targets", "8,14,28", "--trials-per-target", "1",
                   "--duration", "4", "--rate", "64", "--out", tmp_path / "x")
        assert code == 1
        assert "Nyquist" in capsys.readouterr().err


class TestTrain:
    def test_trains_and_model_round_trips(self, dataset, tmp_path):
        models = tmp_path / "models"
        code = run("train", "--manifest", dataset, "--method", "bifb",
                   "--bandwidths", "0.4,0.6", "--gains", "1,2",
                   "--harmonic-weights", "0,0.5", "--windows", "3,4",
                   "--out", models)
        assert code == 0
        model_file = models / "S01_bifb.model"
        bank, plan = load_bank_config(model_file)
        assert bank.targets == (8.0, 14.0, 28.0)
        assert (models / "training_trace_S01.csv").exists()
        assert (models / "training_summary_bifb.txt").exists()

    def test_single_candidate_grid_is_the_model(self, dataset, tmp_path):
        models = tmp_path / "models"
        code = run("train", "--manifest", dataset, "--method", "bifb",
                   "--bandwidths", "0.4", "--gains", "1.5",
                   "--harmonic-weights", "0.25", "--windows", "4",
                   "--out", models)
        assert code == 0
        bank, plan = load_bank_config(models / "S01_bifb.model")
        assert plan == WindowPlan(4.0, 1.0)
        assert bank.harmonic_weight == 0.25
        assert bank.fundamentals[0].bandwidth == 0.4
        assert bank.fundamentals[0].gain == 1.5

    def test_missing_manifest_names_path(self, tmp_path, capsys):
        code = run("train", "--manifest", tmp_path / "missing.yaml",
                   "--out", tmp_path / "m")
        assert code == 1
        assert "missing.yaml" in capsys.readouterr().err

    def test_insufficient_trials_names_subject(self, tmp_path, capsys):
        out = tmp_path / "ds"
        assert run(*synth_args(out, trials=1)) == 0
        code = run("train", "--manifest", out / "manifest.yaml",
                   "--out", tmp_path / "m", "--windows", "4")
        assert code == 1
        err = capsys.readouterr().err
        assert "S01" in err and "2 trials" in err

    def test_trains_baseline_window(self, dataset, tmp_path):
        models = tmp_path / "models"
        code = run("train", "--manifest", dataset, "--method", "psda",
                   "--windows", "3,4", "--out", models)
        assert code == 0
        text = (models / "S01_psda.model").read_text()
        assert "method = psda" in text


class TestEval:
    def test_all_methods_report(self, dataset, tmp_path, capsys):
        models = tmp_path / "models"
        assert run("train", "--manifest", dataset, "--method", "bifb",
                   "--bandwidths", "0.6", "--gains", "1", "--harmonic-weights", "0.5",
                   "--windows", "4", "--out", models) == 0
        results = tmp_path / "results"
        code = run("eval", "--manifest", dataset, "--method", "all",
                   "--model", models, "--out", results, "--format", "csv")
        assert code == 0
        lines = (results / "report.csv").read_text().splitlines()
        assert lines[0].startswith("subject,trials,method")
        rows = [line.split(",") for line in lines[1:]]
        assert [r[2] for r in rows] == ["PSDA", "CCA", "BIFB"]
        for r in rows:
            assert r[4] == "100.0"  # accuracy on the clean corpus
            assert r[3] == "6.0"    # MDT at the earliest decision time

    def test_missing_bifb_model_fails(self, dataset, tmp_path, capsys):
        code = run("eval", "--manifest", dataset, "--method", "bifb",
                   "--out", tmp_path / "r")
        assert code == 1
        assert "model" in capsys.readouterr().err

    def test_target_mismatch_rejected(self, dataset, tmp_path, capsys):
        model = tmp_path / "other.model"
        save_bank_config(seeded_bank((6.0, 7.0, 8.0)), WindowPlan(4.0, 1.0), model)
        code = run("eval", "--manifest", dataset, "--method", "bifb",
                   "--model", model, "--out", tmp_path / "r")
        assert code == 1
        assert "mismatch" in capsys.readouterr().err

    def test_text_format(self, dataset, tmp_path):
        results = tmp_path / "results"
        code = run("eval", "--manifest", dataset, "--method", "psda",
                   "--out", results, "--format", "text")
        assert code == 0
        assert (results / "report.txt").read_text().startswith("subject")


class TestInspect:
    def test_spectrum_plot(self, dataset, tmp_path):
        plots = tmp_path / "plots"
        code = run("inspect", "--manifest", dataset, "--subject", "S01",
                   "--trial", "0", "--out", plots)
        assert code == 0
        svgs = list(plots.glob("*.svg"))
        assert len(svgs) == 1
        ET.parse(svgs[0])

    def test_bank_only_plot(self, tmp_path):
        model = tmp_path / "m.model"
        save_bank_config(seeded_bank((8.0, 14.0, 28.0)), WindowPlan(4.0, 1.0), model)
        plots = tmp_path / "plots"
        assert run("inspect", "--model", model, "--out", plots) == 0
        text = (plots / "filterbank.svg").read_text()
        assert text.count('class="filter') == 6

    def test_inspect_needs_input(self, tmp_path, capsys):
        assert run("inspect", "--out", tmp_path / "p") == 1


class TestDeterminism:
    def test_full_workflow_byte_identical(self, tmp_path):
        outputs = []
        for name in ("x", "y"):
            root = tmp_path / name
            ds = root / "ds"
            assert run(*synth_args(ds, seed=11)) == 0
            models = root / "models"
            assert run("train", "--manifest", ds / "manifest.yaml",
                       "--bandwidths", "0.6", "--gains", "1,2",
                       "--harmonic-weights", "0,0.5", "--windows", "3,4",
                       "--out", models) == 0
            results = root / "results"
            assert run("eval", "--manifest", ds / "manifest.yaml", "--method", "all",
                       "--model", models, "--out", results) == 0
            plots = root / "plots"
            assert run("inspect", "--manifest", ds / "manifest.yaml",
                       "--model", models / "S01_bifb.model", "--out", plots) == 0
            outputs.append(tree_bytes(root))
        assert outputs[0] == outputs[1]
