from __future__ import annotations

import numpy as np
import pytest

from cli.main import main
from persistence import dump_config_text, read_checkpoint
from schedules import parse_dump_counts


@pytest.fixture
def small_config_file(small_config, tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(dump_config_text(small_config), encoding="utf-8")
    return path


def _train(config_file, out, *extra):
    return main(["train", "--config", str(config_file), "--out", str(out), "--log", str(out.with_suffix(".log")), *extra])


class TestParams:
    def test_base_breakdown(self, capsys):
        assert main(["params", "--config", "base9"]) == 0
        out = capsys.readouterr().out
        ratio = next(line for line in out.splitlines() if line.startswith("ratio:"))
        assert 7.9 <= float(ratio.split(":")[1]) <= 8.7
        assert "single-task fleet:" in out
        assert "variant polyvit_adapt_half:" in out


class TestSchedule:
    def test_dump_recounts_to_budgets(self, tmp_path, capsys):
        dump = tmp_path / "plan.txt"
        assert main(["schedule", "--config", "toy3", "--dump", str(dump)]) == 0
        counts = parse_dump_counts(dump.read_text(encoding="utf-8").splitlines())
        assert counts == {"toy_image": 600, "toy_video": 600, "toy_audio": 600}
        assert "weighted plan: 1800 steps" in capsys.readouterr().out

    def test_schedule_override(self, tmp_path):
        dump = tmp_path / "plan.txt"
        assert main(["schedule", "--config", "toy3", "--schedule", "alternating", "--dump", str(dump)]) == 0
        lines = dump.read_text(encoding="utf-8").splitlines()
        assert [line.split()[1] for line in lines[:3]] == ["toy_image", "toy_video", "toy_audio"]


class TestTrain:
    def test_zero_steps_equals_initial_checkpoint(self, small_config_file, tmp_path):
        init = tmp_path / "init.pvck"
        trained = tmp_path / "zero.pvck"
        assert main(["init", "--config", str(small_config_file), "--out", str(init)]) == 0
        assert _train(small_config_file, trained, "--max-steps", "0") == 0
        a, b = read_checkpoint(init).tensors, read_checkpoint(trained).tensors
        assert set(a) == set(b)
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])

    def test_identical_runs_write_identical_checkpoints(self, small_config_file, tmp_path, capsys):
        first, second = tmp_path / "a.pvck", tmp_path / "b.pvck"
        assert _train(small_config_file, first) == 0
        assert _train(small_config_file, second) == 0
        assert first.read_bytes() == second.read_bytes()
        assert first.with_suffix(".log").read_text(encoding="utf-8") == second.with_suffix(".log").read_text(
            encoding="utf-8"
        )
        assert "trained 15 steps (weighted)" in capsys.readouterr().out

    def test_seed_override_changes_checkpoint(self, small_config_file, tmp_path):
        first, second = tmp_path / "a.pvck", tmp_path / "b.pvck"
        assert _train(small_config_file, first, "--max-steps", "2") == 0
        assert _train(small_config_file, second, "--max-steps", "2", "--seed", "7") == 0
        assert read_checkpoint(second).metadata["seed.train"] == "7"
        assert first.read_bytes() != second.read_bytes()


class TestEvalAndProbe:
    def test_eval_and_probe_a_checkpoint(self, small_config_file, tmp_path, capsys):
        ckpt = tmp_path / "m.pvck"
        assert _train(small_config_file, ckpt, "--max-steps", "3") == 0
        capsys.readouterr()
        assert main(["eval", "--ckpt", str(ckpt), "--task", "toy_image", "--split", "val"]) == 0
        assert capsys.readouterr().out.startswith("toy_image val accuracy=")
        assert main(["probe", "--ckpt", str(ckpt), "--task", "toy_audio", "--steps", "5"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("probe toy_audio (audio (16, 8, 1))")
        assert "val_accuracy=" in out

    @pytest.mark.parametrize("convert", ["appendix-d", "cross-modal"])
    def test_inline_probe_task_with_conversion(self, small_config_file, tmp_path, capsys, convert):
        ckpt = tmp_path / "m.pvck"
        assert main(["init", "--config", str(small_config_file), "--out", str(ckpt)]) == 0
        spec = "modality=audio;classes=3;input_shape=32,8,1;patch=4,4;train_size=12;val_size=6"
        assert main(["probe", "--ckpt", str(ckpt), "--task", spec, "--convert", convert, "--steps", "3"]) == 0
        assert "probe probe_audio (audio (32, 8, 1)) via audio" in capsys.readouterr().out

    def test_unknown_task(self, small_config_file, tmp_path, capsys):
        ckpt = tmp_path / "m.pvck"
        assert main(["init", "--config", str(small_config_file), "--out", str(ckpt)]) == 0
        assert main(["eval", "--ckpt", str(ckpt), "--task", "nope"]) == 2
        assert "error: --task" in capsys.readouterr().err


class TestErrors:
    def test_unknown_subcommand(self):
        assert main(["fly"]) == 2

    def test_config_error(self, capsys):
        assert main(["params", "--config", "no-such-preset"]) == 2
        assert "error: --config" in capsys.readouterr().err

    def test_invalid_config_file_names_key(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("model.layers = 2\nmodel.adapt_layers = 3\nmodality.image.input_shape = 8,8,3\nmodality.image.patch = 4,4\n", encoding="utf-8")
        assert main(["params", "--config", str(bad)]) == 2
        assert "model.adapt_layers" in capsys.readouterr().err

    def test_missing_checkpoint(self, tmp_path, capsys):
        assert main(["eval", "--ckpt", str(tmp_path / "none.pvck"), "--task", "toy_image"]) == 2
        assert "error:" in capsys.readouterr().err
