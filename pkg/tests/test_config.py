from __future__ import annotations

import pytest

from data import EASY_NOISE_THRESHOLD
from persistence import config_from_items, config_items, dump_config_text, load_config, parse_config_text, preset_names
from schemas import ConfigError, validate_run_config


class TestParseConfigText:
    def test_nested_values_and_comments(self):
        text = "# run\nmodel.layers = 4  # depth\n\nmodality.image.patch = 4,4\n"
        assert parse_config_text(text) == {"model": {"layers": "4"}, "modality": {"image": {"patch": "4,4"}}}

    def test_missing_equals_names_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("model.layers = 2\nmodel.width 8\n")
        assert err.value.key == "line 2"

    def test_missing_value_names_key(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("model.layers =   # nothing\n")
        assert err.value.key == "model.layers"
        assert str(err.value).startswith("model.layers:")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("model.width = 8\nmodel.width = 16\n")
        assert err.value.key == "model.width"

    def test_malformed_dotted_key(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("model..width = 8\n")
        assert err.value.key == "model..width"

    def test_value_and_sub_keys_conflict(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("model = 3\nmodel.layers = 2\n")
        assert err.value.key == "model"
        with pytest.raises(ConfigError):
            parse_config_text("model.layers = 2\nmodel = 3\n")


class TestValidation:
    @pytest.mark.parametrize(
        "overrides,key",
        [
            ({"model.depth": 3}, "model.depth"),
            ({"task.toy_image.modality": "text"}, "task.toy_image.modality"),
            ({"model.adapt_layers": 5}, "model.adapt_layers"),
            ({"model.heads": 3}, "model.heads"),
            ({"modality.image.patch": "3,3"}, "modality.image.patch"),
            ({"task.toy_image.classes": 1}, "task.toy_image.classes"),
            ({"schedule.order": "toy_image,toy_video"}, "schedule.order"),
        ],
        ids=["unknown_key", "dangling_modality", "adapt_exceeds_layers", "width_not_divisible", "patch", "classes", "order"],
    )
    def test_error_names_offending_key(self, make_config, overrides, key):
        with pytest.raises(ConfigError) as err:
            make_config(overrides)
        assert err.value.key == key
        assert str(err.value).startswith(f"{key}:")

    def test_no_tasks(self, make_config):
        with pytest.raises(ConfigError):
            make_config({"task": {}})

    def test_extents_accept_x_separator(self, make_config):
        config = make_config({"modality.image.input_shape": "8x8x3"})
        assert config.modalities["image"].input_shape == (8, 8, 3)

    def test_schedule_kind_normalized(self, make_config):
        assert make_config({"schedule.kind": "task-by-task"}).schedule.kind == "task_by_task"


class TestDumpAndLoad:
    def test_items_round_trip(self, toy_config):
        again = config_from_items(config_items(toy_config))
        assert again.model_dump() == toy_config.model_dump()

    def test_text_round_trip_through_file(self, toy_config, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(dump_config_text(toy_config), encoding="utf-8")
        assert load_config(path).model_dump() == toy_config.model_dump()

    def test_dump_formats(self, toy_config):
        items = config_items(toy_config)
        assert items["modality.video.input_shape"] == "4,8,8,3"
        assert items["task.toy_audio.classes"] == "4"
        assert items["modality.image.allow_crop"] == "false"
        assert list(items) == sorted(items)
        assert not any(k.startswith("output.") for k in config_items(toy_config, include_output=False))

    @pytest.mark.parametrize("name", ["base9", "large9", "toy3"])
    def test_presets_load(self, name):
        config = load_config(name)
        assert config.tasks
        assert name in preset_names()

    def test_base_preset_shape(self):
        config = load_config("base9")
        assert len(config.tasks) == 9
        assert config.tasks["mini_audioset"].multilabel
        assert config.schedule.order[0] == "cifar100"

    def test_toy_preset_is_the_easy_cotraining_setup(self):
        config = load_config("toy3")
        assert sorted(t.modality for t in config.tasks.values()) == ["audio", "image", "video"]
        for name, task in config.tasks.items():
            assert task.noise < EASY_NOISE_THRESHOLD, name
            assert task.num_classes == 4 and task.steps == 600, name
        assert config.schedule.kind == "weighted"

    def test_unknown_source(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(tmp_path / "missing.cfg")
        assert err.value.key == "--config"

    def test_validate_from_raw_strings(self):
        data = parse_config_text(
            "model.layers = 2\nmodel.width = 8\nmodel.heads = 2\n"
            "modality.image.input_shape = 8,8,3\nmodality.image.patch = 4,4\n"
            "task.t.modality = image\ntask.t.classes = 3\n"
        )
        config = validate_run_config(data)
        assert config.model.layers == 2 and config.tasks["t"].num_classes == 3
