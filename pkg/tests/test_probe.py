from __future__ import annotations

import numpy as np
import pytest

from data import SyntheticTask, generate
from modeling import ModalityGeometry, ModelError, build_polyvit
from schemas import TaskSpec
from training import linear_probe, probe_view

IMAGE = ModalityGeometry("image", (8, 8, 3), (4, 4))
AUDIO = ModalityGeometry("audio", (16, 8, 1), (4, 4))
VIDEO = ModalityGeometry("video", (4, 8, 8, 3), (2, 4, 4))


def _spec(modality: str, classes: int = 4) -> TaskSpec:
    return TaskSpec.model_validate({"modality": modality, "classes": classes})


def _splits(geometry: ModalityGeometry, seed: int = 5):
    return generate(SyntheticTask(geometry, 4, noise=0.1, train_size=64, val_size=32, test_size=8, seed=seed))


def _lstsq_accuracy(train_f, train_y, val_f, val_y) -> float:
    a = np.hstack([train_f, np.ones((len(train_f), 1))]).astype(np.float64)
    b = np.hstack([val_f, np.ones((len(val_f), 1))]).astype(np.float64)
    w, *_ = np.linalg.lstsq(a, np.eye(4)[train_y], rcond=None)
    return float(np.mean(np.argmax(b @ w, axis=1) == val_y))


@pytest.fixture
def image_only_model(make_config):
    config = make_config(
        {
            "model.dtype": "float64",
            "modality.video": None,
            "modality.audio": None,
            "task.toy_video": None,
            "task.toy_audio": None,
        }
    )
    return build_polyvit(config)


class TestLinearProbe:
    def test_model_parameters_are_frozen(self, toy_model64):
        before = {name: p.numpy() for name, p in toy_model64.parameters().items()}
        splits = _splits(IMAGE)
        linear_probe(toy_model64, _spec("image"), splits["train"], geometry=IMAGE, steps=20)
        for name, p in toy_model64.parameters().items():
            np.testing.assert_array_equal(p.data, before[name], err_msg=name)

    def test_separable_task_matches_least_squares_oracle(self, toy_model64):
        splits = _splits(IMAGE)
        train, val = splits["train"], splits["val"]
        result = linear_probe(toy_model64, _spec("image"), train, geometry=IMAGE, val=val, steps=300, lr=0.1)
        oracle = _lstsq_accuracy(
            toy_model64.features(train.inputs, "image"),
            train.labels,
            toy_model64.features(val.inputs, "image"),
            val.labels,
        )
        assert result.metrics["val_accuracy"] >= 0.95
        assert result.metrics["val_accuracy"] >= oracle - 0.02
        assert result.head.w.shape == (32, 4)
        assert result.source_modality is None

    def test_cross_modal_audio_probe(self, image_only_model):
        splits = _splits(AUDIO)
        result = linear_probe(
            image_only_model,
            _spec("audio"),
            splits["train"],
            geometry=AUDIO,
            val=splits["val"],
            steps=30,
            convert=True,
        )
        assert result.source_modality == "image"
        assert all(np.isfinite(v) for v in result.metrics.values())
        assert "audio" not in image_only_model.tokenizers

    def test_missing_tokenizer_without_conversion(self, image_only_model):
        splits = _splits(AUDIO)
        with pytest.raises(ModelError):
            linear_probe(image_only_model, _spec("audio"), splits["train"], geometry=AUDIO, steps=1)

    def test_geometry_must_match_task_modality(self, toy_model64):
        with pytest.raises(ModelError):
            linear_probe(toy_model64, _spec("audio"), _splits(IMAGE)["train"], geometry=IMAGE, steps=1)

    def test_multilabel_probe_reports_map(self, toy_model64):
        splits = generate(SyntheticTask(AUDIO, 4, train_size=32, val_size=16, seed=3, multilabel=True))
        spec = TaskSpec.model_validate({"modality": "audio", "classes": 4, "loss": "sigmoid"})
        result = linear_probe(toy_model64, spec, splits["train"], geometry=AUDIO, val=splits["val"], steps=20)
        assert set(result.metrics) == {"train_map", "val_map"}


class TestProbeView:
    def test_own_geometry_returns_model(self, toy_model64):
        view, source = probe_view(toy_model64, IMAGE)
        assert view is toy_model64 and source is None

    def test_video_view_from_image_model_shares_parameters(self, image_only_model):
        view, source = probe_view(image_only_model, VIDEO, convert=True)
        assert source == "image"
        assert view.encoder.layers_for("video")[0] is image_only_model.encoder.layers_for("image")[0]
        assert view.tokenizers["video"].E.shape == (96, 32)
        assert view.features(np.zeros((2,) + VIDEO.input_shape), "video").shape == (2, 32)

    def test_new_geometry_of_known_modality_keeps_its_route(self, toy_model64):
        bigger = ModalityGeometry("audio", (32, 8, 1), (4, 4))
        view, source = probe_view(toy_model64, bigger, convert=True)
        assert source == "audio"
        assert view.tokenizers["audio"].pos.shape == (1 + 16, 32)
        assert view.encoder is toy_model64.encoder

    def test_unknown_source(self, image_only_model):
        with pytest.raises(ModelError):
            probe_view(image_only_model, AUDIO, convert=True, source="video")

    def test_explicit_source_is_reported(self, toy_model64):
        bigger = ModalityGeometry("audio", (32, 8, 1), (4, 4))
        _, source = probe_view(toy_model64, bigger, convert=True, source="video")
        assert source == "video"
        splits = _splits(bigger)
        result = linear_probe(
            toy_model64, _spec("audio"), splits["train"], geometry=bigger, steps=2, convert=True, source="video"
        )
        assert result.source_modality == "video"
