from __future__ import annotations

import struct

import numpy as np
import pytest

from modeling import build_polyvit
from optimizers import OptimizerState, sgd_step
from persistence import (
    Checkpoint,
    CheckpointError,
    checkpoint_config,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    optimizer_state,
    read_checkpoint,
    restore_model,
    run_metadata,
    save_checkpoint,
)


def _trained_state(model) -> OptimizerState:
    params = model.parameters()
    state = OptimizerState(momentum=0.9)
    grads = {name: np.full(params[name].shape, 0.01, dtype=params[name].dtype) for name in list(params)[:5]}
    sgd_step(params, grads, 0.1, state)
    state.record_task_step("toy_image")
    return state


def _tiny() -> Checkpoint:
    return Checkpoint(metadata={"a": "b"}, tensors={"w": np.arange(4, dtype=np.float32)})


class TestEncoding:
    def test_tiny_round_trip(self):
        back = decode_checkpoint(encode_checkpoint(_tiny()))
        assert back.metadata == {"a": "b"}
        np.testing.assert_array_equal(back.tensors["w"], np.arange(4, dtype=np.float32))
        assert back.optimizer == {}

    def test_corrupted_payload_byte(self):
        data = bytearray(encode_checkpoint(_tiny()))
        start = bytes(data).find(np.arange(4, dtype=np.float32).tobytes())
        data[start + 5] ^= 0xFF
        with pytest.raises(CheckpointError) as err:
            decode_checkpoint(bytes(data))
        assert "checksum" in str(err.value)

    def test_bad_magic(self):
        data = encode_checkpoint(_tiny())
        with pytest.raises(CheckpointError):
            decode_checkpoint(b"NOPE" + data[4:])

    def test_unsupported_version(self):
        data = encode_checkpoint(_tiny())
        with pytest.raises(CheckpointError) as err:
            decode_checkpoint(data[:4] + struct.pack("<I", 2) + data[8:])
        assert "version" in str(err.value)

    def test_trailing_bytes(self):
        with pytest.raises(CheckpointError):
            decode_checkpoint(encode_checkpoint(_tiny()) + b"\x00")

    @pytest.mark.parametrize("cut", [1, 9, 30])
    def test_truncated(self, cut):
        data = encode_checkpoint(_tiny())
        with pytest.raises(CheckpointError):
            decode_checkpoint(data[:-cut])

    def test_metadata_key_with_equals_rejected(self):
        with pytest.raises(CheckpointError):
            encode_checkpoint(Checkpoint(metadata={"a=b": "c"}, tensors={}))

    def test_unsupported_dtype(self):
        with pytest.raises(CheckpointError):
            encode_checkpoint(Checkpoint(metadata={}, tensors={"i": np.arange(3)}))


class TestSaveAndLoad:
    def test_save_load_save_is_byte_identical(self, toy_config, tmp_path):
        model = build_polyvit(toy_config)
        state = _trained_state(model)
        first = tmp_path / "a.pvck"
        second = tmp_path / "b.pvck"
        save_checkpoint(first, model, toy_config, state)
        loaded, loaded_state, loaded_config = load_checkpoint(first)
        save_checkpoint(second, loaded, loaded_config, loaded_state)
        assert first.read_bytes() == second.read_bytes()

    def test_restores_parameters_and_optimizer(self, toy_config, tmp_path):
        model = build_polyvit(toy_config)
        state = _trained_state(model)
        path = tmp_path / "m.pvck"
        save_checkpoint(path, model, toy_config, state)
        loaded, loaded_state, _ = load_checkpoint(path)
        for name, p in model.parameters().items():
            np.testing.assert_array_equal(loaded.parameters()[name].data, p.data)
        assert loaded_state.global_step == 1
        assert loaded_state.task_steps == {"toy_image": 1}
        assert loaded_state.update_counts == state.update_counts
        assert sorted(loaded_state.buffers) == sorted(state.buffers)

    def test_one_tensor_per_named_parameter(self, toy_config, tmp_path):
        model = build_polyvit(toy_config)
        path = tmp_path / "m.pvck"
        save_checkpoint(path, model, toy_config)
        checkpoint = read_checkpoint(path)
        assert set(checkpoint.tensors) == set(model.parameters())
        assert not checkpoint.optimizer

    def test_metadata_records_run_facts(self, toy_config):
        meta = run_metadata(toy_config)
        assert meta["schedule.kind"] == "weighted"
        assert meta["seed.init"] == "0"
        assert meta["optimizer.form"] == "heavy_ball"
        assert meta["pretrained.inflation"] == "none"
        assert meta["config.model.width"] == "32"
        assert not any(k.startswith("config.output.") for k in meta)
        restored = checkpoint_config(Checkpoint(metadata=meta, tensors={}))
        assert restored.model_dump() == toy_config.model_dump()

    def test_missing_tensor(self, toy_config):
        model = build_polyvit(toy_config)
        tensors = {name: p.numpy() for name, p in model.named_parameters()}
        tensors.pop("task.toy_image.head.w")
        with pytest.raises(CheckpointError):
            restore_model(Checkpoint(metadata=run_metadata(toy_config), tensors=tensors))

    def test_shape_mismatch(self, toy_config):
        model = build_polyvit(toy_config)
        tensors = {name: p.numpy() for name, p in model.named_parameters()}
        tensors["encoder.final_ln.gamma"] = np.ones(7, dtype=np.float32)
        with pytest.raises(CheckpointError):
            restore_model(Checkpoint(metadata=run_metadata(toy_config), tensors=tensors))

    def test_no_config(self):
        with pytest.raises(CheckpointError):
            checkpoint_config(_tiny())

    def test_foreign_momentum_form(self):
        with pytest.raises(CheckpointError):
            optimizer_state(Checkpoint(metadata={"optimizer.form": "nesterov"}, tensors={}))

    def test_unreadable_path(self, tmp_path):
        with pytest.raises(CheckpointError):
            read_checkpoint(tmp_path / "absent.pvck")
