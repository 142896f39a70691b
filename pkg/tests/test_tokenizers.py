from __future__ import annotations

import numpy as np
import pytest

from modeling import GeometryError, ModalityGeometry, init_tokenizer, patchify, seq_len

IMAGE = ModalityGeometry("image", (384, 384, 3), (16, 16))
VIDEO = ModalityGeometry("video", (32, 224, 224, 3), (4, 16, 16))
AUDIO = ModalityGeometry("audio", (800, 128, 1), (16, 16))


class TestGeometry:
    @pytest.mark.parametrize(
        "geometry,grid,tokens",
        [(IMAGE, (24, 24), 577), (VIDEO, (8, 14, 14), 1569), (AUDIO, (50, 8), 401)],
        ids=["image", "video", "audio"],
    )
    def test_benchmark_geometries(self, geometry, grid, tokens):
        assert geometry.grid == grid
        assert seq_len(geometry) == tokens

    def test_patch_dims(self):
        assert IMAGE.patch_dim == 768
        assert VIDEO.patch_dim == 3072
        assert AUDIO.patch_dim == 256

    def test_non_divisible_extent_is_rejected(self):
        with pytest.raises(GeometryError) as err:
            ModalityGeometry("image", (10, 8, 3), (4, 4)).grid
        assert "10" in str(err.value)

    def test_allow_crop_floors(self):
        g = ModalityGeometry("image", (10, 8, 3), (4, 4), allow_crop=True)
        assert g.grid == (2, 2)
        assert patchify(np.zeros((10, 8, 3)), g).shape == (4, 48)

    def test_seq_len_over_small_grid(self):
        for H in range(1, 9):
            for W in range(1, 7):
                for h in range(1, 5):
                    for w in range(1, 4):
                        g = ModalityGeometry("audio", (H, W, 1), (h, w))
                        if H % h or W % w:
                            with pytest.raises(GeometryError):
                                seq_len(g)
                        else:
                            assert seq_len(g) == 1 + (H // h) * (W // w)
        for F in range(1, 7):
            for f in range(1, 4):
                g = ModalityGeometry("video", (F, 4, 6, 3), (f, 2, 3))
                if F % f:
                    with pytest.raises(GeometryError):
                        seq_len(g)
                else:
                    assert seq_len(g) == 1 + (F // f) * 2 * 2

    def test_wrong_rank(self):
        with pytest.raises(GeometryError):
            ModalityGeometry("video", (8, 8, 3), (4, 4))

    def test_unknown_modality(self):
        with pytest.raises(GeometryError):
            ModalityGeometry("text", (8, 8, 3), (4, 4))


def _conv_tokens_2d(x: np.ndarray, E: np.ndarray, patch) -> np.ndarray:
    """Strided convolution with a (h, w, C, d) kernel, outputs in raster order."""
    h, w = patch
    H, W, C = x.shape
    kernel = E.reshape(h, w, C, -1)
    rows = []
    for r in range(H // h):
        for c in range(W // w):
            block = x[r * h : (r + 1) * h, c * w : (c + 1) * w, :]
            rows.append(np.einsum("ijk,ijkd->d", block, kernel))
    return np.stack(rows)


def _conv_tokens_3d(x: np.ndarray, E: np.ndarray, patch) -> np.ndarray:
    f, h, w = patch
    F, H, W, C = x.shape
    kernel = E.reshape(f, h, w, C, -1)
    rows = []
    for t in range(F // f):
        for r in range(H // h):
            for c in range(W // w):
                block = x[t * f : (t + 1) * f, r * h : (r + 1) * h, c * w : (c + 1) * w, :]
                rows.append(np.einsum("tijk,tijkd->d", block, kernel))
    return np.stack(rows)


class TestTokenize:
    def test_image_matches_strided_convolution(self, rng):
        g = ModalityGeometry("image", (8, 12, 3), (4, 4))
        tok = init_tokenizer(g, 6, rng, dtype=np.float64)
        x = rng.normal(size=g.input_shape)
        z = tok.tokenize(x).data
        assert z.shape == (1 + 6, 6)
        expected = _conv_tokens_2d(x, tok.E.data, g.patch) + tok.pos.data[1:]
        np.testing.assert_allclose(z[1:], expected, atol=1e-12)

    def test_video_tubelets_match_3d_convolution(self, rng):
        g = ModalityGeometry("video", (4, 8, 8, 3), (2, 4, 4))
        tok = init_tokenizer(g, 5, rng, dtype=np.float64)
        x = rng.normal(size=g.input_shape)
        z = tok.tokenize(x).data
        expected = _conv_tokens_3d(x, tok.E.data, g.patch) + tok.pos.data[1:]
        np.testing.assert_allclose(z[1:], expected, atol=1e-12)

    def test_audio_is_single_channel_image(self, rng):
        g = ModalityGeometry("audio", (16, 8, 1), (4, 4))
        tok = init_tokenizer(g, 4, rng, dtype=np.float64)
        x = rng.normal(size=g.input_shape)
        expected = _conv_tokens_2d(x, tok.E.data, g.patch) + tok.pos.data[1:]
        np.testing.assert_allclose(tok.tokenize(x).data[1:], expected, atol=1e-12)

    def test_class_row(self, rng):
        g = ModalityGeometry("image", (8, 8, 3), (4, 4))
        tok = init_tokenizer(g, 4, rng, dtype=np.float64)
        tok.cls.assign(rng.normal(size=4))
        z = tok.tokenize(rng.normal(size=g.input_shape)).data
        np.testing.assert_allclose(z[0], tok.cls.data + tok.pos.data[0])

    def test_batched_equals_stacked(self, rng):
        g = ModalityGeometry("video", (4, 8, 8, 3), (2, 4, 4))
        tok = init_tokenizer(g, 4, rng, dtype=np.float64)
        xs = rng.normal(size=(3,) + g.input_shape)
        batched = tok.tokenize(xs).data
        for i in range(3):
            np.testing.assert_allclose(batched[i], tok.tokenize(xs[i]).data, atol=1e-12)

    def test_wrong_input_shape(self, rng):
        g = ModalityGeometry("image", (8, 8, 3), (4, 4))
        tok = init_tokenizer(g, 4, rng)
        with pytest.raises(GeometryError):
            tok.tokenize(np.zeros((8, 8, 1)))

    def test_init_statistics(self, rng):
        g = ModalityGeometry("image", (32, 32, 3), (4, 4))
        tok = init_tokenizer(g, 64, rng, dtype=np.float64)
        assert not tok.cls.data.any()
        assert tok.E.data.std() == pytest.approx(1 / np.sqrt(48), rel=0.1)
        assert tok.pos.data.std() == pytest.approx(0.02, rel=0.1)

    @pytest.mark.parametrize(
        "geometry",
        [
            ModalityGeometry("image", (8, 8, 3), (4, 4)),
            ModalityGeometry("video", (4, 8, 8, 3), (2, 4, 4)),
        ],
        ids=["image", "video"],
    )
    def test_patch_tokens_are_linear_in_input(self, rng, geometry):
        tok = init_tokenizer(geometry, 6, rng, dtype=np.float64)
        tok.cls.assign(rng.normal(size=6))
        x, y = rng.normal(size=geometry.input_shape), rng.normal(size=geometry.input_shape)
        base = tok.tokenize(np.zeros(geometry.input_shape)).data
        combined = tok.tokenize(2.0 * x - 0.5 * y).data - base
        expected = 2.0 * (tok.tokenize(x).data - base) - 0.5 * (tok.tokenize(y).data - base)
        np.testing.assert_allclose(combined, expected, atol=1e-12)
        np.testing.assert_array_equal(combined[0], 0.0)

    def test_zero_embedding_gives_class_token_plus_positions(self, rng):
        g = ModalityGeometry("image", (8, 8, 3), (4, 4))
        tok = init_tokenizer(g, 4, rng, dtype=np.float64)
        tok.E.assign(np.zeros(tok.E.shape))
        tok.cls.assign(rng.normal(size=4))
        z = tok.tokenize(rng.normal(size=g.input_shape)).data
        np.testing.assert_array_equal(z[0], tok.cls.data + tok.pos.data[0])
        np.testing.assert_array_equal(z[1:], tok.pos.data[1:])
