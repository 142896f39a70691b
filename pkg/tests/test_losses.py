from __future__ import annotations

import numpy as np
import pytest

from autodiff import Tensor
from training import LossError, MixupError, loss, mix, mixup


class TestLoss:
    def test_uniform_logits_softmax(self):
        logits = Tensor(np.zeros((3, 5)), dtype=np.float64)
        y = np.eye(5)[[0, 2, 4]]
        assert loss(logits, y, "softmax").item() == pytest.approx(np.log(5))

    def test_zero_logits_sigmoid(self):
        logits = Tensor(np.zeros((2, 4)), dtype=np.float64)
        y = np.array([[1, 0, 1, 0], [0, 0, 0, 1]], dtype=np.float64)
        assert loss(logits, y, "sigmoid").item() == pytest.approx(np.log(2))

    def test_single_example(self):
        logits = Tensor(np.array([2.0, 0.0]), dtype=np.float64)
        expected = np.log1p(np.exp(-2.0))
        assert loss(logits, np.array([1.0, 0.0]), "softmax").item() == pytest.approx(expected)

    def test_mixed_labels_accepted(self):
        logits = Tensor(np.zeros((1, 2)), dtype=np.float64)
        assert loss(logits, np.array([[0.3, 0.7]]), "softmax").item() == pytest.approx(np.log(2))

    def test_unknown_kind(self):
        with pytest.raises(LossError):
            loss(Tensor(np.zeros((1, 2))), np.array([[1.0, 0.0]]), "hinge")

    def test_shape_mismatch(self):
        with pytest.raises(LossError):
            loss(Tensor(np.zeros((2, 3))), np.eye(2), "softmax")

    def test_softmax_rows_must_sum_to_one(self):
        with pytest.raises(LossError):
            loss(Tensor(np.zeros((1, 3))), np.array([[1.0, 1.0, 0.0]]), "softmax")

    def test_labels_in_unit_interval(self):
        with pytest.raises(LossError):
            loss(Tensor(np.zeros((1, 2))), np.array([[2.0, -1.0]]), "sigmoid")


class TestMix:
    def test_two_example_pairing(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        y = np.eye(2)
        xm, ym = mix(x, y, 0.25, np.array([1, 0]))
        np.testing.assert_allclose(ym[0], [0.25, 0.75])
        np.testing.assert_allclose(xm[0], [0.25, 0.75])
        np.testing.assert_allclose(ym[1], [0.75, 0.25])

    def test_identity_permutation_is_noop(self, rng):
        x = rng.normal(size=(4, 3))
        y = np.eye(4)
        xm, ym = mix(x, y, 0.6, np.arange(4))
        np.testing.assert_allclose(xm, x)
        np.testing.assert_allclose(ym, y)


class TestMixup:
    def test_rows_remain_distributions(self, rng):
        x = rng.normal(size=(8, 5))
        y = np.eye(4)[rng.integers(0, 4, size=8)]
        xm, ym, lam = mixup(x, y, 0.3, rng)
        assert 0.0 <= lam <= 1.0
        np.testing.assert_allclose(ym.sum(axis=1), 1.0)
        assert xm.shape == x.shape

    def test_seeded(self, rng):
        x = rng.normal(size=(6, 2))
        y = np.eye(3)[[0, 1, 2, 0, 1, 2]]
        a = mixup(x, y, 0.5, np.random.default_rng(3))
        b = mixup(x, y, 0.5, np.random.default_rng(3))
        np.testing.assert_array_equal(a[0], b[0])
        assert a[2] == b[2]

    def test_alpha_must_be_positive(self, rng):
        with pytest.raises(MixupError):
            mixup(np.zeros((2, 1)), np.eye(2), 0.0, rng)

    def test_batch_of_one(self, rng):
        with pytest.raises(MixupError):
            mixup(np.zeros((1, 1)), np.eye(1), 0.3, rng)
