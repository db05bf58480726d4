# test_losses.py
# © 2025 Colt McVey
# Tests for loss values, gradients, constants and the reference optimum.

import math
import unittest

import numpy as np

from data import Dataset, SampleBatch, generate_synthetic
from errors import DimensionMismatch, EmptyDataset, SolveFailure, MissingReferenceOptimum, InvalidParam
from losses import (
    ConstraintSet, QuadraticLoss, MultinomialLogisticLoss, build_loss_model,
    loss_value, loss_gradient, expected_loss, compute_reference_optimum,
)


def _finite_difference(model, w, batch, h=1e-6):
    grad = np.zeros_like(w)
    for j in range(w.size):
        step = np.zeros_like(w)
        step[j] = h
        grad[j] = (model.losses(w + step, batch)[0] - model.losses(w - step, batch)[0]) / (2 * h)
    return grad


class TestConstraintSet(unittest.TestCase):
    def test_projection(self):
        ball = ConstraintSet(1.0, 2)
        np.testing.assert_allclose(ball.project(np.array([3.0, 4.0])), [0.6, 0.8])
        np.testing.assert_array_equal(ball.project(np.array([0.1, 0.2])), [0.1, 0.2])
        self.assertEqual(ball.diameter, 2.0)

    def test_invalid_ball(self):
        with self.assertRaises(InvalidParam):
            ConstraintSet(0.0, 2)


class TestQuadraticLoss(unittest.TestCase):
    def setUp(self):
        self.model = QuadraticLoss(2, radius=10.0, input_bound=5.0, sigma2=0.0)

    def test_values(self):
        x = np.array([3.0, 4.0])
        self.assertEqual(loss_value(self.model, x, x), 0.0)
        self.assertAlmostEqual(loss_value(self.model, np.zeros(2), x), 12.5)

    def test_gradient_vanishes_at_sample(self):
        x = np.array([0.3, -0.2])
        np.testing.assert_array_equal(loss_gradient(self.model, x, x), np.zeros(2))

    def test_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            w, x = rng.normal(size=2), rng.normal(size=2)
            batch = self.model.as_batch(x)
            fd = _finite_difference(self.model, w, batch)
            g = loss_gradient(self.model, w, x)
            self.assertLessEqual(np.linalg.norm(fd - g), 1e-6 * max(1.0, np.linalg.norm(g)))

    def test_constants_from_dataset(self):
        ds = Dataset(np.array([[0.0, 0.0], [1.0, 0.0]]), np.zeros(2), 2)
        model = QuadraticLoss.from_dataset(ds, radius=3.0)
        self.assertEqual((model.L, model.K), (4.0, 1.0))
        self.assertAlmostEqual(model.sigma2, 0.25)
        self.assertEqual(model.constants()["D"], 6.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            loss_value(self.model, np.zeros(3), np.zeros(2))
        with self.assertRaises(DimensionMismatch):
            loss_value(self.model, np.zeros(2), np.zeros(3))


class TestMultinomialLogisticLoss(unittest.TestCase):
    def setUp(self):
        self.model = MultinomialLogisticLoss(num_features=3, num_classes=4, radius=10.0, input_bound=1.0)

    def test_uniform_prediction_at_zero(self):
        x = (np.array([0.2, 0.9, 0.4]), 2)
        self.assertAlmostEqual(loss_value(self.model, np.zeros(self.model.dim), x), math.log(4))

    def test_gradient_at_zero(self):
        features = np.array([0.5])
        model = MultinomialLogisticLoss(num_features=1, num_classes=3, radius=10.0, input_bound=1.0)
        g = loss_gradient(model, np.zeros(model.dim), (features, 1)).reshape(3, 2)
        x_aug = np.array([0.5, 1.0])
        np.testing.assert_allclose(g[1], (1 / 3 - 1) * x_aug)
        np.testing.assert_allclose(g[0], (1 / 3) * x_aug)

    def test_finite_differences(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            w = rng.normal(size=self.model.dim)
            x = (rng.uniform(size=3), int(rng.integers(4)))
            batch = self.model.as_batch(x)
            fd = _finite_difference(self.model, w, batch)
            g = loss_gradient(self.model, w, x)
            self.assertLessEqual(np.linalg.norm(fd - g), 1e-6 * max(1.0, np.linalg.norm(g)))

    def test_mean_gradient_matches_per_sample_gradients(self):
        rng = np.random.default_rng(2)
        batch = SampleBatch(rng.uniform(size=(9, 3)), rng.integers(0, 4, size=9))
        w = rng.normal(size=self.model.dim)
        np.testing.assert_allclose(self.model.mean_gradient(w, batch),
                                   self.model.gradients(w, batch).mean(axis=0), atol=1e-12)

    def test_gradient_norm_within_lipschitz_constant(self):
        rng = np.random.default_rng(3)
        batch = SampleBatch(rng.uniform(size=(50, 3)) / math.sqrt(3), rng.integers(0, 4, size=50))
        norms = np.linalg.norm(self.model.gradients(rng.normal(size=self.model.dim), batch), axis=1)
        self.assertLessEqual(norms.max(), self.model.L)

    def test_labels_required(self):
        with self.assertRaises(DimensionMismatch):
            self.model.losses(np.zeros(self.model.dim), SampleBatch(np.zeros((1, 3))))


class TestDeclaredConstants(unittest.TestCase):
    """Convexity, K and sigma2 checked on random points for both models."""

    def setUp(self):
        self.dataset = generate_synthetic(3, 4, 300, 2.0, seed=0)
        self.batch = self.dataset.as_batch()
        self.models = [build_loss_model(kind, self.dataset) for kind in ("quadratic", "multinomial_logistic")]

    def _point(self, model, rng):
        return model.constraint.project(rng.normal(scale=3.0, size=model.dim))

    def test_convex_along_segments(self):
        rng = np.random.default_rng(11)
        for model in self.models:
            with self.subTest(model=model.kind):
                for _ in range(50):
                    w, v = self._point(model, rng), self._point(model, rng)
                    theta = rng.uniform()
                    lhs = model.losses(theta * w + (1 - theta) * v, self.batch)
                    rhs = theta * model.losses(w, self.batch) + (1 - theta) * model.losses(v, self.batch)
                    self.assertTrue(np.all(lhs <= rhs + 1e-12 * (1.0 + np.abs(rhs))))

    def test_gradients_are_k_lipschitz(self):
        rng = np.random.default_rng(12)
        for model in self.models:
            with self.subTest(model=model.kind):
                for _ in range(50):
                    w, v = self._point(model, rng), self._point(model, rng)
                    diff = np.linalg.norm(model.gradients(w, self.batch) - model.gradients(v, self.batch), axis=1)
                    bound = model.K * np.linalg.norm(w - v)
                    self.assertTrue(np.all(diff <= bound + 1e-12 * max(1.0, bound)))

    def test_gradient_variance_within_sigma2(self):
        rng = np.random.default_rng(13)
        for model in self.models:
            with self.subTest(model=model.kind):
                for _ in range(20):
                    grads = model.gradients(self._point(model, rng), self.batch)
                    variance = float(np.mean(np.sum((grads - grads.mean(axis=0)) ** 2, axis=1)))
                    self.assertLessEqual(variance, model.sigma2 * (1 + 1e-9))


class TestExpectedLoss(unittest.TestCase):
    def setUp(self):
        self.model = QuadraticLoss(2, radius=10.0, input_bound=2.0, sigma2=0.0)

    def test_single_element(self):
        x = np.array([[0.2, 0.7]])
        w = np.array([1.0, -1.0])
        self.assertAlmostEqual(expected_loss(self.model, w, SampleBatch(x)), loss_value(self.model, w, x[0]))

    def test_two_points(self):
        x1, x2 = np.array([0.0, 1.0]), np.array([1.0, 0.0])
        midpoint = (x1 + x2) / 2
        value = expected_loss(self.model, midpoint, SampleBatch(np.vstack([x1, x2])))
        self.assertAlmostEqual(value, 0.125 * np.sum((x1 - x2) ** 2))

    def test_identical_dataset(self):
        x = np.array([0.4, 0.1])
        w = np.zeros(2)
        value = expected_loss(self.model, w, SampleBatch(np.tile(x, (5, 1))))
        self.assertAlmostEqual(value, loss_value(self.model, w, x))

    def test_empty_dataset(self):
        with self.assertRaises(EmptyDataset):
            expected_loss(self.model, np.zeros(2), SampleBatch(np.zeros((0, 2))))


class TestReferenceOptimum(unittest.TestCase):
    def test_quadratic_interior(self):
        ds = generate_synthetic(3, 4, 300, 2.0, seed=0)
        model = build_loss_model("quadratic", ds, radius=10.0)
        wstar, fstar = compute_reference_optimum(model, ds)
        np.testing.assert_allclose(wstar, ds.inputs.mean(axis=0))
        self.assertAlmostEqual(fstar, 0.5 * model.sigma2)

    def test_quadratic_outside_ball(self):
        ds = Dataset(np.array([[1.0, 1.0, 1.0, 1.0], [0.8, 1.0, 1.0, 1.0]]), np.zeros(2), 2)
        model = build_loss_model("quadratic", ds, radius=1.0)
        wstar, _ = compute_reference_optimum(model, ds)
        mean = ds.inputs.mean(axis=0)
        np.testing.assert_allclose(wstar, mean / np.linalg.norm(mean))

    def test_logistic_separable_optimum_on_boundary(self):
        ds = Dataset(np.array([[0.0], [0.1], [0.9], [1.0]]), np.array([0, 0, 1, 1]), 2)
        model = build_loss_model("multinomial_logistic", ds, radius=1.0)
        wstar, fstar = compute_reference_optimum(model, ds)
        self.assertAlmostEqual(np.linalg.norm(wstar), 1.0, places=6)
        rng = np.random.default_rng(4)
        for _ in range(200):
            w = model.constraint.project(rng.normal(size=model.dim))
            self.assertGreaterEqual(expected_loss(model, w, ds), fstar - 1e-9)

    def test_first_order_optimality(self):
        toy = Dataset(np.array([[0.0], [0.1], [0.9], [1.0]]), np.array([0, 0, 1, 1]), 2)
        synthetic = generate_synthetic(3, 2, 200, 2.0, seed=2)
        cases = [
            ("separable", build_loss_model("multinomial_logistic", toy, radius=1.0), toy),
            ("synthetic", build_loss_model("multinomial_logistic", synthetic), synthetic),
        ]
        rng = np.random.default_rng(5)
        for name, model, ds in cases:
            with self.subTest(case=name):
                wstar, _ = compute_reference_optimum(model, ds)
                grad = model.mean_gradient(wstar, ds.as_batch())
                for _ in range(100):
                    w = model.constraint.project(rng.normal(scale=model.constraint.radius, size=model.dim))
                    self.assertGreaterEqual(float(grad @ (w - wstar)), -1e-6)

    def test_solver_failure(self):
        ds = generate_synthetic(3, 2, 60, 2.0, seed=1)
        model = build_loss_model("multinomial_logistic", ds)
        with self.assertRaises(SolveFailure) as ctx:
            compute_reference_optimum(model, ds, max_iter=1)
        self.assertEqual(ctx.exception.iterations, 1)

    def test_reference_is_required(self):
        model = QuadraticLoss(2, radius=1.0, input_bound=1.0, sigma2=0.0)
        with self.assertRaises(MissingReferenceOptimum):
            model.require_reference()

    def test_unknown_loss(self):
        ds = Dataset(np.zeros((2, 2)), np.zeros(2), 2)
        with self.assertRaises(InvalidParam):
            build_loss_model("hinge", ds)


if __name__ == '__main__':
    unittest.main()
