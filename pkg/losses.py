# losses.py
# © 2025 Colt McVey
# Loss models: values, gradients, analytic constants and the reference optimum w*.

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from data import Dataset, SampleBatch
from errors import InvalidParam, DimensionMismatch, EmptyDataset, SolveFailure, MissingReferenceOptimum

DEFAULT_RADIUS = 10.0


@dataclass(frozen=True)
class ConstraintSet:
    """Euclidean ball of radius R centered at the origin in R^d."""
    radius: float
    dim: int

    def __post_init__(self):
        if self.radius <= 0 or self.dim < 1:
            raise InvalidParam(f"Constraint ball needs radius > 0 and dim >= 1 (got {self.radius}, {self.dim})")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, w: np.ndarray, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(w)) <= self.radius + tol

    def project(self, v: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(v)
        if norm <= self.radius:
            return np.array(v, dtype=float)
        return v * (self.radius / norm)


class LossModel(ABC):
    """
    A convex loss f(w, x) on a ball, with the constants the analysis needs:
    L bounds the gradient norm, K the gradient Lipschitz constant and sigma2
    the gradient variance. The reference optimum is cached once computed.
    """
    kind = "abstract"

    def __init__(self, constraint: ConstraintSet, L: float, K: float, sigma2: float):
        self.constraint = constraint
        self.L = float(L)
        self.K = float(K)
        self.sigma2 = float(sigma2)
        self.wstar: np.ndarray | None = None
        self.fstar: float | None = None

    @property
    def dim(self) -> int:
        return self.constraint.dim

    @property
    def diameter(self) -> float:
        return self.constraint.diameter

    @abstractmethod
    def losses(self, w: np.ndarray, batch: SampleBatch) -> np.ndarray:
        """Per-sample losses f(w, x_s)."""

    @abstractmethod
    def gradients(self, w: np.ndarray, batch: SampleBatch) -> np.ndarray:
        """Per-sample gradients, one row per sample."""

    @abstractmethod
    def as_batch(self, x) -> SampleBatch:
        """Wraps a single sample in a one-row batch."""

    def mean_gradient(self, w: np.ndarray, batch: SampleBatch) -> np.ndarray:
        return self.gradients(w, batch).mean(axis=0)

    def _check_point(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float).ravel()
        if w.shape[0] != self.dim:
            raise DimensionMismatch(f"Point has dimension {w.shape[0]}, model expects {self.dim}")
        return w

    def has_reference(self) -> bool:
        return self.wstar is not None

    def require_reference(self):
        if self.wstar is None:
            raise MissingReferenceOptimum(f"{self.kind} model has no cached w*; call compute_reference_optimum first")

    def set_reference(self, wstar: np.ndarray, fstar: float):
        wstar = np.array(wstar, dtype=float)
        wstar.setflags(write=False)
        self.wstar = wstar
        self.fstar = float(fstar)

    def constants(self) -> dict:
        return {"loss": self.kind, "L": self.L, "K": self.K, "sigma2": self.sigma2,
                "D": self.diameter, "R": self.constraint.radius, "dim": self.dim}


class QuadraticLoss(LossModel):
    """f(w, x) = 1/2 ||w - x||^2; w* is the projected mean, constants are exact."""
    kind = "quadratic"

    def __init__(self, dim: int, radius: float, input_bound: float, sigma2: float):
        super().__init__(ConstraintSet(radius, dim), L=radius + input_bound, K=1.0, sigma2=sigma2)
        self.input_bound = float(input_bound)

    @classmethod
    def from_dataset(cls, dataset: Dataset, radius: float = DEFAULT_RADIUS) -> "QuadraticLoss":
        X = dataset.inputs
        sigma2 = float(np.mean(np.sum((X - X.mean(axis=0)) ** 2, axis=1)))
        return cls(dataset.dim, radius, float(np.linalg.norm(X, axis=1).max()), sigma2)

    def _check_batch(self, batch: SampleBatch) -> np.ndarray:
        X = np.atleast_2d(np.asarray(batch.inputs, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"Samples have dimension {X.shape[1]}, model expects {self.dim}")
        return X

    def as_batch(self, x) -> SampleBatch:
        if isinstance(x, SampleBatch):
            return x
        return SampleBatch(np.atleast_2d(np.asarray(x, dtype=float)))

    def losses(self, w, batch):
        w, X = self._check_point(w), self._check_batch(batch)
        return 0.5 * np.sum((w - X) ** 2, axis=1)

    def gradients(self, w, batch):
        w, X = self._check_point(w), self._check_batch(batch)
        return w - X


class MultinomialLogisticLoss(LossModel):
    """
    Negative log-likelihood of the softmax model over M classes. The weight
    vector is an (M, p+1) matrix flattened row-major; the last column
    multiplies a constant intercept feature of 1.
    """
    kind = "multinomial_logistic"

    def __init__(self, num_features: int, num_classes: int, radius: float, input_bound: float):
        if num_classes < 2:
            raise InvalidParam(f"Need at least two classes, got {num_classes}")
        self.num_features = num_features
        self.num_classes = num_classes
        x_aug = float(np.sqrt(input_bound ** 2 + 1.0))
        self.augmented_bound = x_aug
        # ||p - e_y|| <= sqrt(2) and the softmax Hessian has norm <= 1/2, so these are conservative.
        super().__init__(ConstraintSet(radius, num_classes * (num_features + 1)),
                         L=2.0 * x_aug, K=x_aug ** 2, sigma2=2.0 * x_aug ** 2)

    @classmethod
    def from_dataset(cls, dataset: Dataset, radius: float = DEFAULT_RADIUS) -> "MultinomialLogisticLoss":
        return cls(dataset.dim, dataset.num_classes, radius, float(np.linalg.norm(dataset.inputs, axis=1).max()))

    def as_batch(self, x) -> SampleBatch:
        if isinstance(x, SampleBatch):
            return x
        features, label = x
        return SampleBatch(np.atleast_2d(np.asarray(features, dtype=float)), np.array([label], dtype=np.int64))

    def _augment(self, batch: SampleBatch) -> tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(batch.inputs, dtype=float))
        if X.shape[1] != self.num_features:
            raise DimensionMismatch(f"Samples have {X.shape[1]} features, model expects {self.num_features}")
        if batch.labels is None or len(batch.labels) != X.shape[0]:
            raise DimensionMismatch("Multinomial logistic loss needs one label per sample")
        y = np.asarray(batch.labels, dtype=np.int64)
        if y.min() < 0 or y.max() >= self.num_classes:
            raise DimensionMismatch(f"Labels must lie in [0, {self.num_classes})")
        return np.hstack([X, np.ones((X.shape[0], 1))]), y

    def _scores(self, w, batch):
        W = self._check_point(w).reshape(self.num_classes, self.num_features + 1)
        X_aug, y = self._augment(batch)
        return X_aug @ W.T, X_aug, y

    def losses(self, w, batch):
        scores, _, y = self._scores(w, batch)
        return logsumexp(scores, axis=1) - scores[np.arange(len(y)), y]

    def _residuals(self, scores, y):
        R = softmax(scores, axis=1)
        R[np.arange(len(y)), y] -= 1.0
        return R

    def gradients(self, w, batch):
        scores, X_aug, y = self._scores(w, batch)
        R = self._residuals(scores, y)
        return (R[:, :, None] * X_aug[:, None, :]).reshape(len(y), -1)

    def mean_gradient(self, w, batch):
        scores, X_aug, y = self._scores(w, batch)
        return (self._residuals(scores, y).T @ X_aug).ravel() / len(y)


def build_loss_model(kind: str, dataset: Dataset, radius: float = DEFAULT_RADIUS) -> LossModel:
    if kind == QuadraticLoss.kind:
        return QuadraticLoss.from_dataset(dataset, radius)
    if kind == MultinomialLogisticLoss.kind:
        return MultinomialLogisticLoss.from_dataset(dataset, radius)
    raise InvalidParam(f"Unknown loss kind '{kind}'")


def loss_value(model: LossModel, w: np.ndarray, x) -> float:
    return float(model.losses(w, model.as_batch(x))[0])


def loss_gradient(model: LossModel, w: np.ndarray, x) -> np.ndarray:
    return model.gradients(w, model.as_batch(x))[0]


def _as_samples(dataset) -> SampleBatch:
    batch = dataset.as_batch() if isinstance(dataset, Dataset) else dataset
    if len(batch) == 0:
        raise EmptyDataset("Cannot average a loss over an empty dataset")
    return batch


def expected_loss(model: LossModel, w: np.ndarray, dataset) -> float:
    """Empirical mean of f(w, x) over the dataset, summed in index order."""
    return float(np.mean(model.losses(w, _as_samples(dataset))))


def _solve_projected(model: LossModel, batch: SampleBatch, tol: float, max_iter: int) -> tuple[np.ndarray, float, int]:
    """Accelerated projected gradient with gradient-based restarts, step 1/K."""
    step = 1.0 / model.K
    project = model.constraint.project
    w = np.zeros(model.dim)
    y = w.copy()
    momentum = 1.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        w_next = project(y - step * model.mean_gradient(y, batch))
        residual = float(np.linalg.norm(y - w_next)) / step
        if residual <= tol:
            return w_next, residual, it
        if np.dot(y - w_next, w_next - w) > 0:
            momentum = 1.0
            y = w_next.copy()
        else:
            next_momentum = (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2)) / 2.0
            y = w_next + ((momentum - 1.0) / next_momentum) * (w_next - w)
            momentum = next_momentum
        w = w_next
    return w, residual, max_iter


def compute_reference_optimum(model: LossModel, dataset, tol: float = 1e-8,
                              max_iter: int = 100_000) -> tuple[np.ndarray, float]:
    """
    Computes w* = argmin over the ball of the empirical mean loss and caches
    (w*, F(w*)) in the model.

    Raises:
        SolveFailure: The iterative solve stopped above the gradient-mapping tolerance.
    """
    batch = _as_samples(dataset)
    if isinstance(model, QuadraticLoss):
        wstar = model.constraint.project(np.asarray(batch.inputs, dtype=float).mean(axis=0))
    else:
        wstar, residual, iterations = _solve_projected(model, batch, tol, max_iter)
        if residual > tol:
            raise SolveFailure(
                f"Reference optimum solve stopped at residual {residual:.3g} > {tol:.1g} after {iterations} iterations",
                residual, iterations,
            )
        logging.info(f"Reference optimum solved in {iterations} iterations (residual {residual:.3g})")
    fstar = expected_loss(model, wstar, batch)
    model.set_reference(wstar, fstar)
    return model.wstar, model.fstar
