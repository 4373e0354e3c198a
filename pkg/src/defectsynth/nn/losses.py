"""Losses returning (value, gradient with respect to the prediction)."""

import numpy as np

from defectsynth.constants import BCE_EPSILON
from defectsynth.exceptions import InvalidInputError, ShapeMismatchError


def _check_shapes(pred: np.ndarray, target: np.ndarray, loss: str):
    if pred.shape != target.shape:
        msg = f"{loss} expected matching shapes, got {pred.shape=} and {target.shape=}"
        raise ShapeMismatchError(msg)


def loss_bce(
    pred: np.ndarray, target: np.ndarray, epsilon: float = BCE_EPSILON
) -> tuple[float, np.ndarray]:
    """Mean binary cross entropy of probabilities clamped to [eps, 1 - eps]."""
    _check_shapes(pred, target, "BCE")
    p = np.clip(pred, epsilon, 1.0 - epsilon)
    value = float(np.mean(-(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))))
    grad = (-target / p + (1.0 - target) / (1.0 - p)) / pred.size
    inside = (pred >= epsilon) & (pred <= 1.0 - epsilon)
    return value, np.where(inside, grad, 0.0)


def loss_dice(
    pred: np.ndarray, target: np.ndarray, smooth: float = 1.0
) -> tuple[float, np.ndarray]:
    """1 - (2 sum(p t) + s) / (sum(p) + sum(t) + s)."""
    _check_shapes(pred, target, "Dice")
    numerator = 2.0 * np.sum(pred * target) + smooth
    denominator = np.sum(pred) + np.sum(target) + smooth
    grad = -(2.0 * target * denominator - numerator) / denominator**2
    return float(1.0 - numerator / denominator), grad


def loss_l1(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    _check_shapes(pred, target, "L1")
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / pred.size


def loss_mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    _check_shapes(pred, target, "MSE")
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / pred.size


def seg_loss(
    pred: np.ndarray, target: np.ndarray, bce_weight: float, dice_weight: float
) -> tuple[float, np.ndarray]:
    """Weighted sum of BCE and Dice."""
    bce, bce_grad = loss_bce(pred, target)
    dice, dice_grad = loss_dice(pred, target)
    return bce_weight * bce + dice_weight * dice, bce_weight * bce_grad + dice_weight * dice_grad


def wasserstein_gap(real_scores: np.ndarray, fake_scores: np.ndarray) -> float:
    """mean(real) - mean(fake), the critic's estimate of the Wasserstein distance."""
    if np.size(real_scores) == 0 or np.size(fake_scores) == 0:
        msg = "Wasserstein gap needs non empty score vectors."
        raise InvalidInputError(msg)
    return float(np.mean(real_scores) - np.mean(fake_scores))


def critic_wasserstein_loss(
    real_scores: np.ndarray, fake_scores: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Negated gap, minimized by the critic. Returns (value, real grad, fake grad)."""
    value = -wasserstein_gap(real_scores, fake_scores)
    return (
        value,
        np.full(real_scores.shape, -1.0 / real_scores.size),
        np.full(fake_scores.shape, 1.0 / fake_scores.size),
    )


def generator_wasserstein_loss(fake_scores: np.ndarray) -> tuple[float, np.ndarray]:
    """-mean(fake scores), minimized by the generator."""
    if fake_scores.size == 0:
        msg = "Generator loss needs a non empty score vector."
        raise InvalidInputError(msg)
    return float(-np.mean(fake_scores)), np.full(fake_scores.shape, -1.0 / fake_scores.size)


def least_squares_loss(scores: np.ndarray, target: float) -> tuple[float, np.ndarray]:
    """mean((score - target)^2) for a real (1) or fake (0) target."""
    return loss_mse(scores, np.full(scores.shape, float(target)))


def logistic_loss(logits: np.ndarray, target: float) -> tuple[float, np.ndarray]:
    """Sigmoid cross entropy on raw critic scores."""
    t = float(target)
    value = np.mean(np.maximum(logits, 0.0) - logits * t + np.log1p(np.exp(-np.abs(logits))))
    prob = 0.5 * (1.0 + np.tanh(0.5 * logits))
    return float(value), (prob - t) / logits.size


def adversarial_loss(mode: str, scores: np.ndarray, target: float) -> tuple[float, np.ndarray]:
    """Dispatches to the least squares or logistic adversarial objective."""
    if mode == "least_squares":
        return least_squares_loss(scores, target)
    if mode == "logistic":
        return logistic_loss(scores, target)
    msg = f"Unknown adversarial mode {mode=}"
    raise InvalidInputError(msg)
