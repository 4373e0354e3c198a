from typing import Callable

import numpy as np
from loguru import logger

from defectsynth.nn.networks import Network
from defectsynth.rng import SeededRng

LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def grad_check(
    network: Network,
    x: np.ndarray,
    loss_fn: LossFn,
    rng: SeededRng,
    num_coords: int = 32,
    step: float = 1e-4,
    include_input: bool = False,
    floor: float = 1e-3,
) -> float:
    """Compares analytic gradients with central differences.

    Coordinates are drawn from all parameters (and the input when
    `include_input` is set). A coordinate whose +-step perturbation changes the
    sign pattern of any ReLU style activation is skipped and another one is
    drawn, so differences never straddle a kink.

    Parameters
    ----------

    network: Network
        Network under test, its parameters are restored afterwards.
    x: np.ndarray
        Batched input.
    loss_fn: LossFn
        Maps the network output to (value, gradient).
    rng: SeededRng
        Stream choosing the sampled coordinates.
    num_coords: int
        Number of coordinates to compare, capped by the number available.
    step: float
        Finite difference step.
    floor: float
        Lower bound of the relative error denominator |a| + |n|.

    Returns
    -------

    float
        Maximum relative error over the sampled coordinates.
    """
    x_work = np.array(x, dtype=np.float64)
    network.zero_grad()
    _, grad = loss_fn(network.forward(x_work))
    grad_x = network.backward(grad)
    baseline = network.kink_signature()

    sources = [(param.value, param.grad.copy()) for param in network.params()]
    if include_input:
        sources.append((x_work, grad_x))
    sizes = np.array([values.size for values, _ in sources])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    target = min(num_coords, int(offsets[-1]))

    def evaluate() -> tuple[float, bytes]:
        value, _ = loss_fn(network.forward(x_work))
        return value, network.kink_signature()

    worst, checked, skipped = 0.0, 0, 0
    for coordinate in rng.permutation(int(offsets[-1])):
        if checked >= target:
            break
        source = int(np.searchsorted(offsets, coordinate, side="right") - 1)
        values, analytic = sources[source]
        index = np.unravel_index(coordinate - offsets[source], values.shape)
        original = values[index]
        values[index] = original + step
        plus, plus_sig = evaluate()
        values[index] = original - step
        minus, minus_sig = evaluate()
        values[index] = original
        if plus_sig != baseline or minus_sig != baseline:
            skipped += 1
            continue
        numeric = (plus - minus) / (2 * step)
        a = analytic[index]
        worst = max(worst, abs(a - numeric) / max(abs(a) + abs(numeric), floor))
        checked += 1

    if checked < target:
        logger.warning(f"Gradient check compared {checked} of {target} coordinates")
    logger.debug(f"Gradient check: {checked=} {skipped=} max relative error {worst:.3e}")
    return worst
