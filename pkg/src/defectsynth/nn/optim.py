from abc import ABC, abstractmethod

import numpy as np

from defectsynth.constants import ADAM_BETA1, ADAM_BETA2, OPTIM_EPSILON, RMSPROP_RHO
from defectsynth.exceptions import InvalidInputError, TrainingDivergenceError
from defectsynth.nn.tensor import Tensor


class Optimizer(ABC):
    """Abstract class for first order optimizers.

    Subclasses must implement following methods.
    * _update

    Parameters
    ----------

    params: list[Tensor]
        Tensors updated in place from their `grad`.
    learning_rate: float
        Non negative step size.
    """

    kind: str

    def __init__(self, params: list[Tensor], learning_rate: float):
        if learning_rate < 0:
            msg = f"Learning rate must be non negative, got {learning_rate=}"
            raise InvalidInputError(msg)
        self.params = params
        self.learning_rate = learning_rate
        self.step_count = 0

    def step(self):
        """Applies one update using the accumulated gradients.

        Raises
        ------

        TrainingDivergenceError
            If any gradient is not finite. Parameters are left untouched.
        """
        for param in self.params:
            if not np.all(np.isfinite(param.grad)):
                msg = f"Non finite gradient in {param.name} at step {self.step_count}"
                raise TrainingDivergenceError(msg, step=self.step_count)
        self.step_count += 1
        for index, param in enumerate(self.params):
            self._update(index, param)

    def zero_grad(self):
        for param in self.params:
            param.zero_grad()

    @abstractmethod
    def _update(self, index: int, param: Tensor):
        """Updates `param` in place, `index` selects its accumulators."""


class RMSProp(Optimizer):
    """acc = rho acc + (1 - rho) g^2; p = p - lr g / sqrt(acc + eps)."""

    kind = "rmsprop"

    def __init__(
        self,
        params: list[Tensor],
        learning_rate: float,
        rho: float = RMSPROP_RHO,
        epsilon: float = OPTIM_EPSILON,
    ):
        super().__init__(params, learning_rate)
        self.rho = rho
        self.epsilon = epsilon
        self.accumulators = [np.zeros_like(p.value) for p in params]

    def _update(self, index, param):
        acc = self.accumulators[index]
        acc *= self.rho
        acc += (1.0 - self.rho) * param.grad**2
        param.value -= self.learning_rate * param.grad / np.sqrt(acc + self.epsilon)


class Adam(Optimizer):
    """Adam with bias corrected first and second moments."""

    kind = "adam"

    def __init__(
        self,
        params: list[Tensor],
        learning_rate: float,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        epsilon: float = OPTIM_EPSILON,
    ):
        super().__init__(params, learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.first = [np.zeros_like(p.value) for p in params]
        self.second = [np.zeros_like(p.value) for p in params]

    def _update(self, index, param):
        m, v = self.first[index], self.second[index]
        m *= self.beta1
        m += (1.0 - self.beta1) * param.grad
        v *= self.beta2
        v += (1.0 - self.beta2) * param.grad**2
        m_hat = m / (1.0 - self.beta1**self.step_count)
        v_hat = v / (1.0 - self.beta2**self.step_count)
        param.value -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def clip_params(params: list[Tensor], bound: float):
    """Clips every value into [-bound, bound] in place."""
    for param in params:
        np.clip(param.value, -bound, bound, out=param.value)
