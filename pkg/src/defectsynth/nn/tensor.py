import numpy as np

from defectsynth.exceptions import ShapeMismatchError


class Tensor:
    """Parameter array with a same shaped gradient accumulator.

    Parameters
    ----------

    value: np.ndarray
        Initial values, stored as float64.
    name: str
        Optional name used in error messages and checkpoints.
    """

    def __init__(self, value: np.ndarray, name: str = ""):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self):
        self.grad.fill(0.0)

    def accumulate(self, grad: np.ndarray):
        """Adds `grad` to the accumulator."""
        if grad.shape != self.value.shape:
            msg = f"Gradient for {self.name} expected shape {self.value.shape}, got {grad.shape}"
            raise ShapeMismatchError(msg)
        self.grad += grad

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.value)) and np.all(np.isfinite(self.grad)))

    def __repr__(self) -> str:
        return f"Tensor(name={self.name!r}, shape={self.shape})"
