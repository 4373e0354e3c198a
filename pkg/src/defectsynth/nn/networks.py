from abc import ABC, abstractmethod

import numpy as np

from defectsynth.exceptions import ShapeMismatchError
from defectsynth.nn.layers import Conv2d, Layer, LeakyReLU, ReLU, Sigmoid, TConv2d
from defectsynth.nn.tensor import Tensor
from defectsynth.rng import SeededRng


class Network(ABC):
    """Abstract class for networks trained with hand written backward passes.

    Subclasses must implement following methods.
    * params
    * forward
    * backward

    `forward` caches what `backward` needs; `backward` accumulates parameter
    gradients into `Tensor.grad` and returns the input gradient.
    """

    @abstractmethod
    def params(self) -> list[Tensor]:
        """Trainable tensors in a fixed order."""

    @abstractmethod
    def forward(self, x: np.ndarray) -> np.ndarray:
        """Runs the network and caches intermediate inputs."""

    @abstractmethod
    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Back propagates `grad` through the last forward pass."""

    @abstractmethod
    def kink_signature(self) -> bytes:
        """Sign pattern of every piecewise linear activation input of the last forward pass."""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def zero_grad(self):
        for param in self.params():
            param.zero_grad()

    def num_params(self) -> int:
        return sum(param.size for param in self.params())

    def state(self) -> list[np.ndarray]:
        """Copies of all parameter values."""
        return [param.value.copy() for param in self.params()]

    def load_state(self, arrays: list[np.ndarray]):
        params = self.params()
        if len(arrays) != len(params):
            msg = f"Expected {len(params)} arrays, got {len(arrays)}"
            raise ShapeMismatchError(msg)
        for param, array in zip(params, arrays):
            if param.shape != tuple(array.shape):
                msg = f"{param.name} expects shape {param.shape}, got {array.shape}"
                raise ShapeMismatchError(msg)
            param.value[...] = array


class Sequential(Network):
    """Chain of layers.

    Examples
    --------

    >>> net = Sequential([Dense(4, 2, rng), ReLU()])
    >>> out = net.forward(np.ones((3, 4)))
    >>> net.backward(np.ones_like(out))
    """

    def __init__(self, layers: list[Layer]):
        self.layers = layers
        self._inputs: list[np.ndarray] = []

    def params(self) -> list[Tensor]:
        return [param for layer in self.layers for param in layer.params()]

    def forward(self, x):
        self._inputs = []
        for layer in self.layers:
            self._inputs.append(x)
            x = layer.forward(x)
        return x

    def backward(self, grad):
        if len(self._inputs) != len(self.layers):
            msg = "backward called before forward"
            raise ShapeMismatchError(msg)
        for layer, x in zip(reversed(self.layers), reversed(self._inputs)):
            grad, param_grads = layer.backward(x, grad)
            for param, param_grad in zip(layer.params(), param_grads):
                param.accumulate(param_grad)
        return grad

    def kink_signature(self) -> bytes:
        return b"".join(
            np.packbits(x > 0).tobytes()
            for layer, x in zip(self.layers, self._inputs)
            if layer.piecewise
        )


class UNet(Network):
    """Encoder decoder with skip connections.

    A stem convolution (k3, s1, p1) is followed by `depth - 1` strided
    downsampling convolutions (k4, s2, p1) with leaky ReLU. The decoder mirrors
    them with transposed convolutions (k4, s2, p1) and ReLU, concatenating the
    encoder feature of the same resolution after each upsampling. A k3 head
    with sigmoid maps to `out_channels`. Channels double at every level.

    Parameters
    ----------

    in_channels: int
        Channels of the input image.
    out_channels: int
        Channels of the output map.
    base_channels: int
        Channels after the stem.
    depth: int
        Number of resolution levels, at least 2. Input side lengths must be
        divisible by 2 ** (depth - 1).
    rng: SeededRng
        Stream for weight initialization.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        base_channels: int,
        depth: int,
        rng: SeededRng,
    ):
        if depth < 2:
            msg = f"UNet needs at least two levels, got {depth=}"
            raise ValueError(msg)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.base_channels = base_channels
        self.depth = depth
        channels = [base_channels * 2**level for level in range(depth)]
        self.stem = Sequential([Conv2d(in_channels, channels[0], 3, rng, 1, 1), LeakyReLU(0.2)])
        self.downs = [
            Sequential([Conv2d(channels[i - 1], channels[i], 4, rng, 2, 1), LeakyReLU(0.2)])
            for i in range(1, depth)
        ]
        self.ups = []
        in_ch = channels[-1]
        for level in reversed(range(depth - 1)):
            self.ups.append(Sequential([TConv2d(in_ch, channels[level], 4, rng, 2, 1), ReLU()]))
            in_ch = 2 * channels[level]
        self.head = Sequential([Conv2d(in_ch, out_channels, 3, rng, 1, 1), Sigmoid()])
        self._skips: list[np.ndarray] = []

    def _blocks(self) -> list[Sequential]:
        return [self.stem, *self.downs, *self.ups, self.head]

    def params(self) -> list[Tensor]:
        return [param for block in self._blocks() for param in block.params()]

    def forward(self, x):
        factor = 2 ** (self.depth - 1)
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            msg = f"UNet expected (N, {self.in_channels}, H, W), got {x.shape}"
            raise ShapeMismatchError(msg)
        if x.shape[2] % factor or x.shape[3] % factor:
            msg = f"UNet input sides must be divisible by {factor}, got {x.shape[2:]}"
            raise ShapeMismatchError(msg)
        h = self.stem.forward(x)
        self._skips = [h]
        for down in self.downs:
            h = down.forward(h)
            self._skips.append(h)
        for level, up in zip(reversed(range(self.depth - 1)), self.ups):
            h = np.concatenate([up.forward(h), self._skips[level]], axis=1)
        return self.head.forward(h)

    def backward(self, grad):
        grad = self.head.backward(grad)
        skip_grads = [np.zeros_like(skip) for skip in self._skips]
        for level, up in reversed(list(zip(reversed(range(self.depth - 1)), self.ups))):
            width = self._skips[level].shape[1]
            skip_grads[level] += grad[:, width:]
            grad = up.backward(grad[:, :width])
        for level in reversed(range(1, self.depth)):
            grad = self.downs[level - 1].backward(grad + skip_grads[level])
        return self.stem.backward(grad + skip_grads[0])

    def kink_signature(self) -> bytes:
        return b"".join(block.kink_signature() for block in self._blocks())

    def config(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "base_channels": self.base_channels,
            "depth": self.depth,
        }
