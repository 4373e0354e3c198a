"""Layers with hand written gradients.

Inputs are batched: (N, F) for dense layers and (N, C, H, W) for
convolutions. `backward(x, grad)` receives the forward input and the
upstream gradient and returns the input gradient together with one gradient
per entry of `params()`.
"""

from abc import ABC, abstractmethod

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from defectsynth.exceptions import ShapeMismatchError
from defectsynth.nn.tensor import Tensor
from defectsynth.rng import SeededRng


def glorot_uniform(rng: SeededRng, shape: tuple[int, ...], fan_in: int, fan_out: int):
    """Uniform values in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _check_ndim(x: np.ndarray, ndim: int, layer: str):
    if x.ndim != ndim:
        msg = f"{layer} expected a {ndim} dimensional input, got shape {x.shape}"
        raise ShapeMismatchError(msg)


def conv_windows(x: np.ndarray, kernel: int, stride: int, padding: int) -> np.ndarray:
    """Strided (N, C, Ho, Wo, k, k) view over the zero padded input."""
    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    padded = np.pad(x, pad)
    if padded.shape[2] < kernel or padded.shape[3] < kernel:
        msg = f"Kernel {kernel} does not fit padded input of shape {padded.shape}"
        raise ShapeMismatchError(msg)
    windows = sliding_window_view(padded, (kernel, kernel), axis=(2, 3))
    return windows[:, :, ::stride, ::stride]


def conv_forward(x: np.ndarray, weight: np.ndarray, stride: int, padding: int) -> np.ndarray:
    """Cross correlation of x (N, C, H, W) with weight (O, C, k, k), no bias."""
    windows = conv_windows(x, weight.shape[2], stride, padding)
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv_weight_grad(
    x: np.ndarray, grad: np.ndarray, kernel: int, stride: int, padding: int
) -> np.ndarray:
    """Gradient of sum(grad * conv(x, W)) with respect to W."""
    windows = conv_windows(x, kernel, stride, padding)
    return np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))


def conv_input_grad(
    grad: np.ndarray,
    weight: np.ndarray,
    stride: int,
    padding: int,
    input_shape: tuple[int, int, int, int],
) -> np.ndarray:
    """Adjoint of `conv_forward` in its input, scattering grad (N, O, Ho, Wo)."""
    n, c, h, w = input_shape
    kernel = weight.shape[2]
    out_h, out_w = grad.shape[2], grad.shape[3]
    padded = np.zeros((n, c, h + 2 * padding, w + 2 * padding))
    for i in range(kernel):
        for j in range(kernel):
            contribution = np.tensordot(grad, weight[:, :, i, j], axes=([1], [0]))
            padded[
                :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
            ] += contribution.transpose(0, 3, 1, 2)
    return padded[:, :, padding : padding + h, padding : padding + w]


class Layer(ABC):
    """Abstract class for network layers.

    Subclasses must implement following methods.
    * forward
    * backward
    * output_shape
    """

    kind: str = "layer"
    piecewise: bool = False

    def params(self) -> list[Tensor]:
        return []

    @abstractmethod
    def forward(self, x: np.ndarray) -> np.ndarray:
        """Returns the layer output for input `x`."""

    @abstractmethod
    def backward(self, x: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (input gradient, parameter gradients) for upstream `grad`."""

    @abstractmethod
    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Per sample output shape for a per sample input shape."""

    def _check_grad(self, x: np.ndarray, grad: np.ndarray):
        expected = (x.shape[0], *self.output_shape(x.shape[1:]))
        if grad.shape != expected:
            msg = f"{type(self).__name__} expected gradient shape {expected}, got {grad.shape}"
            raise ShapeMismatchError(msg)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)


class Dense(Layer):
    """Fully connected layer, y = x W^T + b with W of shape (out, in)."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int, rng: SeededRng):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(
            glorot_uniform(rng, (out_features, in_features), in_features, out_features),
            "dense.weight",
        )
        self.bias = Tensor(np.zeros(out_features), "dense.bias")

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def _check(self, x: np.ndarray):
        _check_ndim(x, 2, "Dense")
        if x.shape[1] != self.in_features:
            msg = f"Dense expected {self.in_features} features, got {x.shape[1]}"
            raise ShapeMismatchError(msg)

    def forward(self, x):
        self._check(x)
        return x @ self.weight.value.T + self.bias.value

    def backward(self, x, grad):
        self._check(x)
        self._check_grad(x, grad)
        return grad @ self.weight.value, [grad.T @ x, grad.sum(axis=0)]

    def output_shape(self, input_shape):
        return (self.out_features,)


class Conv2d(Layer):
    """2D cross correlation with zero padding, weight of shape (out, in, k, k)."""

    kind = "conv2d"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: SeededRng,
        stride: int = 1,
        padding: int = 0,
    ):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        fan = kernel * kernel
        self.weight = Tensor(
            glorot_uniform(
                rng,
                (out_channels, in_channels, kernel, kernel),
                in_channels * fan,
                out_channels * fan,
            ),
            "conv2d.weight",
        )
        self.bias = Tensor(np.zeros(out_channels), "conv2d.bias")

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def _check(self, x: np.ndarray):
        _check_ndim(x, 4, "Conv2d")
        if x.shape[1] != self.in_channels:
            msg = f"Conv2d expected {self.in_channels} channels, got {x.shape[1]}"
            raise ShapeMismatchError(msg)

    def forward(self, x):
        self._check(x)
        out = conv_forward(x, self.weight.value, self.stride, self.padding)
        return out + self.bias.value[None, :, None, None]

    def backward(self, x, grad):
        self._check(x)
        self._check_grad(x, grad)
        grad_w = conv_weight_grad(x, grad, self.kernel, self.stride, self.padding)
        grad_x = conv_input_grad(grad, self.weight.value, self.stride, self.padding, x.shape)
        return grad_x, [grad_w, grad.sum(axis=(0, 2, 3))]

    def output_shape(self, input_shape):
        _, h, w = input_shape
        span = 2 * self.padding - self.kernel
        return (self.out_channels, (h + span) // self.stride + 1, (w + span) // self.stride + 1)


class TConv2d(Layer):
    """Transposed convolution, the adjoint of `Conv2d` in its input.

    The weight has shape (in, out, k, k): it is the weight of the convolution
    mapping `out` channels back to `in` channels. Output side length is
    (H - 1) * stride - 2 * padding + kernel.
    """

    kind = "tconv2d"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: SeededRng,
        stride: int = 1,
        padding: int = 0,
    ):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        fan = kernel * kernel
        self.weight = Tensor(
            glorot_uniform(
                rng,
                (in_channels, out_channels, kernel, kernel),
                in_channels * fan,
                out_channels * fan,
            ),
            "tconv2d.weight",
        )
        self.bias = Tensor(np.zeros(out_channels), "tconv2d.bias")

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def _check(self, x: np.ndarray):
        _check_ndim(x, 4, "TConv2d")
        if x.shape[1] != self.in_channels:
            msg = f"TConv2d expected {self.in_channels} channels, got {x.shape[1]}"
            raise ShapeMismatchError(msg)

    def _full_shape(self, x: np.ndarray) -> tuple[int, int, int, int]:
        _, h, w = self.output_shape(x.shape[1:])
        return (x.shape[0], self.out_channels, h, w)

    def forward(self, x):
        self._check(x)
        out = conv_input_grad(x, self.weight.value, self.stride, self.padding, self._full_shape(x))
        return out + self.bias.value[None, :, None, None]

    def backward(self, x, grad):
        self._check(x)
        self._check_grad(x, grad)
        grad_x = conv_forward(grad, self.weight.value, self.stride, self.padding)
        grad_w = conv_weight_grad(grad, x, self.kernel, self.stride, self.padding)
        return grad_x, [grad_w, grad.sum(axis=(0, 2, 3))]

    def output_shape(self, input_shape):
        _, h, w = input_shape
        extra = self.kernel - 2 * self.padding
        return (self.out_channels, (h - 1) * self.stride + extra, (w - 1) * self.stride + extra)


class LeakyReLU(Layer):
    kind = "leaky_relu"
    piecewise = True

    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def forward(self, x):
        return np.where(x > 0, x, self.slope * x)

    def backward(self, x, grad):
        self._check_grad(x, grad)
        return np.where(x > 0, grad, self.slope * grad), []

    def output_shape(self, input_shape):
        return tuple(input_shape)


class ReLU(Layer):
    kind = "relu"
    piecewise = True

    def forward(self, x):
        return np.maximum(x, 0.0)

    def backward(self, x, grad):
        self._check_grad(x, grad)
        return np.where(x > 0, grad, 0.0), []

    def output_shape(self, input_shape):
        return tuple(input_shape)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x):
        return 0.5 * (1.0 + np.tanh(0.5 * x))

    def backward(self, x, grad):
        self._check_grad(x, grad)
        y = self.forward(x)
        return grad * y * (1.0 - y), []

    def output_shape(self, input_shape):
        return tuple(input_shape)


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x):
        return np.tanh(x)

    def backward(self, x, grad):
        self._check_grad(x, grad)
        return grad * (1.0 - np.tanh(x) ** 2), []

    def output_shape(self, input_shape):
        return tuple(input_shape)


class Rescale(Layer):
    """Fixed affine map y = scale * x + shift."""

    kind = "rescale"

    def __init__(self, scale: float, shift: float):
        self.scale = scale
        self.shift = shift

    def forward(self, x):
        return self.scale * x + self.shift

    def backward(self, x, grad):
        self._check_grad(x, grad)
        return self.scale * grad, []

    def output_shape(self, input_shape):
        return tuple(input_shape)


class Reshape(Layer):
    """Reshapes every sample to `shape`."""

    kind = "reshape"

    def __init__(self, shape: tuple[int, ...]):
        self.shape = tuple(shape)

    def forward(self, x):
        if int(np.prod(x.shape[1:])) != int(np.prod(self.shape)):
            msg = f"Can not reshape {x.shape[1:]} to {self.shape}"
            raise ShapeMismatchError(msg)
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, x, grad):
        self._check_grad(x, grad)
        return grad.reshape(x.shape), []

    def output_shape(self, input_shape):
        return self.shape


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        return x.reshape(x.shape[0], -1)

    def backward(self, x, grad):
        self._check_grad(x, grad)
        return grad.reshape(x.shape), []

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)
