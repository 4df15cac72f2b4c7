"""
Convolution and pooling kernels on (B, C, H, W) arrays.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .base import Op


@Op.register("conv2d")
class Conv2d(Op):
    """
    Cross-correlation of x (B, C, H, W) with w (O, C, k, k), optional bias (O,).

    Attributes:
        stride: Step between windows (default 1)
        pad: Zero padding on each spatial side (default 0)
    """

    def check(self, x, weight, *bias):
        stride, pad = int(self.attrs.get("stride", 1)), int(self.attrs.get("pad", 0))
        if len(x) != 4 or len(weight) != 4 or x[1] != weight[1]:
            raise ShapeError("conv2d", x, weight)
        if weight[2] > x[2] + 2 * pad or weight[3] > x[3] + 2 * pad:
            raise ShapeError("conv2d", x, weight, "kernel larger than padded input")
        if stride < 1 or pad < 0:
            raise ShapeError("conv2d", x, weight, f"invalid stride {stride} / pad {pad}")
        if bias and bias[0] != (weight[0],):
            raise ShapeError("conv2d", weight, bias[0], "bias does not match output channels")

    def forward(self, x, weight, bias=None):
        stride, pad = int(self.attrs.get("stride", 1)), int(self.attrs.get("pad", 0))
        self.input_shape = x.shape
        self.weight = weight
        self.has_bias = bias is not None
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        self.padded_shape = padded.shape
        kh, kw = weight.shape[2:]
        # (B, C, Ho, Wo, kh, kw)
        self.windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out = np.tensordot(self.windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if self.has_bias:
            out = out + bias[None, :, None, None]
        return out

    def backward(self, grad):
        stride, pad = int(self.attrs.get("stride", 1)), int(self.attrs.get("pad", 0))
        _, _, out_h, out_w = grad.shape
        kh, kw = self.weight.shape[2:]

        grad_weight = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))
        # (B, Ho, Wo, C, kh, kw)
        grad_windows = np.tensordot(grad, self.weight, axes=([1], [0]))
        grad_padded = np.zeros(self.padded_shape)
        for i in range(kh):
            for j in range(kw):
                grad_padded[:, :, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride] += (
                    grad_windows[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        height, width = self.input_shape[2:]
        grad_x = grad_padded[:, :, pad:pad + height, pad:pad + width]
        if self.has_bias:
            return grad_x, grad_weight, grad.sum(axis=(0, 2, 3))
        return grad_x, grad_weight


@Op.register("maxpool2x2")
class MaxPool2x2(Op):
    """2x2 max pooling with stride 2; an odd trailing row/column is dropped."""

    def check(self, x):
        if len(x) != 4 or x[2] < 2 or x[3] < 2:
            raise ShapeError("maxpool2x2", x, (2, 2), "needs a (B, C, H>=2, W>=2) input")

    def forward(self, x):
        batch, channels, height, width = x.shape
        out_h, out_w = height // 2, width // 2
        self.input_shape = x.shape
        blocks = (
            x[:, :, :out_h * 2, :out_w * 2]
            .reshape(batch, channels, out_h, 2, out_w, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(batch, channels, out_h, out_w, 4)
        )
        # first maximum wins on ties
        self.argmax = blocks.argmax(axis=-1)[..., None]
        return np.take_along_axis(blocks, self.argmax, axis=-1)[..., 0]

    def backward(self, grad):
        batch, channels, height, width = self.input_shape
        out_h, out_w = grad.shape[2:]
        blocks = np.zeros((batch, channels, out_h, out_w, 4))
        np.put_along_axis(blocks, self.argmax, grad[..., None], axis=-1)
        grad_x = np.zeros(self.input_shape)
        grad_x[:, :, :out_h * 2, :out_w * 2] = (
            blocks.reshape(batch, channels, out_h, out_w, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(batch, channels, out_h * 2, out_w * 2)
        )
        return (grad_x,)


@Op.register("global_avg_pool")
class GlobalAvgPool(Op):
    """(B, C, H, W) -> (B, C) spatial mean."""

    def check(self, x):
        if len(x) != 4:
            raise ShapeError("global_avg_pool", x, (), "needs a 4-D input")

    def forward(self, x):
        self.input_shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        height, width = self.input_shape[2:]
        return (np.broadcast_to(grad[:, :, None, None] / (height * width), self.input_shape),)
