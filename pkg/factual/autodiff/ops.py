"""
Elementwise, linear-algebra, reduction and indexing operations.
"""

from typing import Optional, Tuple

import numpy as np

from ..errors import NonDifferentiableError, NumericalError, ShapeError
from .base import Op


class _Broadcasting(Op):
    """Binary elementwise op with numpy broadcasting."""

    def check(self, left, right):
        try:
            np.broadcast_shapes(left, right)
        except ValueError:
            raise ShapeError(self.kind, left, right, "cannot broadcast")
        self.shapes = (left, right)


@Op.register("add")
class Add(_Broadcasting):
    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        return self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(grad, self.shapes[1])


@Op.register("sub")
class Sub(_Broadcasting):
    def forward(self, a, b):
        return a - b

    def backward(self, grad):
        return self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(-grad, self.shapes[1])


@Op.register("mul")
class Mul(_Broadcasting):
    """Elementwise (Hadamard) product."""

    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (
            self.unbroadcast(grad * self.b, self.shapes[0]),
            self.unbroadcast(grad * self.a, self.shapes[1]),
        )


@Op.register("scale")
class Scale(Op):
    """Multiply by the scalar attribute `factor`."""

    def forward(self, x):
        return x * float(self.attrs["factor"])

    def backward(self, grad):
        return (grad * float(self.attrs["factor"]),)


@Op.register("matmul")
class Matmul(Op):
    """2-D matrix product; `transpose_b=True` multiplies by b transposed."""

    def check(self, left, right):
        transpose_b = bool(self.attrs.get("transpose_b", False))
        inner = right[1] if transpose_b and len(right) == 2 else (right[0] if right else None)
        if len(left) != 2 or len(right) != 2 or left[1] != inner:
            raise ShapeError("matmul", left, right)

    def forward(self, a, b):
        self.a = a
        self.b = b.T if self.attrs.get("transpose_b", False) else b
        return self.a @ self.b

    def backward(self, grad):
        grad_a = grad @ self.b.T
        grad_b = self.a.T @ grad
        if self.attrs.get("transpose_b", False):
            grad_b = grad_b.T
        return grad_a, grad_b


@Op.register("dense")
class Dense(Op):
    """Affine map x @ W + b for x (B, in), W (in, out), b (out,)."""

    def check(self, x, weight, bias):
        if len(x) != 2 or len(weight) != 2 or x[1] != weight[0]:
            raise ShapeError("dense", x, weight)
        if bias != (weight[1],):
            raise ShapeError("dense", weight, bias, "bias does not match output width")

    def forward(self, x, weight, bias):
        self.x, self.weight = x, weight
        return x @ weight + bias

    def backward(self, grad):
        return grad @ self.weight.T, self.x.T @ grad, grad.sum(axis=0)


@Op.register("relu")
class Relu(Op):
    def forward(self, x):
        self.active = x > 0
        # NaN propagates
        return np.maximum(x, 0.0)

    def backward(self, grad):
        return (grad * self.active,)


@Op.register("exp")
class Exp(Op):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


@Op.register("log")
class Log(Op):
    def forward(self, x):
        if np.any(x <= 0):
            raise NumericalError("log: input must be strictly positive")
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


def _reduced_grad(grad: np.ndarray, shape: Tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        grad = np.expand_dims(grad, tuple(a % len(shape) for a in axes))
    return np.broadcast_to(grad, shape)


@Op.register("sum")
class Sum(Op):
    """Sum over `axis` (all axes when None), optionally keeping dims."""

    def forward(self, x):
        self.shape = x.shape
        return np.sum(x, axis=self.attrs.get("axis"), keepdims=self.attrs.get("keepdims", False))

    def backward(self, grad):
        return (_reduced_grad(grad, self.shape, self.attrs.get("axis"), self.attrs.get("keepdims", False)),)


@Op.register("mean")
class Mean(Op):
    def forward(self, x):
        self.shape = x.shape
        out = np.mean(x, axis=self.attrs.get("axis"), keepdims=self.attrs.get("keepdims", False))
        self.count = x.size // max(np.size(out), 1)
        return out

    def backward(self, grad):
        spread = _reduced_grad(grad, self.shape, self.attrs.get("axis"), self.attrs.get("keepdims", False))
        return (spread / self.count,)


@Op.register("softmax")
class Softmax(Op):
    """Softmax along the last axis."""

    def forward(self, x):
        shifted = np.exp(x - x.max(axis=-1, keepdims=True))
        self.out = shifted / shifted.sum(axis=-1, keepdims=True)
        return self.out

    def backward(self, grad):
        inner = np.sum(grad * self.out, axis=-1, keepdims=True)
        return (self.out * (grad - inner),)


@Op.register("l2_normalize")
class L2Normalize(Op):
    """x / max(||x||, eps) along the feature (last) axis."""

    def forward(self, x):
        eps = float(self.attrs.get("eps", 1e-12))
        norm = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
        # below the floor the map is linear, x / eps
        self.scaled = norm > eps
        self.denom = np.maximum(norm, eps)
        self.out = x / self.denom
        return self.out

    def backward(self, grad):
        radial = np.sum(grad * self.out, axis=-1, keepdims=True) * self.scaled
        return ((grad - self.out * radial) / self.denom,)


@Op.register("flatten")
class Flatten(Op):
    """(B, ...) -> (B, prod(...))."""

    def forward(self, x):
        self.shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


@Op.register("gather_rows")
class GatherRows(Op):
    """
    Select rows x[rows], or single entries x[rows, cols] when `cols` is given.
    """

    def check(self, shape):
        rows = np.asarray(self.attrs["rows"])
        cols: Optional[np.ndarray] = self.attrs.get("cols")
        if rows.size and (rows.min() < -shape[0] or rows.max() >= shape[0]):
            raise ShapeError("gather_rows", shape, rows.shape, "row index out of range")
        if cols is not None:
            cols = np.asarray(cols)
            if len(shape) != 2 or cols.shape != rows.shape:
                raise ShapeError("gather_rows", shape, cols.shape, "cols must pair with rows on a 2-D input")
            if cols.size and (cols.min() < -shape[1] or cols.max() >= shape[1]):
                raise ShapeError("gather_rows", shape, cols.shape, "column index out of range")

    def forward(self, x):
        self.shape = x.shape
        self.index = (np.asarray(self.attrs["rows"]),)
        if self.attrs.get("cols") is not None:
            self.index += (np.asarray(self.attrs["cols"]),)
        return x[self.index]

    def backward(self, grad):
        out = np.zeros(self.shape)
        np.add.at(out, self.index, grad)
        return (out,)


@Op.register("sign")
class Sign(Op):
    """Forward-only sign; sign(0) == 0."""

    differentiable = False

    def forward(self, x):
        return np.sign(x)

    def backward(self, grad):
        raise NonDifferentiableError("sign is forward-only; take the sign of an extracted gradient instead")


@Op.register("clamp")
class Clamp(Op):
    """Clip to [lo, hi]; either bound may be None. Gradient flows strictly inside."""

    def forward(self, x):
        lo, hi = self.attrs.get("lo"), self.attrs.get("hi")
        self.inside = np.ones(x.shape, dtype=bool)
        if lo is not None:
            self.inside &= x > lo
        if hi is not None:
            self.inside &= x < hi
        return np.clip(x, lo, hi)

    def backward(self, grad):
        return (grad * self.inside,)
