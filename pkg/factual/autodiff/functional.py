"""
Thin named wrappers over forward_op, so model and loss code reads like math.
"""

from typing import Optional, Sequence

import numpy as np

from .tensor import ArrayLike, Tensor, forward_op


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    return forward_op("add", [a, b])


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    return forward_op("sub", [a, b])


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    return forward_op("mul", [a, b])


def scale(x: ArrayLike, factor: float) -> Tensor:
    return forward_op("scale", [x], {"factor": factor})


def matmul(a: ArrayLike, b: ArrayLike, transpose_b: bool = False) -> Tensor:
    return forward_op("matmul", [a, b], {"transpose_b": transpose_b})


def dense(x: ArrayLike, weight: ArrayLike, bias: ArrayLike) -> Tensor:
    return forward_op("dense", [x, weight, bias])


def conv2d(x: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None, stride: int = 1, pad: int = 0) -> Tensor:
    inputs = [x, weight] if bias is None else [x, weight, bias]
    return forward_op("conv2d", inputs, {"stride": stride, "pad": pad})


def relu(x: ArrayLike) -> Tensor:
    return forward_op("relu", [x])


def maxpool2x2(x: ArrayLike) -> Tensor:
    return forward_op("maxpool2x2", [x])


def global_avg_pool(x: ArrayLike) -> Tensor:
    return forward_op("global_avg_pool", [x])


def flatten(x: ArrayLike) -> Tensor:
    return forward_op("flatten", [x])


def l2_normalize(x: ArrayLike, eps: float = 1e-12) -> Tensor:
    return forward_op("l2_normalize", [x], {"eps": eps})


def exp(x: ArrayLike) -> Tensor:
    return forward_op("exp", [x])


def log(x: ArrayLike) -> Tensor:
    return forward_op("log", [x])


def tsum(x: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    return forward_op("sum", [x], {"axis": axis, "keepdims": keepdims})


def mean(x: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    return forward_op("mean", [x], {"axis": axis, "keepdims": keepdims})


def softmax(x: ArrayLike) -> Tensor:
    return forward_op("softmax", [x])


def gather_rows(x: ArrayLike, rows: Sequence[int], cols: Optional[Sequence[int]] = None) -> Tensor:
    attrs = {"rows": np.asarray(rows, dtype=np.int64)}
    if cols is not None:
        attrs["cols"] = np.asarray(cols, dtype=np.int64)
    return forward_op("gather_rows", [x], attrs)


def sign(x: ArrayLike) -> Tensor:
    return forward_op("sign", [x])


def clamp(x: ArrayLike, lo: Optional[float] = None, hi: Optional[float] = None) -> Tensor:
    return forward_op("clamp", [x], {"lo": lo, "hi": hi})


def stack_rows(parts: Sequence[ArrayLike]) -> Tensor:
    """
    Concatenate 2-D tensors along rows using selection matmuls plus add.

    Each part is lifted into the full row range by a 0/1 selection matrix, so
    values are copied exactly and gradients route back to their source rows.
    """
    tensors = [p if isinstance(p, Tensor) else Tensor(p) for p in parts]
    total = sum(t.shape[0] for t in tensors)
    out = None
    offset = 0
    for part in tensors:
        rows = part.shape[0]
        selector = np.zeros((total, rows))
        selector[offset + np.arange(rows), np.arange(rows)] = 1.0
        lifted = matmul(selector, part)
        out = lifted if out is None else add(out, lifted)
        offset += rows
    return out
