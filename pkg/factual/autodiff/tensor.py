"""
Dense float64 tensors with reverse-mode automatic differentiation.

Operations are looked up by kind in a class-level registry that the
@Op.register decorators in ops.py and conv.py fill at import time.
"""

import itertools
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Type, Union

import numpy as np

from ..config import logger
from ..errors import FactualError, GraphConsumedError, ShapeError, UnsupportedOpError
from .base import Op

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]

_node_counter = itertools.count()


@dataclass(eq=False)
class Node:
    """One operation application in a computation graph."""

    kind: str
    op: Op
    parents: Tuple["Tensor", ...]
    output: "Tensor"
    seq: int = field(default_factory=lambda: next(_node_counter))
    consumed: bool = False


class Tensor:
    """N-dimensional float64 array participating in a differentiation graph."""

    # Class-level registry of operation kinds
    _op_registry: Dict[str, Type[Op]] = {}

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        """
        Create a leaf tensor.

        Args:
            data: Values; copied into a C-contiguous float64 array
            requires_grad: Whether backward() should populate .grad for this leaf
        """
        if isinstance(data, Tensor):
            data = data.data
        array = np.array(data, dtype=np.float64)
        if any(extent <= 0 for extent in array.shape):
            raise ShapeError("tensor", array.shape, (), "extents must be positive")
        self.data = np.ascontiguousarray(array)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[Node] = None

    @classmethod
    def register_op(cls, kind: str, op_class: Type[Op]):
        """
        Register an operation class so forward_op can dispatch to it.

        Args:
            kind: Operation name (e.g., 'conv2d')
            op_class: The Op subclass implementing it
        """
        cls._op_registry[kind] = op_class

    @classmethod
    def registered_kinds(cls) -> List[str]:
        return sorted(cls._op_registry)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError("item", self.shape, (), "only single-element tensors convert to float")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a copy of the values."""
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, retain_graph: bool = True):
        """Backpropagate from this scalar tensor. See backward()."""
        backward(self, retain_graph=retain_graph)

    def __add__(self, other: ArrayLike) -> "Tensor":
        return forward_op("add", [self, other])

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return forward_op("add", [other, self])

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return forward_op("sub", [self, other])

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return forward_op("sub", [other, self])

    def __mul__(self, other: ArrayLike) -> "Tensor":
        if np.isscalar(other):
            return forward_op("scale", [self], {"factor": float(other)})
        return forward_op("mul", [self, other])

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return self.__mul__(other)

    def __neg__(self) -> "Tensor":
        return forward_op("scale", [self], {"factor": -1.0})

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return forward_op("matmul", [self, other])

    def __repr__(self) -> str:
        origin = self.node.kind if self.node is not None else "leaf"
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, op={origin})"


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap arrays and scalars as constant tensors; tensors pass through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def forward_op(kind: str, inputs: Sequence[ArrayLike], attrs: Optional[Mapping[str, Any]] = None) -> Tensor:
    """
    Apply a registered operation and record it in the graph.

    Args:
        kind: Operation kind (see Tensor.registered_kinds())
        inputs: Input tensors; arrays and scalars become constants
        attrs: Operation attributes (stride, pad, axis, ...)

    Returns:
        Output tensor; it carries a graph node when any input requires grad

    Raises:
        UnsupportedOpError: If kind is not registered
        ShapeError: If input shapes are incompatible
    """
    op_class = Tensor._op_registry.get(kind)
    if op_class is None:
        raise UnsupportedOpError(
            f"Unsupported operation kind '{kind}'. "
            f"Available kinds: {', '.join(Tensor.registered_kinds())}"
        )

    tensors = tuple(as_tensor(value) for value in inputs)
    op = op_class(**dict(attrs or {}))
    op.check(*(t.shape for t in tensors))
    out = Tensor.__new__(Tensor)
    out.data = np.ascontiguousarray(op.forward(*(t.data for t in tensors)), dtype=np.float64)
    out.grad = None
    out.requires_grad = any(t.requires_grad for t in tensors)
    out.node = Node(kind, op, tensors, out) if out.requires_grad else None
    return out


class ComputationGraph:
    """Nodes reachable from a root, in topological (creation) order."""

    def __init__(self, nodes: List[Node]):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: Tensor) -> "ComputationGraph":
        seen: Dict[int, Node] = {}
        stack = [root]
        while stack:
            tensor = stack.pop()
            node = tensor.node
            if node is None or id(node) in seen:
                continue
            seen[id(node)] = node
            stack.extend(parent for parent in node.parents if parent.requires_grad)
        # parents are always created before their children
        return cls(sorted(seen.values(), key=lambda n: n.seq))

    def __len__(self) -> int:
        return len(self.nodes)


def backward(root: Tensor, retain_graph: bool = True):
    """
    Populate .grad on every leaf that requires grad with dRoot/dLeaf.

    Gradients accumulate additively into existing .grad buffers and across
    fan-out. With retain_graph=False the graph is marked consumed and a second
    backward over it raises GraphConsumedError.

    Args:
        root: Scalar tensor (product of shape == 1)
        retain_graph: Keep the graph reusable after this pass

    Raises:
        ShapeError: If root is not scalar
        FactualError: If root does not require grad
        GraphConsumedError: If the graph was consumed by an earlier pass
    """
    if root.size != 1:
        raise ShapeError("backward", root.shape, (), "root must be scalar")
    if not root.requires_grad:
        raise FactualError("backward: root does not require grad")

    graph = ComputationGraph.from_root(root)
    if any(node.consumed for node in graph.nodes):
        raise GraphConsumedError("backward: graph was already consumed (retain_graph=False)")

    seed = np.ones_like(root.data)
    if root.is_leaf:
        root.grad = seed if root.grad is None else root.grad + seed
        return

    pending: Dict[int, np.ndarray] = {id(root): seed}
    for node in reversed(graph.nodes):
        grad = pending.pop(id(node.output), None)
        if grad is None:
            continue
        parent_grads = node.op.backward(grad)
        for parent, parent_grad in zip(node.parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent.is_leaf:
                parent.grad = parent_grad.copy() if parent.grad is None else parent.grad + parent_grad
            elif id(parent) in pending:
                pending[id(parent)] = pending[id(parent)] + parent_grad
            else:
                pending[id(parent)] = parent_grad
        if not retain_graph:
            node.consumed = True

    logger.debug(f"backward visited {len(graph)} nodes")
