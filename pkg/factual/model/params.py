"""
Architecture configuration and parameter storage for the encoder, projector
and linear classifier.
"""

from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Set, Tuple

import numpy as np

from ..autodiff import Tensor
from ..errors import ShapeError

ENCODER = "encoder."
PROJECTOR = "projector."
CLASSIFIER = "classifier."


@dataclass(frozen=True)
class ArchitectureConfig:
    """
    Shape of the network.

    Attributes:
        image_size: Input height == width
        channels: Conv widths per stage; every stage but the last ends in 2x2 max pooling
        representation_dim: Encoder output width D
        projector_hidden: Projector hidden width
        projector_dim: Projector output width
        class_count: Number of classes C
        residual: Add a residual 3x3 conv block to every stage
    """

    image_size: int = 64
    channels: Tuple[int, ...] = (16, 32, 64)
    representation_dim: int = 128
    projector_hidden: int = 64
    projector_dim: int = 32
    class_count: int = 4
    residual: bool = False

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        dims = [self.image_size, self.representation_dim, self.projector_hidden, self.projector_dim, self.class_count]
        if not self.channels or any(d <= 0 for d in dims + list(self.channels)):
            raise ValueError(f"all architecture dimensions must be positive: {self}")
        if self.class_count < 2:
            raise ValueError("class_count must be at least 2")
        if self.representation_dim < self.class_count:
            raise ValueError("representation_dim must be >= class_count")
        if self.image_size < 2 ** (len(self.channels) - 1):
            raise ValueError(f"image_size {self.image_size} is too small for {len(self.channels)} stages")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["channels"] = list(self.channels)
        return data

    def parameter_shapes(self) -> "OrderedDict[str, Tuple[int, ...]]":
        """Parameter names and shapes in declaration order."""
        shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
        previous = 1
        for stage, width in enumerate(self.channels, start=1):
            shapes[f"encoder.conv{stage}.weight"] = (width, previous, 3, 3)
            shapes[f"encoder.conv{stage}.bias"] = (width,)
            if self.residual:
                shapes[f"encoder.res{stage}.weight"] = (width, width, 3, 3)
                shapes[f"encoder.res{stage}.bias"] = (width,)
            previous = width
        shapes["encoder.fc.weight"] = (previous, self.representation_dim)
        shapes["encoder.fc.bias"] = (self.representation_dim,)
        shapes["projector.fc1.weight"] = (self.representation_dim, self.projector_hidden)
        shapes["projector.fc1.bias"] = (self.projector_hidden,)
        shapes["projector.fc2.weight"] = (self.projector_hidden, self.projector_dim)
        shapes["projector.fc2.bias"] = (self.projector_dim,)
        shapes["classifier.weight"] = (self.representation_dim, self.class_count)
        shapes["classifier.bias"] = (self.class_count,)
        return shapes


class ModelParams:
    """
    Named float64 parameter arrays (encoder, projector, classifier) in declaration order.

    Reads through bind() are recorded in access_log so tests can assert which
    parameter groups a stage touched.
    """

    def __init__(self, arch: ArchitectureConfig, arrays: Mapping[str, np.ndarray]):
        expected = arch.parameter_shapes()
        if list(arrays) != list(expected):
            raise ShapeError("ModelParams", (len(arrays),), (len(expected),), "parameter names do not match the architecture")
        self.arch = arch
        self._arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for name, shape in expected.items():
            array = np.asarray(arrays[name], dtype=np.float64)
            if array.shape != shape:
                raise ShapeError(f"ModelParams[{name}]", array.shape, shape)
            self._arrays[name] = array
        self.access_log: Set[str] = set()

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value: np.ndarray):
        current = self._arrays[name]
        if value.shape != current.shape:
            raise ShapeError(f"ModelParams[{name}]", value.shape, current.shape)
        self._arrays[name] = np.asarray(value, dtype=np.float64)

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def names(self, prefix: str = "") -> List[str]:
        return [name for name in self._arrays if name.startswith(prefix)]

    def items(self):
        return self._arrays.items()

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, OrderedDict((k, v.copy()) for k, v in self._arrays.items()))

    def equals(self, other: "ModelParams") -> bool:
        """Bitwise equality of architecture and every parameter."""
        return self.arch == other.arch and all(
            np.array_equal(a, other[name]) for name, a in self._arrays.items()
        )

    def bind(self, trainable: Iterable[str] = ()) -> "BoundParams":
        """
        Expose parameters as tensors for one forward/backward pass.

        Args:
            trainable: Names whose tensors should require grad

        Returns:
            BoundParams view creating tensors lazily on first access
        """
        return BoundParams(self, trainable)


class BoundParams(Mapping):
    """Lazily created tensors over a ModelParams for a single graph."""

    def __init__(self, params: ModelParams, trainable: Iterable[str] = ()):
        self.params = params
        self.trainable = set(trainable)
        self._tensors: Dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        if name not in self._tensors:
            self.params.access_log.add(name)
            self._tensors[name] = Tensor(self.params[name], requires_grad=name in self.trainable)
        return self._tensors[name]

    def __iter__(self):
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def substitute(self, name: str, tensor: Tensor) -> "BoundParams":
        """Use tensor in place of the named parameter for this graph."""
        if tensor.shape != self.params[name].shape:
            raise ShapeError(f"BoundParams[{name}]", tensor.shape, self.params[name].shape)
        self._tensors[name] = tensor
        return self

    def grads(self) -> Dict[str, np.ndarray]:
        """Gradients of every trainable parameter; zeros where nothing flowed."""
        return {
            name: (self._tensors[name].grad if name in self._tensors and self._tensors[name].grad is not None
                   else np.zeros_like(self.params[name]))
            for name in self.params
            if name in self.trainable
        }


def init_params(arch: ArchitectureConfig, rng_seed: int) -> ModelParams:
    """
    Kaiming-style fan-in scaled uniform initialization, deterministic per seed.

    Weights are drawn from U(-sqrt(6/fan_in), +sqrt(6/fan_in)); biases start at zero.
    """
    rng = np.random.default_rng(rng_seed)
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, shape in arch.parameter_shapes().items():
        if name.endswith(".bias"):
            arrays[name] = np.zeros(shape)
            continue
        fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
        bound = np.sqrt(6.0 / fan_in)
        arrays[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(arch, arrays)
