"""
Forward maps: encoder, projector head and linear classifier.
"""

from typing import Union

import numpy as np

from ..autodiff import Tensor
from ..autodiff import functional as F
from ..errors import ShapeError
from .params import BoundParams, ModelParams

Params = Union[ModelParams, BoundParams]
Images = Union[np.ndarray, Tensor]

PREDICT_CHUNK = 256


def _bound(params: Params) -> BoundParams:
    return params.bind() if isinstance(params, ModelParams) else params


def as_batch(images: Images, image_size: int) -> Tensor:
    """Turn (B, H, W) arrays or (B, 1, H, W) tensors into a (B, 1, H, W) tensor."""
    if isinstance(images, Tensor):
        batch = images
    else:
        array = np.asarray(images, dtype=np.float64)
        batch = Tensor(array[:, None] if array.ndim == 3 else array)
    if batch.ndim != 4 or batch.shape[1] != 1 or batch.shape[2:] != (image_size, image_size):
        raise ShapeError("encode", batch.shape, (None, 1, image_size, image_size), "image batch does not match the architecture")
    return batch


def encode(params: Params, images: Images) -> Tensor:
    """
    Map images to representations (B x D).

    conv3x3-relu-maxpool per stage, the last stage ending in global average
    pooling instead, then one dense layer. Differentiable in parameters and inputs.
    """
    bound = _bound(params)
    arch = bound.params.arch
    h = as_batch(images, arch.image_size)
    last = len(arch.channels)
    for stage in range(1, last + 1):
        h = F.relu(F.conv2d(h, bound[f"encoder.conv{stage}.weight"], bound[f"encoder.conv{stage}.bias"], pad=1))
        if arch.residual:
            skip = F.conv2d(h, bound[f"encoder.res{stage}.weight"], bound[f"encoder.res{stage}.bias"], pad=1)
            h = F.relu(F.add(h, skip))
        h = F.maxpool2x2(h) if stage < last else F.global_avg_pool(h)
    return F.dense(h, bound["encoder.fc.weight"], bound["encoder.fc.bias"])


def project(params: Params, representations: Tensor) -> Tensor:
    """Projector head used only for contrastive pre-training: dense-relu-dense, L2-normalized."""
    bound = _bound(params)
    hidden = F.relu(F.dense(representations, bound["projector.fc1.weight"], bound["projector.fc1.bias"]))
    return F.l2_normalize(F.dense(hidden, bound["projector.fc2.weight"], bound["projector.fc2.bias"]))


def classify(params: Params, representations: Tensor) -> Tensor:
    """Single affine map D -> C, no activation."""
    bound = _bound(params)
    return F.dense(representations, bound["classifier.weight"], bound["classifier.bias"])


def predict(params: ModelParams, images: np.ndarray) -> np.ndarray:
    """Arg-max class for each image, evaluated in chunks."""
    images = np.asarray(images, dtype=np.float64)
    predictions = []
    for start in range(0, len(images), PREDICT_CHUNK):
        logits = classify(params, encode(params, images[start:start + PREDICT_CHUNK]))
        predictions.append(np.argmax(logits.data, axis=1))
    return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)


def accuracy(params: ModelParams, images: np.ndarray, labels: np.ndarray) -> float:
    """Percentage of correctly classified images."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    return 100.0 * float(np.mean(predict(params, images) == labels))
