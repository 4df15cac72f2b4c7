"""
Target-confined scatterer attack.

Each image receives K isotropic Gaussian blobs with continuous positions and
non-negative amplitudes. A blob is truncated to the disc of radius
R = ceil(3 sigma) around its rounded centre, and every rounded centre is kept on
a target mask pixel, so the perturbation never leaves the dilated mask.
"""

from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from ..autodiff import Tensor, backward
from ..autodiff import functional as F
from ..config import logger
from ..errors import AttackError
from .config import AttackConfig, Perturbation, ScattererConfig
from .scorers import Scorer


@dataclass(eq=False)
class ScattererSet:
    """
    Scatterer parameters for a batch.

    Attributes:
        positions: (B, K, 2) continuous (row, col) coordinates
        amplitudes: (B, K) values in [0, a_max]
        sigma: Shared kernel width in pixels
    """

    positions: np.ndarray
    amplitudes: np.ndarray
    sigma: float

    @property
    def radius(self) -> int:
        return int(np.ceil(3 * self.sigma))

    @property
    def count(self) -> int:
        return self.positions.shape[1]

    def rounded(self) -> np.ndarray:
        """Integer pixel of every position (halves round up)."""
        return np.floor(self.positions + 0.5).astype(np.int64)

    def on_mask(self, masks: np.ndarray) -> bool:
        """True when every rounded position lies on a mask pixel of its image."""
        cells = self.rounded()
        batch = np.arange(len(cells))[:, None]
        return bool(masks[batch, cells[..., 0], cells[..., 1]].all())


def _footprints(s: ScattererSet, shape: Tuple[int, int]) -> np.ndarray:
    """(B, K, H, W) booleans: the truncation disc of every scatterer."""
    rows, cols = np.mgrid[0:shape[0], 0:shape[1]]
    cells = s.rounded()
    dr = rows[None, None] - cells[..., 0, None, None]
    dc = cols[None, None] - cells[..., 1, None, None]
    return dr * dr + dc * dc <= s.radius ** 2


def _render_graph(rows: Tensor, cols: Tensor, amplitudes: Tensor, sigma: float, footprints: np.ndarray) -> Tensor:
    shape = footprints.shape[2:]
    grid_rows, grid_cols = np.mgrid[0:shape[0], 0:shape[1]].astype(np.float64)
    dr = F.sub(grid_rows[None, None], rows)
    dc = F.sub(grid_cols[None, None], cols)
    kernel = F.exp(F.scale(F.add(F.mul(dr, dr), F.mul(dc, dc)), -1.0 / (2.0 * sigma * sigma)))
    blobs = F.mul(F.mul(kernel, footprints.astype(np.float64)), amplitudes)
    return F.tsum(blobs, axis=1, keepdims=True)


def _leaves(s: ScattererSet, requires_grad: bool):
    batch, count = s.amplitudes.shape
    rows = Tensor(s.positions[..., 0].reshape(batch, count, 1, 1), requires_grad=requires_grad)
    cols = Tensor(s.positions[..., 1].reshape(batch, count, 1, 1), requires_grad=requires_grad)
    amplitudes = Tensor(s.amplitudes.reshape(batch, count, 1, 1), requires_grad=requires_grad)
    return rows, cols, amplitudes


def render_scatterers(s: ScattererSet, shape: Tuple[int, int]) -> Perturbation:
    """
    Sum of amplitude-weighted unit-peak Gaussians, each truncated to radius R.

    Returns:
        Perturbation with (B, H, W) delta and the union of truncation discs as support
    """
    height, width = shape
    cells = s.rounded()
    if (cells < 0).any() or (cells[..., 0] >= height).any() or (cells[..., 1] >= width).any():
        raise ValueError("scatterer positions must lie within the image bounds")
    footprints = _footprints(s, shape)
    rendered = _render_graph(*_leaves(s, False), s.sigma, footprints)
    return Perturbation(rendered.data[:, 0], footprints.any(axis=1))


def nearest_mask_pixel(position: np.ndarray, mask_cells: np.ndarray) -> np.ndarray:
    """Closest mask pixel under Euclidean distance; the first in row-major order wins ties."""
    distances = ((mask_cells - position) ** 2).sum(axis=1)
    return mask_cells[int(np.argmin(distances))].astype(np.float64)


def _initial_set(masks: np.ndarray, config: ScattererConfig, rng: np.random.Generator) -> ScattererSet:
    positions = np.zeros((len(masks), config.count, 2))
    for b, mask in enumerate(masks):
        cells = np.argwhere(mask)
        chosen = rng.choice(len(cells), size=config.count, replace=len(cells) < config.count)
        positions[b] = cells[chosen]
    amplitudes = np.full((len(masks), config.count), config.amplitude_max / 2.0)
    return ScattererSet(positions, amplitudes, config.sigma)


def _keep_on_mask(s: ScattererSet, masks: np.ndarray, shape: Tuple[int, int]):
    s.positions[..., 0] = np.clip(s.positions[..., 0], 0.0, shape[0] - 1.0)
    s.positions[..., 1] = np.clip(s.positions[..., 1], 0.0, shape[1] - 1.0)
    cells = s.rounded()
    for b in range(len(masks)):
        mask_cells = None
        for k in range(s.count):
            if not masks[b, cells[b, k, 0], cells[b, k, 1]]:
                if mask_cells is None:
                    mask_cells = np.argwhere(masks[b])
                s.positions[b, k] = nearest_mask_pixel(s.positions[b, k], mask_cells)


def otsa_attack(
    x: np.ndarray,
    y,
    mask: np.ndarray,
    scorer: Scorer,
    cfg: AttackConfig,
    scatterers: ScattererConfig = ScattererConfig(),
) -> Tuple[Perturbation, ScattererSet]:
    """
    Optimize scatterer positions and amplitudes by signed gradient ascent on J.

    Positions start at distinct random mask pixels, amplitudes at a_max / 2.
    After every step amplitudes are clamped to [0, a_max] and any position whose
    rounded pixel left the mask moves to the nearest mask pixel.

    Args:
        x: (H, W) image or (B, H, W) batch
        y: Label(s)
        mask: Target mask(s) matching x
        scorer: Differentiable loss J to increase
        cfg: Iteration count and rng seed; epsilon == 0 disables the attack
        scatterers: Count, width and amplitude bound

    Returns:
        (perturbation, final scatterer parameters)

    Raises:
        AttackError: On an empty mask or a non-finite loss
    """
    cfg.validate()
    scatterers.validate()
    if cfg.epsilon == 0:
        # a zero attack budget switches the scatterers off
        scatterers = replace(scatterers, amplitude_max=0.0, amplitude_step=0.0)
    x = np.asarray(x, dtype=np.float64)
    masks = np.asarray(mask, dtype=bool)
    single = x.ndim == 2
    if single:
        x, masks = x[None], masks[None]
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if masks.shape != x.shape:
        raise ValueError(f"mask {masks.shape} must match images {x.shape}")
    empty = np.flatnonzero(~masks.reshape(len(masks), -1).any(axis=1))
    if empty.size:
        raise AttackError(f"otsa: empty target mask for sample {int(empty[0])}", {"sample": int(empty[0])})

    shape = x.shape[1:]
    state = _initial_set(masks, scatterers, np.random.default_rng(cfg.rng_seed))
    amplitude_step = scatterers.resolved_amplitude_step(cfg.steps)
    images = Tensor(x[:, None])

    for iteration in range(cfg.steps):
        rows, cols, amplitudes = _leaves(state, True)
        rendered = _render_graph(rows, cols, amplitudes, state.sigma, _footprints(state, shape))
        loss = scorer(F.clamp(F.add(images, rendered), 0.0, 1.0), y)
        value = loss.item()
        if not np.isfinite(value):
            raise AttackError(f"otsa: non-finite loss at iteration {iteration}", {"iteration": iteration})
        logger.debug(f"otsa iteration {iteration}: loss {value:.6f}")
        backward(loss)

        position_grad = np.stack([rows.grad, cols.grad], axis=-1).reshape(state.positions.shape)
        state.positions = state.positions + scatterers.position_step * np.sign(position_grad)
        state.amplitudes = np.clip(
            state.amplitudes + amplitude_step * np.sign(amplitudes.grad.reshape(state.amplitudes.shape)),
            0.0,
            scatterers.amplitude_max,
        )
        _keep_on_mask(state, masks, shape)

    rendered = render_scatterers(state, shape)
    delta = np.clip(x + rendered.delta, 0.0, 1.0) - x
    result = Perturbation(delta, rendered.support)
    if single:
        return result[0], ScattererSet(state.positions[0:1], state.amplitudes[0:1], state.sigma)
    return result, state
