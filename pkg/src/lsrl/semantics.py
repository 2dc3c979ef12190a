"""Semantic label catalog, class statistics and inverse-frequency loss weights."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

CLASS_NAMES: tuple[str, ...] = (
    "road",
    "road-line",
    "sidewalk",
    "terrain",
    "fence-barrier",
    "building",
    "vegetation",
    "vehicle",
    "pedestrian",
    "pole",
    "wall",
    "traffic-sign",
    "none",
)
NUM_CLASSES = len(CLASS_NAMES)

ROAD = 0
ROAD_LINE = 1
SIDEWALK = 2
TERRAIN = 3
FENCE_BARRIER = 4
VEGETATION = 6
VEHICLE = 7


def class_id(name: str) -> int:
    try:
        return CLASS_NAMES.index(name)
    except ValueError:
        raise KeyError(f"unknown semantic class {name!r}") from None


def validate_grid(grid: np.ndarray) -> np.ndarray:
    """Return ``grid`` as a uint8 array after checking every id is in range."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError(f"semantic grid must be 2-D, got shape {grid.shape}")
    if grid.size and (grid.min() < 0 or grid.max() >= NUM_CLASSES):
        raise ValueError("semantic grid holds class ids outside [0, 12]")
    return grid.astype(np.uint8, copy=False)


def class_frequencies(dataset: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Per-class pixel counts over a non-empty collection of semantic grids."""
    if len(dataset) == 0:
        raise ValueError("class_frequencies needs at least one grid")
    counts = np.zeros(NUM_CLASSES, dtype=np.int64)
    for grid in dataset:
        counts += np.bincount(validate_grid(grid).ravel(), minlength=NUM_CLASSES)
    return counts


def compute_class_weights(counts: Iterable[float]) -> np.ndarray:
    """Weights inversely proportional to class frequency, normalised to sum to 1.

    Classes that never occur get weight 0 so the loss stays finite.
    """
    counts = np.asarray(list(counts), dtype=np.float64)
    if counts.shape != (NUM_CLASSES,):
        raise ValueError(f"expected {NUM_CLASSES} counts, got shape {counts.shape}")
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    present = counts > 0
    if not present.any():
        raise ValueError("all class counts are zero; weights undefined")
    inv = np.zeros(NUM_CLASSES)
    inv[present] = 1.0 / counts[present]
    return inv / inv.sum()


def one_hot(grid: np.ndarray) -> np.ndarray:
    """(H, W) class ids -> (13, H, W) float one-hot volume."""
    grid = validate_grid(grid)
    vol = np.zeros((NUM_CLASSES,) + grid.shape)
    np.put_along_axis(vol, grid[None].astype(np.intp), 1.0, axis=0)
    return vol


def argmax_classes(volume: np.ndarray) -> np.ndarray:
    """Inverse of :func:`one_hot` (also decodes logits): channel axis is first."""
    return np.argmax(volume, axis=0).astype(np.uint8)
