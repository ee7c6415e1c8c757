"""Small binary-mask helpers shared by attributes, codec and metrics."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

#: 8-connectivity structuring element for component labelling.
STRUCT_8 = np.ones((3, 3), dtype=bool)


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Label 8-connected components of a boolean mask."""
    lab, n = ndimage.label(mask, structure=STRUCT_8)
    return lab, int(n)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Boolean mask of the largest 8-connected component (empty stays empty)."""
    lab, n = connected_components(mask)
    if n <= 1:
        return mask.astype(bool)
    sizes = ndimage.sum_labels(np.ones_like(lab), lab, index=np.arange(1, n + 1))
    return lab == (int(np.argmax(sizes)) + 1)


def boundary_4(mask: np.ndarray) -> np.ndarray:
    """Pixels of ``mask`` with a 4-neighbour outside it (image border counts)."""
    mask = mask.astype(bool)
    padded = np.pad(mask, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    return mask & ~interior


def adjacent_4(mask: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Pixels of ``mask`` with at least one 4-neighbour in ``other``."""
    other = other.astype(bool)
    padded = np.pad(other, 1, constant_values=False)
    near = (
        padded[:-2, 1:-1]
        | padded[2:, 1:-1]
        | padded[1:-1, :-2]
        | padded[1:-1, 2:]
    )
    return mask.astype(bool) & near


def exposed_to_background(labels: np.ndarray, mask: np.ndarray, background: int = 0) -> np.ndarray:
    """Pixels of ``mask`` 4-adjacent to the background label (or image border)."""
    bg = np.pad(labels == background, 1, constant_values=True)
    near_bg = (
        bg[:-2, 1:-1]
        | bg[2:, 1:-1]
        | bg[1:-1, :-2]
        | bg[1:-1, 2:]
    )
    return mask.astype(bool) & near_bg


def background_holes(mask: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Background pixels strictly enclosed by ``mask``."""
    filled = ndimage.binary_fill_holes(mask)
    return filled & ~mask.astype(bool) & background.astype(bool)


def pixel_coords_mm(mask: np.ndarray, spacing_mm: tuple[float, float]) -> np.ndarray:
    """(n, 2) array of (x, y) positions in mm of the True pixels' centres."""
    rows, cols = np.nonzero(mask)
    sx, sy = spacing_mm
    return np.column_stack([cols * sx, rows * sy]).astype(np.float64)
