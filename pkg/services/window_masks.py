"""
Nagao–Matsuyama window masks inside a 5x5 neighborhood.

Offsets are (row, col) relative to the filtered pixel, rows growing downward.
Mask 0 is the central 3x3; masks 1-8 are the seven-pixel regions, listed
clockwise from north. Each directional mask contains the center pixel.

    N (axial)          NE (diagonal)
    . X X X .          . . . X X
    . X X X .          . . X X X
    . . C . .          . . C X .
    . . . . .          . . . . .
    . . . . .          . . . . .

E, S and W are N rotated by 90, 180 and 270 degrees; SE, SW and NW are NE
rotated the same way. Rotating by 90 degrees clockwise maps (r, c) to (c, -r).
"""

import numpy as np

from schemas import WindowMaskSet

WINDOW_RADIUS = 2
WINDOW_SIDE = 2 * WINDOW_RADIUS + 1

CENTRAL = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 0), (0, 1),
    (1, -1), (1, 0), (1, 1),
)
NORTH = ((-2, -1), (-2, 0), (-2, 1), (-1, -1), (-1, 0), (-1, 1), (0, 0))
NORTH_EAST = ((-2, 1), (-2, 2), (-1, 0), (-1, 1), (-1, 2), (0, 1), (0, 0))
EAST = ((-1, 2), (0, 2), (1, 2), (-1, 1), (0, 1), (1, 1), (0, 0))
SOUTH_EAST = ((1, 2), (2, 2), (0, 1), (1, 1), (2, 1), (1, 0), (0, 0))
SOUTH = ((2, 1), (2, 0), (2, -1), (1, 1), (1, 0), (1, -1), (0, 0))
SOUTH_WEST = ((2, -1), (2, -2), (1, 0), (1, -1), (1, -2), (0, -1), (0, 0))
WEST = ((1, -2), (0, -2), (-1, -2), (1, -1), (0, -1), (-1, -1), (0, 0))
NORTH_WEST = ((-1, -2), (-2, -2), (0, -1), (-1, -1), (-2, -1), (-1, 0), (0, 0))

NAGAO_MATSUYAMA_MASKS = WindowMaskSet(
    names=("center", "north", "north-east", "east", "south-east", "south", "south-west", "west", "north-west"),
    masks=(CENTRAL, NORTH, NORTH_EAST, EAST, SOUTH_EAST, SOUTH, SOUTH_WEST, WEST, NORTH_WEST),
)


def rotate_offsets(offsets, quarter_turns: int = 1) -> frozenset:
    """Rotate offsets clockwise by quarter_turns * 90 degrees."""
    rotated = set(offsets)
    for _ in range(quarter_turns % 4):
        rotated = {(c, -r) for r, c in rotated}
    return frozenset(rotated)


def mask_indices(masks: WindowMaskSet = NAGAO_MATSUYAMA_MASKS) -> list[tuple[np.ndarray, np.ndarray]]:
    """Row and column index arrays into a 5x5 window for each mask."""
    indices = []
    for mask in masks.masks:
        rows = np.array([r + WINDOW_RADIUS for r, _ in mask], dtype=np.intp)
        cols = np.array([c + WINDOW_RADIUS for _, c in mask], dtype=np.intp)
        indices.append((rows, cols))
    return indices


def membership(masks: WindowMaskSet = NAGAO_MATSUYAMA_MASKS) -> np.ndarray:
    """Boolean (9, 25) matrix: mask k covers flattened window position p."""
    table = np.zeros((len(masks.masks), WINDOW_SIDE * WINDOW_SIDE), dtype=bool)
    for k, (rows, cols) in enumerate(mask_indices(masks)):
        table[k, rows * WINDOW_SIDE + cols] = True
    return table
