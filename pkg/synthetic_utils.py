#!/usr/bin/env python3
"""
Synthetic test images: steps, rectangles, disks and diagonal bars
"""

import numpy as np

from texture_utils import ImageBuffer, InvalidInputError

SHAPES = ('step', 'rectangle', 'disk', 'bar')


def _finish(mask: np.ndarray, foreground: int, background: int, rgb: bool) -> ImageBuffer:
    pixels = np.where(mask, foreground, background).astype(np.uint8)
    if rgb:
        pixels = np.stack([pixels] * 3, axis=-1)
    return ImageBuffer.from_array(pixels)


def vertical_step(width: int = 64, height: int = 64, column: int = None,
                  foreground: int = 255, background: int = 0, rgb: bool = False) -> ImageBuffer:
    """background left of `column`, foreground from `column` on"""
    column = width // 2 if column is None else column
    xs = np.arange(width)[np.newaxis, :]
    mask = np.broadcast_to(xs >= column, (height, width))
    return _finish(mask, foreground, background, rgb)


def filled_rectangle(width: int = 128, height: int = 128, margin: int = 32,
                     foreground: int = 255, background: int = 0, rgb: bool = False) -> ImageBuffer:
    ys, xs = np.mgrid[0:height, 0:width]
    mask = (xs >= margin) & (xs < width - margin) & (ys >= margin) & (ys < height - margin)
    return _finish(mask, foreground, background, rgb)


def disk(width: int = 128, height: int = 128, radius: float = 40.0,
         foreground: int = 255, background: int = 0, rgb: bool = False) -> ImageBuffer:
    ys, xs = np.mgrid[0:height, 0:width]
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
    return _finish(mask, foreground, background, rgb)


def diagonal_bar(width: int = 128, height: int = 128, half_width: float = 10.0,
                 foreground: int = 255, background: int = 0, rgb: bool = False) -> ImageBuffer:
    """A bar along the main diagonal: pixels within half_width of the line x == y"""
    ys, xs = np.mgrid[0:height, 0:width]
    mask = np.abs(xs - ys) / np.sqrt(2.0) <= half_width
    return _finish(mask, foreground, background, rgb)


def make_shape(name: str, size: int = 128, rgb: bool = False) -> ImageBuffer:
    if name == 'step':
        return vertical_step(size, size, rgb=rgb)
    if name == 'rectangle':
        return filled_rectangle(size, size, margin=size // 4, rgb=rgb)
    if name == 'disk':
        return disk(size, size, radius=size * 0.3, rgb=rgb)
    if name == 'bar':
        return diagonal_bar(size, size, half_width=size / 12.0, rgb=rgb)
    raise InvalidInputError(f"Unknown shape {name!r} (known: {', '.join(SHAPES)})")
