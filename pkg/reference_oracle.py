#!/usr/bin/env python3
"""
Reference implementations used as ground truth
Textbook Canny with transitive hysteresis, a direct 2D convolution, an
atan2 direction classifier, and per-pixel conditional versions of every
pipeline kernel. Everything runs in binary32 with plain if statements; speed
is not a concern here.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict

import numpy as np

from canny_pipeline import (
    GAUSSIAN_WEIGHTS,
    CannyParams,
    Direction,
    MagnitudeMode,
    gradient_magnitude,
    luma,
    weighted_sum,
)
from texture_utils import ImageBuffer, ImageLayout, InvalidInputError, Texture2D

logger = logging.getLogger(__name__)

# counterclockwise from +x, 45 degrees apart
_OCTANTS = (
    Direction(1, 0), Direction(1, 1), Direction(0, 1), Direction(-1, 1),
    Direction(-1, 0), Direction(-1, -1), Direction(0, -1), Direction(1, -1),
)

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float32) / np.float32(4)
_SOBEL_Y = _SOBEL_X.T.copy()

_F0 = np.float32(0.0)
_F1 = np.float32(1.0)
_F2 = np.float32(2.0)
_F3 = np.float32(3.0)
_QUARTER = np.float32(0.25)
_TINY = np.float32(1e-30)
_COS_EIGHTH = np.float32(math.cos(math.pi / 8))
_SIN_EIGHTH = np.float32(math.sin(math.pi / 8))


@dataclass(frozen=True, eq=False)
class BinaryEdgeMap:
    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        if self.bits.shape != (self.height, self.width):
            raise InvalidInputError(f"Edge bits {self.bits.shape} do not match {self.width}x{self.height}")

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


def direction_oracle(gx: float, gy: float) -> Direction:
    """Nearest of the eight directions by atan2; sectors are [c - 22.5, c + 22.5)"""
    if gx == 0 and gy == 0:
        raise InvalidInputError("Direction of a zero gradient is undefined")
    angle = math.degrees(math.atan2(gy, gx))
    if angle < 0:
        angle += 360.0
    shifted = angle + 22.5
    if shifted >= 360.0:
        shifted -= 360.0
    return _OCTANTS[int(shifted // 45.0) % 8]


def convolve2d_reference(src: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Direct 2D convolution (kernel flipped) with clamp-to-edge borders, in binary32"""
    kernel = np.asarray(kernel, dtype=np.float32)
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise InvalidInputError(f"Kernel dimensions must be odd, got {kernel.shape}")
    src = np.asarray(src, dtype=np.float32)
    height, width = src.shape
    ry, rx = kernel.shape[0] // 2, kernel.shape[1] // 2
    padded = np.pad(src, ((ry, ry), (rx, rx)), mode='edge')

    out = np.zeros((height, width), dtype=np.float32)
    for j in range(kernel.shape[0]):
        for i in range(kernel.shape[1]):
            # out(y, x) += k(j, i) * src(y + ry - j, x + rx - i)
            window = padded[2 * ry - j:2 * ry - j + height, 2 * rx - i:2 * rx - i + width]
            out = out + kernel[j, i] * window
    return out


def grey_from_image(img: ImageBuffer) -> np.ndarray:
    """Bytes to [0,1] binary32 intensities, luma-weighted for RGB"""
    pixels = img.to_array().astype(np.float32) / np.float32(255.0)
    if img.layout is ImageLayout.RGB888:
        return luma(pixels[..., 0], pixels[..., 1], pixels[..., 2])
    return pixels[..., 0]


def canny_stages(grey: np.ndarray, params: CannyParams) -> Dict[str, np.ndarray]:
    """Every intermediate of the textbook detector, for inspection and tests"""
    grey = np.asarray(grey, dtype=np.float32)
    if grey.ndim != 2 or grey.size == 0:
        raise InvalidInputError(f"Expected a non-empty 2D grey image, got shape {grey.shape}")
    height, width = grey.shape

    weights = np.array(GAUSSIAN_WEIGHTS[params.kernel_size], dtype=np.float32)
    smoothed = convolve2d_reference(grey, np.outer(weights, weights))
    # convolution flips, so flip the Sobel masks to correlate with them
    gx = convolve2d_reference(smoothed, _SOBEL_X[::-1, ::-1])
    gy = convolve2d_reference(smoothed, _SOBEL_Y[::-1, ::-1])
    magnitude = gradient_magnitude(gx, gy, params.magnitude_mode)

    suppressed = np.zeros_like(magnitude)
    for y in range(height):
        for x in range(width):
            m = magnitude[y, x]
            if m == 0:
                continue
            d = direction_oracle(float(gx[y, x]), float(gy[y, x]))
            ahead = magnitude[min(max(y + d.dy, 0), height - 1), min(max(x + d.dx, 0), width - 1)]
            behind = magnitude[min(max(y - d.dy, 0), height - 1), min(max(x - d.dx, 0), width - 1)]
            if m < ahead or m < behind:
                continue
            suppressed[y, x] = m

    strong = suppressed >= np.float32(params.high_threshold)
    weak = (suppressed > np.float32(params.low_threshold)) & ~strong

    edges = strong.copy()
    queue = deque(zip(*np.nonzero(strong)))
    while queue:
        y, x = queue.popleft()
        for ny in range(max(y - 1, 0), min(y + 2, height)):
            for nx in range(max(x - 1, 0), min(x + 2, width)):
                if weak[ny, nx] and not edges[ny, nx]:
                    edges[ny, nx] = True
                    queue.append((ny, nx))

    return {
        'smoothed': smoothed,
        'gx': gx,
        'gy': gy,
        'magnitude': magnitude,
        'suppressed': suppressed,
        'strong': strong,
        'weak': weak,
        'edges': edges,
    }


def classic_canny(img: np.ndarray, params: CannyParams = CannyParams()) -> BinaryEdgeMap:
    stages = canny_stages(img, params)
    edges = stages['edges']
    logger.debug(f"Reference Canny: {int(stages['strong'].sum())} strong, "
                 f"{int(edges.sum())} edge pixels")
    return BinaryEdgeMap(edges.shape[1], edges.shape[0], edges)


# Per-pixel conditional kernels. Each reproduces one pipeline pass with
# if statements so the step-function versions can be checked bit for bit.

def _clamped(texels: np.ndarray, x: int, y: int, channel: int = 0):
    height, width = texels.shape[:2]
    if x < 0:
        x = 0
    elif x >= width:
        x = width - 1
    if y < 0:
        y = 0
    elif y >= height:
        y = height - 1
    return texels[y, x, channel]


def branchy_rgb_to_grey(tex: Texture2D) -> np.ndarray:
    out = np.zeros((tex.height, tex.width, 1), dtype=np.float32)
    for y in range(tex.height):
        for x in range(tex.width):
            r, g, b = tex.texels[y, x]
            out[y, x, 0] = luma(r, g, b)
    return out


def branchy_gaussian_1d(tex: Texture2D, axis: str, kernel_size: int) -> np.ndarray:
    weights = GAUSSIAN_WEIGHTS[kernel_size]
    radius = kernel_size // 2
    out = np.zeros((tex.height, tex.width, 1), dtype=np.float32)
    for y in range(tex.height):
        for x in range(tex.width):
            if axis == 'x':
                samples = [_clamped(tex.texels, x + k, y) for k in range(-radius, radius + 1)]
            else:
                samples = [_clamped(tex.texels, x, y + k) for k in range(-radius, radius + 1)]
            out[y, x, 0] = weighted_sum(samples, weights)
    return out


def branchy_direction(gx, gy) -> Direction:
    gx, gy = np.float32(gx), np.float32(gy)
    biggest = abs(gx) if abs(gx) > abs(gy) else abs(gy)
    if biggest < _TINY:
        biggest = _TINY
    scale = _F1 / biggest
    nx, ny = gx * scale, gy * scale

    # rotate a sixteenth of a turn, then square as a complex number
    a = _COS_EIGHTH * nx - _SIN_EIGHTH * ny
    b = _SIN_EIGHTH * nx + _COS_EIGHTH * ny
    u = a * a - b * b
    v = _F2 * a * b

    if u > 0 and v >= 0:
        base = Direction(1, 0)
    elif u <= 0 and v > 0:
        base = Direction(1, 1)
    elif u < 0 and v <= 0:
        base = Direction(0, 1)
    elif u >= 0 and v < 0:
        base = Direction(-1, 1)
    else:
        base = Direction(1, 0)
    if b < 0 or (b == 0 and a < 0):
        return -base
    return base


def branchy_gradient(tex: Texture2D, mode: MagnitudeMode = MagnitudeMode.EXACT) -> np.ndarray:
    mode = MagnitudeMode(mode)
    out = np.zeros((tex.height, tex.width, 3), dtype=np.float32)
    for y in range(tex.height):
        for x in range(tex.width):
            n = [[_clamped(tex.texels, x + dx, y + dy) for dx in (-1, 0, 1)] for dy in (-1, 0, 1)]
            gx = ((n[0][2] - n[0][0]) + _F2 * (n[1][2] - n[1][0]) + (n[2][2] - n[2][0])) * _QUARTER
            gy = ((n[2][0] - n[0][0]) + _F2 * (n[2][1] - n[0][1]) + (n[2][2] - n[0][2])) * _QUARTER
            if mode is MagnitudeMode.MANHATTAN:
                magnitude = abs(gx) + abs(gy)
            else:
                magnitude = np.sqrt(gx * gx + gy * gy)
            d = branchy_direction(gx, gy)
            out[y, x] = (magnitude, d.dx, d.dy)
    return out


def _branchy_smoothstep(low, high, x):
    if x <= low:
        return _F0
    if x >= high:
        return _F1
    t = (x - low) / (high - low)
    return t * t * (_F3 - _F2 * t)


def branchy_nms_threshold(tex: Texture2D, low: float, high: float) -> np.ndarray:
    low32, high32 = np.float32(low), np.float32(high)
    out = np.zeros((tex.height, tex.width, 1), dtype=np.float32)
    for y in range(tex.height):
        for x in range(tex.width):
            m = tex.texels[y, x, 0]
            dx, dy = int(tex.texels[y, x, 1]), int(tex.texels[y, x, 2])
            ahead = _clamped(tex.texels, x + dx, y + dy)
            behind = _clamped(tex.texels, x - dx, y - dy)
            if m < ahead or m < behind:
                survivor = _F0
            else:
                survivor = m
            out[y, x, 0] = _branchy_smoothstep(low32, high32, survivor)
    return out


def branchy_weak_pixels(tex: Texture2D) -> np.ndarray:
    out = np.zeros((tex.height, tex.width, 1), dtype=np.float32)
    for y in range(tex.height):
        for x in range(tex.width):
            total = _F0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    total = total + _clamped(tex.texels, x + dx, y + dy)
            if total >= np.float32(2.0):
                out[y, x, 0] = tex.texels[y, x, 0]
    return out
