#!/usr/bin/env python3
"""
Condition-free Canny edge detection as a chain of fragment passes
Greyscale (RGB input only), Gaussian X, Gaussian Y, Gradient, Non-max Sup
and Weak Pixels. No kernel body contains a data-dependent branch: decisions
are made with step, sign, clamp and smoothstep arithmetic.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pass_engine import FragmentContext, PassEngine, PassKernel, PipelineReport, TimingMode, RELOAD_TEXTURE
from texture_utils import (
    ImageBuffer,
    ImageLayout,
    InvalidInputError,
    Precision,
    Texture2D,
    download,
)

logger = logging.getLogger(__name__)

GREYSCALE = 'Greyscale'
GAUSSIAN_X = 'Gaussian X'
GAUSSIAN_Y = 'Gaussian Y'
GRADIENT = 'Gradient'
NON_MAX_SUP = 'Non-max Sup'
WEAK_PIXELS = 'Weak Pixels'

# every constant is binary32 so kernel arithmetic never widens
_ZERO = np.float32(0.0)
_ONE = np.float32(1.0)
_TWO = np.float32(2.0)
_THREE = np.float32(3.0)
_QUARTER = np.float32(0.25)
_TINY = np.float32(1e-30)
_COS_EIGHTH = np.float32(math.cos(math.pi / 8))
_SIN_EIGHTH = np.float32(math.sin(math.pi / 8))
_WEAK_SUPPORT = np.float32(2.0)

LUMA_WEIGHTS = (np.float32(0.299), np.float32(0.587), np.float32(0.114))

GAUSSIAN_WEIGHTS = {
    3: tuple(np.float32(w / 4.0) for w in (1, 2, 1)),
    5: tuple(np.float32(w / 16.0) for w in (1, 4, 6, 4, 1)),
}


class MagnitudeMode(str, Enum):
    EXACT = 'exact'
    MANHATTAN = 'manhattan'


@dataclass(frozen=True)
class CannyParams:
    kernel_size: int = 3
    low_threshold: float = 0.1
    high_threshold: float = 0.25
    magnitude_mode: MagnitudeMode = MagnitudeMode.EXACT

    def __post_init__(self):
        if self.kernel_size not in GAUSSIAN_WEIGHTS:
            raise InvalidInputError(f"Gaussian kernel size must be 3 or 5, got {self.kernel_size}")
        if not 0.0 < self.low_threshold < 1.0 or not 0.0 < self.high_threshold < 1.0:
            raise InvalidInputError(
                f"Thresholds must lie in (0, 1), got low={self.low_threshold} high={self.high_threshold}")
        if self.low_threshold >= self.high_threshold:
            raise InvalidInputError(
                f"Low threshold {self.low_threshold} must be below high threshold {self.high_threshold}")
        object.__setattr__(self, 'magnitude_mode', MagnitudeMode(self.magnitude_mode))
        ratio = self.high_threshold / self.low_threshold
        if not 2.0 <= ratio <= 3.0:
            logger.warning(f"Threshold ratio {ratio:.2f}:1 is outside the usual 2:1 to 3:1 band")


@dataclass(frozen=True)
class Direction:
    dx: int
    dy: int

    def __neg__(self) -> 'Direction':
        return Direction(-self.dx, -self.dy)


def step(edge, x):
    """GLSL step: 1.0 where x >= edge, else 0.0"""
    return np.asarray(x >= edge, dtype=np.float32)


def smoothstep(low, high, x):
    t = np.clip((x - low) / (high - low), _ZERO, _ONE)
    return t * t * (_THREE - _TWO * t)


def luma(r, g, b):
    return (r * LUMA_WEIGHTS[0] + g * LUMA_WEIGHTS[1]) + b * LUMA_WEIGHTS[2]


def weighted_sum(samples: Sequence, weights: Sequence):
    total = samples[0] * weights[0]
    for sample, weight in zip(samples[1:], weights[1:]):
        total = total + sample * weight
    return total


def sobel(n) -> Tuple:
    """Normalized Sobel gradient of a 3x3 neighbourhood n[row][col], +y down the raster"""
    gx = ((n[0][2] - n[0][0]) + _TWO * (n[1][2] - n[1][0]) + (n[2][2] - n[2][0])) * _QUARTER
    gy = ((n[2][0] - n[0][0]) + _TWO * (n[2][1] - n[0][1]) + (n[2][2] - n[0][2])) * _QUARTER
    return gx, gy


def gradient_magnitude(gx, gy, mode: MagnitudeMode):
    if mode is MagnitudeMode.MANHATTAN:
        return np.abs(gx) + np.abs(gy)
    return np.sqrt(gx * gx + gy * gy)


def rotate_and_double(gx, gy) -> Tuple:
    """
    Rotate a gradient by +1/16 turn, then double its angle by complex squaring
    Returns the rotated (a, b) and doubled (u, v). Octant k of the gradient
    lands in quadrant k mod 4 of (u, v); the sign of b tells k < 4 from k >= 4.
    """
    gx = np.asarray(gx, dtype=np.float32)
    gy = np.asarray(gy, dtype=np.float32)
    scale = _ONE / np.maximum(np.maximum(np.abs(gx), np.abs(gy)), _TINY)
    nx = gx * scale
    ny = gy * scale
    a = _COS_EIGHTH * nx - _SIN_EIGHTH * ny
    b = _SIN_EIGHTH * nx + _COS_EIGHTH * ny
    u = a * a - b * b
    v = _TWO * a * b
    return a, b, u, v


def classify_directions(gx, gy) -> Tuple[np.ndarray, np.ndarray]:
    """Branch-free octant classification; returns float32 (dx, dy) in {-1, 0, 1}"""
    a, b, u, v = rotate_and_double(gx, gy)

    u_pos = _ONE - step(u, _ZERO)
    u_neg = _ONE - step(_ZERO, u)
    v_pos = _ONE - step(v, _ZERO)
    v_neg = _ONE - step(_ZERO, v)

    horizontal = u_pos * (_ONE - v_neg)     # u > 0, v >= 0
    diagonal = (_ONE - u_pos) * v_pos       # u <= 0, v > 0
    vertical = u_neg * (_ONE - v_pos)       # u < 0, v <= 0
    anti_diagonal = (_ONE - u_neg) * v_neg  # u >= 0, v < 0
    degenerate = _ONE - (horizontal + diagonal + vertical + anti_diagonal)

    lower_half = (_ONE - step(_ZERO, b)) + step(_ZERO, b) * step(b, _ZERO) * (_ONE - step(_ZERO, a))
    sign = _ONE - _TWO * lower_half

    # + 0.0 turns -0.0 into +0.0
    dx = sign * (horizontal + diagonal - anti_diagonal + degenerate) + _ZERO
    dy = sign * (diagonal + vertical + anti_diagonal) + _ZERO
    return dx, dy


def classify_direction(gx: float, gy: float) -> Direction:
    dx, dy = classify_directions(gx, gy)
    return Direction(int(dx), int(dy))


def rgb_to_grey_kernel(precision: Precision = Precision.MEDIUMP) -> PassKernel:
    def body(frag: FragmentContext):
        rgb = frag.fetch('prev')
        return (luma(rgb[..., 0], rgb[..., 1], rgb[..., 2]),)

    return PassKernel(GREYSCALE, ('prev',), 1, precision, body)


def gaussian_kernel(axis: str, kernel_size: int = 3,
                    precision: Precision = Precision.MEDIUMP) -> PassKernel:
    if kernel_size not in GAUSSIAN_WEIGHTS:
        raise InvalidInputError(f"Gaussian kernel size must be 3 or 5, got {kernel_size}")
    if axis not in ('x', 'y'):
        raise InvalidInputError(f"Gaussian axis must be 'x' or 'y', got {axis!r}")
    weights = GAUSSIAN_WEIGHTS[kernel_size]
    radius = kernel_size // 2

    def body(frag: FragmentContext):
        if axis == 'x':
            samples = [frag.fetch('prev', k, 0)[..., 0] for k in range(-radius, radius + 1)]
        else:
            samples = [frag.fetch('prev', 0, k)[..., 0] for k in range(-radius, radius + 1)]
        return (weighted_sum(samples, weights),)

    name = GAUSSIAN_X if axis == 'x' else GAUSSIAN_Y
    return PassKernel(name, ('prev',), 1, precision, body)


def gradient_kernel(mode: MagnitudeMode = MagnitudeMode.EXACT,
                    precision: Precision = Precision.MEDIUMP) -> PassKernel:
    mode = MagnitudeMode(mode)

    def body(frag: FragmentContext):
        n = [[frag.fetch('prev', dx, dy)[..., 0] for dx in (-1, 0, 1)] for dy in (-1, 0, 1)]
        gx, gy = sobel(n)
        dx, dy = classify_directions(gx, gy)
        return gradient_magnitude(gx, gy, mode), dx, dy

    return PassKernel(GRADIENT, ('prev',), 3, precision, body, signed_channels=(1, 2))


def nms_threshold_kernel(low: float, high: float,
                         precision: Precision = Precision.MEDIUMP) -> PassKernel:
    if not low < high:
        raise InvalidInputError(f"Low threshold {low} must be below high threshold {high}")
    low32 = np.float32(low)
    high32 = np.float32(high)

    def body(frag: FragmentContext):
        centre = frag.fetch('prev')
        m = centre[..., 0]
        dx = centre[..., 1].astype(np.int64)
        dy = centre[..., 2].astype(np.int64)
        ahead = frag.fetch_at('prev', frag.x + dx, frag.y + dy)[..., 0]
        behind = frag.fetch_at('prev', frag.x - dx, frag.y - dy)[..., 0]
        survivor = m * step(np.maximum(ahead, behind), m)
        return (smoothstep(low32, high32, survivor),)

    return PassKernel(NON_MAX_SUP, ('prev',), 1, precision, body)


def weak_pixel_kernel(precision: Precision = Precision.MEDIUMP) -> PassKernel:
    def body(frag: FragmentContext):
        neighbourhood = [frag.fetch('prev', dx, dy)[..., 0] for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
        total = _ZERO
        for s in neighbourhood:
            total = total + s
        return (neighbourhood[4] * step(_WEAK_SUPPORT, total),)

    return PassKernel(WEAK_PIXELS, ('prev',), 1, precision, body)


def _single_pass(kernel: PassKernel, tex: Texture2D, engine: Optional[PassEngine]) -> Texture2D:
    engine = engine or PassEngine()
    out, _ = engine.run_pass(kernel, {'prev': tex}, tex.width, tex.height)
    return out


def _require_channels(tex: Texture2D, channels: int, what: str):
    if tex.channels != channels:
        raise InvalidInputError(f"{what} needs a {channels}-channel texture, got {tex.channels}")


def rgb_to_grey(rgb: Texture2D, precision: Precision = Precision.MEDIUMP,
                engine: Optional[PassEngine] = None) -> Texture2D:
    _require_channels(rgb, 3, GREYSCALE)
    return _single_pass(rgb_to_grey_kernel(precision), rgb, engine)


def gaussian_1d(src: Texture2D, axis: str, kernel_size: int = 3,
                precision: Precision = Precision.MEDIUMP,
                engine: Optional[PassEngine] = None) -> Texture2D:
    _require_channels(src, 1, "Gaussian smoothing")
    return _single_pass(gaussian_kernel(axis, kernel_size, precision), src, engine)


def gradient_pass(smoothed: Texture2D, mode: MagnitudeMode = MagnitudeMode.EXACT,
                  precision: Precision = Precision.MEDIUMP,
                  engine: Optional[PassEngine] = None) -> Texture2D:
    _require_channels(smoothed, 1, GRADIENT)
    return _single_pass(gradient_kernel(mode, precision), smoothed, engine)


def nms_threshold_pass(grad: Texture2D, low: float, high: float,
                       precision: Precision = Precision.MEDIUMP,
                       engine: Optional[PassEngine] = None) -> Texture2D:
    _require_channels(grad, 3, NON_MAX_SUP)
    return _single_pass(nms_threshold_kernel(low, high, precision), grad, engine)


def weak_pixel_pass(strength: Texture2D, precision: Precision = Precision.MEDIUMP,
                    engine: Optional[PassEngine] = None) -> Texture2D:
    _require_channels(strength, 1, WEAK_PIXELS)
    return _single_pass(weak_pixel_kernel(precision), strength, engine)


def build_canny_passes(params: CannyParams, rgb_input: bool,
                       precision: Precision = Precision.MEDIUMP) -> List[PassKernel]:
    passes = [rgb_to_grey_kernel(precision)] if rgb_input else []
    passes += [
        gaussian_kernel('x', params.kernel_size, precision),
        gaussian_kernel('y', params.kernel_size, precision),
        gradient_kernel(params.magnitude_mode, precision),
        nms_threshold_kernel(params.low_threshold, params.high_threshold, precision),
        weak_pixel_kernel(precision),
    ]
    return passes


def detect_edges(img: ImageBuffer, params: CannyParams = CannyParams(),
                 precision: Precision = Precision.MEDIUMP,
                 engine: Optional[PassEngine] = None,
                 repetitions: int = 1,
                 mode: TimingMode = TimingMode.PIPELINED,
                 keep_intermediates: bool = False) -> Tuple[ImageBuffer, PipelineReport]:
    """
    Upload, run every pass, and map final strengths to bytes (round(255*s))
    Pixels with nonzero intensity are edges. Greyscale input skips the
    Greyscale pass.
    """
    engine = engine or PassEngine()
    precision = Precision.parse(precision)
    source, upload_report = engine.upload(img, precision, repetitions)
    passes = build_canny_passes(params, img.layout is ImageLayout.RGB888, precision)

    final, report = engine.run_pipeline(passes, source, repetitions, mode, keep_intermediates)
    report.upload = upload_report
    if keep_intermediates:
        report.intermediates = {RELOAD_TEXTURE: source, **report.intermediates}

    return download(final, 0), report
