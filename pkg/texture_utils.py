#!/usr/bin/env python3
"""
Texture utilities for the Canny shader emulator
Texel storage, precision quantization, clamped sampling and image upload
"""

import logging
import numbers
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

LOWP_STEP = 1.0 / 256.0
LOWP_MIN = -2.0
LOWP_MAX = 2.0 - LOWP_STEP  # 1.99609375
MEDIUMP_MAX = 65504.0
HIGHP_MAX = float(np.finfo(np.float32).max)


class InvalidInputError(ValueError):
    """Degenerate or malformed input"""


class InvalidValueError(ValueError):
    """A value that has no representation in the requested precision"""

    def __init__(self, message: str, coordinate: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.coordinate = coordinate


class Precision(str, Enum):
    LOWP = 'lowp'
    MEDIUMP = 'mediump'
    HIGHP = 'highp'

    @classmethod
    def parse(cls, name: Union[str, 'Precision']) -> 'Precision':
        try:
            return cls(str(name).lower() if not isinstance(name, cls) else name)
        except ValueError:
            raise InvalidInputError(f"Unknown precision: {name}")


class ImageLayout(str, Enum):
    GREY8 = 'grey8'
    RGB888 = 'rgb888'

    @property
    def channels(self) -> int:
        return 1 if self is ImageLayout.GREY8 else 3


@dataclass(frozen=True)
class ImageBuffer:
    width: int
    height: int
    layout: ImageLayout
    data: bytes

    def __post_init__(self):
        if self.width < 0 or self.height < 0:
            raise InvalidInputError(f"Negative image size {self.width}x{self.height}")
        expected = self.width * self.height * self.layout.channels
        if len(self.data) != expected:
            raise InvalidInputError(
                f"Image data has {len(self.data)} bytes, expected {expected} "
                f"for {self.width}x{self.height} {self.layout.value}"
            )

    @property
    def channels(self) -> int:
        return self.layout.channels

    def to_array(self) -> np.ndarray:
        """Pixel bytes as a (height, width, channels) uint8 array"""
        return np.frombuffer(self.data, dtype=np.uint8).reshape(
            self.height, self.width, self.channels)

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> 'ImageBuffer':
        pixels = np.asarray(pixels)
        if pixels.ndim == 2:
            pixels = pixels[:, :, np.newaxis]
        if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
            raise InvalidInputError(f"Cannot build an image from array of shape {pixels.shape}")
        layout = ImageLayout.GREY8 if pixels.shape[2] == 1 else ImageLayout.RGB888
        data = np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()
        return cls(int(pixels.shape[1]), int(pixels.shape[0]), layout, data)


def quantize_array(values, precision: Precision) -> np.ndarray:
    """
    Round values to the nearest representable value of a precision
    Overflow saturates to the extreme finite value; the result is float32
    """
    precision = Precision.parse(precision)
    v = np.asarray(values, dtype=np.float64)

    if precision is Precision.HIGHP:
        return np.clip(v, -HIGHP_MAX, HIGHP_MAX).astype(np.float32)

    if precision is Precision.MEDIUMP:
        # binary16 cast rounds half to even; NaN passes through clip untouched
        return np.clip(v, -MEDIUMP_MAX, MEDIUMP_MAX).astype(np.float16).astype(np.float32)

    if np.isnan(v).any():
        raise InvalidValueError("lowp has no NaN")
    scaled = v * 256.0
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return (np.clip(rounded, LOWP_MIN * 256.0, LOWP_MAX * 256.0) / 256.0).astype(np.float32)


def quantize(value: float, precision: Precision) -> float:
    """Quantize a single real value (see quantize_array)"""
    return float(quantize_array(value, precision))


@dataclass(frozen=True, eq=False)
class Texture2D:
    width: int
    height: int
    channels: int
    precision: Precision
    texels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInputError(f"Texture size must be at least 1x1, got {self.width}x{self.height}")
        if self.channels not in (1, 2, 3, 4):
            raise InvalidInputError(f"Unsupported channel count: {self.channels}")
        if self.texels.shape != (self.height, self.width, self.channels):
            raise InvalidInputError(
                f"Texel array shape {self.texels.shape} does not match "
                f"{self.height}x{self.width}x{self.channels}"
            )
        if self.texels.dtype != np.float32:
            raise InvalidInputError(f"Texels must be float32, got {self.texels.dtype}")
        self.texels.flags.writeable = False

    @classmethod
    def store(cls, values, precision: Precision) -> 'Texture2D':
        """Quantize (height, width[, channels]) values into a new texture"""
        precision = Precision.parse(precision)
        texels = quantize_array(values, precision)
        if texels.ndim == 2:
            texels = texels[:, :, np.newaxis]
        if texels.ndim != 3:
            raise InvalidInputError(f"Cannot store values of shape {texels.shape}")
        height, width, channels = texels.shape
        return cls(width, height, channels, precision, np.ascontiguousarray(texels))

    def channel(self, index: int) -> np.ndarray:
        return self.texels[:, :, index]


class ReadCounter:
    """Texel fetches made by one pass (or one worker of a pass)"""

    def __init__(self):
        self.count = 0

    def add(self, reads: int):
        self.count += reads


_active_counter: ContextVar[Optional[ReadCounter]] = ContextVar('active_read_counter', default=None)


@contextmanager
def counting_reads() -> Iterator[ReadCounter]:
    """Route sample_clamped fetches made in this context to a fresh counter"""
    counter = ReadCounter()
    token = _active_counter.set(counter)
    try:
        yield counter
    finally:
        _active_counter.reset(token)


def _clamp_coordinate(value, upper: int):
    if isinstance(value, numbers.Integral):
        return min(max(int(value), 0), upper)
    return np.clip(np.asarray(value, dtype=np.int64), 0, upper)


def sample_clamped(tex: Texture2D, x, y, channel: Optional[int] = None):
    """
    Fetch texels with clamp-to-edge addressing
    x and y may be integers or integer arrays (broadcast together); every
    coordinate is one read on the active counter. channel=None returns all
    channels of the texel.
    """
    if channel is not None and not 0 <= channel < tex.channels:
        raise InvalidInputError(f"Channel {channel} out of range for {tex.channels}-channel texture")

    xs = _clamp_coordinate(x, tex.width - 1)
    ys = _clamp_coordinate(y, tex.height - 1)

    counter = _active_counter.get()
    if counter is not None:
        counter.add(int(np.broadcast(xs, ys).size))

    if channel is None:
        return tex.texels[ys, xs]
    value = tex.texels[ys, xs, channel]
    if np.ndim(value) == 0:
        return float(value)
    return value


def upload(img: ImageBuffer, target_precision: Precision) -> Texture2D:
    """Map image bytes to [0,1] texels (v/255) stored at the target precision"""
    if img.width < 1 or img.height < 1:
        raise InvalidInputError(f"Cannot upload a {img.width}x{img.height} image")
    values = img.to_array().astype(np.float64) / 255.0
    return Texture2D.store(values, target_precision)


def download(tex: Texture2D, channel: Optional[int] = 0) -> ImageBuffer:
    """Map texels back to bytes via round(255 * clamp(v, 0, 1))"""
    if channel is None:
        values = tex.texels
    else:
        values = tex.texels[:, :, channel:channel + 1]
    clamped = np.clip(values.astype(np.float64), 0.0, 1.0)
    pixels = np.floor(clamped * 255.0 + 0.5).astype(np.uint8)
    return ImageBuffer.from_array(pixels)
