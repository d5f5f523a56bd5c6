#!/usr/bin/env python3
"""
Binary PNM (P5 greyscale / P6 RGB) reading and writing
"""

import logging
from pathlib import Path
from typing import Tuple, Union

from texture_utils import ImageBuffer, ImageLayout, InvalidInputError

logger = logging.getLogger(__name__)

_MAGIC = {b'P5': ImageLayout.GREY8, b'P6': ImageLayout.RGB888}
_WHITESPACE = b' \t\n\r\x0b\x0c'


class PnmFormatError(InvalidInputError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


def _skip_whitespace_and_comments(data: bytes, pos: int) -> int:
    while pos < len(data):
        if data[pos] == ord('#'):
            while pos < len(data) and data[pos] not in b'\n\r':
                pos += 1
        elif data[pos] in _WHITESPACE:
            pos += 1
        else:
            break
    return pos


def _read_header_int(data: bytes, pos: int, field: str) -> Tuple[int, int]:
    pos = _skip_whitespace_and_comments(data, pos)
    start = pos
    while pos < len(data) and data[pos:pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise PnmFormatError(f"expected {field}", start)
    if pos < len(data) and data[pos] not in _WHITESPACE and data[pos] != ord('#'):
        raise PnmFormatError(f"malformed {field}", pos)
    return int(data[start:pos]), pos


def parse_pnm(data: bytes) -> ImageBuffer:
    layout = _MAGIC.get(data[:2])
    if layout is None:
        raise PnmFormatError("not a PNM file", 0)

    width, pos = _read_header_int(data, 2, "width")
    height, pos = _read_header_int(data, pos, "height")
    maxval_offset = _skip_whitespace_and_comments(data, pos)
    maxval, pos = _read_header_int(data, pos, "maxval")
    if maxval != 255:
        raise PnmFormatError(f"unsupported maxval {maxval} (only 255)", maxval_offset)

    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise PnmFormatError("missing whitespace after maxval", pos)
    pos += 1

    expected = width * height * layout.channels
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise PnmFormatError(
            f"truncated data: {len(payload)} of {expected} raster bytes", pos + len(payload))
    if len(data) > pos + expected:
        logger.warning(f"Ignoring {len(data) - pos - expected} trailing bytes after PNM raster")

    return ImageBuffer(width, height, layout, bytes(payload))


def read_pnm(path: Union[str, Path]) -> ImageBuffer:
    data = Path(path).read_bytes()
    img = parse_pnm(data)
    logger.info(f"Read {path}: {img.width}x{img.height} {img.layout.value}")
    return img


def encode_pnm(img: ImageBuffer) -> bytes:
    magic = b'P5' if img.layout is ImageLayout.GREY8 else b'P6'
    header = magic + f"\n{img.width} {img.height}\n255\n".encode('ascii')
    return header + img.data


def write_pnm(path: Union[str, Path], img: ImageBuffer):
    Path(path).write_bytes(encode_pnm(img))
    logger.debug(f"Wrote {path}: {img.width}x{img.height} {img.layout.value}")
