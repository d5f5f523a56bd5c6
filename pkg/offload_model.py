#!/usr/bin/env python3
"""
Off-device processing latency model
Pure transport arithmetic: upload a frame, download the result, pay one
round trip. One frame in flight at a time.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional

from texture_utils import ImageLayout, InvalidInputError

logger = logging.getLogger(__name__)

KILO = 1_000
MEGA = 1_000_000


@dataclass(frozen=True)
class LinkProfile:
    name: str
    uplink: float    # bits/second
    downlink: float  # bits/second
    rtt: float = 0.0  # milliseconds

    def __post_init__(self):
        if self.uplink <= 0 or self.downlink <= 0:
            raise InvalidInputError(f"Link rates must be positive ({self.name}: "
                                    f"up={self.uplink}, down={self.downlink})")
        if self.rtt < 0:
            raise InvalidInputError(f"Round trip time must be nonnegative ({self.name}: {self.rtt})")

    def with_overrides(self, uplink: Optional[float] = None, downlink: Optional[float] = None,
                       rtt: Optional[float] = None) -> 'LinkProfile':
        return replace(
            self,
            uplink=self.uplink if uplink is None else uplink,
            downlink=self.downlink if downlink is None else downlink,
            rtt=self.rtt if rtt is None else rtt,
        )


@dataclass(frozen=True)
class OffloadEstimate:
    link: str
    upload_ms: float
    result_download_ms: float
    rtt_ms: float

    @property
    def total_ms(self) -> float:
        return self.upload_ms + self.result_download_ms + self.rtt_ms

    @property
    def max_fps(self) -> float:
        total = self.total_ms
        return 1000.0 / total if total > 0 else float('inf')


def builtin_profiles() -> List[LinkProfile]:
    """Measured Bluetooth, typical 3G and promised LTE rates; Wi-Fi has no quoted figure"""
    return [
        LinkProfile('bluetooth', uplink=430 * KILO, downlink=950 * KILO, rtt=0.0),
        LinkProfile('3g', uplink=150 * KILO, downlink=2 * MEGA, rtt=0.0),
        LinkProfile('lte', uplink=50 * MEGA, downlink=100 * MEGA, rtt=10.0),
    ]


def get_profile(name: str) -> LinkProfile:
    for profile in builtin_profiles():
        if profile.name == name.lower():
            return profile
    known = ', '.join(p.name for p in builtin_profiles())
    raise InvalidInputError(f"Unknown link profile {name!r} (known: {known})")


def frame_bytes_for(width: int, height: int, layout: ImageLayout = ImageLayout.GREY8) -> int:
    if width < 0 or height < 0:
        raise InvalidInputError(f"Negative frame size {width}x{height}")
    return width * height * ImageLayout(layout).channels


def estimate_frame_latency(frame_bytes: int, result_bytes: int, link: LinkProfile) -> OffloadEstimate:
    if frame_bytes < 0 or result_bytes < 0:
        raise InvalidInputError(f"Byte counts must be nonnegative, got frame={frame_bytes} result={result_bytes}")
    estimate = OffloadEstimate(
        link=link.name,
        upload_ms=8000.0 * frame_bytes / link.uplink,
        result_download_ms=8000.0 * result_bytes / link.downlink,
        rtt_ms=float(link.rtt),
    )
    logger.debug(f"{link.name}: {frame_bytes} B up, {result_bytes} B down -> {estimate.total_ms:.1f} ms")
    return estimate
