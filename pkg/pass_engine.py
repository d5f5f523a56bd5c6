#!/usr/bin/env python3
"""
Render pass engine
Runs per-pixel fragment kernels over textures and collects per-pass
read counts and timings in the shape of a render-pass timing table
"""

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from stats_utils import fps_from_frame_times, mean_and_std
from texture_utils import (
    ImageBuffer,
    InvalidInputError,
    InvalidValueError,
    Precision,
    Texture2D,
    counting_reads,
    quantize_array,
    sample_clamped,
    upload,
)

logger = logging.getLogger(__name__)

RELOAD_TEXTURE = 'Reload texture'
REPORT_COLUMNS = ['pass', 'mean_ms', 'std_ms', 'reads_per_pixel']


class TimingMode(str, Enum):
    SERIALIZED = 'serialized'
    PIPELINED = 'pipelined'


class PassError(RuntimeError):
    def __init__(self, pass_name: str, cause: Exception):
        super().__init__(f"Pass '{pass_name}' failed: {cause}")
        self.pass_name = pass_name


class FragmentContext:
    """
    What a kernel body sees: the coordinates of its rows and its input textures
    x has shape (1, width) and y has shape (rows, 1) so offsets broadcast to the
    full block; every fetched coordinate counts as one texel read.
    """

    def __init__(self, textures: Dict[str, Texture2D], y0: int, y1: int, width: int):
        self.textures = textures
        self.x = np.arange(width, dtype=np.int64)[np.newaxis, :]
        self.y = np.arange(y0, y1, dtype=np.int64)[:, np.newaxis]
        self.shape = (y1 - y0, width)

    def fetch(self, role: str, dx: int = 0, dy: int = 0) -> np.ndarray:
        """All channels of the texel at a static offset: (rows, width, channels)"""
        return sample_clamped(self.textures[role], self.x + dx, self.y + dy)

    def fetch_at(self, role: str, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Dependent read at computed coordinates"""
        return sample_clamped(self.textures[role], xs, ys)


@dataclass(frozen=True)
class PassKernel:
    name: str
    inputs: Tuple[str, ...]
    output_channels: int
    output_precision: Precision
    body: Callable[[FragmentContext], Sequence[np.ndarray]]
    signed_channels: Tuple[int, ...] = ()


@dataclass
class PassReport:
    name: str
    texel_reads: int
    texel_writes: int
    mean_ms: Optional[float]
    std_ms: Optional[float]

    @property
    def reads_per_pixel(self) -> float:
        return self.texel_reads / self.texel_writes if self.texel_writes else 0.0

    def to_row(self) -> Dict[str, object]:
        rpp = self.reads_per_pixel
        return {
            'pass': self.name,
            'mean_ms': None if self.mean_ms is None else round(self.mean_ms, 4),
            'std_ms': None if self.std_ms is None else round(self.std_ms, 4),
            'reads_per_pixel': int(rpp) if float(rpp).is_integer() else round(rpp, 4),
        }


@dataclass
class PipelineReport:
    passes: List[PassReport]
    mode: TimingMode
    frame_ms: List[float]
    upload: Optional[PassReport] = None
    intermediates: Dict[str, Texture2D] = field(default_factory=dict)

    @property
    def fps(self) -> Tuple[float, float]:
        """Frames per second from un-serialized end-to-end runs"""
        return fps_from_frame_times(self.frame_ms)

    @property
    def pipeline_ms(self) -> float:
        return mean_and_std(self.frame_ms)[0]

    @property
    def serialized_total_ms(self) -> Optional[float]:
        """Sum of barrier-timed pass means: an upper bound on pipeline time"""
        if self.mode is not TimingMode.SERIALIZED:
            return None
        total = sum(p.mean_ms for p in self.passes)
        if self.upload is not None and self.upload.mean_ms is not None:
            total += self.upload.mean_ms
        return total

    def rows(self) -> List[Dict[str, object]]:
        reports = list(self.passes)
        if self.upload is not None:
            reports.append(self.upload)
        return [r.to_row() for r in reports]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=REPORT_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: '' if v is None else v for k, v in row.items()})
        return buffer.getvalue()

    def to_json(self) -> str:
        fps_mean, fps_std = self.fps
        serialized = self.serialized_total_ms
        return json.dumps({
            'passes': self.rows(),
            'frame': {
                'mode': self.mode.value,
                'pipeline_ms': round(self.pipeline_ms, 4),
                'fps_mean': round(fps_mean, 4),
                'fps_std': round(fps_std, 4),
                'serialized_total_ms': None if serialized is None else round(serialized, 4),
            },
        }, indent=2)


class PassEngine:
    """
    Executes fragment passes, optionally partitioning output rows across threads
    Kernels are pure and inputs immutable, so bands never interact; each band
    has its own read counter, merged after the barrier.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise InvalidInputError(f"workers must be at least 1, got {workers}")
        self.workers = workers
        self._executor: Optional[ThreadPoolExecutor] = None

    def _pool(self) -> ThreadPoolExecutor:
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.workers,
                                                thread_name_prefix='pass-worker')
            logger.debug(f"Started {self.workers} pass workers")
        return self._executor

    def close(self):
        if self._executor:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def _bands(self, height: int) -> List[Tuple[int, int]]:
        count = min(self.workers, height)
        edges = np.linspace(0, height, count + 1).astype(int)
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    @staticmethod
    def _run_band(kernel: PassKernel, textures: Dict[str, Texture2D],
                  y0: int, y1: int, width: int) -> Tuple[int, np.ndarray, int]:
        frag = FragmentContext(textures, y0, y1, width)
        with counting_reads() as counter:
            planes = kernel.body(frag)
        if len(planes) != kernel.output_channels:
            raise InvalidInputError(
                f"{kernel.name} produced {len(planes)} channels, expected {kernel.output_channels}")
        block = np.stack([np.broadcast_to(np.asarray(p, dtype=np.float32), frag.shape)
                          for p in planes], axis=-1)
        return y0, block, counter.count

    def run_pass(self, kernel: PassKernel, inputs: Dict[str, Texture2D],
                 width: int, height: int) -> Tuple[Texture2D, PassReport]:
        if width < 1 or height < 1:
            raise InvalidInputError(f"Cannot render a {width}x{height} pass")
        missing = [role for role in kernel.inputs if role not in inputs]
        if missing:
            raise InvalidInputError(f"{kernel.name} is missing inputs: {missing}")
        textures = {role: inputs[role] for role in kernel.inputs}
        for role, tex in textures.items():
            if (tex.width, tex.height) != (width, height):
                raise InvalidInputError(
                    f"{kernel.name} input '{role}' is {tex.width}x{tex.height}, pass is {width}x{height}")

        start = time.perf_counter()
        bands = self._bands(height)
        if len(bands) == 1:
            results = [self._run_band(kernel, textures, 0, height, width)]
        else:
            futures = [self._pool().submit(self._run_band, kernel, textures, y0, y1, width)
                       for y0, y1 in bands]
            results = [f.result() for f in futures]

        out = np.empty((height, width, kernel.output_channels), dtype=np.float32)
        reads = 0
        for y0, block, band_reads in results:
            out[y0:y0 + block.shape[0]] = block
            reads += band_reads

        if kernel.output_precision is Precision.LOWP:
            nan_at = np.argwhere(np.isnan(out))
            if len(nan_at):
                y, x = int(nan_at[0][0]), int(nan_at[0][1])
                raise InvalidValueError(f"{kernel.name} produced NaN at ({x}, {y}) for lowp output",
                                        coordinate=(x, y))

        texture = Texture2D(width, height, kernel.output_channels, kernel.output_precision,
                            quantize_array(out, kernel.output_precision))
        elapsed_ms = (time.perf_counter() - start) * 1000.0

        report = PassReport(kernel.name, reads, width * height, elapsed_ms, 0.0)
        logger.debug(f"{kernel.name}: {report.reads_per_pixel:g} reads/pixel, {elapsed_ms:.2f} ms")
        return texture, report

    def upload(self, img: ImageBuffer, precision: Precision,
               repetitions: int = 1) -> Tuple[Texture2D, PassReport]:
        """Timed texture reload: the cost of getting a captured frame into a texture"""
        if repetitions < 1:
            raise InvalidInputError(f"repetitions must be at least 1, got {repetitions}")
        times = []
        texture = None
        for _ in range(repetitions):
            start = time.perf_counter()
            texture = upload(img, precision)
            times.append((time.perf_counter() - start) * 1000.0)
        mean, std = mean_and_std(times)
        return texture, PassReport(RELOAD_TEXTURE, 0, img.width * img.height, mean, std)

    def execute(self, passes: Sequence[PassKernel], source: Texture2D,
                keep_intermediates: bool = False
                ) -> Tuple[Texture2D, List[PassReport], Dict[str, Texture2D]]:
        """
        One run of the pipeline; each pass reads the previous output ('prev')
        and may also read the original texture ('source')
        """
        previous = source
        reports = []
        intermediates = {}
        for kernel in passes:
            inputs = {'prev': previous, 'source': source}
            try:
                previous, report = self.run_pass(kernel, inputs, source.width, source.height)
            except Exception as e:
                raise PassError(kernel.name, e) from e
            reports.append(report)
            if keep_intermediates:
                intermediates[kernel.name] = previous
        return previous, reports, intermediates

    def run_pipeline(self, passes: Sequence[PassKernel], source: Texture2D,
                     repetitions: int = 10,
                     mode: TimingMode = TimingMode.SERIALIZED,
                     keep_intermediates: bool = False) -> Tuple[Texture2D, PipelineReport]:
        if not passes:
            raise InvalidInputError("A pipeline needs at least one pass")
        if repetitions < 1:
            raise InvalidInputError(f"repetitions must be at least 1, got {repetitions}")
        mode = TimingMode(mode)

        pass_times: List[List[float]] = [[] for _ in passes]
        first = None
        if mode is TimingMode.SERIALIZED:
            # run_pass returns only after every band has finished: the barrier
            for _ in range(repetitions):
                result = self.execute(passes, source, keep_intermediates and first is None)
                for i, report in enumerate(result[1]):
                    pass_times[i].append(report.mean_ms)
                if first is None:
                    first = result

        frame_ms = []
        for _ in range(repetitions):
            start = time.perf_counter()
            result = self.execute(passes, source, keep_intermediates and first is None)
            frame_ms.append((time.perf_counter() - start) * 1000.0)
            if first is None:
                first = result

        final, first_reports, intermediates = first
        reports = []
        for i, report in enumerate(first_reports):
            if mode is TimingMode.SERIALIZED:
                mean, std = mean_and_std(pass_times[i])
            else:
                mean, std = None, None
            reports.append(PassReport(report.name, report.texel_reads, report.texel_writes, mean, std))

        pipeline = PipelineReport(reports, mode, frame_ms, intermediates=intermediates)
        fps_mean, _ = pipeline.fps
        logger.info(f"Pipeline of {len(passes)} passes on {source.width}x{source.height}: "
                    f"{pipeline.pipeline_ms:.2f} ms/frame ({fps_mean:.1f} fps, {mode.value})")
        return final, pipeline
