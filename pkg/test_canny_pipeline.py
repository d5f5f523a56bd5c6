#!/usr/bin/env python3

import logging
import math
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from canny_pipeline import (
    GAUSSIAN_WEIGHTS,
    CannyParams,
    Direction,
    MagnitudeMode,
    build_canny_passes,
    classify_direction,
    classify_directions,
    detect_edges,
    gaussian_1d,
    gradient_pass,
    nms_threshold_pass,
    rgb_to_grey,
    smoothstep,
    weak_pixel_pass,
)
from pass_engine import RELOAD_TEXTURE, PassEngine, TimingMode
from reference_oracle import convolve2d_reference
from synthetic_utils import disk, vertical_step
from texture_utils import ImageBuffer, InvalidInputError, Precision, Texture2D

HIGHP = Precision.HIGHP

logger = logging.getLogger(__name__)


def texture(values, precision=HIGHP):
    return Texture2D.store(np.asarray(values, dtype=np.float64), precision)


class TestCannyParams:
    def test_defaults(self):
        params = CannyParams()
        assert (params.kernel_size, params.low_threshold, params.high_threshold) == (3, 0.1, 0.25)
        assert params.magnitude_mode is MagnitudeMode.EXACT

    @pytest.mark.parametrize("kwargs", [
        {'kernel_size': 4},
        {'low_threshold': 0.3, 'high_threshold': 0.2},
        {'low_threshold': 0.2, 'high_threshold': 0.2},
        {'low_threshold': 0.0},
        {'high_threshold': 1.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            CannyParams(**kwargs)

    def test_unusual_ratio_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            CannyParams(low_threshold=0.05, high_threshold=0.5)
        assert "ratio" in caplog.text


class TestRgbToGrey:
    @pytest.mark.parametrize("rgb,grey", [
        ((1.0, 1.0, 1.0), 1.0),
        ((0.0, 0.0, 0.0), 0.0),
        ((1.0, 0.0, 0.0), 0.299),
    ])
    def test_luma(self, rgb, grey):
        out = rgb_to_grey(texture([[rgb]]), HIGHP)
        assert out.texels[0, 0, 0] == pytest.approx(grey, abs=1e-6)

    def test_mediump_store(self):
        out = rgb_to_grey(texture([[(1.0, 0.0, 0.0)]]))
        assert out.precision is Precision.MEDIUMP
        assert out.texels[0, 0, 0] == pytest.approx(0.299, rel=2.0 ** -11)

    def test_wrong_channel_count(self):
        with pytest.raises(InvalidInputError):
            rgb_to_grey(texture([[0.5]]))


class TestGaussian:
    @pytest.mark.parametrize("size", [3, 5])
    @pytest.mark.parametrize("axis", ['x', 'y'])
    def test_constant_preserved(self, size, axis):
        out = gaussian_1d(texture(np.full((7, 9), 0.375)), axis, size)
        assert np.all(out.texels == 0.375)

    def test_impulse_response(self):
        row = np.zeros((1, 9))
        row[0, 4] = 1.0
        out = gaussian_1d(texture(row), 'x', 3, HIGHP)
        np.testing.assert_array_equal(out.channel(0)[0], [0, 0, 0, 0.25, 0.5, 0.25, 0, 0, 0])

    def test_impulse_at_border_uses_clamped_sample(self):
        row = np.zeros((1, 6))
        row[0, 0] = 1.0
        out = gaussian_1d(texture(row), 'x', 3, HIGHP)
        assert out.texels[0, 0, 0] == 0.75

    def test_bad_kernel_size(self):
        with pytest.raises(InvalidInputError):
            gaussian_1d(texture(np.zeros((3, 3))), 'x', 7)

    @pytest.mark.parametrize("size", [3, 5])
    def test_separable_matches_direct_convolution(self, size):
        rng = np.random.default_rng(size)
        weights = np.array(GAUSSIAN_WEIGHTS[size], dtype=np.float32)
        for _ in range(50):
            src = texture(rng.random((32, 32)))
            smoothed = gaussian_1d(gaussian_1d(src, 'x', size, HIGHP), 'y', size, HIGHP)
            direct = convolve2d_reference(src.channel(0), np.outer(weights, weights))
            np.testing.assert_allclose(smoothed.channel(0), direct, rtol=0, atol=1e-6)


def _off_boundary(gx, gy, margin=1e-6):
    angle = np.arctan2(gy, gx)
    eighth = math.pi / 4
    distance = np.abs((angle - math.pi / 8) / eighth - np.round((angle - math.pi / 8) / eighth)) * eighth
    return distance >= margin


class TestClassifyDirection:
    @pytest.mark.parametrize("g,expected", [
        ((1.0, 0.0), (1, 0)),
        ((1.0, 1.0), (1, 1)),
        ((-0.342, 0.940), (0, 1)),
        ((0.0, 0.0), (1, 0)),
        ((0.0, -2.0), (0, -1)),
        ((-3.0, -3.0), (-1, -1)),
        ((1e-30, 1e-30), (1, 1)),
    ])
    def test_examples(self, g, expected):
        assert classify_direction(*g) == Direction(*expected)

    def test_sector_boundaries_go_counterclockwise(self):
        for k in range(8):
            boundary = math.radians(22.5 + 45 * k)
            # nudge by far less than a degree but far more than float32 noise
            gx, gy = math.cos(boundary + 1e-4), math.sin(boundary + 1e-4)
            expected = round(math.cos(math.radians(45 * (k + 1)))), round(math.sin(math.radians(45 * (k + 1))))
            assert classify_direction(gx, gy) == Direction(*expected)

    def test_no_negative_zero(self):
        dx, dy = classify_directions(np.float32([-1.0, 0.0]), np.float32([0.0, -1.0]))
        assert not np.any(np.signbit(dx[dx == 0]))
        assert not np.any(np.signbit(dy[dy == 0]))

    def test_antisymmetric_off_boundary(self):
        rng = np.random.default_rng(11)
        gx = rng.normal(size=100_000).astype(np.float32)
        gy = rng.normal(size=100_000).astype(np.float32)
        keep = _off_boundary(gx.astype(np.float64), gy.astype(np.float64))
        dx, dy = classify_directions(gx[keep], gy[keep])
        ndx, ndy = classify_directions(-gx[keep], -gy[keep])
        np.testing.assert_array_equal(ndx, -dx + 0.0)
        np.testing.assert_array_equal(ndy, -dy + 0.0)

    def test_never_zero_direction(self):
        rng = np.random.default_rng(12)
        dx, dy = classify_directions(rng.normal(size=10_000), rng.normal(size=10_000))
        assert np.all((dx != 0) | (dy != 0))


def vertical_step_texture(width=64, height=64, column=32):
    values = np.zeros((height, width))
    values[:, column:] = 1.0
    return texture(values)


class TestGradient:
    def test_constant_image(self):
        grad = gradient_pass(texture(np.full((6, 6), 0.5)))
        assert np.all(grad.channel(0) == 0.0)

    def test_ideal_vertical_step(self):
        grad = gradient_pass(vertical_step_texture(8, 4, 4), precision=HIGHP)
        assert grad.texels[2, 3, 0] == 1.0
        assert tuple(grad.texels[2, 3, 1:]) == (1.0, 0.0)

    def test_manhattan_magnitude(self):
        values = np.fromfunction(lambda y, x: (x + y >= 8).astype(float), (12, 12))
        exact = gradient_pass(texture(values), MagnitudeMode.EXACT, HIGHP)
        manhattan = gradient_pass(texture(values), MagnitudeMode.MANHATTAN, HIGHP)
        assert manhattan.texels[4, 4, 0] == pytest.approx(exact.texels[4, 4, 0] * math.sqrt(2), rel=1e-6)

    def test_diagonal_step_direction(self):
        values = np.fromfunction(lambda y, x: (x + y >= 32).astype(float), (32, 32))
        smoothed = gaussian_1d(gaussian_1d(texture(values), 'x', 3, HIGHP), 'y', 3, HIGHP)
        grad = gradient_pass(smoothed, precision=HIGHP)
        interior = grad.texels[3:-3, 3:-3]
        edge = interior[..., 0] > 0
        assert edge.any()
        assert np.all(interior[edge][:, 1] == 1.0)
        assert np.all(interior[edge][:, 2] == 1.0)

    def test_signed_directions_stored(self):
        values = np.zeros((6, 6))
        values[:, :3] = 1.0
        grad = gradient_pass(texture(values))
        assert grad.texels[2, 2, 1] == -1.0

    def test_ranges(self):
        rng = np.random.default_rng(13)
        grad = gradient_pass(texture(rng.random((40, 40))), precision=HIGHP)
        assert np.all(grad.channel(0) >= 0)
        assert np.all(grad.channel(0) <= np.float32(math.sqrt(2)))
        assert set(np.unique(grad.texels[..., 1:])) <= {-1.0, 0.0, 1.0}

    def test_rotation_coherence(self):
        grad = gradient_pass(vertical_step_texture(16, 16, 8), precision=HIGHP)
        rotated = gradient_pass(texture(vertical_step_texture(16, 16, 8).channel(0).T), precision=HIGHP)
        edge = grad.channel(0) > 0
        assert np.all(grad.texels[edge][:, 1:] == (1.0, 0.0))
        assert np.all(rotated.texels[edge.T][:, 1:] == (0.0, 1.0))


def nms_row(m, ahead, behind, low=0.2, high=0.4):
    """Strength of the centre pixel of a 3x1 gradient texture pointing +x"""
    grad = texture([[(behind, 1.0, 0.0), (m, 1.0, 0.0), (ahead, 1.0, 0.0)]])
    return float(nms_threshold_pass(grad, low, high, HIGHP).texels[0, 1, 0])


class TestNmsThreshold:
    def test_strong_survivor(self):
        assert nms_row(0.5, 0.3, 0.2) == 1.0

    def test_midway_between_thresholds(self):
        assert nms_row(0.3, 0.1, 0.1) == pytest.approx(0.5, abs=1e-6)

    def test_larger_neighbour_suppresses(self):
        assert nms_row(0.5, 0.6, 0.2) == 0.0

    def test_ties_keep(self):
        assert nms_row(0.5, 0.5, 0.5) == 1.0

    def test_low_not_below_high(self):
        grad = texture([[(0.5, 1.0, 0.0)]])
        with pytest.raises(InvalidInputError):
            nms_threshold_pass(grad, 0.4, 0.4)

    def test_smoothstep(self):
        x = np.float32([0.0, 0.1, 0.175, 0.25, 0.9])
        out = smoothstep(np.float32(0.1), np.float32(0.25), x)
        np.testing.assert_allclose(out, [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-6)


def weak_centre(centre, others):
    values = np.zeros((3, 3))
    values.flat[:len(others)] = others
    values[1, 1] = centre
    return float(weak_pixel_pass(texture(values), HIGHP).texels[1, 1, 0])


class TestWeakPixels:
    def test_strong_pixel_in_dense_neighbourhood(self):
        assert weak_centre(1.0, [1.0, 1.0]) == 1.0

    def test_below_support(self):
        assert weak_centre(0.5, [1.4]) == 0.0

    def test_support_boundary_is_inclusive(self):
        assert weak_centre(0.5, [1.0, 0.5]) == 0.5

    def test_isolated_strong_pixel_removed(self):
        assert weak_centre(1.0, []) == 0.0


class TestDetectEdges:
    def _grey(self, width, height, value):
        return ImageBuffer.from_array(np.full((height, width), value, dtype=np.uint8))

    @pytest.mark.parametrize("value", [0, 90])
    def test_flat_images_have_no_edges(self, value):
        edges, _ = detect_edges(self._grey(24, 16, value))
        assert edges.data == bytes(24 * 16)

    def test_vertical_step_band_of_width_two(self):
        edges, report = detect_edges(vertical_step(64, 64, 32))
        pixels = edges.to_array()[..., 0]
        assert np.all(pixels[:, 31:33] == 255)
        assert np.all(pixels[:, :31] == 0)
        assert np.all(pixels[:, 33:] == 0)
        assert len(report.passes) == 5

    def test_rotated_step_gives_transposed_edges(self):
        step = vertical_step(64, 64, 32)
        rotated = ImageBuffer.from_array(step.to_array()[..., 0].T)
        edges, _ = detect_edges(step)
        rotated_edges, _ = detect_edges(rotated)
        np.testing.assert_array_equal(rotated_edges.to_array()[..., 0], edges.to_array()[..., 0].T)

    @pytest.mark.parametrize("turns", [1, 2, 3])
    def test_quarter_turned_step_gives_turned_edges(self, turns):
        step = vertical_step(64, 48, 32)
        turned = ImageBuffer.from_array(np.ascontiguousarray(np.rot90(step.to_array()[..., 0], turns)))
        edges, _ = detect_edges(step)
        turned_edges, _ = detect_edges(turned)
        expected = np.rot90(edges.to_array()[..., 0], turns)
        assert (turned_edges.width, turned_edges.height) == expected.shape[::-1]
        np.testing.assert_array_equal(turned_edges.to_array()[..., 0], expected)
        assert np.count_nonzero(expected) == 2 * 48

    def test_vga_frame_timing(self):
        img = disk(640, 480, radius=150.0)
        with PassEngine() as engine:
            start = time.perf_counter()
            edges, report = detect_edges(img, engine=engine)
            elapsed_ms = (time.perf_counter() - start) * 1000.0
        logger.info(f"640x480 grey frame: {elapsed_ms:.1f} ms end to end, "
                    f"{report.pipeline_ms:.1f} ms in passes")
        assert (edges.width, edges.height) == (640, 480)
        assert np.count_nonzero(edges.to_array()) > 0

    def test_rgb_runs_greyscale_pass(self):
        edges, report = detect_edges(vertical_step(32, 16, rgb=True))
        assert [p.name for p in report.passes][0] == 'Greyscale'
        assert len(report.passes) == 6
        assert (edges.width, edges.height, edges.channels) == (32, 16, 1)

    @pytest.mark.parametrize("precision", list(Precision))
    def test_strengths_in_unit_range(self, precision):
        rng = np.random.default_rng(14)
        img = ImageBuffer.from_array(rng.integers(0, 256, (24, 24), dtype=np.uint8))
        _, report = detect_edges(img, precision=precision, keep_intermediates=True)
        for name in ('Non-max Sup', 'Weak Pixels'):
            strengths = report.intermediates[name].channel(0)
            assert np.all((strengths >= 0) & (strengths <= 1))

    def test_intermediates_start_with_source(self):
        _, report = detect_edges(vertical_step(16, 16, rgb=True), keep_intermediates=True)
        assert list(report.intermediates) == [RELOAD_TEXTURE, 'Greyscale', 'Gaussian X', 'Gaussian Y',
                                              'Gradient', 'Non-max Sup', 'Weak Pixels']

    def test_deterministic_across_workers(self):
        img = vertical_step(40, 30, 17, rgb=True)
        with PassEngine(4) as engine:
            parallel, _ = detect_edges(img, engine=engine)
        serial, _ = detect_edges(img)
        assert parallel.data == serial.data

    def test_serialized_mode_report(self):
        _, report = detect_edges(vertical_step(16, 16), repetitions=3, mode=TimingMode.SERIALIZED)
        assert report.upload is not None
        assert all(p.mean_ms is not None for p in report.passes)

    def test_kernel_five(self):
        passes = build_canny_passes(CannyParams(kernel_size=5), rgb_input=False)
        assert [p.name for p in passes][:2] == ['Gaussian X', 'Gaussian Y']
        edges, report = detect_edges(vertical_step(64, 64, 32), CannyParams(kernel_size=5))
        assert report.passes[0].reads_per_pixel == 5
        assert np.any(edges.to_array() > 0)
