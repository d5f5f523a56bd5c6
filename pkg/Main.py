#!/usr/bin/env python3
"""
Main Canny Shader Emulator Entry Point
Unified interface for detection, benchmarking, oracle comparison, offload
estimates, pass dumps, synthetic images and stored benchmark history
"""

import os
import sys
import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

# Add current directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from canny_pipeline import (
    GRADIENT,
    NON_MAX_SUP,
    WEAK_PIXELS,
    CannyParams,
    MagnitudeMode,
    build_canny_passes,
    detect_edges,
)
from config_utils import get_config, load_config
from db_utils import DatabaseManager, check_database
from offload_model import (
    builtin_profiles,
    estimate_frame_latency,
    frame_bytes_for,
    get_profile,
    LinkProfile,
)
from pass_engine import PassEngine, PassError, TimingMode
from pnm_utils import read_pnm, write_pnm
from reference_oracle import classic_canny, grey_from_image
from run_bench import BenchConfig, BenchRunner
from stats_utils import precision_recall_f1
from synthetic_utils import SHAPES, make_shape
from texture_utils import ImageBuffer, ImageLayout, InvalidInputError, Precision, Texture2D

# Configure logging
logging.basicConfig(
    level=get_config('log_level').upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2


def params_from_args(args) -> CannyParams:
    return CannyParams(
        kernel_size=args.kernel,
        low_threshold=args.low,
        high_threshold=args.high,
        magnitude_mode=MagnitudeMode(args.magnitude),
    )


def cmd_detect(args) -> int:
    """Run the pipeline once and write the P5 edge map"""
    img = read_pnm(args.input)
    params = params_from_args(args)
    with PassEngine(args.workers) as engine:
        edges, report = detect_edges(img, params, Precision.parse(args.precision), engine)
    write_pnm(args.output, edges)

    total_ms = report.pipeline_ms + (report.upload.mean_ms if report.upload else 0.0)
    print(f"{img.width}x{img.height}, {len(report.passes)} passes, {total_ms:.2f} ms")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = BenchConfig(
        input=args.input,
        frames=args.frames,
        report_format=args.report,
        mode=TimingMode(args.mode),
        params=params_from_args(args),
        precision=Precision.parse(args.precision),
        workers=args.workers,
        output=args.out,
        db=args.db or None,
        device=args.device,
        baseline=args.baseline,
    )
    runner = BenchRunner(config)
    result = runner.run()
    rendered = result.render()

    if config.output:
        Path(config.output).write_text(rendered)
        logger.info(f"Wrote {config.report_format} report to {config.output}")
        print(runner.generate_summary_report(result))
    else:
        print(rendered, end='' if rendered.endswith('\n') else '\n')
        # stdout carries only the report
        for line in runner.frame_rate_lines(result):
            print(line, file=sys.stderr)
    return EXIT_OK


def stage_counts(strength: np.ndarray, kept: np.ndarray, magnitude: np.ndarray) -> Dict[str, int]:
    """Strong, weak and suppressed pixels from the Non-max Sup and Weak Pixels outputs"""
    strong = strength >= 1.0
    weak = (strength > 0.0) & ~strong
    return {
        'strong': int(np.count_nonzero(strong)),
        'weak': int(np.count_nonzero(weak)),
        'weak_kept': int(np.count_nonzero(weak & (kept > 0.0))),
        'suppressed': int(np.count_nonzero((magnitude > 0.0) & (strength <= 0.0))),
    }


def cmd_compare(args) -> int:
    """Similarity of pipeline edges against the reference detector"""
    img = read_pnm(args.input)
    params = params_from_args(args)
    with PassEngine(args.workers) as engine:
        _, report = detect_edges(img, params, Precision.parse(args.precision), engine,
                                 keep_intermediates=True)

    stages = report.intermediates
    final = stages[WEAK_PIXELS].channel(0)
    reference = classic_canny(grey_from_image(img), params)
    scores = precision_recall_f1(final > 0.0, reference.bits)
    counts = stage_counts(stages[NON_MAX_SUP].channel(0), final, stages[GRADIENT].channel(0))

    print(f"Pipeline vs reference on {img.width}x{img.height} ({args.precision})")
    print("=" * 40)
    print(f"Precision:  {scores['precision']:.4f}")
    print(f"Recall:     {scores['recall']:.4f}")
    print(f"F1:         {scores['f1']:.4f}")
    if scores['predicted'] == 0 and scores['truth'] == 0:
        print("  (no edges in either map: scored 1.0 by convention)")
    print(f"Edges:      {scores['predicted']} pipeline, {scores['truth']} reference, "
          f"{scores['true_positives']} shared")
    print(f"Strong:     {counts['strong']}")
    print(f"Weak:       {counts['weak']} ({counts['weak_kept']} kept)")
    print(f"Suppressed: {counts['suppressed']}")
    return EXIT_OK


def offload_links(args) -> List[LinkProfile]:
    if args.link:
        profiles = [get_profile(args.link)]
    elif args.uplink is not None and args.downlink is not None:
        return [LinkProfile('custom', args.uplink, args.downlink, args.rtt or 0.0)]
    else:
        profiles = builtin_profiles()
    return [p.with_overrides(args.uplink, args.downlink, args.rtt) for p in profiles]


def cmd_offload(args) -> int:
    if args.frame_bytes is not None:
        frame_bytes = args.frame_bytes
        frame_desc = f"{frame_bytes} B"
    else:
        layout = ImageLayout(args.layout)
        frame_bytes = frame_bytes_for(args.width, args.height, layout)
        frame_desc = f"{args.width}x{args.height} {layout.value}, {frame_bytes} B"

    print(f"Offload estimate per frame ({frame_desc} up, {args.result_bytes} B down)")
    print(f"{'Link':<12}{'Upload ms':>12}{'Result ms':>12}{'RTT ms':>10}{'Total ms':>12}{'Max fps':>10}")
    for link in offload_links(args):
        estimate = estimate_frame_latency(frame_bytes, args.result_bytes, link)
        print(f"{link.name:<12}{estimate.upload_ms:>12.1f}{estimate.result_download_ms:>12.1f}"
              f"{estimate.rtt_ms:>10.1f}{estimate.total_ms:>12.1f}{estimate.max_fps:>10.2f}")
    return EXIT_OK


def dump_panel(tex: Texture2D, signed_channels=()) -> ImageBuffer:
    """One grey image with the texture's channels side by side"""
    panels = []
    for c in range(tex.channels):
        values = tex.channel(c).astype(np.float64)
        if c in signed_channels:
            values = (values + 1.0) / 2.0
        panels.append(np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8))
    return ImageBuffer.from_array(np.hstack(panels))


def stage_filename(index: int, name: str) -> str:
    return f"{index:02d}_{name.lower().replace(' ', '_').replace('-', '')}.pgm"


def cmd_dump(args) -> int:
    """Write every stage's texture as a P5 file, upload echo first"""
    img = read_pnm(args.input)
    params = params_from_args(args)
    precision = Precision.parse(args.precision)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    with PassEngine(args.workers) as engine:
        _, report = detect_edges(img, params, precision, engine, keep_intermediates=True)
    signed = {k.name: k.signed_channels
              for k in build_canny_passes(params, img.layout is ImageLayout.RGB888, precision)}

    for index, (name, tex) in enumerate(report.intermediates.items()):
        path = outdir / stage_filename(index, name)
        write_pnm(path, dump_panel(tex, signed.get(name, ())))
        print(f"{name:<16} {tex.channels} ch -> {path}")
    return EXIT_OK


def cmd_synth(args) -> int:
    img = make_shape(args.shape, args.size, rgb=args.rgb)
    write_pnm(args.output, img)
    print(f"{args.shape} {img.width}x{img.height} {img.layout.value} -> {args.output}")
    return EXIT_OK


def cmd_history(args) -> int:
    if not args.db:
        raise InvalidInputError("No database given (use --db or CANNY_DB)")
    db_ready, db_message = check_database(args.db)
    if not db_ready:
        raise InvalidInputError(f"{db_message}: {args.db}")

    with DatabaseManager(args.db) as db:
        if args.run is not None:
            rows = db.get_pass_times(args.run)
            if not rows:
                raise InvalidInputError(f"No stored run {args.run}")
            print(f"Run {args.run}")
            print(f"{'Operation':<16}{'Time (ms)':>20}{'Reads/px':>10}")
            for row in rows:
                timing = 'n/a' if row['mean_ms'] is None else f"{row['mean_ms']:.2f} ± {row['std_ms']:.2f}"
                print(f"{row['pass']:<16}{timing:>20}{row['reads_per_pixel']:>10g}")
            return EXIT_OK

        runs = db.get_runs(args.limit, args.device or None)
        print(f"Stored runs: {db.get_run_count()}")
        for run in runs:
            print(f"#{run['id']:<4} {run['ts_utc'][:19]}  {run['device']:<10} "
                  f"{run['width']}x{run['height']} {run['layout']:<6} k{run['kernel_size']} "
                  f"{run['precision']:<7} {run['mode']:<10} "
                  f"{run['fps_mean']:.1f} ± {run['fps_std']:.1f} fps")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    config = load_config()

    canny = argparse.ArgumentParser(add_help=False)
    group = canny.add_argument_group('detector parameters')
    group.add_argument('--kernel', type=int, choices=(3, 5), default=int(config['kernel']),
                       help='Gaussian kernel size (default: %(default)s)')
    group.add_argument('--low', type=float, default=float(config['low']),
                       help='Low threshold (default: %(default)s)')
    group.add_argument('--high', type=float, default=float(config['high']),
                       help='High threshold (default: %(default)s)')
    group.add_argument('--magnitude', choices=[m.value for m in MagnitudeMode], default=config['magnitude'],
                       help='Gradient magnitude formula (default: %(default)s)')
    group.add_argument('--precision', choices=[p.value for p in Precision], default=config['precision'],
                       help='Texture storage precision (default: %(default)s)')
    group.add_argument('--workers', type=int, default=int(config['workers']),
                       help='Row bands rendered in parallel (default: %(default)s)')

    parser = argparse.ArgumentParser(
        description="Canny Shader Emulator - condition-free edge detection in render passes"
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('detect', parents=[canny], help='Write the edge map of a PNM image')
    p.add_argument('input', help='P5 or P6 input image')
    p.add_argument('output', help='P5 edge map to write')
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser('bench', parents=[canny], help='Per-pass timing report')
    p.add_argument('input', help='P5 or P6 input image')
    p.add_argument('--frames', type=int, default=int(config['frames']),
                   help='Repetitions per measurement (default: %(default)s)')
    p.add_argument('--mode', choices=[m.value for m in TimingMode], default=config['mode'],
                   help='Per-pass barriers or free-running passes (default: %(default)s)')
    p.add_argument('--report', choices=('csv', 'json'), default=config['report'],
                   help='Report format (default: %(default)s)')
    p.add_argument('--out', help='Write the report here instead of stdout')
    p.add_argument('--db', default=config['db'], help='Store the run in this database')
    p.add_argument('--device', default=config['device'],
                   help='Device label for stored runs (default: %(default)s)')
    p.add_argument('--baseline', action='store_true', help='Also time the reference detector')
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('compare', parents=[canny], help='Precision, recall and F1 against the reference detector')
    p.add_argument('input', help='P5 or P6 input image')
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser('offload', help='Per-frame latency of processing off the device')
    p.add_argument('--link', help=f"Profile ({', '.join(lp.name for lp in builtin_profiles())}); all when omitted")
    p.add_argument('--frame-bytes', type=int, help='Frame size in bytes')
    p.add_argument('--width', type=int, default=640, help='Frame width (default: %(default)s)')
    p.add_argument('--height', type=int, default=480, help='Frame height (default: %(default)s)')
    p.add_argument('--layout', choices=[l.value for l in ImageLayout], default=ImageLayout.GREY8.value,
                   help='Frame layout (default: %(default)s)')
    p.add_argument('--result-bytes', type=int, default=0, help='Result size in bytes (default: %(default)s)')
    p.add_argument('--uplink', type=float, help='Uplink rate override, bits per second')
    p.add_argument('--downlink', type=float, help='Downlink rate override, bits per second')
    p.add_argument('--rtt', type=float, help='Round trip time override, milliseconds')
    p.set_defaults(func=cmd_offload)

    p = sub.add_parser('dump', parents=[canny], help='Write every pass output as P5')
    p.add_argument('input', help='P5 or P6 input image')
    p.add_argument('outdir', help='Directory for the stage images')
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser('synth', help='Write a synthetic test image')
    p.add_argument('shape', choices=SHAPES)
    p.add_argument('output', help='PNM file to write')
    p.add_argument('--size', type=int, default=128, help='Width and height (default: %(default)s)')
    p.add_argument('--rgb', action='store_true', help='Write P6 instead of P5')
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('history', help='List stored benchmark runs')
    p.add_argument('--db', default=config['db'], help='Benchmark database')
    p.add_argument('--device', help='Only runs from this device')
    p.add_argument('--run', type=int, help='Show the pass rows of one run')
    p.add_argument('--limit', type=int, default=20, help='Runs to list (default: %(default)s)')
    p.set_defaults(func=cmd_history)

    return parser


def is_input_error(error: Exception) -> bool:
    if isinstance(error, PassError):
        error = error.__cause__
    return isinstance(error, (InvalidInputError, OSError))


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("\nStopped by user.")
        return EXIT_INTERNAL
    except Exception as e:
        if is_input_error(e):
            logger.error(f"{args.command}: {e}")
            print(f"Error: {e}", file=sys.stderr)
            return EXIT_INPUT
        logger.exception(f"{args.command} failed")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
