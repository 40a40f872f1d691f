#!/usr/bin/env python3
"""
Command-line entry point for trajectory gap reconstruction.

Subcommands:
    ingest       NGSIM trajectory file -> pair files + extraction summary
    scan2traj    scan file (or synthetic scans) -> headway series file
    experiment   synthetic-gap experiment over pair files
    reconstruct  fill the real gaps of one pair file
    report       re-summarize an existing per_gap.csv
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import pandas as pd
import yaml

from config_loader import RunConfig
from errors import TrajGapError
from evaluation import EvaluationReport, read_per_gap
from experiment_runner import load_pairs, run_experiment
from ngsim_ingest import extract_pairs, parse_ngsim_frame
from pair_io import has_positions, read_headway_file, read_pair_file, write_headway_file, write_pair_file
from reconstruction import BLEND_SCHEDULES, fill_pair, reconstruct_headway, reconstruct_pair
from scan_extract import read_scan_file, scans_to_headway, write_scan_file
from synthetic import box_scans, headway_with_gaps
from traj_core import detect_gaps

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_MISSING = 2


def _require(path: str, what: str) -> bool:
    if path and os.path.exists(path):
        return True
    print(f"❌ {what} not found: {path}")
    return False


def _sidecar(out_file: str, suffix: str) -> str:
    return os.path.splitext(out_file)[0] + suffix


def _echo_config(config: RunConfig, path: str):
    config.write_effective(path)
    print(f"📋 Effective configuration written to {path}")


def _parse_gap(text: str):
    try:
        first, last = (int(v) for v in text.split(':'))
    except ValueError:
        raise argparse.ArgumentTypeError(f"gap must be FIRST:LAST, got '{text}'")
    if last < first:
        raise argparse.ArgumentTypeError(f"gap end {last} is before its start {first}")
    return first, last


def cmd_ingest(args, config: RunConfig) -> int:
    if not _require(args.input, "NGSIM file"):
        return EXIT_MISSING
    config.apply_overrides({'ngsim.min_duration_s': args.min_duration})
    rules = config.get_extraction_rules()
    with open(args.input, 'r') as f:
        frame = parse_ngsim_frame(f)
    print(f"✅ Parsed {len(frame)} rows from {args.input}")

    pairs, summary = extract_pairs(frame, rules)
    os.makedirs(args.out, exist_ok=True)
    for pair in pairs:
        write_pair_file(os.path.join(args.out, f"{pair.pair_id}.csv"), pair)
    summary_path = os.path.join(args.out, 'extraction_summary.yml')
    with open(summary_path, 'w') as f:
        yaml.safe_dump(summary.to_dict(), f, sort_keys=True, default_flow_style=False)
    _echo_config(config, os.path.join(args.out, 'run_config.yml'))

    print(f"✅ Wrote {summary.accepted} pair files to {args.out}")
    print("📋 Extraction Summary:")
    print(f"  Minimum Duration: {summary.min_duration_s}s")
    print(f"  Candidates: {summary.candidates}")
    for reason, count in summary.rejected.items():
        print(f"  Rejected ({reason}): {count}")
    if summary.headway_mismatch_rows:
        print(f"⚠️  {summary.headway_mismatch_rows} rows differ from the recorded spacing")
    return EXIT_OK


def cmd_scan2traj(args, config: RunConfig) -> int:
    config.apply_overrides({
        'scan_filter.z_min': args.z_min,
        'scan_filter.z_max': args.z_max,
        'scan_filter.lane_half_width': args.lane_half_width,
        'scan_filter.cluster_radius': args.cluster_radius,
        'scan_filter.min_cluster_points': args.min_points,
    })
    cfg = config.get_filter_config()

    if args.synthetic:
        values = headway_with_gaps([args.headway] * args.scans, args.gap or [])
        scans = box_scans(values, noise=args.noise, seed=config.get_seed())
        if args.input:
            write_scan_file(args.input, scans)
            print(f"✅ Wrote {len(scans)} synthetic scans to {args.input}")
    else:
        if not _require(args.input, "Scan file"):
            return EXIT_MISSING
        scans = read_scan_file(args.input)

    series = scans_to_headway(scans, cfg)
    write_headway_file(args.out, series)
    _echo_config(config, _sidecar(args.out, '_run_config.yml'))
    gaps = detect_gaps(series, float(config.get('reconstruction.context_length', 5.0)))
    print(f"✅ Wrote {len(series)} headway samples to {args.out}")
    for gap in gaps:
        print(f"  Gap {gap.first_missing_idx}..{gap.last_missing_idx} ({gap.duration_s:.1f}s)")
    return EXIT_OK


def cmd_experiment(args, config: RunConfig) -> int:
    for path in args.pairs:
        if not _require(path, "Pair path"):
            return EXIT_MISSING
    config.apply_overrides({
        'seed': args.seed,
        'ga.population': args.ga_pop,
        'ga.generations': args.ga_gens,
        'ga.crossover_rate': args.ga_crossover,
        'ga.mutation_rate': args.ga_mutation,
        'model': args.model,
        'jobs': args.jobs,
        'dataset': args.dataset,
        'gap_synthesis.count': args.gaps,
    })
    config.print_config_summary()
    pairs = load_pairs(args.pairs)
    print(f"✅ Loaded {len(pairs)} pairs")

    result = run_experiment(pairs, config, args.out)
    failed = int((~result.diagnostics['method'].isin(['linear', 'model', 'linear-fallback'])).sum())
    print(f"✅ Scored {result.scored} gap reconstructions, results in {args.out}")
    if failed:
        print(f"⚠️  {failed} gap jobs were skipped or failed, see diagnostics.csv")
    modelled = int(result.diagnostics['method'].eq('model').sum())
    whole = int(result.diagnostics['whole_gap_blend'].eq(True).sum())
    print(f"📋 Whole-gap blends: {whole} of {modelled} model reconstructions")
    if result.scored == 0:
        print("❌ No gap was scored")
        return EXIT_FAILURE
    _print_summary(result.report.summary)
    return EXIT_OK


def cmd_reconstruct(args, config: RunConfig) -> int:
    if not _require(args.input, "Pair file"):
        return EXIT_MISSING
    config.apply_overrides({
        'seed': args.seed,
        'model': args.model,
        'reconstruction.slope_threshold': args.slope_threshold,
        'reconstruction.blend_schedule': args.blend,
    })
    cfg = config.get_reconstruction_config()

    if has_positions(args.input):
        pair = read_pair_file(args.input)
        outcome = reconstruct_pair(pair, cfg, config.get_ga_config(), config.get_bounds())
        write_pair_file(args.out, fill_pair(pair, outcome.headway))
    else:
        print("⚠️  No position columns; only short gaps can be filled")
        outcome = reconstruct_headway(read_headway_file(args.input), cfg,
                                      os.path.splitext(os.path.basename(args.input))[0])
        write_headway_file(args.out, outcome.headway)

    diag_path = _sidecar(args.out, '_diagnostics.csv')
    pd.DataFrame([r.to_dict() for r in outcome.records]).to_csv(diag_path, index=False)
    _echo_config(config, _sidecar(args.out, '_run_config.yml'))
    filled = sum(g.filled for g in outcome.gaps)
    print(f"✅ Filled {filled} of {len(outcome.gaps)} gaps, wrote {args.out}")
    for record in outcome.records:
        if record.method != 'model' and record.method != 'linear':
            print(f"⚠️  Gap {record.first_idx}..{record.last_idx}: {record.method} {record.note}")
    return EXIT_OK


def cmd_report(args, config: RunConfig) -> int:
    if not _require(args.input, "Per-gap table"):
        return EXIT_MISSING
    report = EvaluationReport.from_rows(read_per_gap(args.input))
    os.makedirs(args.out, exist_ok=True)
    report.summary.to_csv(os.path.join(args.out, 'summary.csv'), index=False)
    report.summary_by_dataset.to_csv(os.path.join(args.out, 'summary_by_dataset.csv'), index=False)
    # run_config.yml in the same directory belongs to the experiment that produced the table
    _echo_config(config, os.path.join(args.out, 'report_config.yml'))
    print(f"✅ Summarized {len(report.per_gap)} rows into {args.out}")
    _print_summary(report.summary)
    return EXIT_OK


def _print_summary(summary: pd.DataFrame):
    print("📋 Error Statistics:")
    for _, row in summary.iterrows():
        print(f"  {row['model']:<12} {row['metric']:<9} min {row['min']:.3f}  max {row['max']:.3f}  "
              f"avg {row['average']:.3f}  median {row['median']:.3f}  std {row['std']:.3f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Reconstruct gaps in leader-follower headway data')
    parser.add_argument('--config-file', help='Path to configuration file (default: $TRAJGAP_CONFIG)')
    parser.add_argument('--verbose', action='store_true', help='Enable debug logging')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    ingest = subparsers.add_parser('ingest', help='Extract leader-follower pairs from NGSIM data')
    ingest.add_argument('input', help='NGSIM trajectory text file')
    ingest.add_argument('--out', required=True, help='Output directory for pair files')
    ingest.add_argument('--min-duration', type=float, help='Minimum pair duration in seconds (default: 50)')

    scan = subparsers.add_parser('scan2traj', help='Convert scans into a headway series')
    scan.add_argument('input', nargs='?', help='Scan file (written when --synthetic is given)')
    scan.add_argument('--out', required=True, help='Output headway file')
    scan.add_argument('--synthetic', action='store_true', help='Generate box-target scans instead of reading')
    scan.add_argument('--headway', type=float, default=12.0, help='Synthetic target distance in meters')
    scan.add_argument('--scans', type=int, default=200, help='Number of synthetic scans')
    scan.add_argument('--gap', type=_parse_gap, action='append', help='Synthetic gap FIRST:LAST (repeatable)')
    scan.add_argument('--noise', type=float, default=0.05, help='Synthetic range noise bound in meters')
    scan.add_argument('--z-min', type=float, help='Lower elevation threshold')
    scan.add_argument('--z-max', type=float, help='Upper elevation threshold')
    scan.add_argument('--lane-half-width', type=float, help='Lane half width')
    scan.add_argument('--cluster-radius', type=float, help='Single-linkage radius')
    scan.add_argument('--min-points', type=int, help='Minimum points per cluster')

    experiment = subparsers.add_parser('experiment', help='Run the synthetic-gap experiment')
    experiment.add_argument('--pairs', nargs='+', required=True, help='Pair files or directories')
    experiment.add_argument('--out', required=True, help='Output directory for reports')
    experiment.add_argument('--seed', type=int, help='Global seed')
    experiment.add_argument('--ga-pop', type=int, help='GA population (default: 20)')
    experiment.add_argument('--ga-gens', type=int, help='GA generations (default: 50)')
    experiment.add_argument('--ga-crossover', type=float, help='GA crossover rate (default: 0.7)')
    experiment.add_argument('--ga-mutation', type=float, help='GA mutation rate (default: 0.1)')
    experiment.add_argument('--model', help='gipps, idm, pipes, newell, best-of-all or all')
    experiment.add_argument('--jobs', type=int, help='Worker processes')
    experiment.add_argument('--gaps', type=int, help='Total number of synthetic gaps')
    experiment.add_argument('--dataset', help='Dataset tag written into every row')

    reconstruct = subparsers.add_parser('reconstruct', help='Fill the gaps of one pair file')
    reconstruct.add_argument('input', help='Pair or headway file')
    reconstruct.add_argument('--out', required=True, help='Output file')
    reconstruct.add_argument('--model', help='gipps, idm, pipes, newell or best-of-all')
    reconstruct.add_argument('--seed', type=int, help='Global seed')
    reconstruct.add_argument('--slope-threshold', type=float, help='Smooth transition threshold in m/s')
    reconstruct.add_argument('--blend', choices=BLEND_SCHEDULES, help='Blend weight schedule')

    report = subparsers.add_parser('report', help='Re-summarize a per_gap.csv')
    report.add_argument('input', help='per_gap.csv')
    report.add_argument('--out', required=True, help='Output directory')
    return parser


COMMANDS = {
    'ingest': cmd_ingest,
    'scan2traj': cmd_scan2traj,
    'experiment': cmd_experiment,
    'reconstruct': cmd_reconstruct,
    'report': cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_MISSING

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        config = RunConfig(args.config_file)
        return COMMANDS[args.command](args, config)
    except FileNotFoundError as e:
        print(f"❌ {e}")
        return EXIT_MISSING
    except (TrajGapError, ValueError) as e:
        print(f"❌ Error: {e}")
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
