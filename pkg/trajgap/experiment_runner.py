#!/usr/bin/env python3
"""
Synthetic-gap experiment: hide random gaps in complete pairs, reconstruct
them with each model selection, score and summarize.
"""

import glob
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import pandas as pd

from calibration import GaConfig, derive_seed
from config_loader import RunConfig
from errors import GapCapacityError, TrajGapError
from evaluation import EvaluationReport, score_gap, synthesize_gaps
from pair_io import read_pair_file
from reconstruction import ReconstructionConfig, reconstruct_gap
from traj_core import VehiclePair, detect_gaps

logger = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ['gap_id', 'pair_id', 'selection', 'first_idx', 'last_idx', 'gap_len_s', 'method', 'model',
                      'cost', 'evaluations', 'reshape_start', 'whole_gap_blend', 'note']


@dataclass(frozen=True)
class PlannedGap:
    gap_id: int
    pair_index: int
    first: int
    last: int


@dataclass(frozen=True)
class GapJob:
    """Everything one worker needs to reconstruct and score a gap"""
    gap: PlannedGap
    pair: VehiclePair
    selection: str
    reconstruction: ReconstructionConfig
    ga: GaConfig
    bounds: Dict
    dataset: str


def load_pairs(paths: List[str]) -> List[VehiclePair]:
    """Read pair files (or every *.csv in given directories), sorted by pair id"""
    files = []
    for path in paths:
        if os.path.isdir(path):
            files.extend(sorted(glob.glob(os.path.join(path, '*.csv'))))
        elif os.path.exists(path):
            files.append(path)
        else:
            raise FileNotFoundError(f"Pair file or directory not found: {path}")
    pairs = [read_pair_file(f) for f in files]
    return sorted(pairs, key=lambda p: p.pair_id)


def plan_gaps(pairs: List[VehiclePair], config: RunConfig) -> Tuple[List[PlannedGap], List[dict]]:
    """
    Distribute the configured gap count round-robin over the pairs and place
    each pair's share at random.

    Returns:
        (planned gaps sorted by id, diagnostics for pairs that could not host their share)
    """
    synth = config.get_gap_synthesis()
    count = int(synth.get('count', 0))
    context = float(config.get('reconstruction.context_length', 5.0))
    n_pairs = len(pairs)
    planned, problems = [], []
    if n_pairs == 0:
        return planned, problems
    for p, pair in enumerate(pairs):
        share = count // n_pairs + (1 if p < count % n_pairs else 0)
        if share == 0:
            continue
        try:
            plan = synthesize_gaps(pair.headway, share, derive_seed(config.get_seed(), 'gaps', pair.pair_id),
                                   min_length_s=float(synth.get('min_length_s', 5.0)),
                                   max_length_s=float(synth.get('max_length_s', 15.0)),
                                   context_s=context, max_attempts=int(synth.get('max_attempts', 1000)))
        except (GapCapacityError, TrajGapError) as e:
            logger.warning("Pair '%s' cannot host %d gaps: %s", pair.pair_id, share, e)
            problems.append({'gap_id': -1, 'pair_id': pair.pair_id, 'method': 'skipped', 'note': str(e)})
            continue
        for j, (first, last) in enumerate(plan.ranges()):
            planned.append(PlannedGap(gap_id=p + j * n_pairs, pair_index=p, first=first, last=last))
    return sorted(planned, key=lambda g: g.gap_id), problems


def run_gap_job(job: GapJob) -> Tuple[Optional[dict], dict]:
    """Reconstruct and score one hidden gap; failures end up in the diagnostic row"""
    planned, pair = job.gap, job.pair
    diag = {'gap_id': planned.gap_id, 'pair_id': pair.pair_id, 'selection': job.selection,
            'first_idx': planned.first, 'last_idx': planned.last}
    try:
        hidden = pair.hide_gap(planned.first, planned.last)
        gap = next(g for g in detect_gaps(hidden.headway, job.reconstruction.context_length)
                   if g.first_missing_idx == planned.first)
        result = reconstruct_gap(hidden, gap, job.reconstruction, job.ga, job.bounds, gap_index=planned.gap_id)
        record = result.record.to_dict()
        record.pop('pair_id')
        diag.update(record)
        if not result.filled:
            return None, diag
        filled = hidden.headway.fill(planned.first, result.values)
        rmse, mape = score_gap(pair.headway, filled, gap)
    except TrajGapError as e:
        logger.warning("Gap %d of pair '%s' failed: %s", planned.gap_id, pair.pair_id, e)
        diag.update({'method': 'failed', 'note': str(e)})
        return None, diag
    row = {'gap_id': planned.gap_id, 'pair_id': pair.pair_id, 'model': job.selection,
           'gap_len_s': round((planned.last - planned.first + 1) * pair.headway.h, 9),
           'rmse_m': rmse, 'mape_pct': mape, 'dataset': job.dataset}
    return row, diag


@dataclass
class ExperimentResult:
    report: EvaluationReport
    diagnostics: pd.DataFrame

    @property
    def scored(self) -> int:
        return len(self.report.per_gap)


def run_experiment(pairs: List[VehiclePair], config: RunConfig, out_dir: Optional[str] = None) -> ExperimentResult:
    """
    Run the gap experiment over ``pairs`` and optionally write
    per_gap.csv, summary.csv, summary_by_dataset.csv, diagnostics.csv and
    run_config.yml into ``out_dir``.
    """
    planned, problems = plan_gaps(pairs, config)
    ga = config.get_ga_config()
    bounds = config.get_bounds()
    dataset = config.get_dataset()
    jobs = [GapJob(gap=g, pair=pairs[g.pair_index], selection=selection,
                   reconstruction=config.get_reconstruction_config(selection), ga=ga, bounds=bounds,
                   dataset=dataset)
            for g in planned for selection in config.get_models()]
    logger.info("Running %d gap jobs (%d gaps) on %d worker(s)", len(jobs), len(planned), config.get_jobs())

    if config.get_jobs() > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.get_jobs()) as executor:
            outcomes = list(executor.map(run_gap_job, jobs))
    else:
        outcomes = [run_gap_job(job) for job in jobs]

    rows = [row for row, _ in outcomes if row is not None]
    diagnostics = pd.DataFrame([diag for _, diag in outcomes] + problems, columns=DIAGNOSTIC_COLUMNS)
    diagnostics = diagnostics.sort_values(['gap_id', 'selection', 'pair_id'], kind='stable').reset_index(drop=True)
    result = ExperimentResult(report=EvaluationReport.from_rows(rows), diagnostics=diagnostics)

    if out_dir:
        result.report.write(out_dir)
        diagnostics.to_csv(os.path.join(out_dir, 'diagnostics.csv'), index=False)
        config.write_effective(os.path.join(out_dir, 'run_config.yml'))
    return result
