#!/usr/bin/env python3
"""
Headway extraction from decoded LIDAR scans.

Each scan is cut down to the ego lane in front of the sensor within an
elevation band, clustered by 2D proximity, and the distance to the nearest
surviving cluster becomes one headway sample.
"""

import logging
import os
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from errors import InvalidInputError
from traj_core import SAMPLE_INTERVAL, HeadwaySeries

logger = logging.getLogger(__name__)

SCAN_HEADER = '# scan'


@dataclass(frozen=True)
class PointScan:
    """
    One scan in the ego frame: x lateral, y forward, z up (meters).

    Attributes:
        scan_id: Sequence number at 10 Hz
        points: (n, 3) array of x, y, z
    """
    scan_id: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError(f"scan {self.scan_id} has non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, 'points', pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class FilterConfig:
    """Scan filter and clustering thresholds"""
    z_min: float = 0.3
    z_max: float = 2.5
    lane_half_width: float = 1.8
    min_cluster_points: int = 4
    cluster_radius: float = 0.7

    def __post_init__(self):
        if not self.z_min < self.z_max:
            raise InvalidInputError(f"z_min ({self.z_min}) must be below z_max ({self.z_max})")
        if not self.lane_half_width > 0:
            raise InvalidInputError("lane_half_width must be positive")
        if not self.cluster_radius > 0:
            raise InvalidInputError("cluster_radius must be positive")
        if self.min_cluster_points < 1:
            raise InvalidInputError("min_cluster_points must be at least 1")


def filter_scan(scan: PointScan, cfg: FilterConfig) -> PointScan:
    """Keep points inside the elevation band, inside the lane and ahead of the sensor"""
    x, y, z = scan.points[:, 0], scan.points[:, 1], scan.points[:, 2]
    keep = (z >= cfg.z_min) & (z <= cfg.z_max) & (np.abs(x) <= cfg.lane_half_width) & (y > 0)
    return PointScan(scan.scan_id, scan.points[keep])


def cluster_labels(xy: np.ndarray, radius: float) -> np.ndarray:
    """Single-linkage cluster label per point: points closer than ``radius`` share a cluster"""
    n = len(xy)
    if n == 0:
        return np.zeros(0, dtype=int)
    pairs = cKDTree(xy).query_pairs(radius, output_type='ndarray')
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def nearest_cluster_distance(scan: PointScan, cfg: FilterConfig) -> Optional[float]:
    """
    Minimum 2D range to the nearest cluster with at least
    ``cfg.min_cluster_points`` points, or None when none survives.
    """
    if len(scan) == 0:
        return None
    xy = scan.points[:, :2]
    labels = cluster_labels(xy, cfg.cluster_radius)
    ranges = np.hypot(xy[:, 0], xy[:, 1])
    sizes = np.bincount(labels)
    valid = sizes[labels] >= cfg.min_cluster_points
    if not valid.any():
        return None
    return float(ranges[valid].min())


def scans_to_headway(scans: List[PointScan], cfg: FilterConfig = None) -> HeadwaySeries:
    """
    One headway sample per scan; scans without a surviving cluster are missing.

    Raises:
        InvalidInputError: Scan ids are not a contiguous sequence
    """
    cfg = cfg or FilterConfig()
    if len(scans) < 2:
        raise InvalidInputError("at least two scans are required")
    ids = np.array([s.scan_id for s in scans])
    breaks = np.flatnonzero(np.diff(ids) != 1)
    if len(breaks):
        i = int(breaks[0])
        raise InvalidInputError(f"scan ids are not contiguous: {ids[i]} is followed by {ids[i + 1]}")
    if ids[0] < 0:
        raise InvalidInputError(f"scan id {ids[0]} is negative")

    values = [nearest_cluster_distance(filter_scan(scan, cfg), cfg) for scan in scans]
    series = HeadwaySeries.from_values(round(int(ids[0]) * SAMPLE_INTERVAL, 1), values)
    logger.info("Converted %d scans, %d without a target", len(scans), int((~series.present).sum()))
    return series


def read_scan_file(path: str) -> List[PointScan]:
    """
    Read ``# scan <id>`` blocks of ``x y z`` rows.

    Raises:
        FileNotFoundError: Missing file
        InvalidInputError: Malformed header or point row
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Scan file not found: {path}")
    scans = []
    current_id, rows = None, []
    with open(path, 'r') as f:
        for line_number, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith('#'):
                if not text.startswith(SCAN_HEADER):
                    continue
                if current_id is not None:
                    scans.append(PointScan(current_id, np.array(rows, dtype=float).reshape(-1, 3)))
                try:
                    current_id = int(text[len(SCAN_HEADER):].strip())
                except ValueError:
                    raise InvalidInputError(f"{path}:{line_number}: bad scan header '{text}'")
                rows = []
                continue
            if current_id is None:
                raise InvalidInputError(f"{path}:{line_number}: point row before the first scan header")
            try:
                row = [float(v) for v in text.split()]
            except ValueError:
                raise InvalidInputError(f"{path}:{line_number}: non-numeric point row")
            if len(row) != 3:
                raise InvalidInputError(f"{path}:{line_number}: expected 3 values, found {len(row)}")
            rows.append(row)
    if current_id is not None:
        scans.append(PointScan(current_id, np.array(rows, dtype=float).reshape(-1, 3)))
    return scans


def write_scan_file(path: str, scans: Iterable[PointScan]):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        for scan in scans:
            f.write(f"{SCAN_HEADER} {scan.scan_id}\n")
            for x, y, z in scan.points.tolist():
                f.write(f"{x!r} {y!r} {z!r}\n")
