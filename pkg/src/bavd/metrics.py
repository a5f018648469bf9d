"""Average Hausdorff distance (AVD), balanced AVD (bAVD) and companions.

Both measures average a ground-truth-to-segmentation term (GtoS) and a
segmentation-to-ground-truth term (StoG), each a sum of nearest-neighbour
distances.  AVD normalises each sum by its own source size::

    avd  = (GtoS / G + StoG / S) / 2

while bAVD normalises both by the ground-truth size, which stays fixed for
every segmentation ranked against the same ground truth::

    bavd = (GtoS / G + StoG / G) / 2
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .distance import DistanceField, directed_distance, edt
from .volume import MaskError, VoxelMask, boundary_data

POINT_MODES = ("all_voxels", "boundary_only")
UNITS = ("voxel", "physical")

REPORT_COLUMNS = ("id", "g_count", "s_count", "gtos_mean", "stog_mean",
                  "avd", "bavd", "hausdorff", "dice")


class EmptyMaskError(MaskError):
    """A metric input has no foreground, so the metric is undefined."""


@dataclass(frozen=True)
class MetricOptions:
    point_mode: str = "all_voxels"
    units: str = "voxel"

    def __post_init__(self):
        if self.point_mode not in POINT_MODES:
            raise ValueError(f"point_mode must be one of {POINT_MODES}, got {self.point_mode!r}")
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}, got {self.units!r}")


DEFAULT_OPTIONS = MetricOptions()


@dataclass(frozen=True)
class MetricReport:
    g_count: int
    s_count: int
    gtos_total: float
    gtos_mean: float
    stog_total: float
    stog_mean: float
    avd: float
    bavd: float
    hausdorff: float
    dice: float

    def as_dict(self) -> dict:
        return asdict(self)

    def row(self, id_: str) -> list:
        """Values in CSV column order (see ``REPORT_COLUMNS``)."""
        d = self.as_dict()
        return [id_] + [d[c] for c in REPORT_COLUMNS[1:]]


def _check_pair(gt: VoxelMask, seg: VoxelMask) -> None:
    if gt.dims != seg.dims:
        raise MaskError(f"dims mismatch: ground truth {list(gt.dims)} vs "
                        f"segmentation {list(seg.dims)}")
    if gt.spacing != seg.spacing:
        raise MaskError(f"spacing mismatch: ground truth {list(gt.spacing)} vs "
                        f"segmentation {list(seg.spacing)}")
    if gt.foreground_count == 0:
        raise EmptyMaskError("empty ground truth")
    if seg.foreground_count == 0:
        raise EmptyMaskError("empty segmentation")


def _points(mask: VoxelMask, opts: MetricOptions) -> np.ndarray:
    if opts.point_mode == "boundary_only":
        return boundary_data(mask.data)
    return mask.data


def _field(points: np.ndarray, mask: VoxelMask, opts: MetricOptions) -> DistanceField:
    spacing = mask.spacing if opts.units == "physical" else (1.0, 1.0, 1.0)
    return edt(VoxelMask(points, mask.spacing), spacing=spacing)


class GroundTruth:
    """A ground truth with its distance transform computed once.

    Ranking many segmentations against one ground truth only needs the
    segmentation-side transform per pair; this object holds the other one.
    """

    def __init__(self, gt: VoxelMask, opts: MetricOptions = DEFAULT_OPTIONS):
        if gt.foreground_count == 0:
            raise EmptyMaskError("empty ground truth")
        self.mask = gt
        self.opts = opts
        self.points = _points(gt, opts)
        self.field = _field(self.points, gt, opts)

    def evaluate(self, seg: VoxelMask) -> MetricReport:
        gt, opts = self.mask, self.opts
        _check_pair(gt, seg)
        seg_points = _points(seg, opts)
        gtos = directed_distance(self.points, _field(seg_points, seg, opts))
        stog = directed_distance(seg_points, self.field)
        g, s = gtos.source_count, stog.source_count
        overlap = int(np.count_nonzero(gt.data & seg.data))
        return MetricReport(
            g_count=g,
            s_count=s,
            gtos_total=gtos.total_distance,
            gtos_mean=gtos.mean_distance,
            stog_total=stog.total_distance,
            stog_mean=stog.mean_distance,
            avd=(gtos.mean_distance + stog.mean_distance) / 2,
            bavd=(gtos.total_distance + stog.total_distance) / (2 * g),
            hausdorff=max(gtos.max_distance, stog.max_distance),
            dice=2 * overlap / (gt.foreground_count + seg.foreground_count),
        )


def evaluate_pair(gt: VoxelMask, seg: VoxelMask,
                  opts: MetricOptions = DEFAULT_OPTIONS) -> MetricReport:
    """All metrics for one (ground truth, segmentation) pair."""
    _check_pair(gt, seg)
    return GroundTruth(gt, opts).evaluate(seg)


def avd(gt: VoxelMask, seg: VoxelMask, opts: MetricOptions = DEFAULT_OPTIONS) -> float:
    """Average Hausdorff distance; symmetric in its arguments."""
    return evaluate_pair(gt, seg, opts).avd


def bavd(gt: VoxelMask, seg: VoxelMask, opts: MetricOptions = DEFAULT_OPTIONS) -> float:
    """Balanced AVD. Not symmetric: ``gt`` supplies the denominator."""
    return evaluate_pair(gt, seg, opts).bavd
