"""Average Hausdorff distance and balanced AVD for 3D binary segmentations."""

__version__ = "0.1.0"

from .volume import (MaskError, VoxelMask, VoxelSet, apply_delta, boundary_voxels, load_mask,
                     save_mask)
from .distance import (DirectedResult, DistanceField, directed_distance,
                       directed_distance_bruteforce, edt, edt_bruteforce)
from .metrics import (EmptyMaskError, GroundTruth, MetricOptions, MetricReport, avd, bavd,
                      evaluate_pair)
from .ranking import (ExperimentSummary, RankingTable, count_imperfect, kendall_tau_b,
                      rank_segmentations, summarize_experiment, wilcoxon_signed_rank)
from .simulate import (ErrorSpec, SimulationSet, VesselPhantom, build_experiment,
                       build_simulation_set, generate_error_catalog, generate_phantom)

__all__ = [
    "MaskError", "VoxelMask", "VoxelSet", "apply_delta", "boundary_voxels", "load_mask",
    "save_mask", "DirectedResult", "DistanceField", "directed_distance",
    "directed_distance_bruteforce", "edt", "edt_bruteforce", "EmptyMaskError", "GroundTruth",
    "MetricOptions", "MetricReport", "avd", "bavd", "evaluate_pair", "ExperimentSummary",
    "RankingTable", "count_imperfect", "kendall_tau_b", "rank_segmentations",
    "summarize_experiment", "wilcoxon_signed_rank", "ErrorSpec", "SimulationSet",
    "VesselPhantom", "build_experiment", "build_simulation_set", "generate_error_catalog",
    "generate_phantom",
]
