"""Running the ranking experiment: simulate, evaluate, rank, summarize.

Masks can either be generated in memory from seeds or read back from a
directory written by :func:`write_simulation`.  In both cases every output is
a pure function of the seeds and sizes, never of the worker count.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

from . import __version__
from .metrics import DEFAULT_OPTIONS, GroundTruth, MetricOptions, MetricReport
from .ranking import RankingTable, SetResult, rank_segmentations
from .simulate import (ErrorSpec, Member, SimulationSet, VesselPhantom, build_simulation_set,
                       generate_error_catalog, generate_phantom, set_seed)
from .volume import VoxelMask, load_mask, save_mask


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 1
    phantoms: int = 1
    dims: tuple[int, int, int] = (128, 128, 128)
    n_sets: int = 20
    k_errors: int = 10
    catalog_size: int = 55
    point_mode: str = "all_voxels"
    units: str = "voxel"

    @property
    def phantom_seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.phantoms)]

    @property
    def metric_options(self) -> MetricOptions:
        return MetricOptions(self.point_mode, self.units)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d


def phantom_name(seed: int) -> str:
    return f"phantom{seed:02d}"


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------- evaluation

def evaluate_members(gt: GroundTruth, masks: Iterable[VoxelMask], workers: int = 1) -> list[MetricReport]:
    masks = list(masks)
    if workers <= 1:
        return [gt.evaluate(m) for m in masks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(gt.evaluate, masks))


def rank_set(names, error_counts, reports) -> tuple[RankingTable, RankingTable]:
    avd_table = rank_segmentations(
        [(n, k, r.avd) for n, k, r in zip(names, error_counts, reports)], "avd")
    bavd_table = rank_segmentations(
        [(n, k, r.bavd) for n, k, r in zip(names, error_counts, reports)], "bavd")
    return avd_table, bavd_table


def evaluate_set(gt: GroundTruth, sim: SimulationSet, phantom: str, index: int,
                 workers: int = 1) -> SetResult:
    reports = evaluate_members(gt, [m.mask for m in sim.members], workers)
    avd_table, bavd_table = rank_set([m.name for m in sim.members],
                                     [m.error_count for m in sim.members], reports)
    return SetResult(phantom, index, avd_table, bavd_table)


@dataclass(frozen=True, eq=False)
class PhantomRun:
    """Everything generated for one phantom seed."""
    seed: int
    phantom: VesselPhantom
    catalog: list[ErrorSpec]

    @property
    def name(self) -> str:
        return phantom_name(self.seed)

    def sets(self, config: ExperimentConfig) -> Iterator[tuple[int, SimulationSet]]:
        for i in range(config.n_sets):
            yield i, build_simulation_set(self.phantom, self.catalog, config.k_errors,
                                          set_seed(self.seed, i))


def prepare_phantom(seed: int, config: ExperimentConfig) -> PhantomRun:
    phantom = generate_phantom(seed, config.dims)
    catalog = generate_error_catalog(phantom, config.catalog_size, seed)
    return PhantomRun(seed, phantom, catalog)


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   on_set: Callable[[PhantomRun, SimulationSet, SetResult], None] | None = None
                   ) -> list[SetResult]:
    """Generate and evaluate every set; phantom seeds are ``seed .. seed+phantoms-1``.

    Sets are produced one at a time so memory stays at one set of masks.
    ``on_set`` is called after each set, in deterministic order.
    """
    results = []
    for seed in config.phantom_seeds:
        run = prepare_phantom(seed, config)
        gt = GroundTruth(run.phantom.gt, config.metric_options)
        for i, sim in run.sets(config):
            res = evaluate_set(gt, sim, run.name, i, workers)
            results.append(res)
            if on_set is not None:
                on_set(run, sim, res)
    return results


# -------------------------------------------------------- simulation on disk

def set_manifest(sim: SimulationSet, index: int) -> dict:
    return {
        "index": index,
        "seed": sim.seed,
        "members": [{"member": m.name, "error_count": m.error_count,
                     "errors": list(m.error_ids),
                     "path": f"set{index:02d}/{m.name}.json"} for m in sim.members],
    }


def write_member(member: Member, path: Path, compress: bool = False) -> None:
    save_mask(member.mask, path, compress=compress)
    header = json.loads(path.read_text(encoding="utf-8"))
    header["error_count"] = member.error_count
    header["errors"] = list(member.error_ids)
    path.write_text(dump_json(header), encoding="utf-8")


def write_simulation(run: PhantomRun, config: ExperimentConfig, out: Path,
                     compress: bool = False) -> dict:
    """Write phantom, catalog and every set member under ``out``; returns the phantom manifest."""
    out.mkdir(parents=True, exist_ok=True)
    save_mask(run.phantom.gt, out / "phantom.json", compress=compress)
    (out / "catalog.json").write_text(dump_json({
        "phantom_seed": run.seed,
        "catalog_seed": run.seed,
        "errors": [e.to_dict() for e in run.catalog],
    }), encoding="utf-8")
    sets = []
    for i, sim in run.sets(config):
        set_dir = out / f"set{i:02d}"
        set_dir.mkdir(exist_ok=True)
        for m in sim.members:
            write_member(m, set_dir / f"{m.name}.json", compress)
        sets.append(set_manifest(sim, i))
    return {
        "id": run.name,
        "seed": run.seed,
        "catalog_seed": run.seed,
        "experiment_seed": run.seed,
        "ground_truth": "phantom.json",
        "catalog": "catalog.json",
        "sets": sets,
    }


def list_files(root: Path) -> list[str]:
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file())


def manifest(kind: str, config: ExperimentConfig, phantoms: list[dict], root: Path) -> dict:
    return {
        "tool": "bavd",
        "version": __version__,
        "kind": kind,
        "config": config.to_dict(),
        "phantoms": phantoms,
        "files": [f for f in list_files(root) if f != "manifest.json"],
    }


def load_simulation(root: Path, opts: MetricOptions = DEFAULT_OPTIONS,
                    workers: int = 1) -> Iterator[tuple[str, int, SetResult]]:
    """Evaluate every set recorded in ``root/manifest.json`` without regenerating it."""
    man = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    for ph in man["phantoms"]:
        base = root / ph.get("path", ".")
        gt = GroundTruth(load_mask(base / ph["ground_truth"]), opts)
        for s in ph["sets"]:
            members = s["members"]
            masks = [load_mask(base / m["path"]) for m in members]
            reports = evaluate_members(gt, masks, workers)
            avd_table, bavd_table = rank_set([m["member"] for m in members],
                                             [m["error_count"] for m in members], reports)
            yield ph["id"], s["index"], SetResult(ph["id"], s["index"], avd_table, bavd_table)
