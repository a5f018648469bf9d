"""Synthetic vessel phantoms and cumulative error injection.

A phantom is a branching tree of tubes (the ground truth) enclosed by a thin
spherical shell that serves as the site for structure-like false positives.
A catalog of pairwise-disjoint errors is drawn once per phantom; each
simulation set then applies ``k`` randomly chosen errors one at a time, giving
``k + 1`` masks whose error counts are known exactly.

Randomness
----------
Every stream is ``numpy.random.Generator(PCG64(SeedSequence(entropy)))``.
The entropy is ``[phantom_seed, PHANTOM_STREAM]`` for the tree,
``[catalog_seed, CATALOG_STREAM]`` for the catalog and the integer set seed for
each simulation set.  Set seeds are derived as the first ``uint64`` of
``SeedSequence([experiment_seed, SET_STREAM, set_index]).generate_state(1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .volume import MaskError, VoxelMask, VoxelSet, apply_delta

PHANTOM_STREAM = 1
CATALOG_STREAM = 2
SET_STREAM = 3

FP_STRUCTURE = "FP_STRUCTURE"
FP_DILATE = "FP_DILATE"
FN_SEGMENT = "FN_SEGMENT"
FN_THIN = "FN_THIN"
FP_SCATTER = "FP_SCATTER"
KINDS = (FP_STRUCTURE, FP_DILATE, FN_SEGMENT, FN_THIN, FP_SCATTER)
KIND_LETTER = {FP_STRUCTURE: "K", FP_DILATE: "P", FN_SEGMENT: "M", FN_THIN: "V", FP_SCATTER: "R"}
POLARITY = {FP_STRUCTURE: "FP", FP_DILATE: "FP", FN_SEGMENT: "FN", FN_THIN: "FN", FP_SCATTER: "FP"}
SEVERITY_FACTOR = {1: 1, 2: 2, 3: 4}

# error sizes relative to the ground-truth voxel count G
FN_BUDGET = 0.4
STRUCTURE_FRACTION = 0.01
SCATTER_FRACTION = 0.004
DILATE_STRETCH = 10
MAX_ATTEMPTS = 25

TREE_LEVELS = 5


class CatalogInfeasible(MaskError):
    pass


def rng_for(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


def set_seed(experiment_seed: int, index: int) -> int:
    ss = np.random.SeedSequence([experiment_seed, SET_STREAM, index])
    return int(ss.generate_state(1, np.uint64)[0])


# ------------------------------------------------------------------- phantom

@dataclass(frozen=True)
class Segment:
    id: str
    parent: int
    level: int
    radius: int
    path: np.ndarray  # (n, 3) ordered voxel centreline, proximal to distal


@dataclass(frozen=True, eq=False)
class VesselPhantom:
    gt: VoxelMask
    segments: tuple[Segment, ...]
    shell: VoxelSet
    seed: int

    @property
    def dims(self):
        return self.gt.dims


_BALLS: dict[float, np.ndarray] = {}


def ball_offsets(radius: float) -> np.ndarray:
    """Integer offsets within ``radius`` of the origin, nearest first."""
    if radius not in _BALLS:
        r = int(np.floor(radius))
        grid = np.mgrid[-r:r + 1, -r:r + 1, -r:r + 1].reshape(3, -1).T
        d2 = np.sum(grid ** 2, axis=1)
        keep = d2 <= radius ** 2
        grid, d2 = grid[keep], d2[keep]
        order = np.lexsort((grid[:, 0], grid[:, 1], grid[:, 2], d2))
        _BALLS[radius] = grid[order]
    return _BALLS[radius]


def _stamp(points: np.ndarray, radius: float, dims) -> np.ndarray:
    parts = []
    for p in points:
        c = p + ball_offsets(radius)
        inside = np.all((c >= 0) & (c < np.asarray(dims)), axis=1)
        parts.append(c[inside])
    return np.concatenate(parts) if parts else np.empty((0, 3), dtype=np.int64)


def segment_tube(segment: Segment, dims) -> np.ndarray:
    data = np.zeros(dims, dtype=bool)
    c = _stamp(segment.path, segment.radius, dims)
    data[c[:, 0], c[:, 1], c[:, 2]] = True
    return data


def _unit(v):
    return v / np.linalg.norm(v)


def _rotate_away(direction, rng, angle):
    # rotate by `angle` about a random axis perpendicular to `direction`
    helper = rng.normal(size=3)
    axis = _unit(np.cross(direction, helper))
    return _unit(direction * np.cos(angle) + np.cross(axis, direction) * np.sin(angle))


def _walk(rng, start, direction, steps, center, limit):
    pos = np.array(start, dtype=float)
    points = [pos.copy()]
    for _ in range(steps):
        direction = _unit(direction + rng.normal(0.0, 0.15, 3))
        nxt = pos + direction
        offset = nxt - center
        if np.linalg.norm(offset) > limit:
            normal = _unit(offset)
            direction = _unit(direction - 2 * np.dot(direction, normal) * normal)
            nxt = pos + direction
        pos = nxt
        points.append(pos.copy())
    return np.array(points), direction


def _rasterize_path(points, dims):
    vox = np.clip(np.rint(points).astype(np.int64), 0, np.asarray(dims) - 1)
    keep = np.ones(len(vox), dtype=bool)
    keep[1:] = np.any(vox[1:] != vox[:-1], axis=1)
    return vox[keep]


def generate_phantom(seed: int, dims=(128, 128, 128)) -> VesselPhantom:
    """Branching tubular tree plus an enclosing one-voxel-thick shell.

    Deterministic in ``(seed, dims)``.  The tree is a binary recursive random
    walk of ``TREE_LEVELS`` generations (31 segments); radii shrink by one
    voxel per generation from ``min(dims)/32`` (clipped to 1..4) down to 1.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 16:
        raise MaskError(f"dims too small to fit tree and shell: {list(dims)} (need >= 16)")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    m = min(dims)
    center = (np.asarray(dims, dtype=float) - 1) / 2
    r_shell = 0.45 * m
    r_tree = 0.30 * m
    max_radius = int(np.clip(round(m / 32), 1, 4))
    rng = rng_for(seed, PHANTOM_STREAM)

    base_len = 0.55 * r_tree
    segments: list[Segment] = []
    start = center + np.array([0.0, 0.0, -0.8 * r_tree]) + rng.normal(0, 0.05 * r_tree, 3)
    queue = [(start, _unit(np.array([0.0, 0.0, 1.0]) + rng.normal(0, 0.1, 3)), 0, max_radius, -1)]
    while queue:
        start, direction, level, radius, parent = queue.pop(0)
        steps = max(3, int(base_len * 0.8 ** level * rng.uniform(0.8, 1.2)))
        points, end_dir = _walk(rng, start, direction, steps, center, r_tree)
        idx = len(segments)
        segments.append(Segment(f"S{idx:02d}", parent, level, radius,
                                _rasterize_path(points, dims)))
        if level + 1 < TREE_LEVELS:
            child_radius = max(1, radius - 1)
            for sign in (1.0, -1.0):
                angle = sign * np.deg2rad(rng.uniform(25, 45))
                queue.append((points[-1], _rotate_away(end_dir, rng, angle),
                              level + 1, child_radius, idx))

    gt = np.zeros(dims, dtype=bool)
    for seg in segments:
        gt |= segment_tube(seg, dims)

    centroid = np.argwhere(gt).mean(axis=0)
    grid = np.indices(dims, dtype=np.float64)
    dist = np.sqrt(sum((grid[a] - centroid[a]) ** 2 for a in range(3)))
    shell = np.abs(dist - r_shell) < 0.5
    if np.any(shell & gt):
        raise MaskError(f"dims too small to fit tree and shell: {list(dims)}")
    return VesselPhantom(VoxelMask(gt), tuple(segments), VoxelSet.from_mask(shell), int(seed))


def validate_phantom(phantom: VesselPhantom) -> None:
    """Raise ``AssertionError`` if the phantom's own invariants fail."""
    gt = phantom.gt
    assert gt.foreground_count > 0, "empty ground truth"
    union = np.zeros(gt.dims, dtype=bool)
    for seg in phantom.segments:
        assert 0 <= seg.parent < len(phantom.segments) or seg.parent == -1
        if seg.parent >= 0:
            assert seg.radius <= phantom.segments[seg.parent].radius
        union |= segment_tube(seg, gt.dims)
    assert np.array_equal(union, gt.data), "segment tubes do not union to gt"
    assert not gt.data[phantom.shell.index()].any(), "shell overlaps gt"


# ------------------------------------------------------------------- catalog

@dataclass(frozen=True)
class ErrorSpec:
    id: str
    kind: str
    severity: int
    polarity: str
    voxels: VoxelSet

    @property
    def mode(self) -> str:
        return "add" if self.polarity == "FP" else "remove"

    def to_dict(self, with_voxels: bool = True) -> dict:
        d = {"id": self.id, "kind": self.kind, "severity": self.severity,
             "polarity": self.polarity, "n_voxels": len(self.voxels)}
        if with_voxels:
            d["voxels"] = self.voxels.to_list()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorSpec":
        return cls(d["id"], d["kind"], int(d["severity"]), d["polarity"], VoxelSet(d["voxels"]))


def catalog_plan(n: int) -> list[tuple[str, int]]:
    """(kind, severity) for each catalog slot: kinds cycle, severities cycle per kind."""
    return [(KINDS[i % len(KINDS)], 1 + (i // len(KINDS)) % 3) for i in range(n)]


class _Placer:
    def __init__(self, phantom: VesselPhantom, rng: np.random.Generator):
        self.phantom = phantom
        self.rng = rng
        self.dims = phantom.dims
        self.gt = phantom.gt.data
        self.used = np.zeros(self.dims, dtype=bool)
        self.shell = np.zeros(self.dims, dtype=bool)
        self.shell[phantom.shell.index()] = True
        radii = [s.radius for s in phantom.segments]
        thick = [s for s in phantom.segments if s.radius >= 2]
        self.thick = thick or list(phantom.segments)
        self.thin = [s for s in phantom.segments if s.radius == min(radii)]

    def _collect(self, points, radius, allowed, limit=None):
        allowed = allowed.copy()
        out, total = [], 0
        for p in points:
            c = _stamp(p[None, :], radius, self.dims)
            c = c[allowed[c[:, 0], c[:, 1], c[:, 2]]]
            allowed[c[:, 0], c[:, 1], c[:, 2]] = False
            out.append(c)
            total += len(c)
            if limit is not None and total >= limit:
                break
        coords = np.concatenate(out) if out else np.empty((0, 3), dtype=np.int64)
        return coords if limit is None else coords[:limit]

    def fn_stretch(self, pool, target, from_tip):
        allowed = self.gt & ~self.used
        for _ in range(MAX_ATTEMPTS):
            seg = pool[self.rng.integers(len(pool))]
            path = seg.path
            if from_tip:
                points = path[::-1]
            else:
                start = int(self.rng.integers(len(path)))
                points = np.concatenate([path[start:], path[:start][::-1]])
            coords = self._collect(points, seg.radius, allowed, limit=target)
            if len(coords) == target:
                return coords
        return None

    def dilate(self, delta):
        allowed = ~self.gt & ~self.used & ~self.shell
        for _ in range(MAX_ATTEMPTS):
            seg = self.phantom.segments[self.rng.integers(len(self.phantom.segments))]
            start = int(self.rng.integers(max(1, len(seg.path) - DILATE_STRETCH + 1)))
            coords = self._collect(seg.path[start:start + DILATE_STRETCH],
                                   seg.radius + delta, allowed)
            if len(coords):
                return coords
        return None

    def structure(self, target):
        free = np.argwhere(self.shell & ~self.used)
        if len(free) < target:
            return None
        center = free[self.rng.integers(len(free))]
        d2 = np.sum((free - center) ** 2, axis=1)
        return free[np.argsort(d2, kind="stable")[:target]]

    def scatter(self, target):
        blocked = ndimage.binary_dilation(self.gt | self.used, structure=np.ones((3, 3, 3), bool))
        picked = []
        hi = np.asarray(self.dims)
        for _ in range(MAX_ATTEMPTS):
            for v in self.rng.integers(0, hi, size=(4 * target, 3)):
                x, y, z = v
                if blocked[x, y, z]:
                    continue
                picked.append(v)
                blocked[max(x - 1, 0):x + 2, max(y - 1, 0):y + 2, max(z - 1, 0):z + 2] = True
                if len(picked) == target:
                    return np.array(picked)
        return None

    def place(self, kind, severity, target):
        f = SEVERITY_FACTOR[severity]
        if kind == FN_SEGMENT:
            return self.fn_stretch(self.thick, target, from_tip=False)
        if kind == FN_THIN:
            return self.fn_stretch(self.thin, target, from_tip=True)
        if kind == FP_DILATE:
            return self.dilate(f)
        if kind == FP_STRUCTURE:
            return self.structure(target)
        return self.scatter(target)


# FN errors claim tree voxels first; scatter goes last so its isolation holds
_PLACEMENT_ORDER = (FN_SEGMENT, FN_THIN, FP_DILATE, FP_STRUCTURE, FP_SCATTER)


def generate_error_catalog(phantom: VesselPhantom, n: int = 55, seed: int = 0) -> list[ErrorSpec]:
    """``n`` pairwise-disjoint errors covering every kind and severity.

    FN errors together remove at most ``FN_BUDGET`` of the ground-truth voxels.
    A placement that fails ``MAX_ATTEMPTS`` times is retried at half the size;
    :class:`CatalogInfeasible` is raised once the size cannot shrink further.
    """
    if n < 10:
        raise ValueError("catalog needs at least 10 errors")
    G = phantom.gt.foreground_count
    plan = catalog_plan(n)
    fn_factor_sum = sum(SEVERITY_FACTOR[s] for k, s in plan if POLARITY[k] == "FN")
    fn_unit = int(FN_BUDGET * G) / fn_factor_sum
    targets = []
    for kind, sev in plan:
        f = SEVERITY_FACTOR[sev]
        if POLARITY[kind] == "FN":
            targets.append(int(fn_unit * f))
        elif kind == FP_STRUCTURE:
            targets.append(max(1, round(STRUCTURE_FRACTION * G * f)))
        elif kind == FP_SCATTER:
            targets.append(max(1, round(SCATTER_FRACTION * G * f)))
        else:
            targets.append(0)
    if sum(t for t, (k, _) in zip(targets, plan) if POLARITY[k] == "FN") > FN_BUDGET * G \
            or any(t < 1 for t, (k, _) in zip(targets, plan) if POLARITY[k] == "FN"):
        raise CatalogInfeasible("catalog infeasible: ground truth too small for the FN budget")

    rng = rng_for(seed, CATALOG_STREAM)
    placer = _Placer(phantom, rng)
    specs: dict[int, ErrorSpec] = {}
    for kind in _PLACEMENT_ORDER:
        for i, (k, sev) in enumerate(plan):
            if k != kind:
                continue
            target = targets[i]
            coords = placer.place(kind, sev, target)
            while coords is None and target > 1:
                target //= 2
                coords = placer.place(kind, sev, target)
            if coords is None or not len(coords):
                raise CatalogInfeasible(f"catalog infeasible: could not place {kind} #{i}")
            placer.used[coords[:, 0], coords[:, 1], coords[:, 2]] = True
            specs[i] = ErrorSpec(f"{KIND_LETTER[kind]}{sev}-{i:02d}", kind, sev,
                                 POLARITY[kind], VoxelSet(coords))
    return [specs[i] for i in range(n)]


def validate_catalog(phantom: VesselPhantom, catalog) -> None:
    """Raise ``AssertionError`` if catalog invariants fail."""
    gt = phantom.gt.data
    seen = np.zeros(phantom.dims, dtype=bool)
    fn_total = 0
    for spec in catalog:
        assert len(spec.voxels) > 0, f"{spec.id}: empty"
        idx = spec.voxels.index()
        if spec.polarity == "FP":
            assert not gt[idx].any(), f"{spec.id}: FP overlaps gt"
        else:
            assert gt[idx].all(), f"{spec.id}: FN outside gt"
            fn_total += len(spec.voxels)
        assert not seen[idx].any(), f"{spec.id}: overlaps another error"
        seen[idx] = True
    assert fn_total <= FN_BUDGET * phantom.gt.foreground_count, "FN budget exceeded"


# --------------------------------------------------------------- simulation

@dataclass(frozen=True, eq=False)
class Member:
    error_count: int
    error_ids: tuple[str, ...]
    mask: VoxelMask

    @property
    def name(self) -> str:
        return f"member{self.error_count:02d}"


@dataclass(frozen=True, eq=False)
class SimulationSet:
    phantom_seed: int
    seed: int
    members: tuple[Member, ...] = field(repr=False)

    @property
    def error_ids(self) -> tuple[str, ...]:
        return self.members[-1].error_ids


def apply_errors(mask: VoxelMask, errors) -> VoxelMask:
    for spec in errors:
        mask = apply_delta(mask, spec.voxels, spec.mode)
    return mask


def build_simulation_set(phantom: VesselPhantom, catalog, k: int = 10, seed: int = 0) -> SimulationSet:
    """Ground truth plus ``k`` masks, each adding one more randomly drawn error."""
    if len(catalog) < k:
        raise ValueError(f"catalog has {len(catalog)} errors, need {k}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.choice(len(catalog), size=k, replace=False)
    mask = phantom.gt
    members = [Member(0, (), mask)]
    for j, idx in enumerate(order, start=1):
        spec = catalog[int(idx)]
        mask = apply_delta(mask, spec.voxels, spec.mode)
        members.append(Member(j, members[-1].error_ids + (spec.id,), mask))
    return SimulationSet(phantom.seed, int(seed), tuple(members))


def build_experiment(phantom: VesselPhantom, catalog, n_sets: int = 20, k: int = 10,
                     seed: int = 0) -> list[SimulationSet]:
    return [build_simulation_set(phantom, catalog, k, set_seed(seed, i)) for i in range(n_sets)]
