"""Exact Euclidean distance transforms and directed distance sums.

``edt`` is the separable lower-envelope-of-parabolas transform: one 1-D pass
per axis over squared distances, with the axis spacing folded into the
parabola width, followed by a single square root.  ``edt_bruteforce`` and
``directed_distance_bruteforce`` scan every point pair and exist to check it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .volume import MaskError, VoxelMask, read_volume, write_volume

_INF = np.inf


@dataclass(frozen=True)
class DistanceField:
    """Distance from each voxel centre to the nearest reference foreground voxel."""

    values: np.ndarray
    spacing: tuple[float, float, float]
    reference_foreground_count: int

    @property
    def dims(self):
        return tuple(int(d) for d in self.values.shape)


@dataclass(frozen=True)
class DirectedResult:
    total_distance: float
    source_count: int
    mean_distance: float
    max_distance: float


# ----------------------------------------------------------------- kernels

@numba.njit(nogil=True, cache=True)
def _envelope_1d(f, out, w, v, z):
    # f: squared distances along one line (inf = no site); w: spacing**2
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == _INF:
            continue
        hq = fq + w * q * q
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -_INF
            z[1] = _INF
            continue
        while True:
            p = v[k]
            s = (hq - (f[p] + w * p * p)) / (2.0 * w * (q - p))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = _INF
    if k < 0:
        for q in range(n):
            out[q] = _INF
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d = q - v[k]
        out[q] = w * d * d + f[v[k]]


@numba.njit(nogil=True, cache=True)
def _transform_lines(g, w):
    # g: 2D (lines, n), transformed in place along the last axis
    m, n = g.shape
    f = np.empty(n)
    out = np.empty(n)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    for i in range(m):
        for j in range(n):
            f[j] = g[i, j]
        _envelope_1d(f, out, w, v, z)
        for j in range(n):
            g[i, j] = out[j]


def _pass(g: np.ndarray, axis: int, w: float) -> np.ndarray:
    moved = np.ascontiguousarray(np.moveaxis(g, axis, -1))
    shape = moved.shape
    flat = moved.reshape(-1, shape[-1])
    _transform_lines(flat, w)
    return np.moveaxis(flat.reshape(shape), -1, axis)


def squared_edt(data: np.ndarray, spacing) -> np.ndarray:
    """Squared exact distances to the nearest True voxel of ``data``."""
    g = np.where(data, 0.0, _INF)
    for axis in (2, 1, 0):
        g = _pass(g, axis, float(spacing[axis]) ** 2)
    return np.ascontiguousarray(g)


@numba.njit(nogil=True, cache=True)
def _min_sq_dist(points, sites, scale):
    n = points.shape[0]
    res = np.empty(n)
    sx, sy, sz = scale[0], scale[1], scale[2]
    for i in range(n):
        px = points[i, 0] * sx
        py = points[i, 1] * sy
        pz = points[i, 2] * sz
        best = _INF
        for j in range(sites.shape[0]):
            dx = px - sites[j, 0] * sx
            dy = py - sites[j, 1] * sy
            dz = pz - sites[j, 2] * sz
            d = dx * dx + dy * dy + dz * dz
            if d < best:
                best = d
        res[i] = best
    return res


def min_distances_bruteforce(points: np.ndarray, sites: np.ndarray, spacing) -> np.ndarray:
    """For each row of ``points``, the exact distance to the nearest row of ``sites``."""
    scale = np.asarray(spacing, dtype=np.float64)
    sq = _min_sq_dist(np.ascontiguousarray(points, dtype=np.float64),
                      np.ascontiguousarray(sites, dtype=np.float64), scale)
    return np.sqrt(sq)


# ---------------------------------------------------------------- public API

def _resolve_spacing(mask: VoxelMask, spacing):
    return mask.spacing if spacing is None else tuple(float(s) for s in spacing)


def edt(mask: VoxelMask, spacing=None) -> DistanceField:
    """Exact Euclidean distance transform of ``mask``'s foreground.

    ``spacing`` overrides the mask's own spacing; pass ``(1, 1, 1)`` to
    measure in voxel units.
    """
    if mask.foreground_count == 0:
        raise MaskError("empty reference set")
    spacing = _resolve_spacing(mask, spacing)
    values = np.sqrt(squared_edt(mask.data, spacing))
    values.setflags(write=False)
    return DistanceField(values, spacing, mask.foreground_count)


def edt_bruteforce(mask: VoxelMask, spacing=None) -> DistanceField:
    """Same contract as :func:`edt`, by exhaustive scan. Small grids only."""
    if mask.foreground_count == 0:
        raise MaskError("empty reference set")
    spacing = _resolve_spacing(mask, spacing)
    every = np.indices(mask.dims).reshape(3, -1).T
    sites = np.argwhere(mask.data)
    values = min_distances_bruteforce(every, sites, spacing).reshape(mask.dims)
    values.setflags(write=False)
    return DistanceField(values, spacing, mask.foreground_count)


def directed_distance(source: VoxelMask | np.ndarray, field: DistanceField) -> DirectedResult:
    """Sum, mean and max of the field over the source foreground.

    ``source`` may also be a boolean array (used for boundary point sets).
    """
    data = source.data if isinstance(source, VoxelMask) else np.asarray(source, dtype=bool)
    if data.shape != field.values.shape:
        raise MaskError(f"dims mismatch: source {data.shape} vs field {field.dims}")
    picked = field.values[data]
    if picked.size == 0:
        raise MaskError("empty source set")
    total = float(np.sum(picked))
    return DirectedResult(total, int(picked.size), total / picked.size, float(picked.max()))


def directed_distance_bruteforce(source: VoxelMask | np.ndarray,
                                 target: VoxelMask | np.ndarray,
                                 spacing=(1.0, 1.0, 1.0)) -> DirectedResult:
    """All-pairs minimum distances from source foreground to target foreground."""
    src = source.data if isinstance(source, VoxelMask) else source
    tgt = target.data if isinstance(target, VoxelMask) else target
    points, sites = np.argwhere(src), np.argwhere(tgt)
    if not len(points):
        raise MaskError("empty source set")
    if not len(sites):
        raise MaskError("empty reference set")
    d = min_distances_bruteforce(points, sites, spacing)
    total = float(np.sum(d))
    return DirectedResult(total, len(d), total / len(d), float(d.max()))


def save_field(field: DistanceField, path, *, compress: bool = False) -> None:
    """Debug dump: JSON header + little-endian float64 payload, x-fastest."""
    write_volume(path, field.values, field.spacing, compress=compress, dtype="float64",
                 extra={"reference_foreground_count": field.reference_foreground_count})


def load_field(path) -> DistanceField:
    values, spacing, header = read_volume(path)
    return DistanceField(np.array(values, dtype=np.float64), spacing,
                         int(header.get("reference_foreground_count", 0)))
