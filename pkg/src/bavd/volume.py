"""Binary voxel masks, their on-disk format and simple set algebra.

Masks are stored in memory as boolean arrays indexed ``[x, y, z]``.  On disk a
mask is a JSON header plus a raw ``uint8`` payload laid out x-fastest
(``index = x + nx*y + nx*ny*z``), optionally gzip-compressed when the payload
name ends in ``.gz``.
"""
from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

Spacing = tuple[float, float, float]
Dims = tuple[int, int, int]


class MaskError(ValueError):
    """Raised for malformed masks, headers or payloads."""


class VoxelSet:
    """A deduplicated set of integer voxel coordinates.

    Coordinates are kept as an ``(n, 3)`` int64 array sorted in file order
    (z, then y, then x), so two sets holding the same voxels compare equal
    and iterate identically.
    """

    __slots__ = ("coords",)

    def __init__(self, coords=None):
        if coords is None:
            arr = np.empty((0, 3), dtype=np.int64)
        else:
            arr = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        if len(arr):
            order = np.lexsort((arr[:, 0], arr[:, 1], arr[:, 2]))
            arr = arr[order]
            keep = np.ones(len(arr), dtype=bool)
            keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
            arr = arr[keep]
        arr.setflags(write=False)
        self.coords = arr

    @classmethod
    def from_mask(cls, data: np.ndarray) -> "VoxelSet":
        return cls(np.argwhere(data))

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self) -> Iterator[tuple[int, int, int]]:
        for x, y, z in self.coords:
            yield int(x), int(y), int(z)

    def __contains__(self, voxel) -> bool:
        return bool(np.any(np.all(self.coords == np.asarray(voxel), axis=1)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoxelSet):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        if len(self) <= 6:
            return f"VoxelSet({list(self)})"
        return f"VoxelSet(<{len(self)} voxels>)"

    def union(self, other: "VoxelSet") -> "VoxelSet":
        return VoxelSet(np.concatenate([self.coords, other.coords]))

    def isdisjoint(self, other: "VoxelSet") -> bool:
        if not len(self) or not len(other):
            return True
        both = np.concatenate([self.coords, other.coords])
        return len(VoxelSet(both)) == len(self) + len(other)

    def to_list(self) -> list[list[int]]:
        return self.coords.tolist()

    def index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fancy-index tuple for an ``[x, y, z]`` array."""
        return self.coords[:, 0], self.coords[:, 1], self.coords[:, 2]


@dataclass(frozen=True, eq=False)
class VoxelMask:
    """Immutable binary 3D mask with per-axis physical spacing (mm)."""

    data: np.ndarray
    spacing: Spacing = (1.0, 1.0, 1.0)
    _count: int = field(default=-1, repr=False, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise MaskError(f"mask data must be 3D, got shape {data.shape}")
        if min(data.shape) < 1:
            raise MaskError(f"dims must be positive, got {data.shape}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in spacing):
            raise MaskError(f"spacing must be three positive numbers, got {self.spacing}")
        if data.dtype != np.bool_ or data.flags.writeable:
            data = np.array(data != 0, dtype=bool)
            data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "_count", int(np.count_nonzero(data)))

    @classmethod
    def empty(cls, dims, spacing=(1.0, 1.0, 1.0)) -> "VoxelMask":
        return cls(np.zeros(tuple(int(d) for d in dims), dtype=bool), spacing)

    @classmethod
    def from_voxels(cls, dims, voxels, spacing=(1.0, 1.0, 1.0)) -> "VoxelMask":
        data = np.zeros(tuple(int(d) for d in dims), dtype=bool)
        vs = voxels if isinstance(voxels, VoxelSet) else VoxelSet(list(voxels))
        _check_bounds(vs, data.shape)
        data[vs.index()] = True
        return cls(data, spacing)

    @property
    def dims(self) -> Dims:
        return tuple(int(d) for d in self.data.shape)

    @property
    def foreground_count(self) -> int:
        return self._count

    def foreground(self) -> VoxelSet:
        return VoxelSet.from_mask(self.data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoxelMask):
            return NotImplemented
        return (self.dims == other.dims and self.spacing == other.spacing
                and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.dims, self.spacing, np.packbits(self.data).tobytes()))

    def to_bytes(self) -> bytes:
        """Payload bytes, x-fastest uint8."""
        return self.data.astype(np.uint8).tobytes(order="F")


def _check_bounds(voxels: VoxelSet, dims) -> None:
    if not len(voxels):
        return
    c = voxels.coords
    bad = np.any((c < 0) | (c >= np.asarray(dims)), axis=1)
    if bad.any():
        x, y, z = c[np.argmax(bad)]
        raise MaskError(f"voxel ({x},{y},{z}) outside dims {tuple(dims)}")


# ---------------------------------------------------------------- file I/O

def _payload_name(path: Path, compress: bool) -> str:
    return path.with_suffix(".raw.gz" if compress else ".raw").name


def write_volume(path, array: np.ndarray, spacing, *, compress: bool = False,
                 dtype: str = "uint8", extra: dict | None = None) -> None:
    """Write any 3D array as header + x-fastest little-endian payload."""
    path = Path(path)
    payload_name = _payload_name(path, compress)
    raw = np.asarray(array, dtype=np.dtype(dtype).newbyteorder("<")).tobytes(order="F")
    header = {
        "dims": [int(d) for d in array.shape],
        "spacing": [float(s) for s in spacing],
        "payload": payload_name,
    }
    if dtype != "uint8":
        header["dtype"] = dtype
    if extra:
        header.update(extra)
    payload_path = path.parent / payload_name
    if compress:
        raw = gzip.compress(raw, mtime=0)
    payload_path.write_bytes(raw)
    path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")


def read_volume(path) -> tuple[np.ndarray, Spacing, dict]:
    """Read a header + payload pair; returns ``(array, spacing, header)``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such header file: {path}")
    try:
        header = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MaskError(f"malformed JSON header {path}: {exc}") from exc
    if not isinstance(header, dict):
        raise MaskError(f"header {path} is not a JSON object")
    try:
        dims = tuple(int(d) for d in header["dims"])
        spacing = tuple(float(s) for s in header.get("spacing", (1, 1, 1)))
        payload_name = header["payload"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MaskError(f"header {path} missing or invalid field: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise MaskError(f"dims must be three positive integers, got {header['dims']}")
    if len(spacing) != 3 or min(spacing) <= 0:
        raise MaskError(f"spacing must be three positive numbers, got {header.get('spacing')}")
    payload_path = path.parent / payload_name
    if not payload_path.is_file():
        raise FileNotFoundError(f"no such payload file: {payload_path}")
    raw = payload_path.read_bytes()
    if payload_path.name.endswith(".gz"):
        raw = gzip.decompress(raw)
    dtype = np.dtype(header.get("dtype", "uint8")).newbyteorder("<")
    n = dims[0] * dims[1] * dims[2]
    if len(raw) != n * dtype.itemsize:
        raise MaskError(
            f"payload length mismatch: expected {n * dtype.itemsize} bytes for dims "
            f"{list(dims)}, got {len(raw)}")
    array = np.frombuffer(raw, dtype=dtype).reshape(dims, order="F")
    return array, spacing, header


def load_mask(path) -> VoxelMask:
    """Load a mask from its JSON header; any nonzero payload byte is foreground."""
    array, spacing, header = read_volume(path)
    mask = VoxelMask(array != 0, spacing)
    expected = header.get("foreground_count")
    if expected is not None and int(expected) != mask.foreground_count:
        raise MaskError(
            f"foreground_count mismatch: header says {expected}, payload has "
            f"{mask.foreground_count}")
    return mask


def save_mask(mask: VoxelMask, path, *, compress: bool = False) -> None:
    """Write ``mask`` as ``<path>`` (JSON header) plus ``.raw`` or ``.raw.gz`` payload."""
    write_volume(path, mask.data, mask.spacing, compress=compress,
                 extra={"foreground_count": mask.foreground_count})


def convert_mask(src, dst, *, compress: bool) -> None:
    save_mask(load_mask(src), dst, compress=compress)


# ------------------------------------------------------------ set algebra

def apply_delta(mask: VoxelMask, voxels: VoxelSet | Iterable, mode: str) -> VoxelMask:
    """Add (union) or remove (subtract) a voxel set, returning a new mask.

    ``add`` requires the voxels to be background, ``remove`` requires them to
    be foreground; violations raise :class:`MaskError` naming the first
    offending coordinate.
    """
    vs = voxels if isinstance(voxels, VoxelSet) else VoxelSet(list(voxels))
    _check_bounds(vs, mask.dims)
    hit = mask.data[vs.index()]
    data = mask.data.copy()
    if mode == "add":
        if hit.any():
            x, y, z = vs.coords[np.argmax(hit)]
            raise MaskError(f"overlap at ({x},{y},{z})")
        data[vs.index()] = True
    elif mode == "remove":
        if not hit.all():
            x, y, z = vs.coords[np.argmin(hit)]
            raise MaskError(f"not in foreground at ({x},{y},{z})")
        data[vs.index()] = False
    else:
        raise ValueError(f"mode must be 'add' or 'remove', got {mode!r}")
    return VoxelMask(data, mask.spacing)


def boundary_data(data: np.ndarray) -> np.ndarray:
    """Foreground voxels with a background or out-of-grid 6-neighbour."""
    padded = np.pad(data, 1, constant_values=False)
    interior = data.copy()
    for axis in range(3):
        for shift in (-1, 1):
            interior &= np.roll(padded, shift, axis=axis)[1:-1, 1:-1, 1:-1]
    return data & ~interior


def boundary_voxels(mask: VoxelMask) -> VoxelSet:
    return VoxelSet.from_mask(boundary_data(mask.data))
