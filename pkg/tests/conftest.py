import numpy as np
import pytest

from bavd.volume import VoxelMask

ACCEPTANCE_LINES: list[str] = []


def line_mask(points, dims=None, spacing=(1.0, 1.0, 1.0)):
    """Mask with foreground at x positions ``points`` on the line y = z = 0."""
    if dims is None:
        dims = (max(points) + 1, 1, 1)
    return VoxelMask.from_voxels(dims, [(p, 0, 0) for p in points], spacing)


def random_mask(rng, dims, density, spacing=(1.0, 1.0, 1.0)):
    """Random mask; ``density=None`` means exactly one foreground voxel."""
    data = np.zeros(dims, dtype=bool)
    if density is None:
        data[tuple(rng.integers(0, d) for d in dims)] = True
    else:
        data = rng.random(dims) < density
        if not data.any():
            data[tuple(rng.integers(0, d) for d in dims)] = True
    return VoxelMask(data, spacing)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
