"""
Shared fixtures: synthetic natural-looking frames and Y4M sequences
"""
import numpy as np
import pytest

from utils.frame_utils import FrameBuffer, write_y4m


def natural_frame(width: int, height: int, seed: int = 0, shift: int = 0) -> FrameBuffer:
    """Smooth gradients, a few hard edges and textured patches, reproducible from seed"""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    xs = xs + shift
    base = 90 + 60 * np.sin(xs / 37.0) * np.cos(ys / 23.0)
    base += 40 * (xs + ys > (width + height) / 2)
    # Textured rectangles give the search something worth splitting
    for _ in range(6):
        x0, y0 = rng.integers(0, max(width - 16, 1)), rng.integers(0, max(height - 16, 1))
        w, h = rng.integers(8, 40), rng.integers(8, 40)
        patch = base[y0:y0 + h, x0:x0 + w]
        patch += rng.normal(0, 35, size=patch.shape)
    base += rng.normal(0, 2, size=base.shape)
    return FrameBuffer(width, height, np.clip(np.rint(base), 0, 255).astype(np.uint8))


def natural_sequence(width: int, height: int, count: int, seed: int = 0):
    """Slow horizontal pan over one synthetic scene"""
    return [natural_frame(width, height, seed, shift=2 * index) for index in range(count)]


@pytest.fixture
def frame_128():
    return natural_frame(128, 128, seed=7)


@pytest.fixture
def make_y4m(tmp_path):
    """Write frames to a Y4M file and return its path"""

    def _make(frames, name: str = "clip.y4m", chroma: str = "420"):
        path = tmp_path / name
        write_y4m(str(path), frames, chroma=chroma)
        return str(path)

    return _make


@pytest.fixture
def small_clip(make_y4m):
    """Six 128x96 frames, 4:2:0"""
    return make_y4m(natural_sequence(128, 96, 6, seed=3))
