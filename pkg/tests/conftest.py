import numpy as np
import pytest

from scenefeat.types import SegmentationMask


@pytest.fixture
def chair_mask():
    """Small chiral chair-profile glyph: seat slab, backrest, two legs."""
    arr = np.zeros((24, 24), dtype=np.int64)
    arr[4:14, 15:18] = 1  # backrest (right side only: chirality)
    arr[12:15, 5:18] = 1  # seat
    arr[15:21, 6:8] = 1  # front leg
    arr[15:21, 14:16] = 1  # back leg
    return SegmentationMask(arr, 1)


def random_mask(seed: int, width: int = 64, height: int = 64, seg_categories: int = 5):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, seg_categories + 1, size=(height, width))
    return SegmentationMask(arr, seg_categories)


@pytest.fixture
def random_mask_factory():
    return random_mask
