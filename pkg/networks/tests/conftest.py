import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from dataprep.schemas import PROVENANCE_REAL, ImageSlice, PairedSample
from networks.schemas import UNetConfig


def smooth_image(rng: np.random.Generator, size: int = 16) -> np.ndarray:
    image = gaussian_filter(rng.random((size, size)), 1.5)
    image = image - image.min()
    return image / image.max()


def _identity_pairs(patients, per_patient, size=16, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    for patient in patients:
        for index in range(per_patient):
            item = ImageSlice(
                smooth_image(rng, size), "sagittal", patient, "clean", index
            )
            pairs.append(PairedSample(item, item, PROVENANCE_REAL))
    return pairs


@pytest.fixture
def identity_pairs():
    """(clean, clean) pair 목록을 만드는 factory. 환자 id 는 patients 그대로."""
    return _identity_pairs


@pytest.fixture
def tiny_cfg():
    return UNetConfig(levels=1, base_channels=2)


@pytest.fixture
def corrector_cfg():
    return UNetConfig(levels=1, base_channels=4, init="dirac")
