import numpy as np
import pytest

from dataprep.schemas import ImageSlice, PatientVolume


@pytest.fixture
def volume():
    data = np.random.default_rng(0).random((40, 50, 60)) * 20.0 + 10.0
    return PatientVolume("p001", "clean", data)


@pytest.fixture
def make_slice():
    def _make(pixels, patient="p1", plane="sagittal", index=0, label="clean"):
        return ImageSlice(
            np.asarray(pixels, dtype=np.float64), plane, patient, label, index
        )

    return _make
