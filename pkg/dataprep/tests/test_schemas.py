import numpy as np
import pytest

from dataprep.exceptions import InvalidVolumeError, PairingError
from dataprep.schemas import (
    PROVENANCE_DIFFUSION,
    ImageSlice,
    PairedSample,
    PatientVolume,
    SplitPlan,
)


class TestPatientVolume:
    @pytest.mark.parametrize(
        "shape", [(7, 8, 8), (8, 8, 2), (8, 8), (8, 8, 8, 8)]
    )
    def test_dimension_limits(self, shape):
        with pytest.raises(InvalidVolumeError):
            PatientVolume("p", "clean", np.zeros(shape))

    def test_non_finite_voxels(self):
        data = np.zeros((8, 8, 8))
        data[1, 2, 3] = np.nan
        with pytest.raises(InvalidVolumeError):
            PatientVolume("p", "clean", data)


class TestPairedSample:
    def test_sides_must_share_key(self, make_slice):
        """(patient, plane, index) 가 다르면 생성 자체가 실패한다."""
        rng = np.random.default_rng(0)
        pixels = np.zeros((4, 4))
        for _ in range(200):
            a = (
                f"p{rng.integers(3)}",
                ["sagittal", "coronal"][rng.integers(2)],
                int(rng.integers(3)),
            )
            b = (
                f"p{rng.integers(3)}",
                ["sagittal", "coronal"][rng.integers(2)],
                int(rng.integers(3)),
            )
            clean = ImageSlice(pixels, a[1], a[0], "clean", a[2])
            degraded = ImageSlice(pixels, b[1], b[0], "motion1", b[2])
            if a == b:
                pair = PairedSample(clean, degraded, PROVENANCE_DIFFUSION)
                assert pair.key == a
                assert pair.patient_id == a[0]
            else:
                with pytest.raises(PairingError):
                    PairedSample(clean, degraded, PROVENANCE_DIFFUSION)

    def test_shape_and_provenance(self, make_slice):
        clean = make_slice(np.zeros((4, 4)))
        with pytest.raises(PairingError):
            PairedSample(clean, make_slice(np.zeros((4, 5))), "real")
        with pytest.raises(PairingError):
            PairedSample(clean, clean, "imagined")


class TestSplitPlan:
    def test_disjointness_check(self):
        assert SplitPlan(ddpm_train=["a"], test=["b"]).is_disjoint()
        assert not SplitPlan(ddpm_train=["a"], unet_val=["a"]).is_disjoint()

    def test_split_of(self):
        plan = SplitPlan(unet_train=["x"], test=["y"])
        assert plan.split_of("x") == "unet_train"
        assert plan.split_of("z") is None

    def test_round_trip_through_dict(self):
        plan = SplitPlan(ddpm_train=["a", "b"], test=["c"], seed=9)
        assert SplitPlan.from_dict(plan.to_json_dict()) == plan
