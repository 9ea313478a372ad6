from unittest.mock import patch

import numpy as np
import pytest

from dataprep.schemas import ImageSlice
from diffusion import sampler
from diffusion.exceptions import (
    DiffusionError,
    TimestepOutOfRangeError,
    UnnormalizedInputError,
)
from diffusion.predictors import AnalyticGaussianPredictor, ZeroPredictor
from diffusion.sampler import (
    forward_noise,
    reverse_step,
    sample,
    simulate_batch,
    simulate_motion,
)
from diffusion.schedule import make_schedule
from diffusion.schemas import SimulationParams, preset
from modules.autograd import RngStream
from modules.autograd.exceptions import ShapeMismatchError

# 짧은 스케줄에서도 x_T 가 N(0, I) 에 충분히 가깝도록 beta_end 를 키운다
TOY_T = 50
TOY_BETA_END = 0.1


@pytest.fixture
def toy_sched():
    return make_schedule(TOY_T, 1e-4, TOY_BETA_END)


@pytest.fixture
def clean_image():
    rng = np.random.default_rng(7)
    return np.clip(0.2 + 0.05 * rng.standard_normal((16, 16)), 0.0, 1.0)


class TestForwardNoise:
    def test_t_zero_is_identity(self):
        sched = make_schedule(10)
        x0 = np.random.default_rng(0).random((4, 4))
        out = forward_noise(x0, 0, np.ones_like(x0), sched)
        np.testing.assert_array_equal(out.numpy(), x0)

    def test_zero_noise(self):
        sched = make_schedule(10)
        x0 = np.random.default_rng(0).random((4, 4))
        out = forward_noise(x0, 7, np.zeros_like(x0), sched)
        np.testing.assert_allclose(
            out.numpy(), np.sqrt(sched.alpha_bar[7]) * x0, rtol=1e-15
        )

    def test_variance_matches_closed_form(self):
        """x0=0, t=T/2 에서 표본 분산이 1-ᾱ_t 의 2% 이내"""
        sched = make_schedule(500)
        t = 250
        z = RngStream(11).standard_normal((100_000,))
        out = forward_noise(np.zeros(100_000), t, z, sched).numpy()
        expected = 1.0 - sched.alpha_bar[t]
        assert abs(out.var(ddof=1) - expected) / expected < 0.02

    def test_literal_coefficient(self):
        sched = make_schedule(10)
        x0 = np.full((2, 2), 0.5)
        out = forward_noise(
            x0, 5, np.ones((2, 2)), sched, literal_paper_coefficient=True
        )
        ab = sched.alpha_bar[5]
        np.testing.assert_allclose(
            out.numpy(), np.sqrt(ab) * 0.5 + (1.0 - ab), rtol=1e-15
        )

    def test_step_by_step_composition_matches_closed_form(self):
        """한 step 씩 t 번 noising 한 분포 == 한 번에 noising 한 분포"""
        sched = make_schedule(500)
        rng = RngStream(5)
        t = 20
        x = np.full(100_000, 0.7)
        for s in range(1, t + 1):
            z = rng.standard_normal(x.shape)
            x = np.sqrt(sched.alpha[s]) * x + np.sqrt(sched.beta[s]) * z
        ab = sched.alpha_bar[t]
        assert x.mean() == pytest.approx(np.sqrt(ab) * 0.7, rel=0.02)
        assert x.var(ddof=1) == pytest.approx(1.0 - ab, rel=0.02)

    def test_errors(self):
        sched = make_schedule(10)
        x0 = np.zeros((3, 3))
        with pytest.raises(TimestepOutOfRangeError):
            forward_noise(x0, 11, x0, sched)
        with pytest.raises(TimestepOutOfRangeError):
            forward_noise(x0, -1, x0, sched)
        with pytest.raises(ShapeMismatchError):
            forward_noise(x0, 3, np.zeros((2, 3)), sched)


class TestReverseStep:
    def test_zero_predictor_collapses(self):
        sched = make_schedule(100)
        x = np.random.default_rng(1).standard_normal((5, 5))
        out = reverse_step(x, 40, ZeroPredictor(), sched)
        np.testing.assert_allclose(
            out.numpy(), x / np.sqrt(sched.alpha[40]), rtol=1e-15
        )

    @pytest.mark.parametrize("t", [2, 10, 99])
    def test_perfect_predictor_single_point(self, t):
        """x0=c 인 데이터에서 x_t=√ᾱ_t c 이면 결과는 √ᾱ_{t-1} c"""
        sched = make_schedule(100)
        c = 0.37

        def perfect(x_t, step):
            ab = sched.alpha_bar[step]
            return (x_t - np.sqrt(ab) * c) / np.sqrt(1.0 - ab)

        x_t = np.full((3,), np.sqrt(sched.alpha_bar[t]) * c)
        out = reverse_step(x_t, t, perfect, sched, np.zeros(3))
        np.testing.assert_allclose(
            out.numpy(), np.sqrt(sched.alpha_bar[t - 1]) * c, rtol=1e-12
        )

    def test_final_step_must_be_noise_free(self):
        sched = make_schedule(10)
        x = np.zeros((2, 2))
        with pytest.raises(DiffusionError):
            reverse_step(x, 1, ZeroPredictor(), sched, np.ones((2, 2)))
        out = reverse_step(x, 1, ZeroPredictor(), sched, np.zeros((2, 2)))
        np.testing.assert_array_equal(out.numpy(), x)

    def test_noise_is_scaled_by_sigma(self):
        sched = make_schedule(10)
        x = np.zeros((2, 2))
        out = reverse_step(x, 5, ZeroPredictor(), sched, np.ones((2, 2)))
        np.testing.assert_allclose(out.numpy(), sched.sigma[5])

    def test_errors(self):
        sched = make_schedule(10)
        x = np.zeros((2, 2))
        with pytest.raises(TimestepOutOfRangeError):
            reverse_step(x, 0, ZeroPredictor(), sched)
        with pytest.raises(ShapeMismatchError):
            reverse_step(x, 3, ZeroPredictor(), sched, np.zeros((3,)))
        with pytest.raises(ShapeMismatchError):
            reverse_step(x, 3, lambda x_t, t: np.zeros(3), sched)


class TestSample:
    def test_analytic_gaussian_target(self, toy_sched):
        """순수 노이즈에서 시작한 전체 chain 이 N(0.3, 0.2²) 를 따른다."""
        pred = AnalyticGaussianPredictor(0.3, 0.2, toy_sched)
        out = sample(pred, toy_sched, (10_000,), RngStream(2)).numpy()
        assert abs(out.mean() - 0.3) < 0.01
        assert abs(out.std(ddof=1) - 0.2) < 0.02

    def test_deterministic_given_seed(self, toy_sched):
        pred = AnalyticGaussianPredictor(0.3, 0.2, toy_sched)
        a = sample(pred, toy_sched, (4, 4), RngStream(9)).numpy()
        b = sample(pred, toy_sched, (4, 4), RngStream(9)).numpy()
        np.testing.assert_array_equal(a, b)


def scalar_recursion(y, n, sched, mu, s, clip=True):
    """deterministic 모드 partial diffusion 을 스칼라 점화식으로 직접 계산"""
    x = np.sqrt(sched.alpha_bar[n]) * y
    for t in range(n, 0, -1):
        a, ab = sched.alpha[t], sched.alpha_bar[t]
        eps = np.sqrt(1 - ab) * (x - np.sqrt(ab) * mu) / (ab * s * s + 1 - ab)
        x = (x - (1 - a) / np.sqrt(1 - ab) * eps) / np.sqrt(a)
    return np.clip(x, 0.0, 1.0) if clip else x


def partial_chain(x0, n, pred, sched, rng, deterministic=False):
    """[0, 1] 검사와 clip 없이 n 스텝 noising 후 n 스텝 reverse"""
    z0 = np.zeros(x0.shape) if deterministic else rng.standard_normal(x0.shape)
    x = forward_noise(x0, n, z0, sched)
    for t in range(n, 0, -1):
        if deterministic or t == 1:
            z = np.zeros(x0.shape)
        else:
            z = rng.standard_normal(x0.shape)
        x = reverse_step(x, t, pred, sched, z)
    return x.numpy()


class TestSimulateMotion:
    def test_zero_step_is_identity(self, clean_image):
        sched = make_schedule(50)
        params = SimulationParams(n=0, iterations=3)
        item = ImageSlice(clean_image, "sagittal", "p1", "clean", 4)
        assert simulate_motion(
            item, params, ZeroPredictor(), sched, RngStream(0)
        ) is item
        out = simulate_batch(
            clean_image[None], params, ZeroPredictor(), sched, [RngStream(0)]
        )
        np.testing.assert_array_equal(out[0], clean_image)

    def test_preset_j_runs_330_reverse_steps(self):
        sched = make_schedule(500)
        params = preset("J", 500)
        image = np.full((4, 4), 0.5)
        with (
            patch.object(
                sampler, "reverse_step", wraps=sampler.reverse_step
            ) as step,
            patch.object(
                sampler, "forward_noise", wraps=sampler.forward_noise
            ) as noising,
        ):
            simulate_motion(
                image, params, ZeroPredictor(), sched, RngStream(1)
            )
        assert step.call_count == 330
        assert noising.call_count == 1
        assert step.call_args_list[-1].args[1] == 1

    def test_iterations_repeat_the_whole_algorithm(self):
        sched = make_schedule(50)
        params = SimulationParams(n=6, iterations=3)
        with patch.object(
            sampler, "reverse_step", wraps=sampler.reverse_step
        ) as step:
            simulate_motion(
                np.full((2, 2), 0.5),
                params,
                ZeroPredictor(),
                sched,
                RngStream(1),
            )
        assert step.call_count == 18

    def test_gaussian_toy_matches_scalar_recursion(
        self, toy_sched, clean_image
    ):
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        n = TOY_T // 2
        out = simulate_motion(
            clean_image,
            SimulationParams(n=n),
            pred,
            toy_sched,
            RngStream(0),
            deterministic=True,
        ).numpy()
        expected = scalar_recursion(clean_image, n, toy_sched, 0.5, 0.1)
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-14)

    def test_unclipped_chain_matches_scalar_recursion(self, toy_sched):
        """N(0, 0.05²) 스칼라 이미지에서 noise 없는 chain == 점화식"""
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        clean = 0.05 * np.random.default_rng(5).standard_normal(64)
        n = TOY_T // 2
        out = partial_chain(
            clean, n, pred, toy_sched, RngStream(0), deterministic=True
        )
        expected = scalar_recursion(
            clean, n, toy_sched, 0.5, 0.1, clip=False
        )
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("n", [TOY_T // 10, TOY_T // 4, TOY_T - 1])
    def test_output_is_pulled_towards_artifact_distribution(
        self, toy_sched, n
    ):
        """clean N(0, 0.05²) 의 평균과 artifact 평균(0.5) 사이로 끌려간다."""
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        clean = 0.05 * np.random.default_rng(3).standard_normal(10_000)
        out = partial_chain(clean, n, pred, toy_sched, RngStream(3))
        assert 0.0 < out.mean() < 0.5

    def test_clipped_batch_is_pulled_towards_artifact_distribution(
        self, toy_sched
    ):
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        images = np.full((100, 10, 10), 0.2)
        rngs = [RngStream(3).split(i) for i in range(100)]
        params = SimulationParams(n=TOY_T // 4)
        out = simulate_batch(images, params, pred, toy_sched, rngs)
        assert 0.2 < out.mean() < 0.5

    def test_perturbation_grows_with_partial_step(
        self, toy_sched, clean_image
    ):
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        distances = []
        for n in (TOY_T // 10, TOY_T // 4, TOY_T // 2):
            params = SimulationParams(n=n)
            per_seed = [
                np.mean(
                    (
                        simulate_motion(
                            clean_image, params, pred, toy_sched, RngStream(s)
                        ).numpy()
                        - clean_image
                    )
                    ** 2
                )
                for s in range(100)
            ]
            distances.append(np.mean(per_seed))
        assert distances[0] <= distances[1] <= distances[2]

    def test_same_seed_same_output(self, toy_sched, clean_image):
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        params = SimulationParams(n=10, iterations=2)
        a = simulate_motion(clean_image, params, pred, toy_sched, RngStream(4))
        b = simulate_motion(clean_image, params, pred, toy_sched, RngStream(4))
        c = simulate_motion(clean_image, params, pred, toy_sched, RngStream(5))
        np.testing.assert_array_equal(a.numpy(), b.numpy())
        assert not np.array_equal(a.numpy(), c.numpy())

    def test_output_stays_normalized(self, toy_sched, clean_image):
        params = SimulationParams(n=30, iterations=2)
        out = simulate_motion(
            clean_image, params, ZeroPredictor(), toy_sched, RngStream(4)
        ).numpy()
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_image_slice_metadata_is_kept(self, toy_sched, clean_image):
        item = ImageSlice(clean_image, "coronal", "p7", "clean", 12, 3.0, 9.0)
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        out = simulate_motion(
            item, SimulationParams(n=5), pred, toy_sched, RngStream(1)
        )
        assert isinstance(out, ImageSlice)
        assert out.key == item.key
        assert (out.norm_min, out.norm_max) == (3.0, 9.0)
        assert not np.array_equal(out.pixels, item.pixels)

    def test_batch_result_does_not_depend_on_batch_composition(
        self, toy_sched
    ):
        """슬라이스마다 자기 스트림을 쓰므로 함께 돌려도 따로 돌려도 같다."""
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        params = SimulationParams(n=8, iterations=2)
        images = np.random.default_rng(0).random((2, 6, 6))
        root = RngStream(21)
        together = simulate_batch(
            images, params, pred, toy_sched, [root.split(0), root.split(1)]
        )
        alone = simulate_batch(
            images[1:], params, pred, toy_sched, [root.split(1)]
        )
        np.testing.assert_array_equal(together[1], alone[0])

    def test_noise_reuse_and_literal_coefficient_change_output(
        self, toy_sched, clean_image
    ):
        pred = AnalyticGaussianPredictor(0.5, 0.1, toy_sched)
        params = SimulationParams(n=10, iterations=3)

        def run(**options):
            return simulate_motion(
                clean_image, params, pred, toy_sched, RngStream(8), **options
            ).numpy()

        base = run()
        assert not np.array_equal(base, run(fresh_noise_per_iteration=False))
        assert not np.array_equal(base, run(literal_paper_coefficient=True))

    def test_unnormalized_input(self, toy_sched):
        image = np.full((4, 4), 1.5)
        with pytest.raises(UnnormalizedInputError):
            simulate_motion(
                image,
                SimulationParams(n=5),
                ZeroPredictor(),
                toy_sched,
                RngStream(0),
            )

    def test_partial_step_must_be_below_T(self, toy_sched):
        with pytest.raises(TimestepOutOfRangeError):
            simulate_motion(
                np.full((4, 4), 0.5),
                SimulationParams(n=TOY_T),
                ZeroPredictor(),
                toy_sched,
                RngStream(0),
            )

    def test_one_stream_per_slice(self, toy_sched):
        with pytest.raises(ValueError):
            simulate_batch(
                np.zeros((2, 4, 4)),
                SimulationParams(n=3),
                ZeroPredictor(),
                toy_sched,
                [RngStream(0)],
            )
