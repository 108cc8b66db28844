import numpy as np
import pytest

from wheelgen.core import SymmetryConfig
from wheelgen.pipeline import (
    ConditioningBundle,
    DenoiseSchedule,
    SubProcessPlan,
    denoise_range,
    init_state,
    linear_schedule,
    output_rng,
    project_constraints,
    run_pipeline,
    sample_one,
)
from wheelgen.symmetry import symmetry_score

from conftest import CANVAS, make_image, make_request


def vanilla_sample(backend, schedule, cond, seed, index, shape):
    """Independent textbook ancestral DDPM loop (test oracle)."""
    rng = output_rng(seed, index)
    x = rng.standard_normal(shape)
    for t in range(schedule.T, 0, -1):
        eps = backend.predict_noise(x, t, cond)
        beta = schedule.beta(t)
        ab = schedule.alpha_bar(t)
        ab_prev = schedule.alpha_bar(t - 1)
        mean = (x - beta / np.sqrt(1.0 - ab) * eps) / np.sqrt(schedule.alpha(t))
        if t > 1:
            var = beta * (1.0 - ab_prev) / (1.0 - ab)
            x = mean + np.sqrt(var) * rng.standard_normal(shape)
        else:
            x = mean
    return np.clip(x, 0.0, 1.0)


EMPTY_COND = ConditioningBundle(prompt="")


class TestSchedule:
    def test_alpha_bar_strictly_decreasing(self):
        s = linear_schedule(100)
        assert np.all(np.diff(s.alpha_bars) < 0)

    def test_beta_bounds_enforced(self):
        with pytest.raises(ValueError):
            DenoiseSchedule(np.array([0.0, 0.5]))
        with pytest.raises(ValueError):
            DenoiseSchedule(np.array([0.5, 1.0]))

    def test_alpha_bar_at_zero_is_one(self):
        assert linear_schedule(10).alpha_bar(0) == 1.0


class TestPlan:
    def test_boundaries_sorted_and_validated(self):
        plan = SubProcessPlan(boundaries=(150, 50))
        assert plan.boundaries == (50, 150)
        with pytest.raises(ValueError):
            SubProcessPlan(boundaries=(50, 50))
        with pytest.raises(ValueError):
            SubProcessPlan(boundaries=(250,)).validate(200)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            SubProcessPlan(project_mode="sideways")


class TestInitState:
    def test_no_sketch_standard_normal_at_T(self, schedule):
        state, step = init_state(None, schedule, 100, output_rng(0, 0), shape=(CANVAS, CANVAS))
        assert step == schedule.T
        assert abs(state.mean()) < 0.05 and abs(state.std() - 1.0) < 0.05

    def test_sketch_low_step_approaches_sketch(self, schedule):
        sketch = make_image(1)
        state, step = init_state(sketch, schedule, 1, output_rng(0, 0))
        # at step 1 nearly all signal is kept
        assert step == 1
        assert np.abs(state - sketch).mean() < 0.05

    def test_monte_carlo_forward_moments(self, schedule):
        # closed form: mean sqrt(abar_t) * sketch, std sqrt(1 - abar_t)
        sketch = np.full((4, 4), 0.5)
        t = schedule.T // 2
        rng = output_rng(7, 0)
        draws = np.stack([init_state(sketch, schedule, t, rng)[0] for _ in range(10000)])
        ab = schedule.alpha_bar(t)
        expect_mean = np.sqrt(ab) * 0.5
        sigma = np.sqrt(1.0 - ab)
        tol = 3.0 * sigma / np.sqrt(10000)
        assert np.all(np.abs(draws.mean(axis=0) - expect_mean) < tol)
        assert abs(draws.std() - sigma) < 0.05

    def test_start_step_out_of_range(self, schedule):
        with pytest.raises(ValueError):
            init_state(make_image(0), schedule, schedule.T + 1, output_rng(0, 0))


class TestDenoiseRange:
    def test_empty_range_is_identity(self, schedule, zero_backend):
        state = make_image(2)
        out = denoise_range(state, 50, 50, EMPTY_COND, zero_backend, schedule, output_rng(0, 0))
        np.testing.assert_array_equal(out, state)

    def test_single_step_matches_hand_computation(self, schedule, zero_backend):
        # zero-predicting backend: mean = x / sqrt(alpha_t), plus the
        # posterior-variance noise term
        t = 100
        state = make_image(3)
        rng1 = output_rng(5, 0)
        out = denoise_range(state, t, t - 1, EMPTY_COND, zero_backend, schedule, rng1)
        rng2 = output_rng(5, 0)
        beta = schedule.beta(t)
        ab, ab_prev = schedule.alpha_bar(t), schedule.alpha_bar(t - 1)
        expected = state / np.sqrt(schedule.alpha(t)) + np.sqrt(
            beta * (1.0 - ab_prev) / (1.0 - ab)
        ) * rng2.standard_normal(state.shape)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_final_step_adds_no_noise(self, schedule, zero_backend):
        state = make_image(4)
        out = denoise_range(state, 1, 0, EMPTY_COND, zero_backend, schedule, output_rng(0, 0))
        np.testing.assert_allclose(out, state / np.sqrt(schedule.alpha(1)), atol=1e-12)

    def test_deterministic_given_seed(self, schedule, pattern_backend):
        a = denoise_range(
            output_rng(9, 0).standard_normal((CANVAS, CANVAS)), schedule.T, 0,
            EMPTY_COND, pattern_backend, schedule, output_rng(9, 1),
        )
        b = denoise_range(
            output_rng(9, 0).standard_normal((CANVAS, CANVAS)), schedule.T, 0,
            EMPTY_COND, pattern_backend, schedule, output_rng(9, 1),
        )
        np.testing.assert_array_equal(a, b)

    def test_invalid_range_rejected(self, schedule, zero_backend):
        with pytest.raises(ValueError):
            denoise_range(make_image(0), 10, 20, EMPTY_COND, zero_backend, schedule, output_rng(0, 0))

    def test_x0_range_backend_clamps_posterior_mean(self, schedule, zero_backend):
        # a backend advertising x0_range gets the q-posterior update with the
        # implied x0 clamped; with eps=0 and a hot state the clamp saturates
        class Clamped:
            id = "stub-zero-clamped"
            canvas = zero_backend.canvas
            parallel_safe = True
            x0_range = (0.0, 1.0)
            predict_noise = staticmethod(zero_backend.predict_noise)

        t = schedule.T  # alpha_bar tiny: x/sqrt(ab) far outside [0,1]
        state = make_image(3) + 2.0
        out = denoise_range(state, t, t - 1, EMPTY_COND, Clamped(), schedule, output_rng(5, 0))
        beta = schedule.beta(t)
        ab, ab_prev = schedule.alpha_bar(t), schedule.alpha_bar(t - 1)
        x0 = np.clip(state / np.sqrt(ab), 0.0, 1.0)
        assert np.all(x0 == 1.0)
        expected = (np.sqrt(ab_prev) * beta * x0
                    + np.sqrt(schedule.alpha(t)) * (1.0 - ab_prev) * state) / (1.0 - ab)
        expected += np.sqrt(beta * (1.0 - ab_prev) / (1.0 - ab)) * output_rng(5, 0).standard_normal(state.shape)
        np.testing.assert_allclose(out, expected, atol=1e-12)


class TestProjectConstraints:
    def test_symmetry_disabled_is_identity(self, schedule, zero_backend):
        state = make_image(5)
        out = project_constraints(
            state, 100, SymmetryConfig(enabled=False), schedule, zero_backend,
            EMPTY_COND, output_rng(0, 0),
        )
        np.testing.assert_array_equal(out, state)

    def test_on_sample_symmetric_state_only_masked(self, schedule, zero_backend):
        from wheelgen.symmetry import symmetrize

        state = symmetrize(make_image(6), 4)
        sym = SymmetryConfig(k=4, radius=20.0)
        out = project_constraints(
            state, 100, sym, schedule, zero_backend, EMPTY_COND, output_rng(0, 0),
            mode="on_sample",
        )
        # away from the edge fade the (already symmetric) state survives
        rr, cc = np.meshgrid(np.arange(CANVAS), np.arange(CANVAS), indexing="ij")
        dist = np.hypot(rr - 31.5, cc - 31.5)
        assert np.abs(out - state)[dist <= 16].mean() <= 2.0 / 255.0
        assert np.all(out[dist > 20.0] == 1.0)

    def test_on_x0_mode_projects_clean_estimate(self, schedule, zero_backend):
        # with a zero-predicting backend the implied x0 is state/sqrt(abar);
        # after projection the implied clean image must be symmetric
        t = 120
        state = output_rng(3, 0).standard_normal((CANVAS, CANVAS)) * 0.3 + 0.5
        sym = SymmetryConfig(k=4)
        rng = output_rng(3, 1)
        out = project_constraints(state, t, sym, schedule, zero_backend, EMPTY_COND, rng)
        # reconstruct the projected x0 from the known renoising draw
        rng2 = output_rng(3, 1)
        ab = schedule.alpha_bar(t)
        noise = rng2.standard_normal(state.shape)
        x0 = (out - np.sqrt(1.0 - ab) * noise) / np.sqrt(ab)
        assert symmetry_score(np.clip(x0, 0, 1), 4) <= 2.0 / 255.0


class TestRunPipeline:
    def test_degenerate_plan_equals_vanilla(self, schedule, pattern_backend):
        req = make_request(
            symmetry=SymmetryConfig(enabled=False), output_count=2, seed=31,
        )
        plan = SubProcessPlan(boundaries=())
        results = run_pipeline(req, EMPTY_COND, pattern_backend, schedule, plan)
        for res in results:
            oracle = vanilla_sample(
                pattern_backend, schedule, EMPTY_COND, 31, res.index, (CANVAS, CANVAS)
            )
            np.testing.assert_array_equal(res.image, oracle)

    def test_final_replication_yields_symmetric_outputs(self, schedule, zero_backend):
        req = make_request(symmetry=SymmetryConfig(k=4, final_replication=True), seed=5,
                           backend_id="stub-zero")
        plan = SubProcessPlan(boundaries=(schedule.T // 3,))
        results = run_pipeline(req, EMPTY_COND, zero_backend, schedule, plan)
        assert all(res.ok for res in results)
        assert symmetry_score(results[0].image, 4) <= 2.0 / 255.0

    def test_output_count_distinct_images(self, schedule, zero_backend):
        req = make_request(output_count=6, seed=1, backend_id="stub-zero",
                           symmetry=SymmetryConfig(enabled=False))
        results = run_pipeline(req, EMPTY_COND, zero_backend, schedule, SubProcessPlan())
        images = [res.image.tobytes() for res in results]
        assert len(set(images)) == 6

    def test_seed_determinism_bitwise(self, schedule, pattern_backend):
        req = make_request(seed=77, output_count=2)
        plan = SubProcessPlan(boundaries=(60, 140))
        a = run_pipeline(req, EMPTY_COND, pattern_backend, schedule, plan)
        b = run_pipeline(req, EMPTY_COND, pattern_backend, schedule, plan)
        for ra, rb in zip(a, b):
            assert ra.image.tobytes() == rb.image.tobytes()

    def test_outputs_in_unit_range(self, schedule, pattern_backend):
        req = make_request(seed=2)
        results = run_pipeline(req, EMPTY_COND, pattern_backend, schedule,
                               SubProcessPlan(boundaries=(100,)))
        img = results[0].image
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_backend_failure_becomes_error_marker(self, schedule):
        class Exploding:
            id = "boom"
            canvas = CANVAS
            parallel_safe = True

            def predict_noise(self, x, t, cond):
                raise RuntimeError("kaput")

        req = make_request(backend_id="boom", output_count=2)
        results = run_pipeline(req, EMPTY_COND, Exploding(), schedule, SubProcessPlan())
        assert all(not res.ok for res in results)
        assert "kaput" in results[0].error and "step" in results[0].error

    def test_sketch_start_step_shortens_run(self, schedule, zero_backend):
        sketch = make_image(8)
        req = make_request(sketch=sketch, sketch_strength=0.25, seed=3,
                           backend_id="stub-zero", symmetry=SymmetryConfig(enabled=False))
        out = sample_one(req, EMPTY_COND, zero_backend, schedule, SubProcessPlan(), 0)
        # with half the noise schedule the sketch still shines through
        corr = np.corrcoef(out.ravel(), sketch.ravel())[0, 1]
        assert corr > 0.1

    def test_constraint_monotonicity_median(self, schedule, zero_backend):
        # adding a projection boundary must not increase the median score
        req_base = make_request(
            symmetry=SymmetryConfig(k=4, final_replication=False), backend_id="stub-zero",
        )
        scores = {(): [], (schedule.T // 10,): []}
        for boundaries in scores:
            for seed in range(20):
                req = make_request(
                    symmetry=SymmetryConfig(k=4, final_replication=False),
                    backend_id="stub-zero", seed=seed,
                )
                out = sample_one(req, EMPTY_COND, zero_backend, schedule,
                                 SubProcessPlan(boundaries=boundaries), 0)
                scores[boundaries].append(symmetry_score(out, 4))
        assert np.median(scores[(schedule.T // 10,)]) <= np.median(scores[()])
        del req_base
