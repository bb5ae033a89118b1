"""Loss, surrogate search, exhaustive oracle, and profile training."""

import numpy as np
import pytest

from fhcodec.optimizer import (
    LossWeights,
    MantissaBitwidthTrainer,
    RbfSurrogate,
    TrainingScenario,
    exhaustive_minimize,
    monotone_projection,
    profile_loss,
    surrogate_minimize,
    train_profile,
)


class TestProfileLoss:
    def test_on_target_uniform(self):
        w = LossWeights(alpha=32.0, beta=0.5, evm_target_percent=1.6)
        assert profile_loss([6] * 16, 1.6, w) == pytest.approx(6.0, abs=1e-12)

    def test_single_ascent_penalty(self):
        w = LossWeights(alpha=32.0, beta=0.5, evm_target_percent=2.0)
        assert profile_loss([2, 4], 1.0, w) == pytest.approx(3.0 + 0.5 * 2, abs=1e-12)

    def test_evm_overshoot_penalty(self):
        w = LossWeights(alpha=32.0, beta=0.5, evm_target_percent=1.0)
        assert profile_loss([6] * 16, 1.1, w) == pytest.approx(9.2, abs=1e-9)

    def test_undershoot_costs_nothing(self):
        w = LossWeights(evm_target_percent=2.0)
        assert profile_loss([6, 6], 0.5, w) == pytest.approx(6.0, abs=1e-12)

    def test_monotone_in_bits_when_other_terms_fixed(self):
        w = LossWeights(evm_target_percent=1.0)
        lo = profile_loss([4, 4, 4], 0.5, w)
        hi = profile_loss([5, 4, 4], 0.5, w)
        assert hi > lo

    def test_requires_target(self):
        with pytest.raises(ValueError, match="target"):
            profile_loss([6, 6], 1.0, LossWeights())

    def test_invalid_weights(self):
        with pytest.raises(ValueError, match="positive"):
            LossWeights(alpha=0.0)


class TestMonotoneProjection:
    def test_forward_clamp(self):
        assert monotone_projection([6, 7, 5, 6]).tolist() == [6, 6, 5, 5]

    def test_idempotent(self):
        once = monotone_projection([3, 9, 2, 8, 1])
        assert np.array_equal(monotone_projection(once), once)

    def test_already_monotone_untouched(self):
        assert monotone_projection([8, 5, 5, 1]).tolist() == [8, 5, 5, 1]


class TestRbfSurrogate:
    def test_interpolates_samples(self):
        rng = np.random.default_rng(0)
        points = rng.integers(1, 11, size=(30, 3)).astype(float)
        points = np.unique(points, axis=0)
        values = rng.standard_normal(points.shape[0])
        model = RbfSurrogate().fit(points, values)
        assert np.max(np.abs(model.predict(points) - values)) < 1e-8


class TestSurrogateMinimize:
    def test_separable_convex(self):
        objective = lambda b: float(np.sum((b - 3) ** 2))
        best = surrogate_minimize(objective, dim=4, bounds=(1, 10), budget=120, seed=1)
        assert best.tolist() == [3, 3, 3, 3]

    def test_full_enumeration_matches_exhaustive(self):
        rng = np.random.default_rng(2)
        table = rng.standard_normal((4, 4, 4))
        objective = lambda b: float(table[b[0] - 1, b[1] - 1, b[2] - 1])
        best = surrogate_minimize(objective, dim=3, bounds=(1, 4), budget=64, seed=2)
        oracle = exhaustive_minimize(objective, dim=3, bounds=(1, 4))
        assert best.tolist() == oracle.tolist()

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(3)
        table = rng.standard_normal((10, 10))
        objective = lambda b: float(table[b[0] - 1, b[1] - 1])
        a = surrogate_minimize(objective, dim=2, budget=30, seed=7, full_output=True)
        b = surrogate_minimize(objective, dim=2, budget=30, seed=7, full_output=True)
        assert a[0].tolist() == b[0].tolist()
        assert a[1] == b[1]
        assert list(a[2]) == list(b[2])

    def test_budget_and_bounds_respected(self):
        calls = []

        def objective(b):
            calls.append(b.copy())
            return float(np.sum(b))

        best = surrogate_minimize(objective, dim=3, bounds=(2, 5), budget=25, seed=4)
        assert len(calls) <= 25
        assert all(np.all((c >= 2) & (c <= 5)) for c in calls)
        assert best.tolist() == [2, 2, 2]

    def test_budget_too_small(self):
        with pytest.raises(ValueError, match="budget"):
            surrogate_minimize(lambda b: 0.0, dim=5, budget=6)

    def test_initial_points_validated(self):
        with pytest.raises(ValueError, match="outside bounds"):
            surrogate_minimize(lambda b: 0.0, dim=2, bounds=(1, 4), budget=10,
                               initial_points=[(0, 1)])

    def test_initial_point_is_used(self):
        seen = []

        def objective(b):
            seen.append(tuple(b))
            return float(np.sum(b))

        surrogate_minimize(objective, dim=3, bounds=(1, 10), budget=12, seed=5,
                           initial_points=[(6, 6, 6)])
        assert (6, 6, 6) in seen


class TestExhaustiveMinimize:
    def test_constant_returns_lexicographically_smallest(self):
        best = exhaustive_minimize(lambda b: 1.0, dim=3, bounds=(2, 4))
        assert best.tolist() == [2, 2, 2]

    def test_single_minimum_table(self):
        objective = lambda b: 0.0 if tuple(b) == (1, 3) else 1.0
        assert exhaustive_minimize(objective, dim=2, bounds=(1, 4)).tolist() == [1, 3]

    def test_space_too_large(self):
        with pytest.raises(ValueError, match="too large"):
            exhaustive_minimize(lambda b: 0.0, dim=6, bounds=(1, 10))

    def test_agrees_with_surrogate_on_random_instances(self):
        rng = np.random.default_rng(6)
        for trial in range(5):
            table = rng.standard_normal((4, 4, 4))
            objective = lambda b: float(table[b[0] - 1, b[1] - 1, b[2] - 1])
            sur = surrogate_minimize(objective, dim=3, bounds=(1, 4), budget=64,
                                     seed=trial)
            exh = exhaustive_minimize(objective, dim=3, bounds=(1, 4))
            assert sur.tolist() == exh.tolist()


def synthetic_scenario(strength, n_beam=2, floor=0.02):
    """EVM model where only beams with positive strength matter."""
    strength = np.asarray(strength, dtype=float)

    def evaluate(profile):
        noise = np.sum(strength * 4.0 ** -np.asarray(profile, dtype=float))
        return 100.0 * np.sqrt(noise + floor**2)

    baseline = evaluate(np.full(n_beam, 6))
    return TrainingScenario(n_beam=n_beam, evaluate_evm=evaluate, baseline_evm=baseline)


class TestTrainProfile:
    def test_dead_beam_drops_to_one_bit(self):
        sc = synthetic_scenario([1.0, 0.0])
        profile = train_profile("online", [sc], LossWeights(), budget=60, seed=1)
        assert profile[1] == 1
        # exhaustive cross-check on the true objective
        w = LossWeights()

        def objective(b):
            return profile_loss(b, sc.evaluate_evm(b), w, sc.baseline_evm)

        oracle = exhaustive_minimize(objective, dim=2, bounds=(1, 10))
        assert profile_loss(profile, sc.evaluate_evm(profile), w, sc.baseline_evm) \
            == pytest.approx(objective(oracle), abs=1e-9)

    def test_result_is_monotone(self):
        # ascending strengths try to push an ascending profile; the projection
        # plus the ascent penalty must keep the output non-increasing
        sc = synthetic_scenario([0.1, 0.5, 1.0], n_beam=3)
        profile = train_profile("online", [sc], LossWeights(), budget=80, seed=2)
        assert np.all(np.diff(profile) <= 0)

    def test_never_worse_than_uniform_six(self):
        sc = synthetic_scenario([1.0, 0.2, 0.01], n_beam=3)
        w = LossWeights()
        profile = train_profile("online", [sc], w, budget=60, seed=3)
        trained = profile_loss(profile, sc.evaluate_evm(profile), w, sc.baseline_evm)
        uniform = profile_loss([6] * 3, sc.baseline_evm, w, sc.baseline_evm)
        assert trained <= uniform + 1e-9

    def test_offline_needs_two_scenarios(self):
        sc = synthetic_scenario([1.0, 0.0])
        with pytest.raises(ValueError, match="two scenarios"):
            train_profile("offline", [sc], LossWeights(), budget=40)

    def test_online_takes_exactly_one(self):
        sc = synthetic_scenario([1.0, 0.0])
        with pytest.raises(ValueError, match="one scenario"):
            train_profile("online", [sc, sc], LossWeights(), budget=40)

    def test_offline_generalizes_to_held_out(self):
        rng = np.random.default_rng(4)
        train = [synthetic_scenario([1.0 + 0.1 * rng.standard_normal(), 0.05, 0.0],
                                    n_beam=3) for _ in range(3)]
        held_out = synthetic_scenario([1.0, 0.05, 0.0], n_beam=3)
        w = LossWeights()
        profile = train_profile("offline", train, w, budget=100, seed=5)
        trained = profile_loss(profile, held_out.evaluate_evm(profile), w,
                               held_out.baseline_evm)
        uniform = profile_loss([6] * 3, held_out.evaluate_evm(np.full(3, 6)), w,
                               held_out.baseline_evm)
        assert trained <= uniform + 1e-9

    def test_explicit_target_overrides_baselines(self):
        sc = synthetic_scenario([1.0, 0.0])
        w = LossWeights(evm_target_percent=1000.0)  # anything passes
        profile = train_profile("online", [sc], w, budget=60, seed=6)
        assert profile.tolist() == [1, 1]

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            train_profile("batch", [synthetic_scenario([1.0, 0.0])], LossWeights())


class TestMantissaBitwidthTrainer:
    def test_fit_sets_profile(self):
        sc = synthetic_scenario([1.0, 0.0])
        est = MantissaBitwidthTrainer(mode="online", budget=60, seed=1).fit([sc])
        assert est.profile_.tolist() == train_profile(
            "online", [sc], LossWeights(), budget=60, seed=1).tolist()

    def test_get_params(self):
        est = MantissaBitwidthTrainer(budget=100)
        params = est.get_params()
        assert params["budget"] == 100
        assert params["mode"] == "online"
