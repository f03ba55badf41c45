import numpy as np
import pytest

from sdrc.readout import predict, train_ridge
from sdrc.reservoir import delay_line_reference
from sdrc.tasks import (
    TaskError,
    capacity,
    classify_stream,
    gen_classification_stream,
    gen_narma2,
    gen_parity,
    narma2_fixed_point,
    narma2_trajectory,
    nmse,
    standardize_length,
    trim_silence,
)


def brute_parity(u, k):
    u = np.asarray(u, dtype=int)
    return np.array([sum(u[max(0, m - k + 1):m + 1]) % 2 for m in range(len(u))])


class TestParity:
    def test_hand_example_k2(self):
        # u = [1,0,1,1]: y_2 at (1-based) n = 2..4 is [1, 1, 0]
        assert brute_parity([1, 0, 1, 1], 2)[1:].tolist() == [1, 1, 0]

    def test_k1_equals_input(self):
        task = gen_parity(500, 3, seed=0)
        assert np.array_equal(task.targets[:, 0], task.inputs)

    def test_matches_brute_force_window_sums(self):
        task = gen_parity(3000, 7, seed=5)
        for k in (2, 5, 7):
            assert np.array_equal(task.targets[:, k - 1],
                                  brute_parity(task.inputs, k))

    def test_inputs_are_binary(self):
        task = gen_parity(1000, 4, seed=2)
        assert set(np.unique(task.inputs)) <= {0.0, 1.0}

    def test_invalid_sizes_rejected(self):
        with pytest.raises(TaskError):
            gen_parity(5, 5, seed=0)
        with pytest.raises(TaskError):
            gen_parity(10, 0, seed=0)


class TestNarma2:
    def test_zero_input_first_step(self):
        y = narma2_trajectory(np.zeros(5))
        assert y[2] == pytest.approx(0.1)  # y(3) = 0.1

    def test_first_nonzero_step(self):
        y = narma2_trajectory([0.0, 0.5, 0.0])
        assert y[2] == pytest.approx(0.6 * 0.125 + 0.1)  # y(3) = 0.175

    def test_zero_input_converges_to_fixed_point(self):
        y = narma2_trajectory(np.zeros(200))
        y_star = narma2_fixed_point()
        assert abs(y[100] - y_star) < 1e-6
        assert abs(y_star - 0.19098) < 1e-5

    def test_fixed_point_satisfies_quadratic(self):
        y = narma2_fixed_point()
        assert 0.4 * y * y - 0.6 * y + 0.1 == pytest.approx(0.0, abs=1e-15)

    def test_inputs_in_range_and_targets_follow_recursion(self):
        task = gen_narma2(500, seed=3)
        u, t = task.inputs, task.targets[:, 0]
        assert np.all((u >= 0) & (u <= 0.5))
        # t[m] = y(m+2) = 0.4 y(m+1) + 0.4 y(m+1) y(m) + 0.6 u(m+1)^3 + 0.1
        for m in range(2, 500):
            expect = 0.4 * t[m - 1] + 0.4 * t[m - 1] * t[m - 2] + 0.6 * u[m] ** 3 + 0.1
            assert t[m] == pytest.approx(expect, abs=1e-12)

    def test_too_short_rejected(self):
        with pytest.raises(TaskError):
            gen_narma2(2, seed=0)


class TestCapacity:
    def test_perfect_predictions_max_capacity(self):
        rng = np.random.default_rng(0)
        t = rng.integers(0, 2, size=(200, 10)).astype(float)
        r2, cap = capacity(t, t)
        assert np.allclose(r2, 1.0)
        assert cap == pytest.approx(10.0)

    def test_random_predictions_near_zero(self):
        rng = np.random.default_rng(1)
        t = rng.integers(0, 2, size=(10000, 10)).astype(float)
        p = rng.standard_normal((10000, 10))
        _, cap = capacity(p, t)
        assert cap < 0.1 * 10

    def test_constant_prediction_scores_zero(self):
        t = np.tile([0.0, 1.0], 50)[:, None]
        p = np.full((100, 1), 0.5)
        r2, cap = capacity(p, t)
        assert r2[0] == 0.0 and cap == 0.0

    def test_constant_target_rejected(self):
        with pytest.raises(TaskError):
            capacity(np.random.default_rng(2).standard_normal(100),
                     np.ones(100))

    def test_short_test_set_rejected(self):
        with pytest.raises(TaskError):
            capacity(np.ones(10), np.ones(10))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        t = rng.integers(0, 2, size=(500, 3)).astype(float)
        p = t + 0.3 * rng.standard_normal((500, 3))
        perm = rng.permutation(500)
        _, cap_a = capacity(p, t)
        _, cap_b = capacity(p[perm], t[perm])
        assert cap_a == pytest.approx(cap_b, rel=1e-12)


class TestNmse:
    def test_exact_prediction_is_zero(self):
        t = np.random.default_rng(0).standard_normal(100)
        assert nmse(t, t) == 0.0

    def test_mean_prediction_is_one(self):
        t = np.random.default_rng(1).standard_normal(100)
        p = np.full(100, t.mean())
        assert nmse(p, t) == pytest.approx(1.0)

    def test_translation_covariance(self):
        rng = np.random.default_rng(2)
        t = rng.standard_normal(100)
        p = t + 0.1 * rng.standard_normal(100)
        assert nmse(p + 5.0, t + 5.0) == pytest.approx(nmse(p, t), rel=1e-12)

    def test_zero_variance_target_rejected(self):
        with pytest.raises(TaskError):
            nmse(np.ones(10), np.ones(10))


class TestParityLinearSeparability:
    """Parity beyond K=1 is linearly inseparable from the raw bit window, and
    becomes trivially solvable once pairwise/triple bit products are added."""

    @staticmethod
    def _window_features(u, depth, with_products):
        m = delay_line_reference(u, depth).values
        if not with_products:
            return m
        cols = [m]
        n = m.shape[1]
        cols += [m[:, [i]] * m[:, [j]] for i in range(n) for j in range(i + 1, n)]
        cols += [
            m[:, [i]] * m[:, [j]] * m[:, [k]]
            for i in range(n) for j in range(i + 1, n) for k in range(j + 1, n)
        ]
        return np.hstack(cols)

    def _r2(self, features, targets):
        n_train = features.shape[0] // 2
        model = train_ridge(features[:n_train], targets[:n_train], 1e-8)
        pred = predict(model, features[n_train:])
        r2, _ = capacity(pred, targets[n_train:])
        return r2

    def test_linear_readout_fails_beyond_k1(self):
        task = gen_parity(20000, 4, seed=0)
        r2 = self._r2(self._window_features(task.inputs, 4, False), task.targets)
        assert r2[0] > 0.99  # K = 1 is linear
        assert np.all(r2[1:] < 0.2)

    def test_product_features_solve_parity(self):
        task = gen_parity(20000, 3, seed=1)
        r2 = self._r2(self._window_features(task.inputs, 3, True), task.targets)
        assert np.all(r2 > 0.99)

    def test_polynomial_delay_features_solve_narma2(self):
        # depth 4 is needed to push under 5e-2: the recursion's geometric
        # memory (~0.55 per step) leaves ~6e-2 residual at depth 3
        task = gen_narma2(5000, seed=4)
        depth = 4
        base = delay_line_reference(task.inputs, depth).values
        feats = [base]
        feats += [base[:, [i]] * base[:, [j]]
                  for i in range(depth) for j in range(i, depth)]
        feats += [base**3]
        x = np.hstack(feats)
        n_train = 2500
        model = train_ridge(x[:n_train], task.targets[:n_train], 1e-8)
        pred = predict(model, x[n_train:])
        assert nmse(pred[:, 0], task.targets[n_train:, 0]) < 5e-2


class TestClassificationStream:
    def test_shape_500_samples(self):
        rng = np.random.default_rng(0)
        waves = [rng.standard_normal(800) for _ in range(500)]
        labels = [i % 5 for i in range(500)]
        ds = gen_classification_stream(waves, labels, 100, target_length=1000)
        assert ds.targets.shape == (50000, 5)
        assert len(ds.sample_boundaries) == 500

    def test_single_sample_one_hot_rows(self):
        wave = np.random.default_rng(1).standard_normal(400)
        ds = gen_classification_stream([wave], [2], 10, n_classes=5,
                                       target_length=400)
        assert np.array_equal(ds.targets,
                              np.tile([0, 0, 1, 0, 0], (10, 1)))

    def test_silence_trimming_removes_leading_zeros(self):
        rng = np.random.default_rng(2)
        body = rng.standard_normal(600)
        padded = np.concatenate([np.zeros(500), body, np.zeros(300)])
        trimmed = trim_silence(padded)
        assert trimmed.size <= 700  # silence frames removed
        assert np.max(np.abs(trimmed)) == np.max(np.abs(body))

    def test_standardize_length_crop_and_pad(self):
        long = np.arange(100, dtype=float)
        assert standardize_length(long, 50).tolist() == list(range(25, 75))
        short = np.ones(10)
        out = standardize_length(short, 20)
        assert out.size == 20 and out.sum() == 10.0

    def test_label_out_of_range_rejected(self):
        with pytest.raises(TaskError):
            gen_classification_stream([np.ones(10)], [7], 2, n_classes=5,
                                      target_length=10)

    def test_all_correct_predictions(self):
        probs = np.tile([0.1, 0.8, 0.1], (20, 1))
        bounds = [(0, 10), (10, 20)]
        acc, conf, decisions = classify_stream(probs, bounds, [1, 1])
        assert acc == 1.0
        assert conf[1, 1] == 2 and conf.sum() == 2
        assert np.all(decisions == 1)

    def test_majority_vote_51_49(self):
        probs = np.zeros((100, 2))
        probs[:51, 0] = 1.0
        probs[51:, 1] = 1.0
        acc, conf, _ = classify_stream(probs, [(0, 100)], [0])
        assert acc == 1.0 and conf[0, 0] == 1

    def test_vote_tie_goes_to_lowest_index(self):
        probs = np.zeros((10, 3))
        probs[:5, 2] = 1.0
        probs[5:, 1] = 1.0
        _, conf, _ = classify_stream(probs, [(0, 10)], [1])
        assert conf[1, 1] == 1  # class 1 beats class 2 on the tie

    def test_confusion_rows_sum_to_class_counts(self):
        rng = np.random.default_rng(3)
        probs = rng.random((50, 5))
        bounds = [(i * 10, (i + 1) * 10) for i in range(5)]
        labels = [0, 1, 2, 3, 4]
        _, conf, _ = classify_stream(probs, bounds, labels)
        assert np.array_equal(conf.sum(axis=1), np.ones(5, dtype=int))

    def test_empty_segment_rejected(self):
        with pytest.raises(TaskError):
            classify_stream(np.ones((5, 2)), [(3, 3)], [0])
