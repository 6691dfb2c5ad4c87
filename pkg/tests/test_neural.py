"""Network tests: forward/backward correctness (finite-difference oracle),
Adamax update properties, dataset generation statistics, training-loop
contracts, and the model container round trip.
"""

import numpy as np
import pytest

from gomimo.channel import snr_to_sigma
from gomimo.detectors import feature_matrix
from gomimo.errors import TrainingDivergedError
from gomimo.modulation import enumerate_codebook
from gomimo.neural import (AdamaxState, Dataset, MlpArchitecture, MlpParams,
                           TrainConfig, adamax_step, backward, evaluate_mse,
                           forward, generate_dataset, init_adamax, init_params,
                           load_model, mse_loss, preset_architecture,
                           save_model, train)

SMALL_ARCH = MlpArchitecture((3, 5, 4, 6, 8, 2))


def small_params(seed=0) -> MlpParams:
    return init_params(SMALL_ARCH, np.random.default_rng(seed))


class TestForward:
    def test_zero_params_give_half(self):
        params = small_params()
        for w in params.weights:
            w[:] = 0.0
        out, _ = forward(params, np.zeros(3))
        np.testing.assert_allclose(out, [0.5, 0.5], rtol=1e-12)

    def test_relu_clips_negative(self):
        assert np.maximum(-3.0, 0.0) == 0.0 and np.maximum(2.0, 0.0) == 2.0
        params = small_params(3)
        out, cache = forward(params, np.ones(3))
        for hidden in cache[1:-1]:
            assert (hidden >= 0).all()

    def test_outputs_in_open_unit_interval(self):
        params = small_params(7)
        rng = np.random.default_rng(1)
        out, _ = forward(params, rng.normal(size=(100, 3)) * 10)
        assert ((out > 0) & (out < 1)).all()

    def test_identical_rows_identical_outputs(self):
        params = small_params(5)
        x = np.array([0.3, -1.2, 0.7])
        out, _ = forward(params, np.vstack([x, x]))
        np.testing.assert_array_equal(out[0], out[1])

    def test_width_mismatch_rejected(self):
        with pytest.raises(ValueError):
            forward(small_params(), np.zeros(4))


class TestMseLoss:
    def test_exact_match_is_zero(self):
        assert mse_loss(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 0.0

    def test_all_half_is_quarter(self):
        assert mse_loss(np.full(6, 0.5), np.array([0, 1, 1, 0, 1, 0])) \
            == pytest.approx(0.25, rel=1e-12)

    def test_single_unit_error_over_four_bits(self):
        assert mse_loss(np.array([1.0, 0, 0, 0]), np.zeros(4)) \
            == pytest.approx(0.25, rel=1e-12)

    def test_batch_average(self):
        out = np.array([[1.0, 0.0], [0.5, 0.5]])
        tgt = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert mse_loss(out, tgt) == pytest.approx(0.125, rel=1e-12)


class TestBackward:
    def test_matches_central_finite_differences(self):
        """Every gradient coordinate vs the independent quadrature oracle."""
        rng = np.random.default_rng(123)
        params = small_params(9)
        x = rng.normal(size=(4, 3))
        target = rng.integers(0, 2, size=(4, 2)).astype(float)
        _, cache = forward(params, x)
        weight_grads, bias_grads = backward(params, cache, target)
        h = 1e-6

        def loss_at():
            out, _ = forward(params, x)
            return mse_loss(out, target)

        # small-|g| coordinates held to the matching absolute bound; the
        # finite-difference noise floor at h=1e-6 sits near 1e-10
        for grads, tensors in ((weight_grads, params.weights),
                               (bias_grads, params.biases)):
            for g, theta in zip(grads, tensors):
                flat_g = g.ravel()
                flat_t = theta.ravel()
                for i in range(flat_t.size):
                    keep = flat_t[i]
                    flat_t[i] = keep + h
                    up = loss_at()
                    flat_t[i] = keep - h
                    down = loss_at()
                    flat_t[i] = keep
                    fd = (up - down) / (2 * h)
                    scale = max(abs(fd), abs(flat_g[i]), 1e-4)
                    assert abs(fd - flat_g[i]) / scale < 1e-5

    def test_near_zero_gradient_at_saturated_targets(self):
        params = small_params(2)
        params.biases[-1][:] = np.array([30.0, -30.0])
        for w in params.weights:
            w[:] = 0.0
        x = np.zeros((3, 3))
        target = np.array([[1.0, 0.0]] * 3)
        _, cache = forward(params, x)
        wg, bg = backward(params, cache, target)
        for g in wg + bg:
            assert np.abs(g).max() < 1e-10

    def test_duplicating_batch_leaves_mean_gradient_unchanged(self):
        rng = np.random.default_rng(77)
        params = small_params(4)
        x = rng.normal(size=(5, 3))
        t = rng.integers(0, 2, size=(5, 2)).astype(float)
        _, cache1 = forward(params, x)
        g1 = backward(params, cache1, t)
        _, cache2 = forward(params, np.vstack([x, x]))
        g2 = backward(params, cache2, np.vstack([t, t]))
        for a, b in zip(g1[0] + g1[1], g2[0] + g2[1]):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


class TestAdamax:
    def test_first_step_magnitude_is_learning_rate(self):
        params = small_params(6)
        before = params.copy()
        state = init_adamax(params, learning_rate=0.01)
        rng = np.random.default_rng(0)
        grads = ([rng.normal(size=w.shape) for w in params.weights],
                 [rng.normal(size=b.shape) for b in params.biases])
        adamax_step(params, grads, state)
        for new, old, g in zip(params.weights + params.biases,
                               before.weights + before.biases,
                               grads[0] + grads[1]):
            delta = new - old
            nonzero = np.abs(g) > 1e-6
            np.testing.assert_allclose(np.abs(delta[nonzero]), 0.01,
                                       rtol=0, atol=1e-12)
            np.testing.assert_allclose(delta[nonzero],
                                       -0.01 * np.sign(g[nonzero]), atol=1e-12)

    def test_zero_gradient_leaves_params_unchanged(self):
        params = small_params(8)
        before = params.copy()
        state = init_adamax(params, learning_rate=0.5)
        grads = ([np.zeros_like(w) for w in params.weights],
                 [np.zeros_like(b) for b in params.biases])
        adamax_step(params, grads, state)
        for new, old in zip(params.weights + params.biases,
                            before.weights + before.biases):
            np.testing.assert_array_equal(new, old)

    def test_identical_gradient_sequences_identical_trajectories(self):
        rng = np.random.default_rng(14)
        seq = [([rng.normal(size=w.shape) for w in small_params().weights],
                [rng.normal(size=b.shape) for b in small_params().biases])
               for _ in range(5)]
        trajectories = []
        for _ in range(2):
            params = small_params(21)
            state = init_adamax(params, learning_rate=0.003)
            for grads in seq:
                adamax_step(params, grads, state)
            trajectories.append(params)
        for a, b in zip(trajectories[0].weights + trajectories[0].biases,
                        trajectories[1].weights + trajectories[1].biases):
            np.testing.assert_array_equal(a, b)

    def test_infinity_norm_stays_nonnegative(self):
        params = small_params(1)
        state = init_adamax(params, learning_rate=0.01)
        rng = np.random.default_rng(3)
        for _ in range(10):
            grads = ([rng.normal(size=w.shape) for w in params.weights],
                     [rng.normal(size=b.shape) for b in params.biases])
            adamax_step(params, grads, state)
        for u in state.infinity_norm:
            assert (u >= 0).all()


class TestDataset:
    def test_same_seed_bit_identical(self, gosm, center_channel):
        f = 1e5 * feature_matrix(gosm.patterns)
        kwargs = dict(scheme=gosm, size=4000, channel_entries=center_channel.entries,
                      sigma=1e-7, front_end=f)
        a = generate_dataset(rng=np.random.default_rng(55), **kwargs)
        b = generate_dataset(rng=np.random.default_rng(55), **kwargs)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.targets, b.targets)

    def test_noise_free_limit_matches_clean_transform(self, gosm, center_channel):
        f = 1e5 * feature_matrix(gosm.patterns)
        sigma = 1e-30
        data = generate_dataset(gosm, 2000, center_channel.entries, sigma, f,
                                np.random.default_rng(4))
        cb = enumerate_codebook(gosm)
        frame_idx = data.targets.dot(1 << np.arange(4)[::-1])
        clean = cb.vectors[frame_idx] @ center_channel.entries.T @ f.T
        norm = np.linalg.norm(f, ord=2)
        assert np.abs(data.inputs - clean).max() <= 10 * sigma * norm * 10

    def test_frame_distribution_uniform(self, gosmp, center_channel):
        f = 1e5 * feature_matrix(gosmp.patterns)
        n = 150_000
        data = generate_dataset(gosmp, n, center_channel.entries, 1e-7, f,
                                np.random.default_rng(9))
        frame_idx = data.targets.dot(1 << np.arange(6)[::-1])
        counts = np.bincount(frame_idx, minlength=64)
        p = 1.0 / 64
        stderr = np.sqrt(p * (1 - p) * n)
        assert np.abs(counts - n * p).max() < 5 * stderr

    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Dataset(inputs=np.zeros((3, 4)), targets=np.zeros((2, 4)))


def tiny_train_setup(gosm, center_channel, **cfg_overrides):
    cfg = dict(training_snr_db=140.0, learning_rate=0.01, scaling_factor=1e5,
               flavor="blind", train_size=2000, validation_size=500,
               batch_size=100, epochs=3, seed=5)
    cfg.update(cfg_overrides)
    config = TrainConfig(**cfg)
    f = config.scaling_factor * feature_matrix(gosm.patterns)
    sigma = snr_to_sigma(config.training_snr_db, 1.0).sigma
    data = generate_dataset(gosm, config.train_size, center_channel.entries,
                            sigma, f, np.random.default_rng(config.seed))
    val = generate_dataset(gosm, config.validation_size, center_channel.entries,
                           sigma, f, np.random.default_rng(config.seed + 1))
    arch = MlpArchitecture((4, 16, 16, 16, 16, 4))
    return arch, data, val, config


class TestTrain:
    def test_zero_learning_rate_changes_nothing(self, gosm, center_channel):
        arch, data, val, config = tiny_train_setup(gosm, center_channel,
                                                   learning_rate=0.0)
        init = init_params(arch, np.random.default_rng(
            np.random.SeedSequence(config.seed)))
        params, log = train(arch, data, val, config)
        for a, b in zip(params.weights + params.biases,
                        init.weights + init.biases):
            np.testing.assert_array_equal(a, b)
        mses = [e["val_mse"] for e in log]
        assert max(mses) == pytest.approx(min(mses), rel=1e-12)

    def test_same_seed_identical_logs(self, gosm, center_channel):
        arch, data, val, config = tiny_train_setup(gosm, center_channel)
        _, log1 = train(arch, data, val, config)
        _, log2 = train(arch, data, val, config)
        assert log1 == log2

    def test_divergence_raises_typed_error_with_epoch(self, gosm, center_channel):
        arch, data, val, config = tiny_train_setup(gosm, center_channel)
        bad = Dataset(inputs=data.inputs.copy(), targets=data.targets)
        bad.inputs[50, 2] = np.inf
        with np.errstate(invalid="ignore"):
            with pytest.raises(TrainingDivergedError) as err:
                train(arch, bad, val, config)
        assert err.value.epoch == 1

    def test_returns_best_validation_params(self, gosm, center_channel):
        arch, data, val, config = tiny_train_setup(gosm, center_channel, epochs=5)
        params, log = train(arch, data, val, config)
        best_logged = min(e["val_mse"] for e in log)
        assert evaluate_mse(params, val) == pytest.approx(best_logged, rel=1e-12)

    def test_batch_must_divide_train_size(self):
        with pytest.raises(ValueError):
            TrainConfig(training_snr_db=140, learning_rate=0.01,
                        scaling_factor=1e5, train_size=1001, batch_size=100)

    def test_width_mismatch_rejected(self, gosm, center_channel):
        arch, data, val, config = tiny_train_setup(gosm, center_channel)
        bad_arch = MlpArchitecture((6, 8, 8, 8, 8, 4))
        with pytest.raises(ValueError):
            train(bad_arch, data, val, config)


class TestModelFile:
    def test_round_trip_bit_exact(self, tmp_path):
        params = small_params(33)
        config = TrainConfig(training_snr_db=140.0, learning_rate=0.01,
                             scaling_factor=1e5, train_size=1000,
                             validation_size=100, batch_size=100, epochs=2,
                             seed=3)
        path = tmp_path / "model.npz"
        save_model(path, params, SMALL_ARCH, config)
        loaded, arch, cfg = load_model(path)
        assert arch == SMALL_ARCH
        assert cfg == config
        for a, b in zip(loaded.weights + loaded.biases,
                        params.weights + params.biases):
            np.testing.assert_array_equal(a, b)

    def test_presets(self):
        gosm_arch = preset_architecture("gosm", 4, 4)
        assert gosm_arch.layer_widths == (4, 128, 64, 32, 16, 4)
        gosmp_arch = preset_architecture("gosmp", 4, 6)
        assert gosmp_arch.layer_widths == (4, 64, 64, 64, 64, 6)
