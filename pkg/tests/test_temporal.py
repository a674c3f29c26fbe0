from itertools import product

import numpy as np
import pytest
from scipy.special import expit

from core.exp_family import LayerSpec, UnitFamily
from core.harmonium import DimensionMismatchError, HarmoniumParams, PassCounter
from core.temporal import RecurrentState, augment, bptt_backward, bptt_gradient_terms, bptt_recursion, filter_pass, \
    generate_forward_gibbs, generate_reverse_refh, predict_next_frame
from tests.test_harmonium import bernoulli_params


def zero_params(n_obs: int, n_hid: int) -> HarmoniumParams:
    return HarmoniumParams(np.zeros((n_hid, n_obs)), np.zeros((n_hid, n_hid)), np.zeros(n_hid), np.zeros(n_obs),
                           np.zeros(n_hid), LayerSpec.single(UnitFamily.BERNOULLI, n_obs),
                           LayerSpec.single(UnitFamily.BERNOULLI, n_hid), LayerSpec.single(UnitFamily.BERNOULLI, n_hid))


def test_filter_pass_runs_the_recurrence():
    params = bernoulli_params(3, 4, 4, seed=0)
    obs = np.random.default_rng(1).integers(0, 2, (6, 3)).astype(float)

    r, expected = np.zeros(4), []
    for s in obs:
        r = expit(params.W @ s + params.U @ r + params.b_hid)
        expected.append(r)

    np.testing.assert_allclose(filter_pass(params, obs), np.array(expected))


def test_filter_pass_is_causal():
    params = bernoulli_params(3, 4, 4, seed=2)
    obs = np.random.default_rng(3).integers(0, 2, (10, 3)).astype(float)
    changed = obs.copy()
    changed[6:] = 1 - changed[6:]

    np.testing.assert_array_equal(filter_pass(params, obs)[:6], filter_pass(params, changed)[:6])
    assert not np.allclose(filter_pass(params, obs)[6:], filter_pass(params, changed)[6:])


def test_filter_pass_batches_trajectories():
    params = bernoulli_params(3, 4, 4, seed=4)
    obs = np.random.default_rng(5).integers(0, 2, (3, 7, 3)).astype(float)
    batched = filter_pass(params, obs)

    for n in range(3):
        np.testing.assert_allclose(batched[n], filter_pass(params, obs[n]))


def test_filter_pass_counts_one_up_pass_per_step():
    counter = PassCounter()
    filter_pass(bernoulli_params(3, 4, 4, seed=6), np.zeros((2, 9, 3)), counter=counter)
    assert (counter.up, counter.down) == (9, 0)


def test_zero_params_give_flat_means():
    np.testing.assert_array_equal(filter_pass(zero_params(3, 5), np.ones((4, 3))), np.full((4, 5), .5))


def test_augment_pairs_each_observation_with_the_previous_means():
    params = bernoulli_params(3, 4, 4, seed=7)
    obs = np.random.default_rng(8).integers(0, 2, (5, 3)).astype(float)
    frames = augment(params, obs)
    means = filter_pass(params, obs)

    np.testing.assert_array_equal(frames.r_prev[0], np.zeros(4))
    np.testing.assert_array_equal(frames.r_prev[1:], means[:-1])
    np.testing.assert_array_equal(frames.s, obs)


def test_sampled_recurrence_needs_a_generator():
    with pytest.raises(ValueError):
        filter_pass(bernoulli_params(3, 4, 4, seed=9), np.zeros((3, 3)), sample_recurrent=True)


def test_sampled_recurrence_feeds_binary_inputs():
    params = bernoulli_params(3, 4, 4, seed=10)
    frames = augment(params, np.ones((20, 3)), sample_recurrent=True, rng=np.random.default_rng(0))
    assert set(np.unique(frames.r_prev[1:])) <= {0., 1.}


def test_mismatched_recurrent_layer_is_rejected():
    with pytest.raises(DimensionMismatchError):
        filter_pass(bernoulli_params(3, 2, 4, seed=11), np.zeros((3, 3)))


def test_recurrent_state_range():
    with pytest.raises(ValueError):
        RecurrentState(np.array([.5, 1.2]))


def surrogate_loss(params: HarmoniumParams, obs: np.ndarray) -> float:
    return .5 * float(np.sum(filter_pass(params, obs) ** 2))


def test_bptt_matches_finite_differences():
    params = bernoulli_params(2, 3, 3, seed=12)
    obs = np.random.default_rng(13).integers(0, 2, (4, 2)).astype(float)

    # The surrogate loss sum_t |m_t|^2 / 2 has direct gradient m_t.
    frames = augment(params, obs)
    means = filter_pass(params, obs)
    y = bptt_recursion(params, means, means)
    analytic = bptt_gradient_terms(y, obs, frames.r_prev)

    step = 1e-5
    for name in ('W', 'U', 'b_hid'):
        numeric = np.zeros_like(getattr(params, name))
        for idx in np.ndindex(numeric.shape):
            plus, minus = params.copy(), params.copy()
            getattr(plus, name)[idx] += step
            getattr(minus, name)[idx] -= step
            numeric[idx] = (surrogate_loss(plus, obs) - surrogate_loss(minus, obs)) / (2 * step)

        exact = analytic.blocks()[name]
        assert np.linalg.norm(numeric - exact) / np.linalg.norm(exact) < 1e-6, name

    np.testing.assert_array_equal(analytic.db_obs, np.zeros(2))


def test_bptt_backward_routes_future_gradients_through_the_recurrent_weights():
    params = bernoulli_params(2, 3, 3, seed=14)
    obs = np.ones((5, 2))
    means = filter_pass(params, obs)
    grads = np.random.default_rng(15).normal(size=(5, 3))

    np.testing.assert_allclose(bptt_backward(params, means, obs, grads), bptt_recursion(params, means, grads @ params.U))


def test_bptt_last_step_sees_only_its_direct_gradient():
    params = bernoulli_params(2, 3, 3, seed=16)
    means = filter_pass(params, np.ones((4, 2)))
    direct = np.zeros((4, 3))
    direct[-1] = 1.

    y = bptt_recursion(params, means, direct)
    np.testing.assert_allclose(y[-1], means[-1] * (1 - means[-1]))


def test_bptt_rejects_misaligned_sequences():
    params = bernoulli_params(2, 3, 3, seed=17)
    with pytest.raises(DimensionMismatchError):
        bptt_backward(params, np.zeros((4, 3)), np.zeros((3, 2)), np.zeros((4, 3)))


def test_reverse_generation_uses_two_passes_per_step():
    params = bernoulli_params(5, 4, 4, seed=18)
    counter = PassCounter()
    frames = generate_reverse_refh(params, 100, np.ones(4), np.random.default_rng(0), counter=counter)

    assert frames.shape == (100, 5)
    assert (counter.up, counter.down, counter.total) == (0, 200, 200)


def test_forward_generation_uses_two_passes_per_gibbs_cycle():
    params = bernoulli_params(5, 4, 4, seed=19)
    counter = PassCounter()
    frames = generate_forward_gibbs(params, 100, np.random.default_rng(0), n_gibbs=50, counter=counter)

    assert frames.shape == (100, 5)
    assert (counter.up, counter.down, counter.total) == (5000, 5000, 10000)


def test_generation_is_reproducible():
    params = bernoulli_params(5, 4, 4, seed=20)
    first = generate_reverse_refh(params, 20, np.ones(4), np.random.default_rng(3))
    second = generate_reverse_refh(params, 20, np.ones(4), np.random.default_rng(3))
    np.testing.assert_array_equal(first, second)


def test_reverse_generation_emits_means_in_forward_order():
    params = bernoulli_params(5, 4, 4, seed=21)
    frames = generate_reverse_refh(params, 3, np.ones(4), np.random.default_rng(0), use_means=True, emit_means=True)

    # The last frame comes from the seed hidden vector.
    np.testing.assert_allclose(frames[-1], expit(np.ones(4) @ params.W + params.b_obs))


def test_reverse_generation_checks_the_seed_shape():
    with pytest.raises(DimensionMismatchError):
        generate_reverse_refh(bernoulli_params(5, 4, 4, seed=22), 3, np.ones(3), np.random.default_rng(0))


def test_predict_next_frame_matches_enumeration():
    params = bernoulli_params(2, 2, 2, seed=23)
    r = np.array([.3, .8])

    # Exact E[s | r] with the recurrent inputs clamped.
    visibles, hiddens = np.array(list(product((0., 1.), repeat=2))), np.array(list(product((0., 1.), repeat=2)))
    weights = np.array([sum(np.exp(h @ (params.W @ s + params.U @ r + params.b_hid) + params.b_obs @ s)
                            for h in hiddens) for s in visibles])
    expected = visibles.T @ (weights / weights.sum())

    predictions = predict_next_frame(params, np.tile(r, (4000, 1)), np.random.default_rng(24))
    np.testing.assert_allclose(predictions.mean(axis=0), expected, atol=.02)


def test_predict_next_frame_with_zero_params():
    predictions = predict_next_frame(zero_params(6, 3), np.full((2, 3), .5), np.random.default_rng(0))
    np.testing.assert_array_equal(predictions, np.full((2, 6), .5))


def test_predict_next_frame_checks_the_averaging_window():
    with pytest.raises(ValueError):
        predict_next_frame(zero_params(6, 3), np.zeros(3), np.random.default_rng(0), n_gibbs=10, n_average=20)
