from itertools import product

import numpy as np
import pytest
from scipy.special import expit

from core.exp_family import LayerSpec, UnitFamily
from core.harmonium import AugmentedFrame, CdMode, DimensionMismatchError, GradientSet, HarmoniumParams, \
    PassCounter, cd_gradients, cd_statistics, down_pass_obs, down_pass_rcrnt, gibbs_chain, init_params, \
    log_unnormalized_density, up_pass


def bernoulli_params(n_obs: int, n_rcrnt: int, n_hid: int, seed: int, scale: float = 1.) -> HarmoniumParams:
    rng = np.random.default_rng(seed)
    return HarmoniumParams(W=rng.normal(0, scale, (n_hid, n_obs)), U=rng.normal(0, scale, (n_hid, n_rcrnt)),
                           b_hid=rng.normal(0, scale, n_hid), b_obs=rng.normal(0, scale, n_obs),
                           b_rcrnt=rng.normal(0, scale, n_rcrnt),
                           obs_spec=LayerSpec.single(UnitFamily.BERNOULLI, n_obs),
                           rcrnt_spec=LayerSpec.single(UnitFamily.BERNOULLI, n_rcrnt),
                           hid_spec=LayerSpec.single(UnitFamily.BERNOULLI, n_hid))


def binary_configurations(n: int) -> np.ndarray:
    return np.array(list(product((0., 1.), repeat=n)))


def test_init_params_shapes():
    params = init_params(LayerSpec.single(UnitFamily.POISSON, 15), LayerSpec.single(UnitFamily.BERNOULLI, 8),
                         np.random.default_rng(0))

    assert params.W.shape == (8, 15) and params.U.shape == (8, 8)
    assert params.n_rcrnt == params.n_hid == 8
    assert not np.any(params.b_hid) and not np.any(params.b_obs) and not np.any(params.b_rcrnt)


def test_shape_errors():
    params = bernoulli_params(3, 2, 4, seed=0)

    with pytest.raises(DimensionMismatchError):
        up_pass(params, AugmentedFrame(np.zeros(2), np.zeros(5)))

    with pytest.raises(DimensionMismatchError):
        down_pass_obs(params, np.zeros(3))

    with pytest.raises(DimensionMismatchError):
        HarmoniumParams(np.zeros((4, 3)), np.zeros((4, 2)), np.zeros(4), np.zeros(2), np.zeros(2),
                        params.obs_spec, params.rcrnt_spec, params.hid_spec)


def test_augmented_frame_rejects_invalid_recurrent_inputs():
    with pytest.raises(ValueError):
        AugmentedFrame(np.array([1.5]), np.array([0.]))


def test_conditionals_match_the_closed_form():
    params = bernoulli_params(3, 2, 4, seed=1)
    r, s = np.array([.2, .7]), np.array([1., 0., 1.])
    h = np.array([1., 0., 0., 1.])

    np.testing.assert_allclose(up_pass(params, AugmentedFrame(r, s)), expit(params.W @ s + params.U @ r + params.b_hid))
    np.testing.assert_allclose(down_pass_obs(params, h), expit(h @ params.W + params.b_obs))
    np.testing.assert_allclose(down_pass_rcrnt(params, h), expit(h @ params.U + params.b_rcrnt))


def test_conditionals_match_enumeration_of_the_joint():
    params = bernoulli_params(2, 1, 2, seed=2)
    hiddens, visibles = binary_configurations(2), binary_configurations(3)

    # Unnormalized joint over every (hidden, visible) pair.
    joint = np.array([[np.exp(log_unnormalized_density(params, h, AugmentedFrame(v[:1], v[1:])))
                       for v in visibles] for h in hiddens])

    for v_idx, v in enumerate(visibles):
        posterior = joint[:, v_idx] / joint[:, v_idx].sum()
        expected = hiddens.T @ posterior
        np.testing.assert_allclose(up_pass(params, AugmentedFrame(v[:1], v[1:])), expected, atol=1e-12)

    for h_idx, h in enumerate(hiddens):
        conditional = joint[h_idx] / joint[h_idx].sum()
        expected = visibles.T @ conditional
        np.testing.assert_allclose(down_pass_rcrnt(params, h), expected[:1], atol=1e-12)
        np.testing.assert_allclose(down_pass_obs(params, h), expected[1:], atol=1e-12)


def test_poisson_base_measure():
    params = HarmoniumParams(np.full((1, 1), .3), np.zeros((1, 1)), np.zeros(1), np.full(1, -.2), np.zeros(1),
                             LayerSpec.single(UnitFamily.POISSON, 1), LayerSpec.single(UnitFamily.BERNOULLI, 1),
                             LayerSpec.single(UnitFamily.BERNOULLI, 1))
    h, r = np.ones(1), np.zeros(1)

    # Consecutive counts differ by the natural parameter minus log(s + 1).
    for s in range(5):
        step = (log_unnormalized_density(params, h, AugmentedFrame(r, np.array([s + 1.])))
                - log_unnormalized_density(params, h, AugmentedFrame(r, np.array([float(s)]))))
        assert step == pytest.approx(.3 - .2 - np.log(s + 1))


def test_gibbs_chain_reaches_the_joint_distribution():
    params = bernoulli_params(2, 1, 2, seed=3)
    hiddens, visibles = binary_configurations(2), binary_configurations(3)
    joint = np.array([[np.exp(log_unnormalized_density(params, h, AugmentedFrame(v[:1], v[1:])))
                       for v in visibles] for h in hiddens])
    marginal = joint.sum(axis=0) / joint.sum()

    n_chains = 20000
    init = AugmentedFrame(np.zeros((n_chains, 1)), np.zeros((n_chains, 2)))
    final = gibbs_chain(params, init, 100, False, np.random.default_rng(4)).frame

    codes = (4 * final.r_prev[:, 0] + 2 * final.s[:, 0] + final.s[:, 1]).astype(int)
    empirical = np.bincount(codes, minlength=8) / n_chains
    np.testing.assert_allclose(empirical, marginal, atol=.02)


def test_clamped_chain_keeps_the_recurrent_inputs():
    params = bernoulli_params(3, 2, 4, seed=5)
    r = np.array([[.3, .9], [0., 1.]])
    result = gibbs_chain(params, AugmentedFrame(r, np.zeros((2, 3))), 10, True, np.random.default_rng(0))

    np.testing.assert_array_equal(result.frame.r_prev, r)


def test_pass_counts_of_one_cd_step():
    params = bernoulli_params(3, 2, 4, seed=6)
    batch = AugmentedFrame(np.full((5, 2), .5), np.ones((5, 3)))

    refh, trbm = PassCounter(), PassCounter()
    cd_statistics(params, batch, 1, CdMode.REFH, np.random.default_rng(0), counter=refh)
    cd_statistics(params, batch, 1, CdMode.TRBM, np.random.default_rng(0), counter=trbm)

    assert (refh.up, refh.down) == (2, 2)
    assert (trbm.up, trbm.down) == (2, 1)


def test_trbm_mode_produces_no_recurrent_bias_gradient():
    params = bernoulli_params(3, 2, 4, seed=7)
    batch = AugmentedFrame(np.random.default_rng(1).random((50, 2)), np.ones((50, 3)))
    stats = cd_statistics(params, batch, 3, CdMode.TRBM, np.random.default_rng(2))

    np.testing.assert_array_equal(stats.r_neg, stats.r_pos)
    np.testing.assert_array_equal(stats.gradients().db_rcrnt, np.zeros(2))


def test_cd_gradients_match_the_statistics():
    params = bernoulli_params(3, 2, 4, seed=8)
    batch = AugmentedFrame(np.random.default_rng(1).random((30, 2)), np.ones((30, 3)))
    stats = cd_statistics(params, batch, 2, CdMode.REFH, np.random.default_rng(3))
    grads = cd_gradients(params, batch, 2, CdMode.REFH, np.random.default_rng(3))

    for name, value in grads.blocks().items():
        np.testing.assert_array_equal(value, stats.gradients().blocks()[name])

    np.testing.assert_allclose(grads.dW, (stats.h_pos.T @ stats.s_pos - stats.h_neg.T @ stats.s_neg) / 30)


def test_negative_visible_choices():
    params = bernoulli_params(3, 2, 4, seed=9)
    batch = AugmentedFrame(np.full((4, 2), .5), np.ones((4, 3)))

    stats = cd_statistics(params, batch, 1, CdMode.REFH, np.random.default_rng(0), negative_visible='means')
    np.testing.assert_array_equal(stats.s_neg, stats.obs_means)

    stats = cd_statistics(params, batch, 1, CdMode.REFH, np.random.default_rng(0), negative_visible='samples')
    assert set(np.unique(stats.s_neg)) <= {0., 1.}

    with pytest.raises(ValueError):
        cd_statistics(params, batch, 1, CdMode.REFH, np.random.default_rng(0), negative_visible='modes')


def test_negative_visible_statistics_default_to_means():
    params = bernoulli_params(3, 2, 4, seed=14)
    batch = AugmentedFrame(np.full((6, 2), .5), np.random.default_rng(4).integers(0, 2, (6, 3)).astype(float))

    stats = cd_statistics(params, batch, 1, CdMode.REFH, np.random.default_rng(5))
    np.testing.assert_array_equal(stats.s_neg, stats.obs_means)
    assert np.any((stats.s_neg > 0) & (stats.s_neg < 1))

    grads = cd_gradients(params, batch, 1, CdMode.REFH, np.random.default_rng(5))
    np.testing.assert_allclose(grads.db_obs, (stats.s_pos - stats.obs_means).mean(axis=0))


def test_empty_batch_is_rejected():
    params = bernoulli_params(3, 2, 4, seed=10)
    with pytest.raises(ValueError):
        cd_statistics(params, AugmentedFrame(np.zeros((0, 2)), np.zeros((0, 3))), 1, CdMode.REFH,
                      np.random.default_rng(0))


def test_cd_gradient_vanishes_on_model_samples():
    # Four visible units (three observed, one recurrent) and three hidden units.
    params = bernoulli_params(3, 1, 3, seed=11)
    rng = np.random.default_rng(12)
    n_frames = 20000

    burn_in = gibbs_chain(params, AugmentedFrame(np.zeros((n_frames, 1)), np.zeros((n_frames, 3))), 5000, False, rng)
    # Mean-field negative statistics bias the weight blocks, so the chain's samples are used.
    stats = cd_statistics(params, burn_in.frame, 1, CdMode.REFH, rng, negative_visible='samples')

    per_frame = {
        'W': np.einsum('nh,no->nho', stats.h_pos, stats.s_pos) - np.einsum('nh,no->nho', stats.h_neg, stats.s_neg),
        'U': np.einsum('nh,nr->nhr', stats.h_pos, stats.r_pos) - np.einsum('nh,nr->nhr', stats.h_neg, stats.r_neg),
        'b_hid': stats.h_pos - stats.h_neg,
        'b_obs': stats.s_pos - stats.s_neg,
        'b_rcrnt': stats.r_pos - stats.r_neg
    }
    for name, values in per_frame.items():
        block_means = values.reshape(n_frames, -1).mean(axis=1)
        standard_error = block_means.std(ddof=1) / np.sqrt(n_frames)
        assert abs(block_means.mean()) < 3 * standard_error, name


def test_gradient_set_arithmetic():
    params = bernoulli_params(3, 2, 4, seed=13)
    ones = GradientSet.from_blocks({name: np.ones_like(value) for name, value in params.arrays().items()})
    total = (ones + ones).scale(.25)

    for value in total.blocks().values():
        np.testing.assert_allclose(value, .5)

    assert GradientSet.zeros_like(params).norms()['W'] == 0.
