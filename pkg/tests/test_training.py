import numpy as np
import pytest

import core.training
from core.checkpoint import load_checkpoint, save_checkpoint
from core.exp_family import LayerSpec, UnitFamily
from core.harmonium import GradientSet, cd_statistics, init_params
from core.schedule import PretrainSpec
from core.training import MomentumOptimizer, Trainer, TrainMode, train_refh, train_rtrbm, train_trbm
from tests.test_schedule import small_schedule

N_OBS, N_HID = 5, 4


def binary_source(n_trajectories: int, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    # Sticky binary sequences, so there is something to learn across time.
    first = rng.integers(0, 2, (n_trajectories, 1, N_OBS))
    flips = rng.random((n_trajectories, n_steps - 1, N_OBS)) < .1
    return np.concatenate((first, first ^ np.cumsum(flips, axis=1) % 2), axis=1).astype(float)


def fresh_params(seed: int = 0):
    return init_params(LayerSpec.single(UnitFamily.BERNOULLI, N_OBS), LayerSpec.single(UnitFamily.BERNOULLI, N_HID),
                       np.random.default_rng(seed), weight_std=.1)


def test_zero_learning_rate_leaves_the_parameters_untouched():
    params = fresh_params()
    initial = params.copy()
    train_refh(params, binary_source, small_schedule(rate=0.), np.random.default_rng(1))

    assert params.equals(initial)


def test_zero_epochs_skip_pretraining():
    params = fresh_params()
    initial = params.copy()
    schedule = small_schedule(epochs=0, pretrain=PretrainSpec(n_batches=2, cd_steps=1))
    trainer = Trainer(params, schedule, TrainMode.TRBM, np.random.default_rng(1))
    trainer.train(binary_source)

    assert params.equals(initial)
    assert not trainer.pretrained and not trainer.metrics.rows


def test_training_is_deterministic():
    first, second = fresh_params(), fresh_params()
    train_refh(first, binary_source, small_schedule(), np.random.default_rng(2))
    train_refh(second, binary_source, small_schedule(), np.random.default_rng(2))

    assert first.equals(second)
    assert not first.equals(fresh_params())


def test_rtrbm_without_bptt_is_the_trbm():
    schedule = small_schedule('contiguous', 3, renewal_period=1)
    trbm, rtrbm = fresh_params(), fresh_params()
    train_trbm(trbm, binary_source, schedule, np.random.default_rng(3))
    train_rtrbm(rtrbm, binary_source, schedule, np.random.default_rng(3), bptt=False)

    assert trbm.equals(rtrbm)


def test_rtrbm_with_bptt_differs_from_the_trbm():
    schedule = small_schedule('contiguous', 3)
    trbm, rtrbm = fresh_params(), fresh_params()
    train_trbm(trbm, binary_source, schedule, np.random.default_rng(4))
    train_rtrbm(rtrbm, binary_source, schedule, np.random.default_rng(4))

    assert not trbm.equals(rtrbm)
    assert np.all(np.isfinite(rtrbm.U))


def test_rtrbm_needs_contiguous_minibatches():
    with pytest.raises(ValueError):
        Trainer(fresh_params(), small_schedule('across_trajectories'), TrainMode.RTRBM, np.random.default_rng(0))


@pytest.mark.parametrize('mode', list(TrainMode))
def test_single_trajectory_batches(mode):
    # One trajectory whose length equals the minibatch size.
    schedule = small_schedule('contiguous', 6, n_trajectories=1, traj_length=6)
    params = fresh_params()
    Trainer(params, schedule, mode, np.random.default_rng(5)).train(binary_source)

    assert not params.equals(fresh_params())


def test_trbm_never_learns_recurrent_biases():
    params = fresh_params()
    train_trbm(params, binary_source, small_schedule(), np.random.default_rng(6))
    np.testing.assert_array_equal(params.b_rcrnt, np.zeros(N_HID))


def test_metrics_are_recorded_per_epoch():
    schedule = small_schedule(epochs=4, pretrain=PretrainSpec(n_batches=2, cd_steps=1))
    trainer = Trainer(fresh_params(), schedule, TrainMode.TRBM, np.random.default_rng(7))
    trainer.train(binary_source)

    np.testing.assert_array_equal(trainer.metrics.epochs('reconstruction_error'), [-1, -1, 0, 1, 2, 3])
    assert len(trainer.metrics.values('momentum')) == 4
    assert trainer.metrics.values('learning_rate_W')[0] == pytest.approx(.01)


def test_pretraining_records_the_mean_error_of_each_batch(monkeypatch):
    errors = []

    def recording_statistics(*args, **kwargs):
        stats = cd_statistics(*args, **kwargs)
        errors.append(stats.reconstruction_error)
        return stats

    monkeypatch.setattr(core.training, 'cd_statistics', recording_statistics)
    schedule = small_schedule(pretrain=PretrainSpec(n_batches=2, cd_steps=1))
    trainer = Trainer(fresh_params(), schedule, TrainMode.REFH, np.random.default_rng(8))
    trainer.pretrain(binary_source)

    # Twelve minibatches of two frames per batch.
    assert len(errors) == 24
    np.testing.assert_allclose(trainer.metrics.values('reconstruction_error'),
                               [np.mean(errors[:12]), np.mean(errors[12:])])


def test_checkpoints_follow_the_renewal_period():
    epochs = []
    trainer = Trainer(fresh_params(), small_schedule(epochs=5, renewal_period=2), TrainMode.REFH,
                      np.random.default_rng(8))
    trainer.train(binary_source, lambda current: epochs.append(current.epoch))

    assert epochs == [2, 4, 5]


def test_resuming_reproduces_an_uninterrupted_run(tmp_path):
    schedule = small_schedule(epochs=6, renewal_period=2, pretrain=PretrainSpec(n_batches=1, cd_steps=1))
    checkpoint_file = str(tmp_path / 'checkpoint.json')

    def save_at_epoch_two(trainer: Trainer) -> None:
        if trainer.epoch == 2:
            save_checkpoint(checkpoint_file, trainer.params, trainer)

    uninterrupted = Trainer(fresh_params(), schedule, TrainMode.REFH, np.random.default_rng(9))
    uninterrupted.train(binary_source, save_at_epoch_two)

    checkpoint = load_checkpoint(checkpoint_file)
    resumed = Trainer(checkpoint.params, schedule, TrainMode.REFH, np.random.default_rng(12345))
    resumed.load_state_dict(checkpoint.trainer_state)
    resumed.train(binary_source)

    assert resumed.epoch == 6
    assert resumed.params.equals(uninterrupted.params)


def test_resuming_checks_the_mode():
    trainer = Trainer(fresh_params(), small_schedule(epochs=1), TrainMode.REFH, np.random.default_rng(0))
    with pytest.raises(ValueError):
        Trainer(fresh_params(), small_schedule(), TrainMode.TRBM, np.random.default_rng(0)) \
            .load_state_dict(trainer.state_dict())


def test_empty_data_is_rejected():
    with pytest.raises(ValueError):
        train_refh(fresh_params(), lambda n, t, rng: np.zeros((0, t, N_OBS)), small_schedule(),
                   np.random.default_rng(0))


def test_momentum_updates():
    params = fresh_params()
    initial = params.copy()
    optimizer = MomentumOptimizer(params)
    grads = GradientSet.from_blocks({name: np.ones_like(value) for name, value in params.arrays().items()})
    rates = {name: .1 for name in params.arrays()}

    optimizer.step(params, grads, rates, .5)
    optimizer.step(params, grads, rates, .5)

    # v1 = lr * g, v2 = rho * v1 + lr * g.
    np.testing.assert_allclose(params.b_hid - initial.b_hid, .1 + .15)
    np.testing.assert_allclose(params.W - initial.W, .25)


def test_weight_decay_only_shrinks_the_weights():
    params = fresh_params()
    params.b_obs[:] = 1.
    initial = params.copy()
    optimizer = MomentumOptimizer(params, weight_decay=.1)
    rates = {name: 1. for name in params.arrays()}

    optimizer.step(params, GradientSet.zeros_like(params), rates, 0.)

    np.testing.assert_allclose(params.W, .9 * initial.W)
    np.testing.assert_allclose(params.U, .9 * initial.U)
    np.testing.assert_array_equal(params.b_obs, initial.b_obs)


def test_divergence_is_reported():
    params = fresh_params()
    grads = GradientSet.zeros_like(params)
    grads.dW[0, 0] = np.inf

    with pytest.raises(FloatingPointError):
        MomentumOptimizer(params).step(params, grads, {name: 1. for name in params.arrays()}, 0.)
