from enum import Enum
from typing import Callable, Dict, Optional

import numpy as np

from core.harmonium import PARAM_BLOCKS, WEIGHT_BLOCKS, AugmentedFrame, CdMode, GradientSet, HarmoniumParams, \
    cd_statistics
from core.schedule import Minibatch, TrainSchedule
from core.temporal import augment, bptt_backward, bptt_gradient_terms
from evaluation.scoring import MetricsLog
from utils.system_operations import print_progressbar

# Draws (n_trajectories, traj_length) observation sequences, shape (n_trajectories, traj_length, obs).
DataSource = Callable[[int, int, np.random.Generator], np.ndarray]


class TrainMode(Enum):
    REFH = 'refh'
    TRBM = 'trbm'
    RTRBM = 'rtrbm'


class MomentumOptimizer(object):
    """ Heavy-ball updates: v <- rho * v + lr * grad - lr * weight_decay * param, param <- param + v. """

    def __init__(self, params: HarmoniumParams, weight_decay: float = 0.):
        self.weight_decay = weight_decay
        self.velocities = {name: np.zeros_like(value) for name, value in params.arrays().items()}

    def step(self, params: HarmoniumParams, grads: GradientSet, rates: Dict[str, float], rho: float) -> None:
        """
        Updates the parameters in place.

        :param params: the parameters to update.
        :param grads: the ascent direction for every block.
        :param rates: the learning rate of every block.
        :param rho: the momentum.
        """
        for name, grad in grads.blocks().items():
            param = getattr(params, name)
            decay = self.weight_decay * param if name in WEIGHT_BLOCKS else 0.
            velocity = rho * self.velocities[name] + rates[name] * (grad - decay)

            self.velocities[name] = velocity
            param += velocity

            if not np.all(np.isfinite(param)):
                raise FloatingPointError('Training diverged: parameter {} became non-finite.'.format(name))


class Trainer(object):
    def __init__(self, params: HarmoniumParams, schedule: TrainSchedule, mode: TrainMode, rng: np.random.Generator,
                 bptt: bool = True, metrics: MetricsLog = None, verbose: bool = False):
        if mode is TrainMode.RTRBM and schedule.minibatch.kind != 'contiguous':
            raise ValueError('RTRBM training backpropagates through time and needs contiguous minibatches.')

        self.params = params
        self.schedule = schedule
        self.mode = mode
        self.rng = rng
        self.bptt = bptt
        self.metrics = MetricsLog() if metrics is None else metrics
        self.verbose = verbose

        self.optimizer = MomentumOptimizer(params, schedule.weight_decay)
        self.epoch = 0
        self.pretrained = False

        # The current batch: observations and the recurrent inputs frozen at its renewal.
        self._obs = None
        self._inputs = None

    @property
    def cd_mode(self) -> CdMode:
        return CdMode.REFH if self.mode is TrainMode.REFH else CdMode.TRBM

    @property
    def finished(self) -> bool:
        return self.epoch >= self.schedule.epochs

    def _draw(self, data_source: DataSource) -> np.ndarray:
        batch = self.schedule.batch
        obs = np.asarray(data_source(batch.n_trajectories, batch.traj_length, self.rng), dtype=float)

        if obs.ndim != 3 or obs.shape[0] == 0 or obs.shape[1] == 0:
            raise ValueError('The data source returned no trajectories (shape {}).'.format(obs.shape))

        return obs

    def _renew(self, data_source: DataSource) -> None:
        """ Draws a new batch and freezes its recurrent inputs with the current parameters. """
        if self.verbose:
            print('\nRenewing the training batch at epoch {}.'.format(self.epoch))

        self._obs = self._draw(data_source)
        self._inputs = augment(self.params, self._obs, sample_recurrent=self.schedule.sample_recurrent,
                               rng=self.rng).r_prev

    def _frames(self, minibatch: Minibatch) -> AugmentedFrame:
        return AugmentedFrame(self._inputs[minibatch.trajectories, minibatch.steps],
                              self._obs[minibatch.trajectories, minibatch.steps])

    def pretrain(self, data_source: DataSource) -> None:
        """
        Trains on static batches, with the recurrent inputs clamped to zero,
        at the starting learning rates and momentum.

        :param data_source: the trajectory source.
        """
        spec = self.schedule.pretrain
        if spec is None or self.pretrained:
            return

        rates, rho = self.schedule.learning_rates(0), self.schedule.momentum.value(0)
        for batch_idx in range(spec.n_batches):
            if self.verbose:
                print_progressbar(batch_idx, spec.n_batches, prefix='Pre-training:')

            obs = self._draw(data_source)
            self._obs, self._inputs = obs, np.zeros(obs.shape[:-1] + (self.params.n_rcrnt,))

            errors = []
            for minibatch in self.schedule.minibatches(obs.shape[0], obs.shape[1], self.rng):
                stats = cd_statistics(self.params, self._frames(minibatch), spec.cd_steps, CdMode.TRBM, self.rng,
                                      self.schedule.negative_visible)
                self.optimizer.step(self.params, stats.gradients(), rates, rho)
                errors.append(stats.reconstruction_error)

            self.metrics.record(-1, batch_idx, 'reconstruction_error', float(np.mean(errors)))

        if self.verbose:
            print_progressbar(spec.n_batches, spec.n_batches, prefix='Pre-training:')

        self.pretrained = True

    def _rtrbm_gradients(self, minibatch: Minibatch) -> [GradientSet, float]:
        """
        Computes the per-step CD gradients of a trajectory segment, plus the terms carried
        back through the recurrence.

        :param minibatch: a contiguous segment of one trajectory.
        :return: the gradient set and the reconstruction error.
        """
        trajectory, steps = minibatch.trajectories[0], minibatch.steps
        obs = self._obs[trajectory, steps]

        # Refilter the segment with the current parameters, from its frozen starting input.
        frames = augment(self.params, obs, r_init=self._inputs[trajectory, steps.start])
        stats = cd_statistics(self.params, frames, self.schedule.cd_steps, CdMode.TRBM, self.rng,
                              self.schedule.negative_visible)

        # g_t is the hidden-bias gradient of the step that m_t feeds.
        hidbias_grads = np.zeros_like(stats.h_pos)
        hidbias_grads[:-1] = stats.hidbias_terms[1:]

        y = bptt_backward(self.params, stats.h_pos, obs, hidbias_grads)
        recurrence = bptt_gradient_terms(y, obs, frames.r_prev).scale(1 / len(obs))

        return stats.gradients() + recurrence, stats.reconstruction_error

    def _run_epoch(self) -> None:
        rates = self.schedule.learning_rates(self.epoch)
        rho = self.schedule.momentum.value(self.epoch)
        n_trajectories, traj_length = self._obs.shape[:2]

        errors, norms = [], {name: 0. for name in PARAM_BLOCKS}
        for minibatch in self.schedule.minibatches(n_trajectories, traj_length, self.rng):
            if self.mode is TrainMode.RTRBM and self.bptt:
                grads, error = self._rtrbm_gradients(minibatch)
            else:
                stats = cd_statistics(self.params, self._frames(minibatch), self.schedule.cd_steps, self.cd_mode,
                                      self.rng, self.schedule.negative_visible)
                grads, error = stats.gradients(), stats.reconstruction_error

            self.optimizer.step(self.params, grads, rates, rho)

            errors.append(error)
            for name, norm in grads.norms().items():
                norms[name] += norm

        # Record the epoch's metrics.
        batch_idx = self.epoch // self.schedule.batch.renewal_period
        self.metrics.record(self.epoch, batch_idx, 'reconstruction_error', float(np.mean(errors)))
        for name in PARAM_BLOCKS:
            self.metrics.record(self.epoch, batch_idx, 'gradient_norm_' + name, norms[name] / len(errors))
            self.metrics.record(self.epoch, batch_idx, 'learning_rate_' + name, rates[name])
        self.metrics.record(self.epoch, batch_idx, 'momentum', rho)

    def train(self, data_source: DataSource,
              checkpoint_callback: Optional[Callable[['Trainer'], None]] = None) -> HarmoniumParams:
        """
        Runs (or resumes) training until the schedule's last epoch.

        :param data_source: the trajectory source.
        :param checkpoint_callback: called at the end of every renewal period and at the end of training.
        :return: the trained parameters.
        """
        # A schedule without epochs leaves the parameters untouched.
        if not self.finished:
            self.pretrain(data_source)

        while not self.finished:
            if self.schedule.is_renewal(self.epoch) or self._obs is None:
                self._renew(data_source)

            self._run_epoch()
            self.epoch += 1

            if self.verbose:
                errors = self.metrics.values('reconstruction_error')
                print_progressbar(self.epoch, self.schedule.epochs, prefix='Training {}:'.format(self.mode.value),
                                  suffix='error {:.4g}'.format(errors[-1]) if len(errors) else '')

            if checkpoint_callback is not None and (self.schedule.is_renewal(self.epoch) or self.finished):
                checkpoint_callback(self)

        return self.params

    def state_dict(self) -> dict:
        """ Returns everything needed, besides the parameters, to resume training. """
        return {
            'mode': self.mode.value,
            'bptt': self.bptt,
            'epoch': self.epoch,
            'pretrained': self.pretrained,
            'velocities': {name: value.tolist() for name, value in self.optimizer.velocities.items()},
            'rng_state': self.rng.bit_generator.state,
            'schedule': self.schedule.to_dict()
        }

    def load_state_dict(self, state: dict) -> None:
        """
        Restores a state returned by state_dict.

        :param state: the trainer state.
        """
        if state['mode'] != self.mode.value:
            raise ValueError('Cannot resume a {} run as {}.'.format(state['mode'], self.mode.value))

        self.bptt = state['bptt']
        self.epoch = int(state['epoch'])
        self.pretrained = bool(state['pretrained'])
        self.optimizer.velocities = {name: np.array(value, dtype=float)
                                     for name, value in state['velocities'].items()}
        self.rng.bit_generator.state = state['rng_state']
        self._obs = self._inputs = None


def _train(params: HarmoniumParams, data_source: DataSource, schedule: TrainSchedule, rng: np.random.Generator,
           mode: TrainMode, **kwargs) -> HarmoniumParams:
    return Trainer(params, schedule, mode, rng, **kwargs).train(data_source)


def train_refh(params: HarmoniumParams, data_source: DataSource, schedule: TrainSchedule,
               rng: np.random.Generator, **kwargs) -> HarmoniumParams:
    """
    Trains a recurrent exponential-family harmonium: previous hidden means are treated as data,
    and the negative phase resamples them.

    :param params: the initial parameters, updated in place.
    :param data_source: the trajectory source.
    :param schedule: the training schedule.
    :param rng: the seeded generator.
    :return: the trained parameters.
    """
    return _train(params, data_source, schedule, rng, TrainMode.REFH, **kwargs)


def train_trbm(params: HarmoniumParams, data_source: DataSource, schedule: TrainSchedule,
               rng: np.random.Generator, **kwargs) -> HarmoniumParams:
    """ As train_refh, but the recurrent inputs stay clamped in the negative phase. """
    return _train(params, data_source, schedule, rng, TrainMode.TRBM, **kwargs)


def train_rtrbm(params: HarmoniumParams, data_source: DataSource, schedule: TrainSchedule,
                rng: np.random.Generator, bptt: bool = True, **kwargs) -> HarmoniumParams:
    """
    As train_trbm, with the gradient also carried back through the recurrence of each
    contiguous trajectory segment. With bptt off this is train_trbm.
    """
    return _train(params, data_source, schedule, rng, TrainMode.RTRBM, bptt=bptt, **kwargs)
