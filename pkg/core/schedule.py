from dataclasses import asdict, dataclass
from typing import Dict, Iterator, NamedTuple, Optional, Union

import numpy as np

from core.harmonium import NEGATIVE_VISIBLE_CHOICES, PARAM_BLOCKS

LR_KINDS = 'linear', 'exponential'
MOMENTUM_KINDS = 'constant', 'approach'
MINIBATCH_KINDS = 'contiguous', 'across_trajectories'


def _per_block(value: Union[float, Dict[str, float]]) -> Dict[str, float]:
    """ Expands a single rate into a rate per parameter block. """
    if isinstance(value, dict):
        missing = set(PARAM_BLOCKS) - set(value)
        if missing:
            raise ValueError('Learning rates are missing for blocks {}.'.format(sorted(missing)))
        return {name: float(value[name]) for name in PARAM_BLOCKS}

    return {name: float(value) for name in PARAM_BLOCKS}


@dataclass
class LearningRateSchedule:
    """
    Per-block learning rates.
    'linear' moves from start to end over the training epochs,
    'exponential' multiplies the start rates by decay_base^(-epoch).
    """
    kind: str
    start: Dict[str, float]
    end: Dict[str, float] = None
    decay_base: float = 1.

    def __post_init__(self):
        if self.kind not in LR_KINDS:
            raise ValueError('Unknown learning rate schedule {}. Choose one of {}.'.format(self.kind, LR_KINDS))

        self.start = _per_block(self.start)
        self.end = _per_block(0. if self.end is None else self.end)

        if any(rate < 0 for rate in list(self.start.values()) + list(self.end.values())):
            raise ValueError('Learning rates cannot be negative.')

        if self.kind == 'exponential' and self.decay_base <= 0:
            raise ValueError('The decay base must be positive. Got {}.'.format(self.decay_base))

    @classmethod
    def linear(cls, start, end=0.) -> 'LearningRateSchedule':
        return cls('linear', _per_block(start), _per_block(end))

    @classmethod
    def exponential(cls, start, decay_base: float) -> 'LearningRateSchedule':
        return cls('exponential', _per_block(start), decay_base=decay_base)

    def rates(self, epoch: int, epochs: int) -> Dict[str, float]:
        """
        Returns the learning rate of every block at an epoch.

        :param epoch: the current (zero-based) epoch.
        :param epochs: the total number of epochs.
        :return: the learning rates keyed by block.
        """
        if self.kind == 'linear':
            fraction = epoch / epochs if epochs > 0 else 0.
            return {name: self.start[name] + (self.end[name] - self.start[name]) * fraction for name in PARAM_BLOCKS}

        return {name: self.start[name] * self.decay_base ** (-epoch) for name in PARAM_BLOCKS}


@dataclass
class MomentumSchedule:
    """ Either a constant rho, or rho_final - amplitude * decay_base^(-epoch). """
    kind: str
    rho: float
    amplitude: float = 0.
    decay_base: float = 1.

    def __post_init__(self):
        if self.kind not in MOMENTUM_KINDS:
            raise ValueError('Unknown momentum schedule {}. Choose one of {}.'.format(self.kind, MOMENTUM_KINDS))

    @classmethod
    def constant(cls, rho: float) -> 'MomentumSchedule':
        return cls('constant', rho)

    @classmethod
    def approach(cls, rho_final: float, amplitude: float, decay_base: float) -> 'MomentumSchedule':
        return cls('approach', rho_final, amplitude, decay_base)

    def value(self, epoch: int) -> float:
        if self.kind == 'constant':
            return self.rho

        return self.rho - self.amplitude * self.decay_base ** (-epoch)


@dataclass
class MinibatchScheme:
    """
    'contiguous': minibatches of `size` consecutive steps of a single trajectory.
    'across_trajectories': minibatches of the same step of `size` different trajectories.
    """
    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in MINIBATCH_KINDS:
            raise ValueError('Unknown minibatch scheme {}. Choose one of {}.'.format(self.kind, MINIBATCH_KINDS))

        if self.size < 1:
            raise ValueError('Minibatch size must be a positive integer. Got {}.'.format(self.size))


class Minibatch(NamedTuple):
    trajectories: np.ndarray
    steps: Union[slice, int]


@dataclass
class BatchSpec:
    n_trajectories: int
    traj_length: int
    renewal_period: int

    def __post_init__(self):
        if min(self.n_trajectories, self.traj_length, self.renewal_period) < 1:
            raise ValueError('Batch sizes and the renewal period must be positive integers. Got {}.'.format(self))


@dataclass
class PretrainSpec:
    n_batches: int
    cd_steps: int


@dataclass
class TrainSchedule:
    epochs: int
    cd_steps: int
    learning_rate: LearningRateSchedule
    momentum: MomentumSchedule
    minibatch: MinibatchScheme
    batch: BatchSpec
    weight_decay: float = 0.
    pretrain: Optional[PretrainSpec] = None
    negative_visible: str = 'means'
    sample_recurrent: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError('Epochs cannot be negative. Got {}.'.format(self.epochs))

        if self.cd_steps < 1:
            raise ValueError('CD steps must be at least 1. Got {}.'.format(self.cd_steps))

        if self.weight_decay < 0:
            raise ValueError('Weight decay cannot be negative. Got {}.'.format(self.weight_decay))

        if self.negative_visible not in NEGATIVE_VISIBLE_CHOICES:
            raise ValueError('Unknown negative visible statistic {}.'.format(self.negative_visible))

        if self.minibatch.kind == 'contiguous' and self.minibatch.size > self.batch.traj_length:
            raise ValueError('Contiguous minibatches ({} steps) cannot exceed the trajectory length ({}).'
                             .format(self.minibatch.size, self.batch.traj_length))

    def learning_rates(self, epoch: int) -> Dict[str, float]:
        return self.learning_rate.rates(epoch, self.epochs)

    def is_renewal(self, epoch: int) -> bool:
        return epoch % self.batch.renewal_period == 0

    def minibatches(self, n_trajectories: int, traj_length: int, rng: np.random.Generator) -> Iterator[Minibatch]:
        """
        Splits a batch of trajectories into minibatches, in a shuffled order.

        :param n_trajectories: the number of trajectories in the batch.
        :param traj_length: the number of steps per trajectory.
        :param rng: the seeded generator used for the order.
        :return: an iterator over the minibatches.
        """
        size = self.minibatch.size
        if self.minibatch.kind == 'contiguous':
            minibatches = [Minibatch(np.array([n]), slice(start, start + size))
                           for n in range(n_trajectories)
                           for start in range(0, traj_length - size + 1, size)]
        else:
            groups = [np.arange(start, min(start + size, n_trajectories)) for start in range(0, n_trajectories, size)]
            minibatches = [Minibatch(group, t) for t in range(traj_length) for group in groups]

        for idx in rng.permutation(len(minibatches)):
            yield minibatches[idx]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, config: dict) -> 'TrainSchedule':
        config = dict(config)
        pretrain = config.pop('pretrain', None)

        return cls(learning_rate=LearningRateSchedule(**config.pop('learning_rate')),
                   momentum=MomentumSchedule(**config.pop('momentum')),
                   minibatch=MinibatchScheme(**config.pop('minibatch')),
                   batch=BatchSpec(**config.pop('batch')),
                   pretrain=None if pretrain is None else PretrainSpec(**pretrain),
                   **config)


def lds_refh_schedule() -> TrainSchedule:
    """ CD-1 with exponentially declining rates and momentum approaching 0.98, for 90 epochs. """
    return TrainSchedule(epochs=90, cd_steps=1,
                         learning_rate=LearningRateSchedule.exponential(
                             {'W': 1 / 500, 'U': 1 / 50, 'b_hid': 1 / 120, 'b_obs': 1 / 120, 'b_rcrnt': 1 / 120},
                             decay_base=1.1),
                         momentum=MomentumSchedule.approach(.98, .5, 1.1),
                         minibatch=MinibatchScheme('across_trajectories', 40),
                         batch=BatchSpec(n_trajectories=40, traj_length=1000, renewal_period=5),
                         weight_decay=.001)


def _cd25_schedule(start_rate: float) -> TrainSchedule:
    return TrainSchedule(epochs=250, cd_steps=25,
                         learning_rate=LearningRateSchedule.linear(start_rate, 0.),
                         momentum=MomentumSchedule.constant(.9),
                         minibatch=MinibatchScheme('contiguous', 100),
                         batch=BatchSpec(n_trajectories=400, traj_length=100, renewal_period=5),
                         pretrain=PretrainSpec(n_batches=30, cd_steps=5))


def lds_trbm_rtrbm_schedule() -> TrainSchedule:
    """ CD-25, momentum 0.9, rates declining linearly from 1/1500, with static pre-training. """
    return _cd25_schedule(1 / 1500)


def balls_schedule() -> TrainSchedule:
    """ As the TRBM/RTRBM schedule, with rates starting at 1/100 for the Bernoulli pixels. """
    return _cd25_schedule(1 / 100)
