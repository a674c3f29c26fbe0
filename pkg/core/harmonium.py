from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, NamedTuple, Optional

import numpy as np
from scipy.special import gammaln

from core.exp_family import LayerSpec, UnitFamily

PARAM_BLOCKS = ('W', 'U', 'b_hid', 'b_obs', 'b_rcrnt')
WEIGHT_BLOCKS = ('W', 'U')
NEGATIVE_VISIBLE_CHOICES = 'samples', 'means'
INIT_WEIGHT_STD = .01


class DimensionMismatchError(ValueError):
    pass


class CdMode(Enum):
    # The recurrent subvector is resampled in the negative phase.
    REFH = 'refh'
    # The recurrent subvector is clamped in the negative phase.
    TRBM = 'trbm'


def _check_last_dim(array: np.ndarray, size: int, what: str) -> None:
    if array.shape[-1] != size:
        raise DimensionMismatchError('Expected {} of size {}, got shape {}.'.format(what, size, array.shape))


@dataclass
class HarmoniumParams:
    """ Weights and biases of an exponential-family harmonium whose visible layer is [r_prev, s]. """
    W: np.ndarray
    U: np.ndarray
    b_hid: np.ndarray
    b_obs: np.ndarray
    b_rcrnt: np.ndarray
    obs_spec: LayerSpec
    rcrnt_spec: LayerSpec
    hid_spec: LayerSpec

    def __post_init__(self):
        for name in PARAM_BLOCKS:
            setattr(self, name, np.array(getattr(self, name), dtype=float))

        expected = {
            'W': (self.hid_spec.size, self.obs_spec.size),
            'U': (self.hid_spec.size, self.rcrnt_spec.size),
            'b_hid': (self.hid_spec.size,),
            'b_obs': (self.obs_spec.size,),
            'b_rcrnt': (self.rcrnt_spec.size,)
        }
        for name, shape in expected.items():
            value = getattr(self, name)
            if value.shape != shape:
                raise DimensionMismatchError('Parameter {} should have shape {}, got {}.'
                                             .format(name, shape, value.shape))
            if not np.all(np.isfinite(value)):
                raise ValueError('Parameter {} contains non-finite entries.'.format(name))

    @property
    def n_hid(self) -> int:
        return self.hid_spec.size

    @property
    def n_obs(self) -> int:
        return self.obs_spec.size

    @property
    def n_rcrnt(self) -> int:
        return self.rcrnt_spec.size

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_BLOCKS}

    def copy(self) -> 'HarmoniumParams':
        return HarmoniumParams(**{name: value.copy() for name, value in self.arrays().items()},
                               obs_spec=self.obs_spec, rcrnt_spec=self.rcrnt_spec, hid_spec=self.hid_spec)

    def equals(self, other: 'HarmoniumParams') -> bool:
        """ Exact, bitwise comparison of two parameter sets. """
        return (self.obs_spec == other.obs_spec and self.rcrnt_spec == other.rcrnt_spec
                and self.hid_spec == other.hid_spec
                and all(np.array_equal(getattr(self, name), getattr(other, name)) for name in PARAM_BLOCKS))


def init_params(obs_spec: LayerSpec, hid_spec: LayerSpec, rng: np.random.Generator,
                rcrnt_spec: LayerSpec = None, weight_std: float = INIT_WEIGHT_STD) -> HarmoniumParams:
    """
    Creates small random weights and zero biases.

    :param obs_spec: the observation layer.
    :param hid_spec: the hidden layer.
    :param rng: the seeded generator.
    :param rcrnt_spec: the recurrent layer, Bernoulli units mirroring the hidden layer by default.
    :param weight_std: the standard deviation of the normal weight initialization.
    :return: the parameters.
    """
    if rcrnt_spec is None:
        rcrnt_spec = LayerSpec.single(UnitFamily.BERNOULLI, hid_spec.size)

    return HarmoniumParams(W=rng.normal(0., weight_std, (hid_spec.size, obs_spec.size)),
                           U=rng.normal(0., weight_std, (hid_spec.size, rcrnt_spec.size)),
                           b_hid=np.zeros(hid_spec.size), b_obs=np.zeros(obs_spec.size),
                           b_rcrnt=np.zeros(rcrnt_spec.size),
                           obs_spec=obs_spec, rcrnt_spec=rcrnt_spec, hid_spec=hid_spec)


@dataclass
class GradientSet:
    dW: np.ndarray
    dU: np.ndarray
    db_hid: np.ndarray
    db_obs: np.ndarray
    db_rcrnt: np.ndarray

    @classmethod
    def from_blocks(cls, blocks: Dict[str, np.ndarray]) -> 'GradientSet':
        return cls(**{'d' + name: np.asarray(value, dtype=float) for name, value in blocks.items()})

    @classmethod
    def zeros_like(cls, params: HarmoniumParams) -> 'GradientSet':
        return cls.from_blocks({name: np.zeros_like(value) for name, value in params.arrays().items()})

    def blocks(self) -> Dict[str, np.ndarray]:
        """ Returns the gradient blocks keyed by parameter name. """
        return {name: getattr(self, 'd' + name) for name in PARAM_BLOCKS}

    def __add__(self, other: 'GradientSet') -> 'GradientSet':
        return GradientSet.from_blocks({name: value + other.blocks()[name] for name, value in self.blocks().items()})

    def scale(self, factor: float) -> 'GradientSet':
        return GradientSet.from_blocks({name: factor * value for name, value in self.blocks().items()})

    def norms(self) -> Dict[str, float]:
        return {name: float(np.linalg.norm(value)) for name, value in self.blocks().items()}


@dataclass
class AugmentedFrame:
    """
    The augmented observation [r_prev, s].
    Both arrays may carry leading batch axes; the last axis indexes units.
    """
    r_prev: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.r_prev = np.asarray(self.r_prev, dtype=float)
        self.s = np.asarray(self.s, dtype=float)

        if self.r_prev.shape[:-1] != self.s.shape[:-1]:
            raise DimensionMismatchError('Recurrent inputs {} and observations {} have different batch shapes.'
                                         .format(self.r_prev.shape, self.s.shape))

        if np.any(self.r_prev < 0) or np.any(self.r_prev > 1):
            raise ValueError('Recurrent inputs must lie in [0, 1].')

    @property
    def batch_size(self) -> int:
        return int(np.prod(self.s.shape[:-1], dtype=int))

    def flatten(self) -> 'AugmentedFrame':
        """ Collapses all leading axes into a single batch axis. """
        return AugmentedFrame(self.r_prev.reshape(-1, self.r_prev.shape[-1]), self.s.reshape(-1, self.s.shape[-1]))

    def take(self, indices) -> 'AugmentedFrame':
        return AugmentedFrame(self.r_prev[indices], self.s[indices])


@dataclass
class PassCounter:
    """ Counts layer passes; a batched call counts as a single pass. """
    up: int = 0
    down: int = 0

    @property
    def total(self) -> int:
        return self.up + self.down


def _count(counter: Optional[PassCounter], direction: str) -> None:
    if counter is not None:
        setattr(counter, direction, getattr(counter, direction) + 1)


def up_natural(params: HarmoniumParams, frame: AugmentedFrame) -> np.ndarray:
    _check_last_dim(frame.s, params.n_obs, 'observations')
    _check_last_dim(frame.r_prev, params.n_rcrnt, 'recurrent inputs')

    return frame.s @ params.W.T + frame.r_prev @ params.U.T + params.b_hid


def up_pass(params: HarmoniumParams, frame: AugmentedFrame, counter: PassCounter = None) -> np.ndarray:
    """
    Computes the hidden-unit means given the augmented visible vector.

    :param params: the harmonium parameters.
    :param frame: the augmented frame(s).
    :param counter: an optional layer-pass counter.
    :return: the hidden means, shape (..., hidden).
    """
    _count(counter, 'up')
    return params.hid_spec.mean_from_natural(up_natural(params, frame))


def down_natural_obs(params: HarmoniumParams, h: np.ndarray) -> np.ndarray:
    _check_last_dim(h, params.n_hid, 'hidden values')
    return h @ params.W + params.b_obs


def down_natural_rcrnt(params: HarmoniumParams, h: np.ndarray) -> np.ndarray:
    _check_last_dim(h, params.n_hid, 'hidden values')
    return h @ params.U + params.b_rcrnt


def down_pass_obs(params: HarmoniumParams, h: np.ndarray, counter: PassCounter = None) -> np.ndarray:
    """ Computes the observation-unit means given hidden values. """
    _count(counter, 'down')
    return params.obs_spec.mean_from_natural(down_natural_obs(params, np.asarray(h, dtype=float)))


def down_pass_rcrnt(params: HarmoniumParams, h: np.ndarray, counter: PassCounter = None) -> np.ndarray:
    """ Computes the recurrent-unit means given hidden values. """
    _count(counter, 'down')
    return params.rcrnt_spec.mean_from_natural(down_natural_rcrnt(params, np.asarray(h, dtype=float)))


def _base_measure(spec: LayerSpec, values: np.ndarray) -> np.ndarray:
    log_h = np.zeros(values.shape[:-1])
    for family, block in spec.slices():
        if family is UnitFamily.POISSON:
            log_h -= gammaln(values[..., block] + 1).sum(axis=-1)

    return log_h


def log_unnormalized_density(params: HarmoniumParams, h: np.ndarray, frame: AugmentedFrame) -> np.ndarray:
    """
    The log of the joint density over (h, r_prev, s), up to the normalizer.

    :param params: the harmonium parameters.
    :param h: the hidden configuration(s).
    :param frame: the visible configuration(s).
    :return: the log unnormalized density, one value per configuration.
    """
    h = np.asarray(h, dtype=float)
    energy = np.sum(h * up_natural(params, frame), axis=-1) + frame.s @ params.b_obs + frame.r_prev @ params.b_rcrnt

    return (energy + _base_measure(params.hid_spec, h) + _base_measure(params.obs_spec, frame.s)
            + _base_measure(params.rcrnt_spec, frame.r_prev))


class GibbsResult(NamedTuple):
    # The visible samples after the final step.
    frame: AugmentedFrame
    # The up-pass means computed from those samples.
    hid_means: np.ndarray
    # The down-pass means of the final step.
    obs_means: np.ndarray
    rcrnt_means: np.ndarray


def gibbs_chain(params: HarmoniumParams, init: AugmentedFrame, n_steps: int, clamp_rcrnt: bool,
                rng: np.random.Generator, counter: PassCounter = None,
                init_hid_means: np.ndarray = None) -> GibbsResult:
    """
    Runs block Gibbs sampling from the given visible state.
    Each full step samples the hidden units, then the visible units.

    :param params: the harmonium parameters.
    :param init: the starting visible state.
    :param n_steps: the number of full steps.
    :param clamp_rcrnt: whether the recurrent subvector is kept fixed.
    :param rng: the seeded generator.
    :param counter: an optional layer-pass counter.
    :param init_hid_means: the up-pass means of init, if already available.
    :return: the final chain state, with the final means.
    """
    if n_steps < 1:
        raise ValueError('Gibbs chains need at least one step. Got {}.'.format(n_steps))

    frame = init
    hid_means = up_pass(params, frame, counter) if init_hid_means is None else init_hid_means
    obs_means = rcrnt_means = None

    for _ in range(n_steps):
        h = params.hid_spec.sample(hid_means, rng)

        obs_means = down_pass_obs(params, h, counter)
        s = params.obs_spec.sample(obs_means, rng)

        if clamp_rcrnt:
            r_prev = rcrnt_means = init.r_prev
        else:
            rcrnt_means = down_pass_rcrnt(params, h, counter)
            r_prev = params.rcrnt_spec.sample(rcrnt_means, rng)

        frame = AugmentedFrame(r_prev, s)
        hid_means = up_pass(params, frame, counter)

    return GibbsResult(frame, hid_means, obs_means, rcrnt_means)


@dataclass
class CdStatistics:
    """ Per-frame positive- and negative-phase statistics, shape (batch, units). """
    mode: CdMode
    h_pos: np.ndarray
    s_pos: np.ndarray
    r_pos: np.ndarray
    h_neg: np.ndarray
    s_neg: np.ndarray
    r_neg: np.ndarray
    obs_means: np.ndarray = field(repr=False)

    @property
    def hidbias_terms(self) -> np.ndarray:
        """ The per-frame gradient of the log-likelihood with respect to the hidden biases. """
        return self.h_pos - self.h_neg

    @property
    def reconstruction_error(self) -> float:
        return float(np.mean((self.s_pos - self.obs_means) ** 2))

    def gradients(self) -> GradientSet:
        """
        Averages positive-minus-negative statistics over the batch.

        :return: the gradient set.
        """
        n = self.h_pos.shape[0]
        db_rcrnt = (self.r_pos - self.r_neg).mean(axis=0) if self.mode is CdMode.REFH \
            else np.zeros(self.r_pos.shape[1])

        return GradientSet(dW=(self.h_pos.T @ self.s_pos - self.h_neg.T @ self.s_neg) / n,
                           dU=(self.h_pos.T @ self.r_pos - self.h_neg.T @ self.r_neg) / n,
                           db_hid=(self.h_pos - self.h_neg).mean(axis=0),
                           db_obs=(self.s_pos - self.s_neg).mean(axis=0),
                           db_rcrnt=db_rcrnt)


def cd_statistics(params: HarmoniumParams, batch: AugmentedFrame, n_cd: int, mode: CdMode,
                  rng: np.random.Generator, negative_visible: str = 'means',
                  counter: PassCounter = None) -> CdStatistics:
    """
    Computes CD-n statistics for every frame of a batch.
    Hidden statistics are up-pass means in both phases.

    :param params: the harmonium parameters.
    :param batch: the data frames.
    :param n_cd: the number of Gibbs steps.
    :param mode: REFH resamples the recurrent inputs in the negative phase, TRBM clamps them.
    :param rng: the seeded generator.
    :param negative_visible: whether the negative visible statistics use the final 'samples' or 'means'.
    :param counter: an optional layer-pass counter.
    :return: the statistics.
    """
    if negative_visible not in NEGATIVE_VISIBLE_CHOICES:
        raise ValueError('Unknown negative visible statistic {}. Choose one of {}.'
                         .format(negative_visible, NEGATIVE_VISIBLE_CHOICES))

    batch = batch.flatten()
    if batch.batch_size == 0:
        raise ValueError('Cannot compute gradients of an empty batch.')

    # Positive phase.
    h_pos = up_pass(params, batch, counter)

    # Negative phase.
    chain = gibbs_chain(params, batch, n_cd, mode is CdMode.TRBM, rng, counter, init_hid_means=h_pos)
    if negative_visible == 'means':
        s_neg, r_neg = params.obs_spec.clamp(chain.obs_means), chain.rcrnt_means
    else:
        s_neg, r_neg = chain.frame.s, chain.frame.r_prev

    return CdStatistics(mode, h_pos, batch.s, batch.r_prev, chain.hid_means, s_neg, r_neg, chain.obs_means)


def cd_gradients(params: HarmoniumParams, batch: AugmentedFrame, n_cd: int, mode: CdMode,
                 rng: np.random.Generator, negative_visible: str = 'means') -> GradientSet:
    """
    Computes the batch-averaged CD-n gradient for all five parameter blocks.
    In TRBM mode no recurrent-bias gradient is produced.

    :param params: the harmonium parameters.
    :param batch: the data frames.
    :param n_cd: the number of Gibbs steps.
    :param mode: the negative-phase mode.
    :param rng: the seeded generator.
    :param negative_visible: 'samples' or 'means' for the negative visible statistics.
    :return: the gradient set.
    """
    return cd_statistics(params, batch, n_cd, mode, rng, negative_visible).gradients()
