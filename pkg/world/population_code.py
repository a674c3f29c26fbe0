from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

DEFAULT_N_UNITS = 15
DEFAULT_GAIN_RANGE = (6.4, 9.6)
DEFAULT_LENGTH = 1.
# The tuning curves' full width at half maximum, as a fraction of the stimulus interval.
FWHM_FRACTION = 1 / 6


def circular_difference(x: np.ndarray, y: np.ndarray, length: float) -> np.ndarray:
    """ Returns the signed shortest distance from y to x on a circle of the given length. """
    return np.mod(np.asarray(x) - np.asarray(y) + length / 2, length) - length / 2


@dataclass
class PpcCodec:
    """ A population of Poisson neurons with Gaussian tuning curves, evenly tiling a circular stimulus interval. """
    n_units: int = DEFAULT_N_UNITS
    gain_range: Tuple[float, float] = DEFAULT_GAIN_RANGE
    length: float = DEFAULT_LENGTH

    def __post_init__(self):
        if self.n_units < 2:
            raise ValueError('A population code needs at least two units. Got {}.'.format(self.n_units))

        low, high = self.gain_range
        if not 0 < low <= high:
            raise ValueError('Invalid gain range {}.'.format(self.gain_range))

        self.gain_range = float(low), float(high)

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_units) + .5) * self.length / self.n_units

    @property
    def sigma_tc(self) -> float:
        return FWHM_FRACTION * self.length / (2 * np.sqrt(2 * np.log(2)))

    def tuning(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """
        Evaluates the unit-gain tuning curves, with wrap-aware distances.

        :param x: stimulus position(s), shape (...).
        :return: the tuning curve values, shape (..., n_units).
        """
        distance = circular_difference(np.asarray(x, dtype=float)[..., np.newaxis], self.centers, self.length)
        return np.exp(-distance ** 2 / (2 * self.sigma_tc ** 2))

    def to_dict(self) -> dict:
        return {'n_units': self.n_units, 'gain_range': list(self.gain_range), 'length': self.length}

    @classmethod
    def from_dict(cls, config: dict) -> 'PpcCodec':
        config = dict(config)
        if 'gain_range' in config:
            config['gain_range'] = tuple(config['gain_range'])

        return cls(**config)


def ppc_encode(codec: PpcCodec, x: Union[float, np.ndarray], gain: Union[float, np.ndarray],
               rng: np.random.Generator) -> np.ndarray:
    """
    Draws independent Poisson spike counts with means gain * tuning(x).

    :param codec: the population code.
    :param x: stimulus position(s) in [0, length).
    :param gain: the population gain(s), broadcastable against x.
    :param rng: the seeded generator.
    :return: the counts (as floats), shape (..., n_units).
    """
    gain = np.asarray(gain, dtype=float)
    if np.any(gain < 0):
        raise ValueError('Gains cannot be negative.')

    rates = gain[..., np.newaxis] * codec.tuning(x)
    return rng.poisson(rates).astype(float)


def sample_gain(codec: PpcCodec, rng: np.random.Generator, size=None) -> Union[float, np.ndarray]:
    """ Draws gains uniformly from the codec's gain range, independently per time step. """
    low, high = codec.gain_range
    return rng.uniform(low, high, size)
