from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np
from scipy.special import expit

# Poisson means are clamped into this range before sampling.
POISSON_MEAN_FLOOR = 1e-8
POISSON_MEAN_CEILING = 1e4

ArrayLike = Union[float, np.ndarray]


class UnitFamily(Enum):
    BERNOULLI = 'bernoulli'
    POISSON = 'poisson'


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError('Non-finite {} encountered.'.format(what))


def mean_from_natural(family: UnitFamily, eta: ArrayLike) -> ArrayLike:
    """
    Maps natural parameters to means, elementwise.

    :param family: the exponential family of the units.
    :param eta: the natural parameter(s).
    :return: the logistic of eta for Bernoulli units, the exponential of eta for Poisson units.
    """
    eta = np.asarray(eta, dtype=float)
    _check_finite(eta, 'natural parameter')

    if family is UnitFamily.BERNOULLI:
        means = expit(eta)
    elif family is UnitFamily.POISSON:
        means = np.exp(eta)
    else:
        raise ValueError('Unknown unit family {}.'.format(family))

    return means if means.ndim else float(means)


def clamp_mean(family: UnitFamily, mean: ArrayLike) -> ArrayLike:
    """ Clamps means into the range that is safe for sampling. """
    if family is UnitFamily.POISSON:
        return np.clip(mean, POISSON_MEAN_FLOOR, POISSON_MEAN_CEILING)

    return mean


def _check_mean_range(family: UnitFamily, mean: np.ndarray) -> None:
    if np.any(np.isnan(mean)):
        raise ValueError('NaN mean encountered for {} units.'.format(family.value))

    if family is UnitFamily.BERNOULLI and (np.any(mean < 0) or np.any(mean > 1)):
        raise ValueError('Bernoulli means must lie in [0, 1]. Got values in [{}, {}].'
                         .format(mean.min(), mean.max()))

    if family is UnitFamily.POISSON and np.any(mean < 0):
        raise ValueError('Poisson means must be nonnegative. Got minimum {}.'.format(mean.min()))


def sample_unit(family: UnitFamily, mean: ArrayLike, rng: np.random.Generator) -> ArrayLike:
    """
    Draws samples with the given means.

    :param family: the exponential family of the units.
    :param mean: the mean(s) of the units.
    :param rng: the seeded generator.
    :return: 0/1 values for Bernoulli units, nonnegative integer counts (as floats) for Poisson units.
    """
    mean = np.asarray(mean, dtype=float)
    _check_mean_range(family, mean)

    if family is UnitFamily.BERNOULLI:
        samples = (rng.random(mean.shape) < mean).astype(float)
    else:
        # numpy switches between inversion and PTRS rejection on its own.
        samples = rng.poisson(clamp_mean(family, mean)).astype(float)

    return samples if samples.ndim else float(samples)


@dataclass(frozen=True)
class LayerSpec:
    """ An ordered list of (family, count) blocks, defining the vector layout of a layer. """
    blocks: Tuple[Tuple[UnitFamily, int], ...]

    def __post_init__(self):
        # Normalize lists (e.g. from a checkpoint) into tuples.
        blocks = tuple((UnitFamily(family), int(count)) for family, count in self.blocks)
        object.__setattr__(self, 'blocks', blocks)

        for family, count in self.blocks:
            if count <= 0:
                raise ValueError('Block counts must be positive integers. Got {} for {} units.'
                                 .format(count, family.value))

        if self.size <= 0:
            raise ValueError('A layer must contain at least one unit.')

    @classmethod
    def single(cls, family: UnitFamily, count: int) -> 'LayerSpec':
        return cls(((family, count),))

    @property
    def size(self) -> int:
        return sum(count for _, count in self.blocks)

    def slices(self) -> [Tuple[UnitFamily, slice]]:
        """
        Returns the slice of the layer vector occupied by each block.

        :return: a list of (family, slice) pairs, in layout order.
        """
        start, result = 0, []
        for family, count in self.blocks:
            result.append((family, slice(start, start + count)))
            start += count

        return result

    def block_slice(self, family: UnitFamily) -> slice:
        """ Returns the slice of the first block of the given family. """
        for block_family, block in self.slices():
            if block_family is family:
                return block

        raise ValueError('The layer has no {} block.'.format(family.value))

    def mean_from_natural(self, eta: np.ndarray) -> np.ndarray:
        """
        Applies each block's nonlinearity along the last axis.

        :param eta: natural parameters with shape (..., size).
        :return: the means, with the same shape.
        """
        means = np.empty_like(eta, dtype=float)
        for family, block in self.slices():
            means[..., block] = mean_from_natural(family, eta[..., block])

        return means

    def clamp(self, means: np.ndarray) -> np.ndarray:
        clamped = np.array(means, dtype=float)
        for family, block in self.slices():
            clamped[..., block] = clamp_mean(family, clamped[..., block])

        return clamped

    def sample(self, means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """
        Samples every unit of the layer, block by block.

        :param means: means with shape (..., size).
        :param rng: the seeded generator.
        :return: the samples, with the same shape.
        """
        samples = np.empty_like(means, dtype=float)
        for family, block in self.slices():
            samples[..., block] = sample_unit(family, means[..., block], rng)

        return samples

    def to_list(self) -> list:
        return [[family.value, count] for family, count in self.blocks]

    @classmethod
    def from_list(cls, blocks: list) -> 'LayerSpec':
        return cls(tuple((UnitFamily(family), int(count)) for family, count in blocks))
