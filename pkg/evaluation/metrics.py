from typing import Optional

import numpy as np

from core.exp_family import UnitFamily
from core.harmonium import HarmoniumParams, down_pass_obs
from core.temporal import RecurrentState
from world.population_code import PpcCodec, circular_difference


def center_of_mass(weights: np.ndarray, centers: np.ndarray, length: Optional[float] = None) -> np.ndarray:
    """
    Computes the activity-weighted average of the units' preferred stimuli.
    On a circle (finite length) the average is taken as the phase of the resultant vector.

    :param weights: nonnegative unit activities, shape (..., units).
    :param centers: the units' preferred stimuli.
    :param length: the circumference, or None for a linear stimulus space.
    :return: the centers of mass, NaN where all weights are zero.
    """
    weights = np.asarray(weights, dtype=float)
    total = weights.sum(axis=-1)
    empty = total <= 0

    with np.errstate(invalid='ignore', divide='ignore'):
        if length is None:
            estimate = weights @ centers / total
        else:
            angles = 2 * np.pi * np.asarray(centers) / length
            phase = np.arctan2(weights @ np.sin(angles), weights @ np.cos(angles))
            estimate = np.mod(phase, 2 * np.pi) * length / (2 * np.pi)

    return np.where(empty, np.nan, estimate)


def decode_position(params: HarmoniumParams, r: RecurrentState, codec: PpcCodec) -> np.ndarray:
    """
    Decodes stimulus positions from hidden means: a downward pass to the observation layer,
    then the circular center of mass of the Poisson block.

    :param params: the trained parameters.
    :param r: the hidden means, shape (..., hidden).
    :param codec: the population code of the observations.
    :return: the decoded positions, NaN where the Poisson means all vanish.
    """
    hidden = r.r if isinstance(r, RecurrentState) else np.asarray(r, dtype=float)
    block = params.obs_spec.block_slice(UnitFamily.POISSON)

    if block.stop - block.start != codec.n_units:
        raise ValueError('The Poisson block has {} units but the code has {}.'
                         .format(block.stop - block.start, codec.n_units))

    means = down_pass_obs(params, hidden)[..., block]
    return center_of_mass(means, codec.centers, codec.length)


def squared_position_errors(estimates: np.ndarray, truths: np.ndarray, length: float) -> np.ndarray:
    """ Returns the squared shortest circular distances, elementwise. """
    return circular_difference(estimates, truths, length) ** 2


def mse_position(estimates: np.ndarray, truths: np.ndarray, length: float) -> float:
    """
    The mean squared circular distance between estimated and true positions.

    :param estimates: the estimates.
    :param truths: the true positions, same shape.
    :param length: the circumference of the stimulus space.
    :return: the MSE.
    """
    estimates, truths = np.asarray(estimates, dtype=float), np.asarray(truths, dtype=float)
    if estimates.shape != truths.shape:
        raise ValueError('Estimates {} and truths {} have different shapes.'.format(estimates.shape, truths.shape))

    return float(np.mean(squared_position_errors(estimates, truths, length)))


def next_frame_mse(predictions: np.ndarray, truths: np.ndarray) -> float:
    """ The per-pixel mean squared error, averaged over frames and pixels. """
    predictions, truths = np.asarray(predictions, dtype=float), np.asarray(truths, dtype=float)
    if predictions.shape != truths.shape:
        raise ValueError('Predictions {} and truths {} have different shapes.'
                         .format(predictions.shape, truths.shape))

    return float(np.mean((predictions - truths) ** 2))
