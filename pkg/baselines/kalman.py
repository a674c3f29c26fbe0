from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from evaluation.metrics import center_of_mass
from world.lds import LdsWorld
from world.population_code import PpcCodec, circular_difference

# Covariances may dip below zero by round-off only.
PSD_TOLERANCE = 1e-10


def _check_psd(matrix: np.ndarray, what: str) -> None:
    if not np.allclose(matrix, np.swapaxes(matrix, -1, -2)):
        raise ValueError('{} must be symmetric.'.format(what))

    if np.linalg.eigvalsh(matrix).min() < -PSD_TOLERANCE:
        raise ValueError('{} must be positive semi-definite.'.format(what))


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + np.swapaxes(matrix, -1, -2)) / 2


@dataclass
class LdsModel:
    """
    A linear-Gaussian state-space model observed through its first state component.
    Order 0 has no dynamics: the estimate is the latest pseudo-observation.
    The observation noise is supplied per step, so R_base is only a placeholder.
    """
    order: int
    A: np.ndarray
    Q: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    C: np.ndarray = None
    R_base: float = 1.

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError('Model order must be 0, 1 or 2. Got {}.'.format(self.order))

        k = max(self.order, 1)
        self.A = np.array(self.A, dtype=float).reshape(k, k)
        self.Q = np.array(self.Q, dtype=float).reshape(k, k)
        self.init_mean = np.array(self.init_mean, dtype=float).reshape(k)
        self.init_cov = np.array(self.init_cov, dtype=float).reshape(k, k)
        self.C = np.eye(1, k).ravel() if self.C is None else np.array(self.C, dtype=float).reshape(k)

        _check_psd(self.Q, 'The process covariance')
        _check_psd(self.init_cov, 'The initial covariance')

    @property
    def k(self) -> int:
        return self.A.shape[0]

    @classmethod
    def no_dynamics(cls) -> 'LdsModel':
        return cls(0, np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)))

    def to_dict(self) -> dict:
        return {'order': self.order, 'A': self.A.tolist(), 'Q': self.Q.tolist(), 'init_mean': self.init_mean.tolist(),
                'init_cov': self.init_cov.tolist(), 'C': self.C.tolist()}


def optimal_model(world: LdsWorld) -> LdsModel:
    """ The true oscillator dynamics, in displacement coordinates, with a flat initial position. """
    return LdsModel(2, world.A, world.transition_cov, np.zeros(2),
                    np.diag([world.length ** 2 / 12, world.init_velocity_std ** 2]))


@dataclass
class KalmanBelief:
    mean: np.ndarray
    cov: np.ndarray


class PseudoObs(NamedTuple):
    # Positions, NaN where no spikes were observed.
    z: np.ndarray
    # Variances, infinite where no spikes were observed.
    R: np.ndarray


def ppc_pseudo_obs(codec: PpcCodec, counts: np.ndarray) -> PseudoObs:
    """
    Summarizes population spike counts as a Gaussian observation: the circular center of mass,
    with the tuning-curve variance shrunk by the total spike count.

    :param codec: the population code.
    :param counts: spike counts, shape (..., n_units).
    :return: the pseudo-observations; zero-spike steps carry R = inf.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1)

    with np.errstate(divide='ignore'):
        R = np.where(total > 0, codec.sigma_tc ** 2 / total, np.inf)

    return PseudoObs(center_of_mass(counts, codec.centers, codec.length), R)


def to_displacement(z: np.ndarray, length: float) -> np.ndarray:
    """ Maps positions on [0, length) to signed displacements from the middle. """
    return circular_difference(z, length / 2, length)


def from_displacement(x: np.ndarray, length: float) -> np.ndarray:
    return np.mod(np.asarray(x) + length / 2, length)


class FilterResult(NamedTuple):
    # Filtered and one-step predicted moments, shapes (..., T, k) and (..., T, k, k).
    means: np.ndarray
    covs: np.ndarray
    pred_means: np.ndarray
    pred_covs: np.ndarray
    # Total log-likelihood per trajectory and number of informative observations.
    log_likelihood: np.ndarray
    n_informative: int

    def beliefs(self, trajectory: int = None) -> List[KalmanBelief]:
        means = self.means if trajectory is None else self.means[trajectory]
        covs = self.covs if trajectory is None else self.covs[trajectory]
        return [KalmanBelief(mean, cov) for mean, cov in zip(means, covs)]


def kalman_filter(model: LdsModel, pseudo_obs: PseudoObs, length: Optional[float] = None) -> FilterResult:
    """
    Runs the predict/update recursion over batches of pseudo-observation sequences.
    Steps with R = inf only predict.

    :param model: the state-space model; order 0 returns the pseudo-observations themselves.
    :param pseudo_obs: observations in displacement coordinates, shapes (..., T).
    :param length: the circumference for circular innovations, or None for linear ones.
    :return: the filtered and predicted moments and the log-likelihood.
    """
    z, R = np.asarray(pseudo_obs.z, dtype=float), np.asarray(pseudo_obs.R, dtype=float)
    if z.shape != R.shape or z.ndim < 1:
        raise ValueError('Pseudo-observation positions {} and variances {} are misaligned.'.format(z.shape, R.shape))

    informative = np.isfinite(R)
    if model.order == 0:
        return _no_dynamics_filter(z, R, informative)

    batch_shape, n_steps, k = z.shape[:-1], z.shape[-1], model.k
    A, C, Q = model.A, model.C, model.Q

    means, covs = np.empty(batch_shape + (n_steps, k)), np.empty(batch_shape + (n_steps, k, k))
    pred_means, pred_covs = np.empty_like(means), np.empty_like(covs)
    log_likelihood = np.zeros(batch_shape)

    m = np.broadcast_to(model.init_mean, batch_shape + (k,))
    P = np.broadcast_to(model.init_cov, batch_shape + (k, k))
    for t in range(n_steps):
        if t > 0:
            m = m @ A.T
            P = _symmetrize(A @ P @ A.T + Q)

        pred_means[..., t, :], pred_covs[..., t, :, :] = m, P

        # Update.
        observed = informative[..., t]
        PC = P @ C
        S = PC @ C + np.where(observed, R[..., t], 0.)
        innovation = z[..., t] - m @ C if length is None else circular_difference(z[..., t], m @ C, length)
        innovation = np.where(observed, innovation, 0.)
        with np.errstate(divide='ignore', invalid='ignore'):
            gain = np.where(observed[..., np.newaxis], PC / S[..., np.newaxis], 0.)
            step_likelihood = -.5 * (np.log(2 * np.pi * S) + innovation ** 2 / S)

        m = m + gain * innovation[..., np.newaxis]
        P = _symmetrize(P - gain[..., :, np.newaxis] * PC[..., np.newaxis, :])
        means[..., t, :], covs[..., t, :, :] = m, P

        log_likelihood += np.where(observed, step_likelihood, 0.)

    return FilterResult(means, covs, pred_means, pred_covs, log_likelihood, int(informative.sum()))


def _no_dynamics_filter(z: np.ndarray, R: np.ndarray, informative: np.ndarray) -> FilterResult:
    # Each estimate is the latest informative observation, the middle (zero) before any.
    means, covs = np.zeros(z.shape + (1,)), np.full(z.shape + (1, 1), np.inf)
    estimate, variance = np.zeros(z.shape[:-1]), np.full(z.shape[:-1], np.inf)

    for t in range(z.shape[-1]):
        estimate = np.where(informative[..., t], z[..., t], estimate)
        variance = np.where(informative[..., t], R[..., t], variance)
        means[..., t, 0], covs[..., t, 0, 0] = estimate, variance

    return FilterResult(means, covs, means, covs, np.zeros(z.shape[:-1]), int(informative.sum()))


class SmootherResult(NamedTuple):
    means: np.ndarray
    covs: np.ndarray
    # Cov(x_t, x_{t-1}) given all observations; zero at t = 0.
    lag_one_covs: np.ndarray
    filtered: FilterResult


def kalman_smoother(model: LdsModel, pseudo_obs: PseudoObs, length: Optional[float] = None) -> SmootherResult:
    """
    Runs the Rauch-Tung-Striebel backward recursion over the filter's output.

    :param model: the state-space model, of order 1 or 2.
    :param pseudo_obs: observations in displacement coordinates, shapes (..., T).
    :param length: the circumference for circular innovations, or None for linear ones.
    :return: the smoothed moments, the lag-one covariances and the filter's output.
    """
    if model.order == 0:
        raise ValueError('There is nothing to smooth without dynamics.')

    filtered = kalman_filter(model, pseudo_obs, length)
    means, covs = filtered.means.copy(), filtered.covs.copy()
    lag_one = np.zeros_like(covs)
    A = model.A

    for t in reversed(range(means.shape[-2] - 1)):
        # J_t = P_{t|t} A^T P_{t+1|t}^{-1}, with symmetric covariances.
        J = np.swapaxes(np.linalg.solve(filtered.pred_covs[..., t + 1, :, :], A @ filtered.covs[..., t, :, :]), -1, -2)
        difference = means[..., t + 1, :] - filtered.pred_means[..., t + 1, :]

        means[..., t, :] = filtered.means[..., t, :] + (J @ difference[..., np.newaxis])[..., 0]
        covs[..., t, :, :] = _symmetrize(filtered.covs[..., t, :, :] + J @ (
                covs[..., t + 1, :, :] - filtered.pred_covs[..., t + 1, :, :]) @ np.swapaxes(J, -1, -2))
        lag_one[..., t + 1, :, :] = covs[..., t + 1, :, :] @ np.swapaxes(J, -1, -2)

    return SmootherResult(means, covs, lag_one, filtered)


def filter_positions(model: LdsModel, pseudo_obs: PseudoObs, length: float) -> np.ndarray:
    """
    Filters pseudo-observations given in stimulus coordinates and returns position estimates on [0, length).

    :param model: the state-space model.
    :param pseudo_obs: pseudo-observations as returned by ppc_pseudo_obs.
    :param length: the circumference of the stimulus space.
    :return: the filtered positions, shape (..., T).
    """
    displaced = PseudoObs(np.where(np.isfinite(pseudo_obs.R), to_displacement(pseudo_obs.z, length), np.nan),
                          pseudo_obs.R)
    return from_displacement(kalman_filter(model, displaced, length).means @ model.C, length)
