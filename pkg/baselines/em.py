from typing import List, NamedTuple

import numpy as np

from baselines.kalman import LdsModel, PseudoObs, kalman_smoother, to_displacement
from world.population_code import circular_difference

DEFAULT_N_ITERS = 30
DEFAULT_N_RESTARTS = 20
# A flat initial state: centered, with a huge covariance.
INIT_VARIANCE = 1e6
INIT_PROCESS_VARIANCE = 1e-4
INIT_TRANSITION_NOISE = .01
MAX_JITTER_RESTARTS = 10


class EmRestart(NamedTuple):
    model: LdsModel
    log_likelihood: float
    trace: List[float]


class EmFit(NamedTuple):
    model: LdsModel
    trace: List[float]
    restarts: List[EmRestart]


def unwrap_pseudo_obs(pseudo_obs: PseudoObs, length: float) -> PseudoObs:
    """
    Turns wrapped pseudo-observation sequences into continuous displacement sequences:
    each informative observation is placed at the shortest circular step from the previous one.

    :param pseudo_obs: pseudo-observations on [0, length), shapes (..., T).
    :param length: the circumference of the stimulus space.
    :return: the unwrapped pseudo-observations; uninformative steps keep z = NaN.
    """
    z, R = np.asarray(pseudo_obs.z, dtype=float), np.asarray(pseudo_obs.R, dtype=float)
    informative = np.isfinite(R)

    unwrapped = np.full(z.shape, np.nan)
    previous_wrapped = np.full(z.shape[:-1], np.nan)
    previous = np.full(z.shape[:-1], np.nan)
    for t in range(z.shape[-1]):
        observed = informative[..., t]
        first = observed & np.isnan(previous)

        step = circular_difference(z[..., t], previous_wrapped, length)
        current = np.where(first, to_displacement(z[..., t], length), previous + step)

        unwrapped[..., t] = np.where(observed, current, np.nan)
        previous = np.where(observed, current, previous)
        previous_wrapped = np.where(observed, z[..., t], previous_wrapped)

    return PseudoObs(unwrapped, R)


def _initial_model(order: int, rng: np.random.Generator) -> LdsModel:
    k = order
    return LdsModel(order, np.eye(k) + INIT_TRANSITION_NOISE * rng.standard_normal((k, k)),
                    INIT_PROCESS_VARIANCE * np.eye(k), np.zeros(k), INIT_VARIANCE * np.eye(k))


def _mean_log_likelihood(total: np.ndarray, n_informative: int) -> float:
    return float(np.sum(total)) / max(n_informative, 1)


def _m_step(model: LdsModel, means: np.ndarray, covs: np.ndarray, lag_one: np.ndarray) -> LdsModel:
    """ Closed-form updates of A, Q and the initial state; C and R stay fixed. """
    second_moments = covs + means[..., :, np.newaxis] * means[..., np.newaxis, :]
    cross_moments = lag_one[..., 1:, :, :] + means[..., 1:, :, np.newaxis] * means[..., :-1, np.newaxis, :]

    k = model.k
    S00 = second_moments[..., :-1, :, :].reshape(-1, k, k).sum(axis=0)
    S11 = second_moments[..., 1:, :, :].reshape(-1, k, k).sum(axis=0)
    S10 = cross_moments.reshape(-1, k, k).sum(axis=0)
    n_transitions = cross_moments.reshape(-1, k, k).shape[0]

    A = np.linalg.solve(S00.T, S10.T).T
    Q = (S11 - A @ S10.T) / n_transitions

    # The initial state: mean of the smoothed first states, and their covariance plus spread.
    first_means, first_covs = means[..., 0, :].reshape(-1, k), covs[..., 0, :, :].reshape(-1, k, k)
    init_mean = first_means.mean(axis=0)
    spread = first_means - init_mean
    init_cov = first_covs.mean(axis=0) + spread.T @ spread / first_means.shape[0]

    return LdsModel(model.order, A, (Q + Q.T) / 2, init_mean, (init_cov + init_cov.T) / 2, model.C)


def _run_restart(order: int, pseudo_obs: PseudoObs, n_iters: int, rng: np.random.Generator) -> EmRestart:
    model = _initial_model(order, rng)
    trace = []
    for _ in range(n_iters):
        smoothed = kalman_smoother(model, pseudo_obs)
        trace.append(_mean_log_likelihood(smoothed.filtered.log_likelihood, smoothed.filtered.n_informative))
        model = _m_step(model, smoothed.means, smoothed.covs, smoothed.lag_one_covs)

    smoothed = kalman_smoother(model, pseudo_obs)
    trace.append(_mean_log_likelihood(smoothed.filtered.log_likelihood, smoothed.filtered.n_informative))

    if not np.all(np.isfinite(trace)):
        raise np.linalg.LinAlgError('The log-likelihood became non-finite.')

    return EmRestart(model, trace[-1], trace)


def em_fit(order: int, pseudo_obs: PseudoObs, n_iters: int = DEFAULT_N_ITERS, n_restarts: int = DEFAULT_N_RESTARTS,
           rng: np.random.Generator = None, verbose: bool = False) -> EmFit:
    """
    Learns the transition matrix, process covariance and initial state of a state-space model with EM.
    The observation row selects the first state component and the per-step observation variances
    are given, so nothing else is learned.

    :param order: the state dimension, 1 or 2.
    :param pseudo_obs: unwrapped displacement sequences, shapes (trajectories, T).
    :param n_iters: the number of EM iterations per restart.
    :param n_restarts: the number of random restarts.
    :param rng: the seeded generator.
    :param verbose: print one line per restart.
    :return: the best model, its log-likelihood trace (mean per informative observation) and every restart.
    """
    if order not in (1, 2):
        raise ValueError('EM learns first- or second-order models. Got order {}.'.format(order))

    if n_iters < 1 or n_restarts < 1:
        raise ValueError('EM needs at least one iteration and one restart.')

    rng = np.random.default_rng() if rng is None else rng

    restarts = []
    for restart in range(n_restarts):
        for attempt in range(MAX_JITTER_RESTARTS):
            try:
                result = _run_restart(order, pseudo_obs, n_iters, rng)
                break
            except (np.linalg.LinAlgError, ValueError) as error:
                print('EM restart {} hit a degenerate covariance ({}); restarting with jitter.'.format(restart, error))
        else:
            raise np.linalg.LinAlgError('EM restart {} failed {} times.'.format(restart, MAX_JITTER_RESTARTS))

        restarts.append(result)
        if verbose:
            print('EM order {}, restart {}: mean log-likelihood {:.6f}.'.format(order, restart, result.log_likelihood))

    # Ties go to the earliest restart.
    best = restarts[int(np.argmax([restart.log_likelihood for restart in restarts]))]
    return EmFit(best.model, best.trace, restarts)
