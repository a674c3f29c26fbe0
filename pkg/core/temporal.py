from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from core.exp_family import LayerSpec, UnitFamily
from core.harmonium import AugmentedFrame, DimensionMismatchError, GradientSet, HarmoniumParams, PassCounter, \
    down_pass_obs, down_pass_rcrnt, up_pass

DEFAULT_N_GIBBS = 50
DEFAULT_N_AVERAGE = 25


@dataclass
class RecurrentState:
    """ The vector of hidden-unit posterior means carried across time. """
    r: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        if np.any(self.r < 0) or np.any(self.r > 1):
            raise ValueError('Recurrent states must lie in [0, 1].')


def _as_recurrent_array(r: Union[RecurrentState, np.ndarray]) -> np.ndarray:
    return r.r if isinstance(r, RecurrentState) else np.asarray(r, dtype=float)


def _check_recurrence(params: HarmoniumParams) -> None:
    if params.n_rcrnt != params.n_hid:
        raise DimensionMismatchError('Temporal use needs as many recurrent ({}) as hidden ({}) units.'
                                     .format(params.n_rcrnt, params.n_hid))


def _filter(params: HarmoniumParams, obs_seq: np.ndarray, r_init: np.ndarray, sample_recurrent: bool,
            rng: np.random.Generator, counter: PassCounter) -> Tuple[np.ndarray, np.ndarray]:
    _check_recurrence(params)
    obs_seq = np.asarray(obs_seq, dtype=float)
    if obs_seq.ndim < 2:
        raise DimensionMismatchError('Observation sequences need a time axis, got shape {}.'.format(obs_seq.shape))

    if sample_recurrent and rng is None:
        raise ValueError('Sampled recurrent inputs need a generator.')

    batch_shape, n_steps = obs_seq.shape[:-2], obs_seq.shape[-2]
    r = np.zeros(batch_shape + (params.n_hid,)) if r_init is None else np.broadcast_to(
        _as_recurrent_array(r_init), batch_shape + (params.n_hid,))

    means = np.empty(batch_shape + (n_steps, params.n_hid))
    inputs = np.empty_like(means)
    for t in range(n_steps):
        inputs[..., t, :] = r
        means[..., t, :] = up_pass(params, AugmentedFrame(r, obs_seq[..., t, :]), counter)
        r = params.rcrnt_spec.sample(means[..., t, :], rng) if sample_recurrent else means[..., t, :]

    return means, inputs


def filter_pass(params: HarmoniumParams, obs_seq: np.ndarray, r_init: np.ndarray = None,
                sample_recurrent: bool = False, rng: np.random.Generator = None,
                counter: PassCounter = None) -> np.ndarray:
    """
    Runs the recurrence r_t = up_pass([r_{t-1}, s_t]) over observation sequences.

    :param params: the harmonium parameters.
    :param obs_seq: observations with shape (..., T, obs).
    :param r_init: the recurrent input of the first step, zeros by default.
    :param sample_recurrent: feed Bernoulli samples of the means forward instead of the means.
    :param rng: the seeded generator, required when sampling.
    :param counter: an optional layer-pass counter.
    :return: the hidden means r_0..r_{T-1}, shape (..., T, hidden).
    """
    return _filter(params, obs_seq, r_init, sample_recurrent, rng, counter)[0]


def augment(params: HarmoniumParams, obs_seq: np.ndarray, r_init: np.ndarray = None,
            sample_recurrent: bool = False, rng: np.random.Generator = None) -> AugmentedFrame:
    """
    Builds the augmented training frames [r_{t-1}, s_t] of observation sequences.

    :return: the frames, with shape (..., T, units).
    """
    inputs = _filter(params, obs_seq, r_init, sample_recurrent, rng, None)[1]
    return AugmentedFrame(inputs, obs_seq)


def _nonlinearity_derivative(spec: LayerSpec, means: np.ndarray) -> np.ndarray:
    derivative = np.empty_like(means)
    for family, block in spec.slices():
        block_means = means[..., block]
        derivative[..., block] = block_means * (1 - block_means) if family is UnitFamily.BERNOULLI else block_means

    return derivative


def bptt_recursion(params: HarmoniumParams, m_seq: np.ndarray, direct_grads: np.ndarray) -> np.ndarray:
    """
    Backpropagates through the recurrence m_t = f(W s_t + U m_{t-1} + b_hid).

    :param params: the harmonium parameters.
    :param m_seq: the hidden means, shape (..., T, hidden).
    :param direct_grads: the direct derivative of the loss with respect to each m_t.
    :return: y_t, the derivative of the loss with respect to the step-t natural parameters.
    """
    _check_recurrence(params)
    m_seq = np.asarray(m_seq, dtype=float)
    direct_grads = np.asarray(direct_grads, dtype=float)
    if m_seq.shape != direct_grads.shape:
        raise DimensionMismatchError('Hidden means {} and gradients {} are misaligned.'
                                     .format(m_seq.shape, direct_grads.shape))

    jacobians = _nonlinearity_derivative(params.hid_spec, m_seq)
    y = np.zeros_like(m_seq)
    y_next = np.zeros(m_seq.shape[:-2] + m_seq.shape[-1:])

    for t in reversed(range(m_seq.shape[-2])):
        # The Jacobian is diagonal, so it is applied as a Hadamard product.
        y[..., t, :] = jacobians[..., t, :] * (direct_grads[..., t, :] + y_next @ params.U)
        y_next = y[..., t, :]

    return y


def bptt_backward(params: HarmoniumParams, m_seq: np.ndarray, s_seq: np.ndarray,
                  per_step_hidbias_grads: np.ndarray) -> np.ndarray:
    """
    Computes the backward BPTT vectors y_0..y_T, with y_{T+1} = 0 and
    y_t = J_t U^T (g_t + y_{t+1}).

    :param params: the harmonium parameters.
    :param m_seq: the hidden means m_0..m_T.
    :param s_seq: the observations s_0..s_T.
    :param per_step_hidbias_grads: g_t, the gradient of log q(s_{t+1} | m_t) with respect to the hidden biases.
    :return: the BPTT vectors, one row per time step.
    """
    m_seq, s_seq = np.asarray(m_seq, dtype=float), np.asarray(s_seq, dtype=float)
    per_step_hidbias_grads = np.asarray(per_step_hidbias_grads, dtype=float)

    if not (m_seq.shape[:-1] == s_seq.shape[:-1] == per_step_hidbias_grads.shape[:-1]):
        raise DimensionMismatchError('Sequences are misaligned: means {}, observations {}, gradients {}.'
                                     .format(m_seq.shape, s_seq.shape, per_step_hidbias_grads.shape))

    # m_t enters the next step's hidden natural parameters through U.
    return bptt_recursion(params, m_seq, per_step_hidbias_grads @ params.U)


def bptt_gradient_terms(y: np.ndarray, s_seq: np.ndarray, r_prev_seq: np.ndarray) -> GradientSet:
    """
    Assembles the parameter gradients carried by the BPTT vectors, summed over time.

    :param y: the BPTT vectors, shape (T, hidden).
    :param s_seq: the observations, shape (T, obs).
    :param r_prev_seq: the recurrent inputs r_{t-1}, shape (T, hidden).
    :return: the gradient set; only W, U and the hidden biases receive terms.
    """
    return GradientSet(dW=y.T @ s_seq, dU=y.T @ r_prev_seq, db_hid=y.sum(axis=0),
                       db_obs=np.zeros(s_seq.shape[-1]), db_rcrnt=np.zeros(r_prev_seq.shape[-1]))


def generate_reverse_refh(params: HarmoniumParams, n_steps: int, seed_hidden: np.ndarray,
                          rng: np.random.Generator, use_means: bool = False, emit_means: bool = False,
                          counter: PassCounter = None) -> np.ndarray:
    """
    Generates a sequence backwards in time: each hidden vector yields the current observation
    and the previous hidden vector through a single downward pass.

    :param params: the harmonium parameters.
    :param n_steps: the number of frames to generate.
    :param seed_hidden: the hidden vector of the final frame.
    :param rng: the seeded generator.
    :param use_means: continue from the recurrent means instead of samples of them.
    :param emit_means: emit observation means instead of samples.
    :param counter: an optional layer-pass counter.
    :return: the frames in forward order, shape (n_steps, obs).
    """
    _check_recurrence(params)
    h = np.asarray(seed_hidden, dtype=float)
    if h.shape != (params.n_hid,):
        raise DimensionMismatchError('The seed hidden vector should have shape ({},), got {}.'
                                     .format(params.n_hid, h.shape))

    frames = []
    for _ in range(n_steps):
        obs_means = down_pass_obs(params, h, counter)
        frames.append(obs_means if emit_means else params.obs_spec.sample(obs_means, rng))

        rcrnt_means = down_pass_rcrnt(params, h, counter)
        h = rcrnt_means if use_means else params.rcrnt_spec.sample(rcrnt_means, rng)

    return np.array(frames[::-1]).reshape(n_steps, params.n_obs)


def generate_forward_gibbs(params: HarmoniumParams, n_steps: int, rng: np.random.Generator,
                           n_gibbs: int = DEFAULT_N_GIBBS, r_init: np.ndarray = None,
                           counter: PassCounter = None) -> np.ndarray:
    """
    Generates a sequence forwards in time. At each step the recurrent inputs are clamped to the
    current state while n_gibbs down/up cycles run; the last observation sample is emitted and
    the last up-pass means become the next state.

    :param params: the harmonium parameters.
    :param n_steps: the number of frames to generate.
    :param rng: the seeded generator.
    :param n_gibbs: the number of Gibbs cycles per frame.
    :param r_init: the initial recurrent state, zeros by default.
    :param counter: an optional layer-pass counter.
    :return: the frames, shape (n_steps, obs).
    """
    _check_recurrence(params)
    if n_gibbs < 1:
        raise ValueError('At least one Gibbs cycle per frame is needed. Got {}.'.format(n_gibbs))

    r = np.zeros(params.n_hid) if r_init is None else _as_recurrent_array(r_init)
    h = params.hid_spec.sample(np.full(params.n_hid, .5), rng)

    frames = np.empty((n_steps, params.n_obs))
    for t in range(n_steps):
        for _ in range(n_gibbs):
            s = params.obs_spec.sample(down_pass_obs(params, h, counter), rng)
            hid_means = up_pass(params, AugmentedFrame(r, s), counter)
            h = params.hid_spec.sample(hid_means, rng)

        frames[t] = s
        r = hid_means

    return frames


def predict_next_frame(params: HarmoniumParams, r_t: Union[RecurrentState, np.ndarray], rng: np.random.Generator,
                       n_gibbs: int = DEFAULT_N_GIBBS, n_average: int = DEFAULT_N_AVERAGE,
                       counter: PassCounter = None) -> np.ndarray:
    """
    Estimates E[s_{t+1} | r_t] with Gibbs sampling, the recurrent inputs clamped to r_t,
    averaging the observation means of the last n_average cycles.

    :param params: the harmonium parameters.
    :param r_t: the current recurrent state(s), shape (..., hidden).
    :param rng: the seeded generator.
    :param n_gibbs: the number of Gibbs cycles.
    :param n_average: the number of final cycles averaged.
    :param counter: an optional layer-pass counter.
    :return: the predicted observation means, shape (..., obs).
    """
    _check_recurrence(params)
    if not 1 <= n_average <= n_gibbs:
        raise ValueError('Cannot average {} of {} Gibbs cycles.'.format(n_average, n_gibbs))

    r = _as_recurrent_array(r_t)
    h = params.hid_spec.sample(r, rng)
    prediction = np.zeros(r.shape[:-1] + (params.n_obs,))

    for cycle in range(n_gibbs):
        obs_means = down_pass_obs(params, h, counter)
        if cycle >= n_gibbs - n_average:
            prediction += obs_means

        s = params.obs_spec.sample(obs_means, rng)
        h = params.hid_spec.sample(up_pass(params, AugmentedFrame(r, s), counter), rng)

    return prediction / n_average
