import numpy as np
import pytest
from scipy.signal import fftconvolve

from baselines.kalman import LdsModel, PseudoObs, filter_positions, kalman_filter, kalman_smoother, optimal_model, \
    ppc_pseudo_obs
from world.datasets import generate_lds_dataset
from world.lds import LdsWorld
from world.population_code import PpcCodec

A, Q, R, INIT_VAR = .95, .01, .05, 1.


def scalar_model() -> LdsModel:
    return LdsModel(1, [[A]], [[Q]], [0.], [[INIT_VAR]])


def scalar_observations(n_steps: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x, z = rng.normal(0, np.sqrt(INIT_VAR)), []
    for _ in range(n_steps):
        z.append(x + rng.normal(0, np.sqrt(R)))
        x = A * x + rng.normal(0, np.sqrt(Q))

    return np.array(z)


def grid_filter(z: np.ndarray, n_bins: int = 10000, half_width: float = 4.) -> np.ndarray:
    """ Bayes filter on a dense grid: the transition is a rescaling followed by a Gaussian convolution. """
    grid, dx = np.linspace(-half_width, half_width, n_bins, retstep=True)
    offsets = np.arange(-1500, 1501) * dx
    kernel = np.exp(-offsets ** 2 / (2 * Q)) / np.sqrt(2 * np.pi * Q)

    density = np.exp(-grid ** 2 / (2 * INIT_VAR))
    means = []
    for t, observation in enumerate(z):
        if t > 0:
            # The density of A x, then the additive noise.
            scaled = np.interp(grid / A, grid, density, left=0., right=0.) / A
            density = fftconvolve(scaled, kernel, mode='same') * dx

        density = density * np.exp(-(observation - grid) ** 2 / (2 * R))
        density /= density.sum() * dx
        means.append(np.sum(grid * density) * dx)

    return np.array(means)


def test_filter_matches_a_grid_bayes_filter():
    z = scalar_observations(100, seed=0)
    result = kalman_filter(scalar_model(), PseudoObs(z, np.full(100, R)))

    assert np.max(np.abs(result.means[:, 0] - grid_filter(z))) < 1e-3


def test_uninformative_steps_only_predict():
    z = np.array([.3, np.nan, np.nan])
    result = kalman_filter(scalar_model(), PseudoObs(z, np.array([R, np.inf, np.inf])))

    np.testing.assert_allclose(result.means[1:, 0], result.means[0, 0] * np.array([A, A ** 2]))
    assert result.n_informative == 1
    assert np.isfinite(result.log_likelihood)


def test_filter_batches_trajectories():
    z = np.stack([scalar_observations(30, seed) for seed in range(3)])
    batched = kalman_filter(scalar_model(), PseudoObs(z, np.full(z.shape, R)))

    for n in range(3):
        single = kalman_filter(scalar_model(), PseudoObs(z[n], np.full(30, R)))
        np.testing.assert_allclose(batched.means[n], single.means)
        assert batched.log_likelihood[n] == pytest.approx(single.log_likelihood)


def exact_posterior(z: np.ndarray) -> [np.ndarray, np.ndarray]:
    n_steps = len(z)
    variances = [INIT_VAR]
    for _ in range(n_steps - 1):
        variances.append(A ** 2 * variances[-1] + Q)

    prior = np.array([[A ** abs(t - s) * variances[min(s, t)] for t in range(n_steps)] for s in range(n_steps)])
    gain = prior @ np.linalg.inv(prior + R * np.eye(n_steps))
    return gain @ z, prior - gain @ prior


def test_smoother_matches_the_batch_posterior():
    z = scalar_observations(6, seed=1)
    smoothed = kalman_smoother(scalar_model(), PseudoObs(z, np.full(6, R)))
    means, covariance = exact_posterior(z)

    np.testing.assert_allclose(smoothed.means[:, 0], means, atol=1e-10)
    np.testing.assert_allclose(smoothed.covs[:, 0, 0], np.diag(covariance), atol=1e-10)
    np.testing.assert_allclose(smoothed.lag_one_covs[1:, 0, 0], np.diag(covariance, -1), atol=1e-10)


def test_smoother_ends_at_the_filter():
    z = scalar_observations(10, seed=2)
    smoothed = kalman_smoother(scalar_model(), PseudoObs(z, np.full(10, R)))

    np.testing.assert_allclose(smoothed.means[-1], smoothed.filtered.means[-1])
    assert np.all(smoothed.covs[:, 0, 0] <= smoothed.filtered.covs[:, 0, 0] + 1e-15)


def test_circular_innovations():
    model = LdsModel(1, [[1.]], [[0.]], [.45], [[.01]])
    pseudo_obs = PseudoObs(np.array([-.49]), np.array([.01]))

    assert kalman_filter(model, pseudo_obs, length=1.).means[0, 0] == pytest.approx(.48)
    assert kalman_filter(model, pseudo_obs).means[0, 0] == pytest.approx(-.02)


def test_pseudo_observations():
    codec = PpcCodec()
    counts = np.zeros((2, 15))
    counts[0, 4] = 3.

    pseudo_obs = ppc_pseudo_obs(codec, counts)
    assert pseudo_obs.z[0] == pytest.approx(codec.centers[4])
    assert pseudo_obs.R[0] == pytest.approx(codec.sigma_tc ** 2 / 3)
    assert np.isnan(pseudo_obs.z[1]) and np.isinf(pseudo_obs.R[1])


def test_no_dynamics_holds_the_latest_observation():
    pseudo_obs = PseudoObs(np.array([np.nan, .2, np.nan, .9]), np.array([np.inf, .01, np.inf, .01]))
    np.testing.assert_allclose(filter_positions(LdsModel.no_dynamics(), pseudo_obs, 1.), [.5, .2, .2, .9])


def test_true_dynamics_beat_no_dynamics():
    world, codec = LdsWorld(), PpcCodec()
    dataset = generate_lds_dataset(world, codec, 5, 300, 0)
    pseudo_obs = ppc_pseudo_obs(codec, dataset.obs)

    def mse(model: LdsModel) -> float:
        errors = np.mod(filter_positions(model, pseudo_obs, 1.) - dataset.positions + .5, 1.) - .5
        return float(np.mean(errors ** 2))

    assert mse(optimal_model(world)) < mse(LdsModel.no_dynamics())


def test_invalid_models():
    with pytest.raises(ValueError):
        LdsModel(3, np.eye(3), np.eye(3), np.zeros(3), np.eye(3))

    with pytest.raises(ValueError):
        LdsModel(1, [[1.]], [[-1.]], [0.], [[1.]])

    with pytest.raises(ValueError):
        kalman_smoother(LdsModel.no_dynamics(), PseudoObs(np.zeros(3), np.ones(3)))
