from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import linalg

# Oscillator constants: mass (kg), damping (N s/m), stiffness (N/m) and time step (s).
DEFAULT_MASS = 5.
DEFAULT_DAMPING = .25
DEFAULT_STIFFNESS = 3.
DEFAULT_DT = .05
DEFAULT_TRANSITION_VARIANCES = (5e-7, 5e-5)
DEFAULT_INIT_VELOCITY_STD = 1e-3
DEFAULT_LENGTH = 1.


@dataclass
class LdsWorld:
    """
    A damped harmonic oscillator, discretized with forward Euler and driven by Gaussian noise.
    Positions live on [0, length) and wrap around; the spring rests at the middle of the interval.
    """
    mass: float = DEFAULT_MASS
    damping: float = DEFAULT_DAMPING
    stiffness: float = DEFAULT_STIFFNESS
    dt: float = DEFAULT_DT
    sigma_trans: Tuple[Tuple[float, float], Tuple[float, float]] = field(
        default=((DEFAULT_TRANSITION_VARIANCES[0], 0.), (0., DEFAULT_TRANSITION_VARIANCES[1])))
    init_velocity_std: float = DEFAULT_INIT_VELOCITY_STD
    length: float = DEFAULT_LENGTH

    def __post_init__(self):
        if min(self.mass, self.dt, self.length) <= 0:
            raise ValueError('Mass, time step and length must be positive.')

        if min(self.damping, self.stiffness, self.init_velocity_std) < 0:
            raise ValueError('Damping, stiffness and the initial velocity spread cannot be negative.')

        covariance = self.transition_cov
        if covariance.shape != (2, 2) or not np.allclose(covariance, covariance.T):
            raise ValueError('The transition covariance must be a symmetric 2x2 matrix.')

        if linalg.eigvalsh(covariance).min() < 0:
            raise ValueError('The transition covariance must be positive semi-definite.')

        if self.spectral_radius >= 1:
            raise ValueError('The oscillator is unstable: the spectral radius of A is {}.'.format(self.spectral_radius))

    @property
    def A(self) -> np.ndarray:
        return np.array([[1., self.dt],
                         [-self.stiffness / self.mass * self.dt, 1. - self.damping / self.mass * self.dt]])

    @property
    def transition_cov(self) -> np.ndarray:
        return np.array(self.sigma_trans, dtype=float)

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(linalg.eigvals(self.A)).max())

    @property
    def center(self) -> float:
        return self.length / 2

    def wrap(self, position: np.ndarray) -> np.ndarray:
        return np.mod(position, self.length)

    def energy(self, states: np.ndarray) -> np.ndarray:
        """
        Returns the mechanical energy (k d^2 + m v^2) / 2, with d the displacement from the rest position.

        :param states: (position, velocity) rows.
        :return: the energy of every state.
        """
        states = np.asarray(states, dtype=float)
        displacement = states[..., 0] - self.center
        return (self.stiffness * displacement ** 2 + self.mass * states[..., 1] ** 2) / 2

    def to_dict(self) -> dict:
        return {
            'mass': self.mass, 'damping': self.damping, 'stiffness': self.stiffness, 'dt': self.dt,
            'sigma_trans': [list(row) for row in self.sigma_trans],
            'init_velocity_std': self.init_velocity_std, 'length': self.length
        }

    @classmethod
    def from_dict(cls, config: dict) -> 'LdsWorld':
        config = dict(config)
        if 'sigma_trans' in config:
            config['sigma_trans'] = tuple(tuple(float(value) for value in row) for row in config['sigma_trans'])

        return cls(**config)


def simulate_lds(world: LdsWorld, n_steps: int, rng: np.random.Generator,
                 init_state: np.ndarray = None) -> np.ndarray:
    """
    Simulates one trajectory of the oscillator.

    :param world: the oscillator.
    :param n_steps: the number of time steps.
    :param rng: the seeded generator.
    :param init_state: the initial (position, velocity); by default the position is uniform over
     the interval and the velocity tightly distributed about zero.
    :return: the (position, velocity) states, shape (n_steps, 2).
    """
    if n_steps < 1:
        raise ValueError('Trajectories need at least one step. Got {}.'.format(n_steps))

    if init_state is None:
        state = np.array([rng.uniform(0., world.length), rng.normal(0., world.init_velocity_std)])
    else:
        state = np.array(init_state, dtype=float)

    # Draw all the process noise up front.
    noise = rng.multivariate_normal(np.zeros(2), world.transition_cov, size=n_steps - 1, method='eigh')

    A = world.A
    states = np.empty((n_steps, 2))
    states[0] = state
    for t in range(1, n_steps):
        displacement = np.array([states[t - 1, 0] - world.center, states[t - 1, 1]])
        displacement = A @ displacement + noise[t - 1]

        # Positions are wrapped onto the opposite side; velocities are unchanged.
        states[t] = world.wrap(displacement[0] + world.center), displacement[1]

    return states
