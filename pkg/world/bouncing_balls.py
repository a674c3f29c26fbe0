from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Tuple

import numpy as np

DEFAULT_PATCH_SIZE = 30
DEFAULT_N_BALLS = 3
DEFAULT_RADIUS = 2.
DEFAULT_SPEED_RANGE = (.35, .75)
DEFAULT_SUBSTEPS = 4
DEFAULT_PLACEMENT_TRIES = 1000
# Relative tolerance on kinetic energy conservation per frame.
ENERGY_TOLERANCE = 1e-9


class PlacementError(RuntimeError):
    pass


@dataclass
class BounceWorld:
    """ Equal-mass balls moving in a square patch, colliding elastically with each other and the walls. """
    patch_size: int = DEFAULT_PATCH_SIZE
    n_balls: int = DEFAULT_N_BALLS
    radius: float = DEFAULT_RADIUS
    speed_range: Tuple[float, float] = DEFAULT_SPEED_RANGE
    substeps: int = DEFAULT_SUBSTEPS
    placement_tries: int = DEFAULT_PLACEMENT_TRIES

    def __post_init__(self):
        if self.n_balls < 1 or self.substeps < 1 or self.placement_tries < 1:
            raise ValueError('Ball count, substeps and placement tries must be positive integers.')

        if not 0 < self.radius < self.patch_size / 2:
            raise ValueError('A ball of radius {} does not fit in a {}x{} patch.'
                             .format(self.radius, self.patch_size, self.patch_size))

        low, high = self.speed_range
        if not 0 <= low <= high:
            raise ValueError('Invalid speed range {}.'.format(self.speed_range))

        self.speed_range = float(low), float(high)

    @property
    def n_pixels(self) -> int:
        return self.patch_size ** 2

    def to_dict(self) -> dict:
        return {'patch_size': self.patch_size, 'n_balls': self.n_balls, 'radius': self.radius,
                'speed_range': list(self.speed_range), 'substeps': self.substeps,
                'placement_tries': self.placement_tries}

    @classmethod
    def from_dict(cls, config: dict) -> 'BounceWorld':
        config = dict(config)
        if 'speed_range' in config:
            config['speed_range'] = tuple(config['speed_range'])

        return cls(**config)


class BounceTrajectory(NamedTuple):
    frames: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray


def kinetic_energy(velocities: np.ndarray) -> np.ndarray:
    """ The total kinetic energy of unit-mass balls, summed over the ball axis. """
    return .5 * np.sum(np.asarray(velocities) ** 2, axis=(-2, -1))


def _place_balls(world: BounceWorld, rng: np.random.Generator) -> np.ndarray:
    positions = np.empty((world.n_balls, 2))
    for ball in range(world.n_balls):
        for _ in range(world.placement_tries):
            candidate = rng.uniform(world.radius, world.patch_size - world.radius, 2)
            if ball == 0 or np.min(np.linalg.norm(positions[:ball] - candidate, axis=1)) >= 2 * world.radius:
                positions[ball] = candidate
                break
        else:
            raise PlacementError('Could not place ball {} without overlap after {} tries.'
                                 .format(ball, world.placement_tries))

    return positions


def _draw_velocities(world: BounceWorld, rng: np.random.Generator) -> np.ndarray:
    speeds = rng.uniform(*world.speed_range, world.n_balls)
    angles = rng.uniform(0., 2 * np.pi, world.n_balls)
    return speeds[:, np.newaxis] * np.column_stack((np.cos(angles), np.sin(angles)))


def _reflect_walls(world: BounceWorld, positions: np.ndarray, velocities: np.ndarray) -> None:
    low, high = world.radius, world.patch_size - world.radius

    below, above = positions < low, positions > high
    positions[below] = 2 * low - positions[below]
    positions[above] = 2 * high - positions[above]
    velocities[below] = np.abs(velocities[below])
    velocities[above] = -np.abs(velocities[above])


def _collide(world: BounceWorld, positions: np.ndarray, velocities: np.ndarray) -> None:
    for i, j in combinations(range(world.n_balls), 2):
        offset = positions[j] - positions[i]
        distance = np.linalg.norm(offset)
        if distance >= 2 * world.radius or distance == 0:
            continue

        normal = offset / distance
        closing = np.dot(velocities[j] - velocities[i], normal)
        if closing < 0:
            # Equal masses exchange their normal velocity components.
            exchange = closing * normal
            velocities[i] += exchange
            velocities[j] -= exchange

        # Separate the overlap symmetrically.
        shift = (2 * world.radius - distance) / 2 * normal
        positions[i] -= shift
        positions[j] += shift


def rasterize(world: BounceWorld, positions: np.ndarray) -> np.ndarray:
    """
    Draws balls as binary pixels: a pixel is on iff its center lies within a ball's radius.

    :param world: the ball world.
    :param positions: the ball centers, shape (n_balls, 2).
    :return: the flattened frame, shape (patch_size ** 2,).
    """
    centers = np.arange(world.patch_size) + .5
    rows, cols = np.meshgrid(centers, centers, indexing='ij')

    frame = np.zeros((world.patch_size, world.patch_size), dtype=bool)
    for position in positions:
        frame |= (rows - position[0]) ** 2 + (cols - position[1]) ** 2 <= world.radius ** 2

    return frame.astype(float).ravel()


def integrate_bounce(world: BounceWorld, n_steps: int, rng: np.random.Generator,
                     init_positions: np.ndarray = None, init_velocities: np.ndarray = None) -> BounceTrajectory:
    """
    Integrates the balls frame by frame, keeping the continuous states.

    :param world: the ball world.
    :param n_steps: the number of frames.
    :param rng: the seeded generator.
    :param init_positions: the initial centers, random non-overlapping by default.
    :param init_velocities: the initial velocities, random directions and speeds by default.
    :return: the frames, positions and velocities of every step.
    """
    if n_steps < 1:
        raise ValueError('Trajectories need at least one frame. Got {}.'.format(n_steps))

    positions = _place_balls(world, rng) if init_positions is None else np.array(init_positions, dtype=float)
    velocities = _draw_velocities(world, rng) if init_velocities is None else np.array(init_velocities, dtype=float)

    if positions.shape != (world.n_balls, 2) or velocities.shape != (world.n_balls, 2):
        raise ValueError('Initial states should have shape ({}, 2).'.format(world.n_balls))

    frames = np.empty((n_steps, world.n_pixels))
    all_positions, all_velocities = np.empty((n_steps, world.n_balls, 2)), np.empty((n_steps, world.n_balls, 2))

    for t in range(n_steps):
        frames[t] = rasterize(world, positions)
        all_positions[t], all_velocities[t] = positions, velocities

        energy = kinetic_energy(velocities)
        for _ in range(world.substeps):
            positions += velocities / world.substeps
            _reflect_walls(world, positions, velocities)
            _collide(world, positions, velocities)
            # Separation may push a ball past a wall.
            _reflect_walls(world, positions, velocities)

        if abs(kinetic_energy(velocities) - energy) > ENERGY_TOLERANCE * max(energy, 1.):
            raise ArithmeticError('Kinetic energy was not conserved at frame {}.'.format(t))

    return BounceTrajectory(frames, all_positions, all_velocities)


def simulate_bounce(world: BounceWorld, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """
    Simulates a bouncing-ball video.

    :param world: the ball world.
    :param n_steps: the number of frames.
    :param rng: the seeded generator.
    :return: the binary frames, shape (n_steps, patch_size ** 2).
    """
    return integrate_bounce(world, n_steps, rng).frames
