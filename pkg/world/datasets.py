import csv
import json
from dataclasses import dataclass
from os import path
from typing import Callable, Optional

import numpy as np

from utils.seeding import STREAM_DATA, child_seed, derive_rng
from utils.system_operations import create_path
from world.bouncing_balls import BounceWorld, simulate_bounce
from world.lds import LdsWorld, simulate_lds
from world.population_code import PpcCodec, ppc_encode, sample_gain

KIND_LDS = 'lds'
KIND_BOUNCE = 'bounce'
KINDS = KIND_LDS, KIND_BOUNCE

LATENT_SUFFIX = '.latent.csv'
INDEX_SUFFIX = '.index.csv'

DataSource = Callable[[int, int, np.random.Generator], np.ndarray]


@dataclass
class Dataset:
    """
    Observation sequences, shape (trajectories, steps, units).
    For LDS data the latent states and gains are kept for evaluation only.
    """
    kind: str
    obs: np.ndarray
    config: dict
    seed: int
    positions: Optional[np.ndarray] = None
    velocities: Optional[np.ndarray] = None
    gains: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError('Unknown dataset kind {}. Choose one of {}.'.format(self.kind, KINDS))

        if self.obs.ndim != 3:
            raise ValueError('Observations should have shape (trajectories, steps, units), got {}.'
                             .format(self.obs.shape))

    @property
    def n_trajectories(self) -> int:
        return self.obs.shape[0]

    @property
    def n_steps(self) -> int:
        return self.obs.shape[1]

    @property
    def n_units(self) -> int:
        return self.obs.shape[2]


def generate_lds_dataset(world: LdsWorld, codec: PpcCodec, n_trajectories: int, n_steps: int,
                         seed: int) -> Dataset:
    """
    Simulates oscillator trajectories and encodes their positions with the population code.
    Every trajectory draws from its own stream, derived from the seed and the trajectory's index.

    :param world: the oscillator.
    :param codec: the population code.
    :param n_trajectories: the number of trajectories.
    :param n_steps: the number of steps per trajectory.
    :param seed: the dataset's seed.
    :return: the dataset.
    """
    obs = np.empty((n_trajectories, n_steps, codec.n_units))
    positions, velocities, gains = (np.empty((n_trajectories, n_steps)) for _ in range(3))

    for n in range(n_trajectories):
        rng = derive_rng(seed, STREAM_DATA, n)
        states = simulate_lds(world, n_steps, rng)
        gains[n] = sample_gain(codec, rng, n_steps)
        obs[n] = ppc_encode(codec, states[:, 0], gains[n], rng)
        positions[n], velocities[n] = states[:, 0], states[:, 1]

    return Dataset(KIND_LDS, obs, {'world': world.to_dict(), 'codec': codec.to_dict()}, seed,
                   positions, velocities, gains)


def generate_bounce_dataset(world: BounceWorld, n_trajectories: int, n_steps: int, seed: int) -> Dataset:
    """ Simulates bouncing-ball videos, one derived stream per trajectory. """
    frames = np.empty((n_trajectories, n_steps, world.n_pixels))
    for n in range(n_trajectories):
        frames[n] = simulate_bounce(world, n_steps, derive_rng(seed, STREAM_DATA, n))

    return Dataset(KIND_BOUNCE, frames, {'world': world.to_dict()}, seed)


def lds_source(world: LdsWorld, codec: PpcCodec) -> DataSource:
    """ Returns a source of freshly simulated population-code trajectories. """
    def draw(n_trajectories: int, n_steps: int, rng: np.random.Generator) -> np.ndarray:
        return generate_lds_dataset(world, codec, n_trajectories, n_steps, child_seed(rng)).obs

    return draw


def bounce_source(world: BounceWorld) -> DataSource:
    """ Returns a source of freshly simulated bouncing-ball videos. """
    def draw(n_trajectories: int, n_steps: int, rng: np.random.Generator) -> np.ndarray:
        return generate_bounce_dataset(world, n_trajectories, n_steps, child_seed(rng)).obs

    return draw


def file_source(dataset: Dataset) -> DataSource:
    """
    Returns a source drawing trajectory windows from a stored dataset:
    trajectories are chosen without replacement when enough are stored, windows start at random steps.
    """
    def draw(n_trajectories: int, n_steps: int, rng: np.random.Generator) -> np.ndarray:
        if n_steps > dataset.n_steps:
            raise ValueError('Cannot draw {}-step windows from {}-step trajectories.'
                             .format(n_steps, dataset.n_steps))

        chosen = rng.choice(dataset.n_trajectories, n_trajectories, replace=n_trajectories > dataset.n_trajectories)
        starts = rng.integers(0, dataset.n_steps - n_steps + 1, n_trajectories)

        return np.stack([dataset.obs[n, start:start + n_steps] for n, start in zip(chosen, starts)])

    return draw


def _write_header(stream, kind: str, config: dict, seed: int) -> None:
    stream.write('# kind: {}\n'.format(kind))
    stream.write('# config: {}\n'.format(json.dumps(config, sort_keys=True)))
    stream.write('# seed: {}\n'.format(seed))


def _read_lines(filename: str) -> [dict, list]:
    if not path.isfile(filename):
        raise FileNotFoundError('Dataset file {} does not exist.'.format(filename))

    header, rows = {}, []
    with open(filename) as stream:
        for line in stream:
            if line.startswith('#'):
                key, _, value = line[1:].strip().partition(': ')
                header[key] = value
            elif line.strip():
                rows.append(line)

    return header, rows


def _encode_runs(frame: np.ndarray) -> str:
    """ Run lengths of a binary frame, alternating off and on, starting with off. """
    changes = np.flatnonzero(np.diff(np.concatenate(([0], frame.astype(int), [2]))) != 0)
    # A frame starting with an on-pixel gets an empty leading off-run.
    runs = np.diff(np.concatenate(([0], changes)))
    return ' '.join(str(run) for run in runs)


def _decode_runs(runs: str, n_pixels: int) -> np.ndarray:
    lengths = np.array([int(run) for run in runs.split()])
    values = np.arange(len(lengths)) % 2
    frame = np.repeat(values, lengths).astype(float)

    if frame.size != n_pixels:
        raise ValueError('A run-length row decodes to {} pixels instead of {}.'.format(frame.size, n_pixels))

    return frame


def save_dataset(filename: str, dataset: Dataset) -> str:
    """
    Writes a dataset. LDS datasets are CSV observation rows with a sibling latent file;
    frame datasets are run-length-encoded rows with a sibling index file.

    :param filename: the dataset's filename.
    :param dataset: the dataset.
    :return: the filename.
    """
    create_path(filename)
    with open(filename, 'w', newline='') as stream:
        _write_header(stream, dataset.kind, dataset.config, dataset.seed)
        writer = csv.writer(stream, lineterminator='\n')

        if dataset.kind == KIND_LDS:
            writer.writerow(['trajectory', 'step'] + ['n{}'.format(i) for i in range(dataset.n_units)])
            for n in range(dataset.n_trajectories):
                for t in range(dataset.n_steps):
                    writer.writerow([n, t] + [int(count) for count in dataset.obs[n, t]])
        else:
            writer.writerow(['trajectory', 'step', 'runs'])
            for n in range(dataset.n_trajectories):
                for t in range(dataset.n_steps):
                    writer.writerow([n, t, _encode_runs(dataset.obs[n, t])])

    if dataset.kind == KIND_LDS:
        _save_latents(filename + LATENT_SUFFIX, dataset)
    else:
        _save_index(filename + INDEX_SUFFIX, dataset)

    return filename


def _save_latents(filename: str, dataset: Dataset) -> None:
    with open(filename, 'w', newline='') as stream:
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['trajectory', 'step', 'position', 'velocity', 'gain'])
        for n in range(dataset.n_trajectories):
            for t in range(dataset.n_steps):
                writer.writerow([n, t, repr(float(dataset.positions[n, t])), repr(float(dataset.velocities[n, t])),
                                 repr(float(dataset.gains[n, t]))])


def _save_index(filename: str, dataset: Dataset) -> None:
    with open(filename, 'w', newline='') as stream:
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['trajectory', 'first_row', 'n_frames'])
        for n in range(dataset.n_trajectories):
            writer.writerow([n, n * dataset.n_steps, dataset.n_steps])


def load_dataset(filename: str) -> Dataset:
    """
    Reads a dataset written by save_dataset.

    :param filename: the dataset's filename.
    :return: the dataset, with latents when the file has them.
    """
    header, rows = _read_lines(filename)
    kind = header.get('kind')
    if kind not in KINDS or 'config' not in header or 'seed' not in header:
        raise ValueError('{} is not a dataset file: missing or invalid header.'.format(filename))

    config, seed = json.loads(header['config']), int(header['seed'])
    records = list(csv.reader(rows[1:]))
    if not records:
        raise ValueError('Dataset {} contains no observations.'.format(filename))

    n_trajectories = int(records[-1][0]) + 1
    n_steps = len(records) // n_trajectories
    if n_trajectories * n_steps != len(records):
        raise ValueError('Dataset {} has trajectories of unequal length.'.format(filename))

    if kind == KIND_LDS:
        obs = np.array([[float(value) for value in record[2:]] for record in records])
        obs = obs.reshape(n_trajectories, n_steps, -1)

        positions = velocities = gains = None
        if path.isfile(filename + LATENT_SUFFIX):
            latents = np.loadtxt(filename + LATENT_SUFFIX, delimiter=',', skiprows=1, ndmin=2)
            positions, velocities, gains = (latents[:, column].reshape(n_trajectories, n_steps)
                                            for column in (2, 3, 4))

        return Dataset(kind, obs, config, seed, positions, velocities, gains)

    n_pixels = BounceWorld.from_dict(config['world']).n_pixels
    obs = np.array([_decode_runs(record[2], n_pixels) for record in records])

    return Dataset(kind, obs.reshape(n_trajectories, n_steps, n_pixels), config, seed)
