import numpy as np

# Stream keys: a global seed is split into independent streams, one per purpose.
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_TRAIN = 2
STREAM_EVAL = 3
STREAM_BASELINES = 4
STREAM_GENERATE = 5


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Derives a generator from a seed and a path of integer keys.
    Streams with different key paths are independent, and a stream never depends on how many
    other streams were drawn, so results do not change with the order of the work.

    :param seed: the global seed.
    :param keys: the stream's key path.
    :return: the generator.
    """
    if seed < 0:
        raise ValueError('Seeds must be nonnegative integers. Got {}.'.format(seed))

    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(keys))))


def child_seed(rng: np.random.Generator) -> int:
    """ Draws a fresh seed from a generator. """
    return int(rng.integers(0, 2 ** 63))
