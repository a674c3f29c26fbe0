from argparse import ArgumentParser, ArgumentTypeError

from experiments.config import DEFAULT_PRESET, PRESETS

CONFIG_PATH = None
SEED = None
OUT_DIR = None
DATASET_PATH = None
CHECKPOINT_PATH = None
WITH_BASELINES = False
RESUME = False
SAVE_PLOTS = False
DIRECTION = None
DIRECTION_CHOICES = 'reverse', 'forward'
GENERATED_STEPS = None
N_GIBBS = None


def positive_int(value: any) -> int:
    """
    Checks if a value is a positive integer.

    :param value: the value to be checked.
    :return: the value if valid integer, otherwise raises an ArgumentTypeError.
    """
    int_value = int(value)

    if int_value <= 0:
        raise ArgumentTypeError("%s should be a positive integer value." % value)

    return int_value


def nonnegative_int(value: any) -> int:
    """
    Checks if a value is a nonnegative integer.

    :param value: the value to be checked.
    :return: the value if valid integer, otherwise raises an ArgumentTypeError.
    """
    int_value = int(value)

    if int_value < 0:
        raise ArgumentTypeError("%s should be a nonnegative integer value." % value)

    return int_value


def positive_float(value: any) -> float:
    """
    Checks if a value is a positive float.

    :param value: the value to be checked.
    :return: the value if valid float, otherwise raises an ArgumentTypeError.
    """
    float_value = float(value)

    if float_value <= 0:
        raise ArgumentTypeError("%s should be a positive float value." % value)

    return float_value


def _add_common_arguments(parser: ArgumentParser) -> None:
    parser.add_argument('-c', '--config', type=str, required=False, default=CONFIG_PATH,
                        help='A JSON file merged over the preset (default %(default)s).')
    parser.add_argument('-pr', '--preset', type=str, required=False, default=DEFAULT_PRESET, choices=sorted(PRESETS),
                        help='The named configuration preset (default %(default)s).')
    parser.add_argument('-s', '--seed', type=nonnegative_int, required=False, default=SEED,
                        help='The global seed, overriding the configuration\'s.')
    parser.add_argument('-o', '--out', type=str, required=False, default=OUT_DIR,
                        help='The output directory, overriding the configuration\'s.')
    parser.add_argument('-sp', '--save-plots', default=SAVE_PLOTS, required=False, action='store_true',
                        help='Whether plots should be saved beside the outputs.')


def create_parser() -> ArgumentParser:
    """
    Creates an argument parser for the refh experiment script.

    :return: ArgumentParser object.
    """
    parser = ArgumentParser(description='Trains and evaluates recurrent exponential-family harmoniums, '
                                        'temporal RBMs and Kalman filter baselines on synthetic dynamical systems.')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    generate = subparsers.add_parser('generate', help='Generates a dataset from the configured world.')
    _add_common_arguments(generate)

    train = subparsers.add_parser('train', help='Trains the configured model, checkpointing as it goes.')
    _add_common_arguments(train)
    train.add_argument('-d', '--dataset', type=str, required=False, default=DATASET_PATH,
                       help='A dataset to draw training trajectories from. '
                            'Fresh trajectories are simulated if omitted.')
    train.add_argument('-r', '--resume', default=RESUME, required=False, action='store_true',
                       help='Whether training should resume from the checkpoint in the output directory.')

    evaluate = subparsers.add_parser('evaluate', help='Evaluates a checkpoint on a dataset.')
    _add_common_arguments(evaluate)
    evaluate.add_argument('-ck', '--checkpoint', type=str, required=True, default=CHECKPOINT_PATH,
                          help='The checkpoint to evaluate.')
    evaluate.add_argument('-d', '--dataset', type=str, required=True, default=DATASET_PATH,
                          help='The test dataset.')
    evaluate.add_argument('-wb', '--with-baselines', default=WITH_BASELINES, required=False, action='store_true',
                          help='Whether baseline rows should be added to the report.')

    benchmark = subparsers.add_parser('benchmark', help='Benchmarks the Kalman filter baselines on an LDS dataset.')
    _add_common_arguments(benchmark)
    benchmark.add_argument('-d', '--dataset', type=str, required=True, default=DATASET_PATH,
                           help='The test dataset.')
    benchmark.add_argument('-rs', '--restarts', type=positive_int, required=False, default=None,
                           help='The EM restarts per model, overriding the configuration\'s.')

    generate_trajectories = subparsers.add_parser('gen-traj', help='Generates a sequence from a trained model.')
    _add_common_arguments(generate_trajectories)
    generate_trajectories.add_argument('-ck', '--checkpoint', type=str, required=True, default=CHECKPOINT_PATH,
                                       help='The checkpoint to generate from.')
    generate_trajectories.add_argument('-dir', '--direction', type=str.lower, required=False, default=DIRECTION,
                                       choices=DIRECTION_CHOICES,
                                       help='The generation direction, overriding the configuration\'s.')
    generate_trajectories.add_argument('-st', '--steps', type=positive_int, required=False, default=GENERATED_STEPS,
                                       help='The number of generated frames, overriding the configuration\'s.')
    generate_trajectories.add_argument('-ng', '--n-gibbs', type=positive_int, required=False, default=N_GIBBS,
                                       help='The Gibbs cycles per frame for forward generation, '
                                            'overriding the configuration\'s.')

    return parser
