import sys
from os import path
from typing import List
from warnings import warn

from numpy.linalg import LinAlgError

from experiments.config import ExperimentConfig, load_config
from experiments.runner import cmd_benchmark, cmd_evaluate, cmd_generate, cmd_generate_trajectories, cmd_train
from utils.parser import create_parser

# Errors reported as a one-line diagnostic instead of a traceback.
RUN_ERRORS = ValueError, FileNotFoundError, LinAlgError, FloatingPointError, ArithmeticError, RuntimeError


def run_checks(args, config: ExperimentConfig) -> None:
    """ Checks the input arguments against the resolved configuration. """
    for name in ('dataset', 'checkpoint'):
        filename = getattr(args, name, None)
        if filename is not None and not path.isfile(filename):
            raise FileNotFoundError('File {} not found.'.format(filename))

    if args.command == 'train' and config.schedule.epochs == 0:
        warn('The schedule has no epochs. The checkpoint will hold the initial parameters.')

    if args.command == 'gen-traj' and config['generation']['direction'] == 'forward' \
            and config['generation']['n_gibbs'] < 2:
        warn('Forward generation with {} Gibbs cycles per frame will hardly mix.'
             .format(config['generation']['n_gibbs']))


def resolve_config(args) -> ExperimentConfig:
    """
    Resolves the preset, the config file and the command line overrides.

    :param args: the parsed arguments.
    :return: the configuration.
    """
    config = load_config(args.preset, args.config, args.seed, args.out)

    if getattr(args, 'restarts', None) is not None:
        config = config.with_values(baselines={'n_restarts': args.restarts})

    generation = {key: value for key, value in (('direction', getattr(args, 'direction', None)),
                                                ('n_steps', getattr(args, 'steps', None)),
                                                ('n_gibbs', getattr(args, 'n_gibbs', None)))
                  if value is not None}
    if generation:
        config = config.with_values(generation=generation)

    return config


def run(args) -> None:
    config = resolve_config(args)
    run_checks(args, config)

    if args.command == 'generate':
        cmd_generate(config)
    elif args.command == 'train':
        cmd_train(config, args.dataset, args.resume, args.save_plots)
    elif args.command == 'evaluate':
        cmd_evaluate(config, args.checkpoint, args.dataset, args.with_baselines)
    elif args.command == 'benchmark':
        cmd_benchmark(config, args.dataset, args.save_plots)
    else:
        generation = config['generation']
        cmd_generate_trajectories(config, args.checkpoint, generation['direction'], generation['n_steps'],
                                  generation['n_gibbs'], args.save_plots)


def main(argv: List[str] = None) -> int:
    """
    Runs one command.

    :param argv: the command line arguments, sys.argv by default.
    :return: the exit status, 0 on success.
    """
    args = create_parser().parse_args(argv)

    try:
        run(args)
    except RUN_ERRORS as error:
        print('refh {}: {}: {}'.format(args.command, type(error).__name__, error), file=sys.stderr)
        return 1

    return 0


if __name__ == '__main__':
    sys.exit(main())
