import csv
from os import path
from typing import List
from warnings import warn

import numpy as np

from baselines.em import em_fit, unwrap_pseudo_obs
from baselines.kalman import LdsModel, filter_positions, optimal_model, ppc_pseudo_obs
from core.checkpoint import IncompatibleCheckpointError, load_checkpoint, save_checkpoint
from core.harmonium import HarmoniumParams, PassCounter, init_params
from core.temporal import filter_pass, generate_forward_gibbs, generate_reverse_refh, predict_next_frame
from core.training import Trainer, TrainMode
from evaluation.metrics import decode_position, squared_position_errors
from evaluation.plotting import Plotter
from evaluation.scoring import BenchmarkRow, EvalReport, MetricsLog, format_float, median_by_model, save_benchmark, \
    save_reports
from experiments.config import ExperimentConfig, save_config
from utils.seeding import STREAM_BASELINES, STREAM_EVAL, STREAM_GENERATE, STREAM_INIT, STREAM_TRAIN, child_seed, \
    derive_rng
from utils.system_operations import create_path
from world.datasets import KIND_BOUNCE, KIND_LDS, Dataset, bounce_source, file_source, generate_bounce_dataset, \
    generate_lds_dataset, lds_source, load_dataset, save_dataset

DATASET_FILENAME = 'dataset.csv'
CHECKPOINT_FILENAME = 'checkpoint.json'
METRICS_FILENAME = 'metrics.csv'
EVALUATION_FILENAME = 'evaluation.csv'
BENCHMARK_FILENAME = 'benchmark.csv'
GENERATED_FILENAME = 'generated.csv'
PASSES_FILENAME = 'passes.csv'
DIRECTIONS = 'reverse', 'forward'

# Benchmark model names, in the expected order of increasing error.
KF_OPT, KF2, KF1, KF0 = 'KFopt', 'KF2', 'KF1', 'KF0'
COPY_FRAME = 'copy-frame'


def cmd_generate(config: ExperimentConfig) -> str:
    """
    Generates a dataset from the configured world and writes it beside the resolved config.

    :param config: the experiment configuration.
    :return: the dataset's filename.
    """
    save_config(config)
    n_trajectories, n_steps = config['data']['n_trajectories'], config['data']['n_steps']

    print('Generating {} {} trajectories of {} steps with seed {}.'.format(n_trajectories, config.kind, n_steps,
                                                                        config.seed))
    if config.kind == KIND_LDS:
        dataset = generate_lds_dataset(config.world, config.codec, n_trajectories, n_steps, config.seed)
    else:
        dataset = generate_bounce_dataset(config.world, n_trajectories, n_steps, config.seed)

    filename = save_dataset(config.path(DATASET_FILENAME), dataset)
    print('Dataset has been saved successfully to {}.'.format(filename))

    return filename


def _load_dataset(config: ExperimentConfig, dataset_file: str) -> Dataset:
    dataset = load_dataset(dataset_file)
    if dataset.kind != config.kind:
        raise ValueError('Dataset {} holds {} data, but the configuration expects {} data.'
                         .format(dataset_file, dataset.kind, config.kind))

    return dataset


def _check_compatible(config: ExperimentConfig, params: HarmoniumParams) -> None:
    if params.obs_spec != config.obs_spec or params.hid_spec != config.hid_spec:
        raise IncompatibleCheckpointError('The checkpoint has {} observation and {} hidden units, '
                                          'but the configuration asks for {} and {}.'
                                          .format(params.n_obs, params.n_hid, config.obs_spec.size,
                                                  config.hid_spec.size))


def _train_single(config: ExperimentConfig, dataset_file: str = None, resume: bool = False,
                  save_plots: bool = False) -> str:
    save_config(config)
    checkpoint_file, metrics_file = config.path(CHECKPOINT_FILENAME), config.path(METRICS_FILENAME)

    if dataset_file is not None:
        data_source = file_source(_load_dataset(config, dataset_file))
    elif config.kind == KIND_LDS:
        data_source = lds_source(config.world, config.codec)
    else:
        data_source = bounce_source(config.world)

    params = init_params(config.obs_spec, config.hid_spec, derive_rng(config.seed, STREAM_INIT))
    trainer = Trainer(params, config.schedule, config.mode, derive_rng(config.seed, STREAM_TRAIN),
                      bptt=config['bptt'], verbose=True)

    if resume and path.isfile(checkpoint_file):
        checkpoint = load_checkpoint(checkpoint_file)
        if checkpoint.trainer_state is None:
            raise IncompatibleCheckpointError('Checkpoint {} has no trainer state to resume from.'
                                              .format(checkpoint_file))

        _check_compatible(config, checkpoint.params)
        trainer.params = checkpoint.params
        trainer.load_state_dict(checkpoint.trainer_state)
        trainer.metrics = MetricsLog.load(metrics_file) if path.isfile(metrics_file) else MetricsLog()
        print('Resuming training from epoch {} of {}.'.format(trainer.epoch, trainer.schedule.epochs))
    elif resume:
        warn('No checkpoint found at {}; training from scratch.'.format(checkpoint_file))

    metadata = {'model': config.mode.value, 'kind': config.kind, 'seed': config.seed}

    def save(current: Trainer) -> None:
        save_checkpoint(checkpoint_file, current.params, current, metadata)
        current.metrics.save(metrics_file)

    trainer.train(data_source, save)
    save(trainer)
    print('Checkpoint has been saved successfully to {}.'.format(checkpoint_file))

    if save_plots and trainer.metrics.rows:
        plotter = Plotter(config.path('training_'))
        plotter.plot_metric_vs_epochs(trainer.metrics, 'reconstruction_error',
                                      '{} reconstruction error'.format(config.mode.value), 'reconstruction_error.png',
                                      log_scale=True)

    return checkpoint_file


def cmd_train(config: ExperimentConfig, dataset_file: str = None, resume: bool = False,
              save_plots: bool = False) -> List[str]:
    """
    Trains the configured model, or every run of a sweep, checkpointing at the end of every renewal period.

    :param config: the experiment configuration.
    :param dataset_file: a dataset to draw training trajectories from; fresh trajectories are simulated otherwise.
    :param resume: resume from the checkpoint in the output directory, if there is one.
    :param save_plots: whether the training curves are plotted.
    :return: the checkpoint filenames.
    """
    if 'sweep' not in config.values:
        return [_train_single(config, dataset_file, resume, save_plots)]

    save_config(config)
    sweep, schedules = config['sweep'], config.values.get('sweep_schedules', {})
    checkpoints = []
    for run in sweep['runs']:
        for seed in sweep['seeds']:
            values = {key: value for key, value in config.values.items() if key not in ('sweep', 'sweep_schedules')}
            values.update(model=run['model'], hidden=run['hidden'], seed=seed,
                          out=path.join(config.out, '{}-{}'.format(run['model'], run['hidden']), 'seed{}'.format(seed)))
            if run['model'] in schedules:
                values['schedule'] = schedules[run['model']]

            print('Sweep run: {} with {} hidden units, seed {}.'.format(run['model'], run['hidden'], seed))
            checkpoints.append(_train_single(ExperimentConfig(values), dataset_file, resume, save_plots))

    return checkpoints


def _evaluate_lds(config: ExperimentConfig, params: HarmoniumParams, dataset: Dataset, model_id: str,
                  with_baselines: bool) -> List[EvalReport]:
    if dataset.positions is None:
        raise ValueError('Evaluating LDS models needs the latent positions of the dataset.')

    codec = config.codec
    means = filter_pass(params, dataset.obs, sample_recurrent=config['evaluation']['sample_recurrent'],
                        rng=derive_rng(config.seed, STREAM_EVAL))
    decoded = decode_position(params, means, codec)

    if np.any(np.isnan(decoded)):
        warn('{} decoded positions had vanishing means and were set to the middle.'.format(np.isnan(decoded).sum()))
        decoded = np.where(np.isnan(decoded), codec.length / 2, decoded)

    reports = [EvalReport.from_squared_errors(model_id, squared_position_errors(decoded, dataset.positions,
                                                                                codec.length))]

    if with_baselines:
        pseudo_obs = ppc_pseudo_obs(codec, dataset.obs)
        for name, model in ((KF0, LdsModel.no_dynamics()), (KF_OPT, optimal_model(config.world))):
            estimates = filter_positions(model, pseudo_obs, codec.length)
            reports.append(EvalReport.from_squared_errors(
                name, squared_position_errors(estimates, dataset.positions, codec.length)))

    return reports


def _evaluate_bounce(config: ExperimentConfig, params: HarmoniumParams, dataset: Dataset, model_id: str,
                     with_baselines: bool) -> List[EvalReport]:
    settings = config['evaluation']
    rng = derive_rng(config.seed, STREAM_EVAL)

    means = filter_pass(params, dataset.obs, sample_recurrent=settings['sample_recurrent'], rng=rng)
    predictions = predict_next_frame(params, means[:, :-1], rng, settings['n_gibbs'], settings['n_average'])
    truths = dataset.obs[:, 1:]

    reports = [EvalReport.from_squared_errors(model_id, np.mean((predictions - truths) ** 2, axis=-1))]
    if with_baselines:
        reports.append(EvalReport.from_squared_errors(COPY_FRAME,
                                                      np.mean((dataset.obs[:, :-1] - truths) ** 2, axis=-1)))

    return reports


def cmd_evaluate(config: ExperimentConfig, checkpoint_file: str, dataset_file: str,
                 with_baselines: bool = False) -> List[EvalReport]:
    """
    Evaluates a checkpoint on a dataset: decoded-position MSE for LDS data, next-frame per-pixel MSE for frames.

    :param config: the experiment configuration.
    :param checkpoint_file: the checkpoint.
    :param dataset_file: the test dataset.
    :param with_baselines: add Kalman filter (LDS) or copy-frame (frames) rows.
    :return: the reports.
    """
    save_config(config)
    checkpoint = load_checkpoint(checkpoint_file)
    _check_compatible(config, checkpoint.params)
    dataset = _load_dataset(config, dataset_file)
    model_id = checkpoint.metadata.get('model', config.mode.value)

    if config.kind == KIND_LDS:
        reports = _evaluate_lds(config, checkpoint.params, dataset, model_id, with_baselines)
    else:
        reports = _evaluate_bounce(config, checkpoint.params, dataset, model_id, with_baselines)

    filename = save_reports(config.path(EVALUATION_FILENAME), reports)
    for report in reports:
        print('{} MSE over {} trajectories of {} steps: {:.6g}'.format(report.model_id,
                                                                      len(report.per_trajectory_mse),
                                                                      report.n_steps, report.aggregate_mse))
    print('Evaluation has been saved successfully to {}.'.format(filename))

    return reports


def _ordering_footer(rows: List[BenchmarkRow]) -> List[str]:
    medians = median_by_model(rows)
    ordered = [name for name in (KF_OPT, KF2, KF1, KF0) if name in medians]
    holds = all(medians[a] <= medians[b] for a, b in zip(ordered, ordered[1:]))

    footer = ['median {} = {}'.format(name, format_float(medians[name])) for name in ordered]
    footer.append('median ordering {}: {}'.format(' <= '.join(ordered), 'holds' if holds else 'violated'))
    return footer


def cmd_benchmark(config: ExperimentConfig, dataset_file: str, save_plots: bool = False) -> List[BenchmarkRow]:
    """
    Benchmarks the Kalman filters on an LDS test set: no dynamics, the true dynamics,
    and first- and second-order dynamics learned with EM (one row per restart).

    :param config: the experiment configuration.
    :param dataset_file: the test dataset.
    :param save_plots: whether the MSE distributions are plotted.
    :return: the benchmark rows.
    """
    if config.kind != KIND_LDS:
        raise ValueError('Kalman filter benchmarks apply to LDS data only.')

    save_config(config)
    dataset = _load_dataset(config, dataset_file)
    if dataset.positions is None:
        raise ValueError('Benchmarking needs the latent positions of the dataset.')

    codec, world, settings = config.codec, config.world, config['baselines']
    test_obs = ppc_pseudo_obs(codec, dataset.obs)

    def score(model: LdsModel) -> float:
        estimates = filter_positions(model, test_obs, codec.length)
        return float(np.mean(squared_position_errors(estimates, dataset.positions, codec.length)))

    rows = [BenchmarkRow(KF0, 0, score(LdsModel.no_dynamics())), BenchmarkRow(KF_OPT, 0, score(optimal_model(world)))]

    # EM learns from its own, freshly simulated, training trajectories.
    rng = derive_rng(config.seed, STREAM_BASELINES)
    training = generate_lds_dataset(world, codec, settings['n_trajectories'], settings['n_steps'], child_seed(rng))
    training_obs = unwrap_pseudo_obs(ppc_pseudo_obs(codec, training.obs), codec.length)

    for order, name in ((1, KF1), (2, KF2)):
        print('Fitting {} with EM ({} restarts of {} iterations).'.format(name, settings['n_restarts'],
                                                                         settings['n_iters']))
        fit = em_fit(order, training_obs, settings['n_iters'], settings['n_restarts'], rng, verbose=True)
        rows.extend(BenchmarkRow(name, idx, score(restart.model)) for idx, restart in enumerate(fit.restarts))

    footer = _ordering_footer(rows)
    filename = save_benchmark(config.path(BENCHMARK_FILENAME), rows, footer)
    for line in footer:
        print(line)
    print('Benchmark has been saved successfully to {}.'.format(filename))

    if save_plots:
        Plotter(config.path('benchmark_')).plot_benchmark(rows, 'Filtering MSE', 'mse.png')

    return rows


def cmd_generate_trajectories(config: ExperimentConfig, checkpoint_file: str, direction: str, n_steps: int,
                              n_gibbs: int, save_plots: bool = False) -> PassCounter:
    """
    Generates a sequence from a trained model, in reverse (one downward pass per step)
    or forward (Gibbs sampling per step), and reports the layer passes used.

    :param config: the experiment configuration.
    :param checkpoint_file: the checkpoint.
    :param direction: 'reverse' or 'forward'.
    :param n_steps: the number of frames.
    :param n_gibbs: the Gibbs cycles per frame, forward only.
    :param save_plots: whether frames are tiled into an image (frame data only).
    :return: the pass counter.
    """
    if direction not in DIRECTIONS:
        raise ValueError('Unknown generation direction {}. Choose one of {}.'.format(direction, DIRECTIONS))

    save_config(config)
    params = load_checkpoint(checkpoint_file).params
    rng, counter = derive_rng(config.seed, STREAM_GENERATE), PassCounter()
    emit_means = config['generation'].get('emit_means', False)

    if direction == 'reverse':
        seed_hidden = params.hid_spec.sample(np.full(params.n_hid, .5), rng)
        frames = generate_reverse_refh(params, n_steps, seed_hidden, rng, emit_means=emit_means, counter=counter)
    else:
        frames = generate_forward_gibbs(params, n_steps, rng, n_gibbs, counter=counter)

    generated_file = config.path(GENERATED_FILENAME)
    create_path(generated_file)
    with open(generated_file, 'w', newline='') as stream:
        writer = csv.writer(stream)
        writer.writerow(['step'] + ['u{}'.format(i) for i in range(params.n_obs)])
        for t, frame in enumerate(frames):
            writer.writerow([t] + [format_float(value) for value in frame])

    with open(config.path(PASSES_FILENAME), 'w', newline='') as stream:
        writer = csv.writer(stream)
        writer.writerow(['direction', 'n_steps', 'n_gibbs', 'up', 'down', 'total', 'passes_per_step'])
        writer.writerow([direction, n_steps, n_gibbs if direction == 'forward' else 0, counter.up, counter.down,
                         counter.total, format_float(counter.total / n_steps)])

    print('Generated {} frames ({}) with {} layer passes.'.format(n_steps, direction, counter.total))

    if save_plots and config.kind == KIND_BOUNCE:
        Plotter(config.path('generated_')).plot_frames(frames, config.world.patch_size,
                                                       '{} generation'.format(direction), 'frames.png')

    return counter
