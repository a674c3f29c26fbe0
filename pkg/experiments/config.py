import copy
import json
from os import path

from core.exp_family import LayerSpec, UnitFamily
from core.schedule import TrainSchedule, balls_schedule, lds_refh_schedule, lds_trbm_rtrbm_schedule
from core.training import TrainMode
from utils.system_operations import create_path
from world.bouncing_balls import BounceWorld
from world.datasets import KIND_BOUNCE, KIND_LDS, KINDS
from world.lds import LdsWorld
from world.population_code import PpcCodec

CONFIG_FILENAME = 'config.json'
DEFAULT_OUT = 'results'
DEFAULT_SEED = 0
# Hidden sizes of the LDS sweep, 15 to 300 in steps of 15.
SWEEP_HIDDEN_SIZES = list(range(15, 301, 15))


class ConfigError(ValueError):
    pass


def _base(kind: str, model: str, hidden: int, schedule: TrainSchedule, n_trajectories: int, n_steps: int) -> dict:
    config = {
        'kind': kind,
        'model': model,
        'hidden': hidden,
        'seed': DEFAULT_SEED,
        'out': DEFAULT_OUT,
        'schedule': schedule.to_dict(),
        'data': {'n_trajectories': n_trajectories, 'n_steps': n_steps},
        'evaluation': {'n_gibbs': 50, 'n_average': 25, 'sample_recurrent': False},
        'generation': {'direction': 'reverse', 'n_steps': 100, 'n_gibbs': 50},
        'bptt': True
    }

    if kind == KIND_LDS:
        config['world'] = LdsWorld().to_dict()
        config['codec'] = PpcCodec().to_dict()
        config['baselines'] = {'n_iters': 30, 'n_restarts': 20, 'n_trajectories': 40, 'n_steps': 1000}
    else:
        config['world'] = BounceWorld().to_dict()

    return config


def _lds_refh() -> dict:
    return _base(KIND_LDS, TrainMode.REFH.value, 240, lds_refh_schedule(), 40, 1000)


def _lds_trbm_rtrbm() -> dict:
    return _base(KIND_LDS, TrainMode.RTRBM.value, 240, lds_trbm_rtrbm_schedule(), 40, 1000)


def _balls() -> dict:
    return _base(KIND_BOUNCE, TrainMode.REFH.value, 400, balls_schedule(), 40, 100)


def _lds_test() -> dict:
    config = _lds_refh()
    config['out'] = 'results/lds-test'
    return config


def _lds_sweep() -> dict:
    config = _lds_refh()
    config['sweep'] = {
        'seeds': list(range(20)),
        'runs': [{'model': model, 'hidden': hidden}
                 for model in (TrainMode.REFH.value, TrainMode.TRBM.value, TrainMode.RTRBM.value)
                 for hidden in SWEEP_HIDDEN_SIZES]
    }
    # The TRBM and RTRBM runs use their own schedule.
    config['sweep_schedules'] = {TrainMode.TRBM.value: lds_trbm_rtrbm_schedule().to_dict(),
                                 TrainMode.RTRBM.value: lds_trbm_rtrbm_schedule().to_dict()}
    return config


def _balls_table() -> dict:
    config = _balls()
    config['sweep'] = {
        'seeds': [0],
        'runs': [{'model': TrainMode.REFH.value, 'hidden': 400}, {'model': TrainMode.REFH.value, 'hidden': 1000},
                 {'model': TrainMode.TRBM.value, 'hidden': 400}, {'model': TrainMode.RTRBM.value, 'hidden': 400}]
    }
    return config


PRESETS = {
    'lds-refh': _lds_refh,
    'lds-trbm-rtrbm': _lds_trbm_rtrbm,
    'balls': _balls,
    'lds-test': _lds_test,
    'lds-sweep': _lds_sweep,
    'balls-table': _balls_table
}
DEFAULT_PRESET = 'lds-refh'


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError('Unknown preset {}. Choose one of {}.'.format(name, sorted(PRESETS)))

    return PRESETS[name]()


def deep_merge(base: dict, override: dict) -> dict:
    """ Returns base updated with override, merging nested dictionaries key by key. """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)

    return merged


class ExperimentConfig(object):
    """ A resolved experiment configuration, with typed accessors for its sections. """

    def __init__(self, values: dict):
        self.values = values
        self._validate()

    def _validate(self) -> None:
        values = self.values
        if values.get('kind') not in KINDS:
            raise ConfigError('Unknown data kind {}. Choose one of {}.'.format(values.get('kind'), KINDS))

        if values.get('model') not in [mode.value for mode in TrainMode]:
            raise ConfigError('Unknown model kind {}.'.format(values.get('model')))

        if not isinstance(values.get('hidden'), int) or values['hidden'] < 1:
            raise ConfigError('The hidden size must be a positive integer. Got {}.'.format(values.get('hidden')))

        if not isinstance(values.get('seed'), int) or values['seed'] < 0:
            raise ConfigError('The seed must be a nonnegative integer. Got {}.'.format(values.get('seed')))

        try:
            self.schedule
            self.world
            if self.kind == KIND_LDS:
                self.codec
        except (TypeError, ValueError, KeyError) as error:
            raise ConfigError('Invalid configuration: {}'.format(error))

        if self.mode is TrainMode.RTRBM and self.schedule.minibatch.kind != 'contiguous':
            raise ConfigError('RTRBM training needs contiguous minibatches.')

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def kind(self) -> str:
        return self.values['kind']

    @property
    def mode(self) -> TrainMode:
        return TrainMode(self.values['model'])

    @property
    def hidden(self) -> int:
        return self.values['hidden']

    @property
    def seed(self) -> int:
        return self.values['seed']

    @property
    def out(self) -> str:
        return self.values['out']

    @property
    def schedule(self) -> TrainSchedule:
        return TrainSchedule.from_dict(self.values['schedule'])

    @property
    def world(self):
        if self.kind == KIND_LDS:
            return LdsWorld.from_dict(self.values['world'])

        return BounceWorld.from_dict(self.values['world'])

    @property
    def codec(self) -> PpcCodec:
        return PpcCodec.from_dict(self.values['codec'])

    @property
    def obs_spec(self) -> LayerSpec:
        if self.kind == KIND_LDS:
            return LayerSpec.single(UnitFamily.POISSON, self.codec.n_units)

        return LayerSpec.single(UnitFamily.BERNOULLI, self.world.n_pixels)

    @property
    def hid_spec(self) -> LayerSpec:
        return LayerSpec.single(UnitFamily.BERNOULLI, self.hidden)

    def with_values(self, **overrides) -> 'ExperimentConfig':
        return ExperimentConfig(deep_merge(self.values, overrides))

    def path(self, filename: str) -> str:
        return path.join(self.out, filename)


def load_config(preset_name: str = None, config_file: str = None, seed: int = None, out: str = None) -> ExperimentConfig:
    """
    Resolves a configuration: the preset first, the config file merged over it, then the seed and output overrides.

    :param preset_name: the preset's name, lds-refh by default.
    :param config_file: a JSON file of overrides.
    :param seed: the seed override.
    :param out: the output directory override.
    :return: the resolved configuration.
    """
    values = preset(DEFAULT_PRESET if preset_name is None else preset_name)

    if config_file is not None:
        if not path.isfile(config_file):
            raise FileNotFoundError('Config file {} does not exist.'.format(config_file))

        with open(config_file) as stream:
            try:
                overrides = json.load(stream)
            except json.JSONDecodeError as error:
                raise ConfigError('Config file {} is not valid JSON: {}'.format(config_file, error))

        if not isinstance(overrides, dict):
            raise ConfigError('Config file {} must hold a JSON object.'.format(config_file))

        values = deep_merge(values, overrides)

    if seed is not None:
        values['seed'] = seed

    if out is not None:
        values['out'] = out

    return ExperimentConfig(values)


def save_config(config: ExperimentConfig, filename: str = None) -> str:
    """
    Echoes the resolved configuration beside the outputs, with sorted keys.

    :param config: the configuration.
    :param filename: the filename, config.json in the output directory by default.
    :return: the filename.
    """
    filename = config.path(CONFIG_FILENAME) if filename is None else filename
    create_path(filename)
    with open(filename, 'w') as stream:
        json.dump(config.values, stream, sort_keys=True, indent=2)
        stream.write('\n')

    return filename
