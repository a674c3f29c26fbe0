import json
from os import path
from typing import NamedTuple, Optional

import numpy as np

from core.exp_family import LayerSpec
from core.harmonium import PARAM_BLOCKS, HarmoniumParams
from core.training import Trainer
from utils.system_operations import create_path

FORMAT_VERSION = 1


class IncompatibleCheckpointError(ValueError):
    pass


class Checkpoint(NamedTuple):
    params: HarmoniumParams
    trainer_state: Optional[dict]
    metadata: dict


def save_checkpoint(filename: str, params: HarmoniumParams, trainer: Trainer = None, metadata: dict = None) -> str:
    """
    Saves the parameters, and optionally the trainer's state, as a single JSON document.
    Floats are written in their shortest exact representation, so loading restores them bit for bit.

    :param filename: the checkpoint's filename.
    :param params: the parameters.
    :param trainer: the trainer whose state will be saved, if any.
    :param metadata: extra JSON-serializable information.
    :return: the filename.
    """
    document = {
        'format_version': FORMAT_VERSION,
        'layers': {
            'obs': params.obs_spec.to_list(),
            'rcrnt': params.rcrnt_spec.to_list(),
            'hid': params.hid_spec.to_list()
        },
        'params': {name: value.tolist() for name, value in params.arrays().items()},
        'trainer': None if trainer is None else trainer.state_dict(),
        'metadata': {} if metadata is None else metadata
    }

    create_path(filename)
    with open(filename, 'w') as stream:
        json.dump(document, stream)

    return filename


def load_checkpoint(filename: str) -> Checkpoint:
    """
    Loads a checkpoint written by save_checkpoint.

    :param filename: the checkpoint's filename.
    :return: the parameters, the trainer state (or None) and the metadata.
    """
    if not path.isfile(filename):
        raise FileNotFoundError('Checkpoint {} does not exist.'.format(filename))

    with open(filename) as stream:
        try:
            document = json.load(stream)
        except json.JSONDecodeError as error:
            raise IncompatibleCheckpointError('Checkpoint {} is not valid JSON: {}'.format(filename, error))

    version = document.get('format_version')
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpointError('Checkpoint format version {} is not supported (expected {}).'
                                          .format(version, FORMAT_VERSION))

    try:
        layers, arrays = document['layers'], document['params']
        params = HarmoniumParams(**{name: np.array(arrays[name], dtype=float) for name in PARAM_BLOCKS},
                                 obs_spec=LayerSpec.from_list(layers['obs']),
                                 rcrnt_spec=LayerSpec.from_list(layers['rcrnt']),
                                 hid_spec=LayerSpec.from_list(layers['hid']))
    except (KeyError, TypeError) as error:
        raise IncompatibleCheckpointError('Checkpoint {} is missing {}.'.format(filename, error))

    return Checkpoint(params, document.get('trainer'), document.get('metadata', {}))
