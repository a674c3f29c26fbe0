import csv
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from utils.system_operations import create_path


def format_float(value: float) -> str:
    """ Formats a float so that it round-trips exactly and prints identically on every run. """
    return repr(float(value))


class MetricsLog(object):
    """ Collects (epoch, batch, metric, value) rows during training. """

    HEADER = ('epoch', 'batch', 'metric', 'value')

    def __init__(self):
        self.rows = []

    def record(self, epoch: int, batch: int, metric: str, value: float) -> None:
        self.rows.append((int(epoch), int(batch), metric, float(value)))

    def values(self, metric: str) -> np.ndarray:
        """ Returns every recorded value of a metric, in recording order. """
        return np.array([row[3] for row in self.rows if row[2] == metric])

    def epochs(self, metric: str) -> np.ndarray:
        return np.array([row[0] for row in self.rows if row[2] == metric])

    def save(self, filename: str) -> str:
        """
        Saves the rows to a CSV file.

        :param filename: the CSV filename.
        :return: the filename.
        """
        create_path(filename)
        with open(filename, 'w', newline='') as stream:
            writer = csv.writer(stream)
            writer.writerow(self.HEADER)
            for epoch, batch, metric, value in self.rows:
                writer.writerow((epoch, batch, metric, format_float(value)))

        return filename

    @classmethod
    def load(cls, filename: str) -> 'MetricsLog':
        log = cls()
        with open(filename, newline='') as stream:
            for row in csv.DictReader(stream):
                log.record(int(row['epoch']), int(row['batch']), row['metric'], float(row['value']))

        return log


@dataclass
class EvalReport:
    """ Squared errors of one model, per trajectory; the aggregate averages every step of every trajectory. """
    model_id: str
    per_trajectory_mse: List[float]
    n_steps: int
    aggregate_mse: float = field(default=None)

    def __post_init__(self):
        self.per_trajectory_mse = [float(mse) for mse in self.per_trajectory_mse]
        if self.aggregate_mse is None:
            # Every trajectory has the same number of steps.
            self.aggregate_mse = float(np.mean(self.per_trajectory_mse)) if self.per_trajectory_mse else float('nan')

    @classmethod
    def from_squared_errors(cls, model_id: str, squared_errors: np.ndarray) -> 'EvalReport':
        """
        Builds a report from per-step squared errors.

        :param model_id: the model's name.
        :param squared_errors: squared errors, shape (trajectories, steps).
        :return: the report.
        """
        squared_errors = np.atleast_2d(squared_errors)
        return cls(model_id, list(squared_errors.mean(axis=1)), squared_errors.shape[1],
                   float(squared_errors.mean()))


def save_reports(filename: str, reports: Sequence[EvalReport]) -> str:
    """
    Saves reports as CSV rows: one per trajectory plus one aggregate row (trajectory 'all') per model.

    :param filename: the CSV filename.
    :param reports: the reports.
    :return: the filename.
    """
    create_path(filename)
    with open(filename, 'w', newline='') as stream:
        writer = csv.writer(stream)
        writer.writerow(('model', 'trajectory', 'n_steps', 'mse'))
        for report in reports:
            for trajectory, mse in enumerate(report.per_trajectory_mse):
                writer.writerow((report.model_id, trajectory, report.n_steps, format_float(mse)))
            writer.writerow((report.model_id, 'all', report.n_steps, format_float(report.aggregate_mse)))

    return filename


@dataclass
class BenchmarkRow:
    model: str
    restart: int
    mse: float


def save_benchmark(filename: str, rows: Sequence[BenchmarkRow], footer: Sequence[str] = ()) -> str:
    """
    Saves baseline results as (model, restart, mse) CSV rows, followed by '#' comment lines.

    :param filename: the CSV filename.
    :param rows: the benchmark rows.
    :param footer: comment lines appended after the rows.
    :return: the filename.
    """
    create_path(filename)
    with open(filename, 'w', newline='') as stream:
        writer = csv.writer(stream)
        writer.writerow(('model', 'restart', 'mse'))
        for row in rows:
            writer.writerow((row.model, row.restart, format_float(row.mse)))

        for line in footer:
            stream.write('# {}\n'.format(line))

    return filename


def median_by_model(rows: Sequence[BenchmarkRow]) -> dict:
    """ Returns the median MSE of every model, in first-appearance order. """
    models = list(dict.fromkeys(row.model for row in rows))
    return {model: float(np.median([row.mse for row in rows if row.model == model])) for model in models}
