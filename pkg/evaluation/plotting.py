from typing import Sequence

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.figure import Figure

from evaluation.scoring import BenchmarkRow, MetricsLog


class Plotter(object):
    def __init__(self, plots_name_prefix: str, show_plots: bool = False, save_plots: bool = True):
        self.plots_name_prefix = plots_name_prefix
        self.show_plots = show_plots
        self.save_plots = save_plots

    @property
    def active(self) -> bool:
        return self.show_plots or self.save_plots

    def _plot_and_save(self, fig: Figure, filename_suffix: str) -> str:
        """
        Shows and saves a figure, after checking if it should.

        :param fig: the figure.
        :param filename_suffix: the saved plot's filename suffix.
        :return: the filename, or an empty string if nothing was saved.
        """
        if self.show_plots:
            plt.show()

        filename = ''
        if self.save_plots:
            filename = self.plots_name_prefix + filename_suffix
            fig.savefig(filename)

        plt.close(fig)
        return filename

    def plot_metric_vs_epochs(self, metrics: MetricsLog, metric: str, title: str, filename_suffix: str,
                              log_scale: bool = False) -> str:
        """
        Plots a training metric against the epochs, marking its minimum.

        :param metrics: the training metrics.
        :param metric: the metric's name.
        :param title: the plot's title.
        :param filename_suffix: the saved plot's filename suffix.
        :param log_scale: whether the y axis is logarithmic.
        :return: the saved filename.
        """
        if not self.active:
            return ''

        epochs, values = metrics.epochs(metric), metrics.values(metric)
        # Pre-training rows are recorded at epoch -1.
        epochs, values = epochs[epochs >= 0], values[epochs >= 0]
        if values.size == 0:
            raise ValueError('No values were recorded for metric {}.'.format(metric))

        fig, ax = plt.subplots(figsize=(12, 10))
        ax.plot(epochs, values, label=metric)

        best = int(np.argmin(values))
        ax.scatter(epochs[best], values[best], label='Epoch={}, Min={:.4g}'.format(epochs[best], values[best]),
                   color='#161925', s=150, marker='*')

        if log_scale:
            ax.set_yscale('log')

        ax.xaxis.set_major_locator(plt.MaxNLocator(integer=True))
        ax.set_title(title, fontsize='x-large')
        ax.legend()
        ax.set_xlabel('Epoch', fontsize='large')
        ax.set_ylabel(metric, fontsize='large')

        return self._plot_and_save(fig, filename_suffix)

    def plot_benchmark(self, rows: Sequence[BenchmarkRow], title: str, filename_suffix: str) -> str:
        """
        Draws one box of MSEs per model, in first-appearance order.

        :param rows: the benchmark rows.
        :param title: the plot's title.
        :param filename_suffix: the saved plot's filename suffix.
        :return: the saved filename.
        """
        if not self.active:
            return ''

        models = list(dict.fromkeys(row.model for row in rows))
        fig, ax = plt.subplots(figsize=(12, 10))
        ax.boxplot([[row.mse for row in rows if row.model == model] for model in models])
        ax.set_xticks(range(1, len(models) + 1))
        ax.set_xticklabels(models)

        ax.set_yscale('log')
        ax.set_title(title, fontsize='x-large')
        ax.set_xlabel('Model', fontsize='large')
        ax.set_ylabel('MSE', fontsize='large')

        return self._plot_and_save(fig, filename_suffix)

    def plot_frames(self, frames: np.ndarray, patch_size: int, title: str, filename_suffix: str,
                    columns: int = 10) -> str:
        """
        Tiles generated frames into a grid of images.

        :param frames: flattened frames, shape (T, patch_size ** 2).
        :param patch_size: the frames' side length.
        :param title: the plot's title.
        :param filename_suffix: the saved plot's filename suffix.
        :param columns: the number of frames per row.
        :return: the saved filename.
        """
        if not self.active:
            return ''

        rows = int(np.ceil(len(frames) / columns))
        fig, axes = plt.subplots(rows, columns, figsize=(columns, rows), squeeze=False)
        for idx, ax in enumerate(axes.ravel()):
            ax.axis('off')
            if idx < len(frames):
                ax.imshow(frames[idx].reshape(patch_size, patch_size), cmap='gray', vmin=0, vmax=1)

        fig.suptitle(title, fontsize='x-large')
        return self._plot_and_save(fig, filename_suffix)
