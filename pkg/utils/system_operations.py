from os import makedirs, path


def create_path(filepath: str) -> str:
    """
    Creates the directory a file will be written to.

    :param filepath: the filepath.
    :return: the filepath, unchanged.
    """
    directory = path.dirname(filepath)
    if directory:
        makedirs(directory, exist_ok=True)

    return filepath


def print_progressbar(iteration: int, total: int, prefix: str = '', suffix: str = '', length: int = 40,
                      fill: str = '=') -> None:
    """
    Redraws a one-line progress bar; the line is closed once iteration reaches total.

    :param iteration: the completed units of work.
    :param total: the total units of work.
    :param prefix: text before the bar.
    :param suffix: text after the percentage, such as the latest training error.
    :param length: the bar's width in characters.
    :param fill: the bar's fill character.
    """
    fraction = iteration / total if total > 0 else 1.
    filled_length = int(length * fraction)
    head = '>' if 0 < filled_length < length else ''
    bar = fill * filled_length + head + '-' * (length - filled_length - len(head))
    print('\r{} |{}| {:3.0f}% {}'.format(prefix, bar, 100 * fraction, suffix), end='\r')

    if iteration >= total:
        print()
