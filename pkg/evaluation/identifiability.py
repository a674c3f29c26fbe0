from dataclasses import dataclass
from enum import Enum
from typing import Tuple


class Verdict(Enum):
    IDENTIFIABLE = 'identifiable'
    # The sufficient condition fails; this is not a proof of unidentifiability.
    NOT_SHOWN = 'not-shown'


@dataclass(frozen=True)
class IdentifiabilityResult:
    verdict: Verdict
    kappas: Tuple[int, int, int]
    # Units of each cardinality in S1, S2 and S3, as (m-units, n-units) pairs.
    partition: Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]]
    r: int

    @property
    def score(self) -> int:
        return sum(min(self.r, kappa) for kappa in self.kappas)


def _smallest_exponent(base: int, target: int, factor: int, upper: int) -> int:
    """ The smallest b in [0, upper] with factor * base^b >= target, or upper + 1 if there is none. """
    low, high = 0, upper + 1
    while low < high:
        middle = (low + high) // 2
        if factor * base ** middle >= target:
            high = middle
        else:
            low = middle + 1

    return low


def _best_split(n: int, n_units: int, m: int, m_units: int, r: int) -> [int, Tuple[int, int]]:
    """
    Splits n_units units of cardinality n and m_units of cardinality m into S1 and S2,
    maximizing min(r, kappa_1) + min(r, kappa_2).
    For a fixed number of m-units in S1 the objective is convex in the number of n-units between
    the points where either term saturates, so only those points and the ends are candidates.
    """
    best_score, best_split = -1, (0, 0)
    for a in range(m_units + 1):
        factor_1, factor_2 = m ** a, m ** (m_units - a)

        saturates_1 = _smallest_exponent(n, r, factor_1, n_units)
        # The largest b with factor_2 * n^(n_units - b) >= r.
        saturates_2 = n_units - _smallest_exponent(n, r, factor_2, n_units)

        candidates = {0, n_units, saturates_1 - 1, saturates_1, saturates_2, saturates_2 + 1}
        for b in candidates:
            if not 0 <= b <= n_units:
                continue

            score = min(r, factor_1 * n ** b) + min(r, factor_2 * n ** (n_units - b))
            if score > best_score:
                best_score, best_split = score, (a, b)

    return best_score, best_split


def identifiability_check(n: int, N: int, m: int, M: int) -> IdentifiabilityResult:
    """
    Evaluates the sufficient condition for generic identifiability of a harmonium whose visible layer
    holds N recurrent units of cardinality n and M observation units of cardinality m, with r = n^N
    hidden states: min(r, k1) + min(r, k2) + min(r, k3) >= 2r + 2 for some partition of the
    visible units. S3 is a single unit; S1 and S2 split the rest. All arithmetic is exact.

    :param n: the cardinality of the recurrent (and hidden) units.
    :param N: the number of hidden units.
    :param m: the cardinality of the observation units.
    :param M: the number of observation units.
    :return: the verdict, with the best partition found.
    """
    if min(n, m) < 2 or min(N, M) < 1:
        raise ValueError('Cardinalities must be at least 2 and unit counts at least 1. Got n={}, N={}, m={}, M={}.'
                         .format(n, N, m, M))

    r = n ** N
    best = None
    # S3 holds either one recurrent or one observation unit.
    for n_units, m_units, singleton, s3 in ((N - 1, M, n, (0, 1)), (N, M - 1, m, (1, 0))):
        if n_units < 0 or m_units < 0:
            continue

        _, (a, b) = _best_split(n, n_units, m, m_units, r)
        kappas = (m ** a * n ** b, m ** (m_units - a) * n ** (n_units - b), singleton)
        result = IdentifiabilityResult(Verdict.NOT_SHOWN, kappas, ((a, b), (m_units - a, n_units - b), s3), r)

        if best is None or result.score > best.score:
            best = result

    verdict = Verdict.IDENTIFIABLE if best.score >= 2 * r + 2 else Verdict.NOT_SHOWN
    return IdentifiabilityResult(verdict, best.kappas, best.partition, r)
