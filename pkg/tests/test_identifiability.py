import pytest

from evaluation.identifiability import Verdict, identifiability_check


@pytest.mark.parametrize('m', [1000, 1024, 1025])
def test_population_codes_at_the_boundary_are_not_shown(m):
    assert identifiability_check(2, 150, m, 15).verdict is Verdict.NOT_SHOWN


def test_a_larger_population_code_is_identifiable():
    result = identifiability_check(2, 150, 2048, 15)

    assert result.verdict is Verdict.IDENTIFIABLE
    assert result.r == 2 ** 150
    assert min(result.kappas[:2]) >= result.r
    assert result.score >= 2 * result.r + 2


def test_partition_accounts_for_every_unit():
    result = identifiability_check(2, 150, 2048, 15)
    (m_1, n_1), (m_2, n_2), (m_3, n_3) = result.partition

    assert (m_1 + m_2 + m_3, n_1 + n_2 + n_3) == (15, 150)
    assert m_3 + n_3 == 1
    assert result.kappas[0] == 2048 ** m_1 * 2 ** n_1


@pytest.mark.parametrize('n_hidden, verdict', [(100, Verdict.IDENTIFIABLE), (899, Verdict.IDENTIFIABLE),
                                               (900, Verdict.NOT_SHOWN)])
def test_bouncing_ball_bound(n_hidden, verdict):
    # Binary units throughout, 1799 visible units in total.
    assert identifiability_check(2, n_hidden, 2, 1799 - n_hidden).verdict is verdict


def test_verdict_is_monotone_in_the_observations():
    for M in (14, 15, 16):
        verdicts = [identifiability_check(2, 150, m, M).verdict for m in range(1900, 2200, 50)]
        first = verdicts.index(Verdict.IDENTIFIABLE) if Verdict.IDENTIFIABLE in verdicts else len(verdicts)
        assert all(verdict is Verdict.IDENTIFIABLE for verdict in verdicts[first:])

    verdicts = [identifiability_check(2, 40, 8, M).verdict for M in range(20, 40)]
    first = verdicts.index(Verdict.IDENTIFIABLE)
    assert all(verdict is Verdict.IDENTIFIABLE for verdict in verdicts[first:])


def test_invalid_inputs():
    for arguments in ((1, 10, 4, 4), (2, 0, 4, 4), (2, 10, 1, 4), (2, 10, 4, 0)):
        with pytest.raises(ValueError):
            identifiability_check(*arguments)
