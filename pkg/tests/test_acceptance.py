"""Full-size acceptance suites, one test and one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed even
without ``-s``. ``sparse-rationales selfcheck`` runs the same suites.
"""

import pytest

from sparse_rationales import acceptance

CRITERIA = {
    "1-map-oracles": acceptance.criterion_oracles,
    "2-sparsemax-reduction": acceptance.criterion_sparsemax,
    "3-gradients": acceptance.criterion_gradients,
    "4-matching-feasibility": acceptance.criterion_feasibility,
    "5-annealing": acceptance.criterion_annealing,
    "6-gibbs-and-sampling": acceptance.criterion_gibbs,
    "7-toy-rationalizers": acceptance.criterion_toy,
    "8-single-factor-reduction": acceptance.criterion_reduction,
}


@pytest.mark.slow
@pytest.mark.parametrize("key", list(CRITERIA))
def test_criterion(key, capsys):
    result = CRITERIA[key]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
