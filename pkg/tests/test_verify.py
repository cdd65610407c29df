import pytest

from privex import verify


@pytest.mark.parametrize("suite", sorted(verify.SUITES))
def test_quick_suites_pass(suite):
    results = verify.run([suite], seed=1, quick=True)
    assert results
    failed = [c for c in results if not c.passed]
    assert not failed, failed


def test_ace_oracle_agrees_on_bsc():
    import numpy as np
    assert verify.ace_correlation(np.array([[0.45, 0.05], [0.05, 0.45]]),
                                  np.random.default_rng(0)) == pytest.approx(0.8, abs=1e-9)
