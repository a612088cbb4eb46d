import pytest

from probmeshless.selftest import CHECKS, run_selftest


@pytest.mark.parametrize("name", sorted(CHECKS))
def test_each_selftest_check_passes(name):
    (result,) = run_selftest([name])
    assert result.name == name
    assert result.passed, result.detail


def test_unknown_check_name_rejected():
    with pytest.raises(KeyError):
        run_selftest(["no_such_check"])
