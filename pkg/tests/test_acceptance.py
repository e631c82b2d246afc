"""The numbered reproduction criteria at their stated tolerances.

Each criterion runs once on protocol (default grids, full path counts);
its one-line result is echoed in the terminal summary.
"""

import pytest

from onejump.suite import CRITERIA, PASS, SuiteOptions, run_criterion

LINES: list[str] = []


@pytest.fixture(scope="module")
def out_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.mark.slow
@pytest.mark.parametrize("i", sorted(CRITERIA), ids=lambda i: f"AC{i}")
def test_criterion(i, out_dir):
    res = run_criterion(i, SuiteOptions(), out_dir)
    line = res.line()
    LINES.append(line)
    print(line)
    assert res.status == PASS, line
