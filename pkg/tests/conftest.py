import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ruletag.autodiff import kernels  # noqa: E402

TABLE2 = """\
A 2 O
moderate 2 O
intensity 2 O
earthquake 2 EARTHQUAKE
measuring 2 O
4.7 2 MAGNITUDE-ARG
hit 2 O
Meghalaya 2 PLACE-ARG
on 2 O
Monday 2 TIME-ARG
"""


@pytest.fixture
def table2_text():
    return TABLE2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
