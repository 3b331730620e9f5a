import warnings

import numpy as np
import pytest

from nyskpca.kernels import KernelSpec
from nyskpca.oracle import build_oracle


@pytest.fixture(scope="session")
def spec():
    return KernelSpec.spectral_power(2.0, 200)


@pytest.fixture(scope="session")
def oracle(spec):
    # the default fixture has near-repeated covariance eigenvalues and says so
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_oracle(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[num])
