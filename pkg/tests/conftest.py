import numpy as np
import pytest

from unksize import Dataset, MixingDistribution, Theta


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, r=8, rho=2, K=2, lam_range=(2.0, 30.0)):
    """Small random dataset and parameter with an intercept column."""
    X = np.column_stack([np.ones(r), rng.normal(size=(r, rho - 1))]) if rho > 1 else np.ones((r, 1))
    beta = rng.normal(0, 0.7, rho)
    alphas = rng.dirichlet(np.ones(K))
    lambdas = rng.uniform(*lam_range, K)
    theta = Theta(beta, MixingDistribution(alphas, lambdas))
    from unksize.simulate import draw_responses
    from unksize.links import LOGIT

    y = draw_responses(X, beta, theta.mixing, LOGIT, rng)
    return Dataset(y, X), theta


@pytest.fixture(scope="session")
def mbovis():
    from unksize.io import load_mbovis

    return load_mbovis()


@pytest.fixture(scope="session")
def mbovis_k3(mbovis):
    from unksize import ecm_fit

    return ecm_fit(mbovis, 3)


@pytest.fixture
def report(request):
    """Write a line straight to the terminal, bypassing capture."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def write(line):
        if tr is not None:
            tr.write_line(line)
        else:
            print(line)

    return write
