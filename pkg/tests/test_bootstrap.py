import numpy as np
import pytest

from unksize import (
    LOGIT,
    BootstrapConfig,
    BootstrapResult,
    Dataset,
    EcmConfig,
    FitResult,
    InferenceUnreliableError,
    Theta,
    bootstrap_ci,
    ecm_fit,
    generate_dataset,
    pairs_resample,
    parametric_resample,
    study_design,
)

from conftest import random_instance


def _fake_fit(beta, alphas, lambdas, r):
    return FitResult(Theta.from_arrays(beta, alphas, lambdas), loglik=0.0, r=r,
                     iterations=1, converged=True, loglik_trace=(0.0,))


class TestParametricResample:
    def test_single_component_mean(self):
        # h ~ 1 - 1e-12 at beta = 40, so y ~ Poisson(lambda)
        n = 100_000
        data = Dataset(np.zeros(n, dtype=int), np.ones((n, 1)))
        fit = _fake_fit([40.0], [1.0], [25.0], n)
        y = parametric_resample(data, fit, LOGIT, np.random.default_rng(0)).y
        assert abs(y.mean() - 25.0) < 3 * np.sqrt(25.0 / n)
        assert abs(y.var() - 25.0) < 0.5

    def test_two_point_mixture_moments(self):
        n = 100_000
        data = Dataset(np.zeros(n, dtype=int), np.ones((n, 1)))
        fit = _fake_fit([0.0], [0.3, 0.7], [10.0, 50.0], n)
        y = parametric_resample(data, fit, LOGIT, np.random.default_rng(1)).y
        # h = 1/2: means 5 and 25
        mean = 0.3 * 5 + 0.7 * 25
        var = mean + 0.3 * 0.7 * (25 - 5) ** 2
        assert abs(y.mean() - mean) < 3 * np.sqrt(var / n)
        assert y.var() == pytest.approx(var, rel=0.03)

    def test_keeps_design(self, rng):
        data, theta = random_instance(rng, r=30)
        fit = _fake_fit(theta.beta, theta.mixing.alphas, theta.mixing.lambdas, 30)
        new = parametric_resample(data, fit, LOGIT, rng)
        assert np.array_equal(new.X, data.X)


class TestPairsResample:
    def test_single_row_returns_original(self):
        data = Dataset([7], [[1.0, 3.0]])
        new = pairs_resample(data, np.random.default_rng(0))
        assert new.y.tolist() == [7] and np.array_equal(new.X, data.X)

    def test_expected_multiplicity_is_one(self):
        r = 20
        data = Dataset(np.arange(r), np.ones((r, 1)))
        rng = np.random.default_rng(5)
        counts = np.zeros(r)
        reps = 5000
        for _ in range(reps):
            counts += np.bincount(pairs_resample(data, rng).y, minlength=r)
        mult = counts / reps
        # each row's multiplicity is Binomial(r, 1/r): sd of the average ~ 0.014
        assert np.all(np.abs(mult - 1) < 0.07)

    def test_rows_stay_paired(self, rng):
        data, _ = random_instance(rng, r=25)
        new = pairs_resample(data, rng)
        lookup = {tuple(x): y for y, x in zip(data.y, data.X)}
        assert all(lookup[tuple(x)] == y for y, x in zip(new.y, new.X))


@pytest.fixture(scope="module")
def small_problem():
    design = study_design(1, n_samples=1, seed=0)
    data = generate_dataset(design, np.random.default_rng(3))
    return data, ecm_fit(data, 2)


def test_seeded_determinism(small_problem):
    data, fit = small_problem
    cfg = BootstrapConfig(n_resamples=20, seed=11, n_jitter=1)
    a = bootstrap_ci(data, fit, config=cfg)
    b = bootstrap_ci(data, fit, config=cfg)
    assert np.array_equal(a.replicate_betas, b.replicate_betas)
    c = bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=20, seed=12, n_jitter=1))
    assert not np.array_equal(a.replicate_betas, c.replicate_betas)


def test_serial_and_parallel_agree(small_problem):
    data, fit = small_problem
    a = bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=12, seed=4, n_jitter=1))
    b = bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=12, seed=4, n_jitter=1, n_jobs=2))
    assert np.array_equal(a.replicate_betas, b.replicate_betas)


def test_shared_stream_gives_zero_spread(small_problem):
    data, fit = small_problem
    res = bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=6, seed=2, n_jitter=0,
                                                         independent_streams=False))
    assert np.all(res.replicate_betas == res.replicate_betas[0])
    assert np.all(res.se < 1e-12)
    assert np.all(res.ci[:, 0] == res.ci[:, 1])


def test_interval_brackets_median(small_problem):
    data, fit = small_problem
    res = bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=40, seed=9, n_jitter=0))
    med = np.median(res.replicate_betas, axis=0)
    assert np.all(res.ci[:, 0] <= med) and np.all(med <= res.ci[:, 1])
    assert res.se.shape == (2,) and np.all(res.se > 0)


def test_pairs_mode_runs(small_problem):
    data, fit = small_problem
    res = bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=10, mode="pairs", seed=1, n_jitter=0))
    assert res.replicate_betas.shape[1] == 2


def test_percentiles_are_type_seven():
    betas = np.arange(1.0, 11.0)[:, None]
    res = BootstrapResult.from_replicates(betas, 0, 10, 0.9)
    # type 7: h = (n - 1) p + 1 -> 1.45 and 9.55
    assert res.ci[0].tolist() == pytest.approx([1.45, 9.55])
    assert res.se[0] == pytest.approx(np.std(np.arange(1.0, 11.0), ddof=1))


def test_too_many_failures_raise(small_problem):
    data, fit = small_problem
    # one outer iteration never satisfies the convergence test
    with pytest.raises(InferenceUnreliableError):
        bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=5, n_jitter=0),
                     ecm_config=EcmConfig(max_outer_iterations=1))


def test_partial_result_attached():
    data = Dataset([0, 1, 2, 3, 50, 60], np.ones((6, 1)))
    fit = ecm_fit(data, 2)
    with pytest.raises(InferenceUnreliableError) as err:
        bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=10, n_jitter=0,
                                                       max_failure_fraction=-1.0))
    assert err.value.partial is not None
    assert err.value.partial.n_resamples == 10


@pytest.mark.parametrize("kwargs", [{"n_resamples": 1}, {"level": 1.0}, {"mode": "wild"}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        BootstrapConfig(**kwargs)


@pytest.mark.slow
def test_percentile_coverage(report):
    """Nominal 95% intervals cover the true slope in most simulated trials."""
    design = study_design(1, n_samples=1)
    truth = design.beta[1]
    hits = 0
    trials = 100
    for t in range(trials):
        data = generate_dataset(design, np.random.default_rng([77, t]))
        fit = ecm_fit(data, 2, config=EcmConfig(n_starts=4))
        res = bootstrap_ci(data, fit, config=BootstrapConfig(n_resamples=60, seed=t, n_jitter=0))
        hits += res.ci[1, 0] <= truth <= res.ci[1, 1]
    report(f"bootstrap coverage of true slope: {hits}/{trials}")
    assert hits >= 88
