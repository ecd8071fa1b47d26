import numpy as np
import pytest
from scipy.special import expit

from unksize import (
    LOGIT,
    EcmConfig,
    MixingDistribution,
    SimDesign,
    SimSummary,
    ecm_fit,
    generate_dataset,
    run_study,
    study_design,
)
from unksize.simulate import STUDY_SETTINGS, draw_responses


def test_degenerate_mixing_mean():
    n = 100_000
    X = np.ones((n, 1))
    y = draw_responses(X, [40.0], MixingDistribution([1.0], [30.0]), LOGIT, np.random.default_rng(0))
    assert abs(y.mean() - 30.0) < 3 * np.sqrt(30.0 / n)


def test_setting_one_mean_at_zero_dose():
    design = study_design(1)
    n = 50_000
    X = np.tile([1.0, 0.0], (n, 1))
    y = draw_responses(X, design.beta, design.mixing, LOGIT, np.random.default_rng(1))
    # E[lambda] = 200, h(0) = expit(1)
    expected = 200 * expit(1.0)
    sd = np.sqrt(expected + expit(1.0) ** 2 * 100**2)
    assert abs(y.mean() - expected) < 4 * sd / np.sqrt(n)
    assert expected == pytest.approx(146.2, abs=0.05)


def test_study_design_shape():
    d = study_design(8)
    assert d.r == 110
    assert d.X.shape == (110, 2)
    assert sorted(set(d.X[:, 1])) == list(range(-5, 6))
    assert d.beta.tolist() == [1.0, 2.0]
    assert d.mixing.alphas.tolist() == [0.25, 0.75]
    assert len(STUDY_SETTINGS) == 8


def test_generate_dataset_deterministic():
    d = study_design(3)
    a = generate_dataset(d, np.random.default_rng(5))
    b = generate_dataset(d, np.random.default_rng(5))
    assert np.array_equal(a.y, b.y)
    assert a.column_names == ("intercept", "x")


def test_summary_identities():
    rng = np.random.default_rng(2)
    est = rng.normal([1.0, 2.0], 0.1, size=(50, 2))
    s = SimSummary.from_estimates(est, [1.0, 2.0])
    n = est.shape[0]
    assert np.allclose(s.mse, s.bias**2 + s.sd**2 * (n - 1) / n, rtol=1e-12)
    assert np.all(s.qi[:, 0] < s.qi[:, 1])
    d = s.as_dict()
    assert d["n_ok"] == 50 and set(d["coefficients"]) == {"beta0", "beta1"}


def test_zero_noise_consistency():
    """With a huge degenerate lambda, y/lambda is h almost exactly."""
    pts = np.column_stack([np.ones(6), np.linspace(-2, 2, 6)])
    design = SimDesign(pts, 5, [0.5, -1.2], MixingDistribution([1.0], [1e7]), n_samples=1)
    data = generate_dataset(design, np.random.default_rng(0))
    fit = ecm_fit(data, 1)
    assert np.allclose(fit.beta, design.beta, atol=2e-3)


def test_small_study_deterministic_and_parallel():
    design = study_design(1, n_samples=6, seed=9)
    cfg = EcmConfig(n_starts=3)
    a = run_study(design, ecm_config=cfg)
    b = run_study(design, ecm_config=cfg)
    c = run_study(design, ecm_config=cfg, n_jobs=2)
    assert np.array_equal(a.estimates, b.estimates)
    assert np.array_equal(a.estimates, c.estimates)
    assert a.n_ok + a.n_failed == 6
    assert np.all(np.abs(a.bias) < 0.2)


@pytest.mark.parametrize("kwargs", [
    {"replications": 0},
    {"beta": [1.0]},
    {"n_samples": 0},
])
def test_design_validation(kwargs):
    base = dict(design_points=[[1.0, 0.0], [1.0, 1.0]], replications=2, beta=[0.0, 1.0],
                mixing=MixingDistribution([1.0], [10.0]))
    base.update(kwargs)
    with pytest.raises(ValueError):
        SimDesign(**base)
