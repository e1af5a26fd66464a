import numpy as np
import pytest

from emcwm import (
    ComponentParams,
    CovStructure,
    GeneratorSpec,
    MixtureParams,
    dataset1,
    dataset1_params,
    decompose,
    sample,
)


@pytest.fixture(scope="module")
def big_replica():
    return dataset1(100_000, seed=99)


def test_generator_spec_validation():
    with pytest.raises(ValueError):
        GeneratorSpec(params=dataset1_params(), n=0)


def test_sample_deterministic():
    spec = GeneratorSpec(params=dataset1_params(), n=40, seed=123)
    a, b = sample(spec), sample(spec)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_sample_seed_changes_data():
    a = dataset1(40, seed=1)
    b = dataset1(40, seed=2)
    assert not np.array_equal(a.x, b.x)


def test_sample_prefix_stability():
    # per-observation substreams: a longer run extends the shorter one
    a = dataset1(30, seed=5)
    b = dataset1(60, seed=5)
    np.testing.assert_array_equal(a.x, b.x[:30])
    np.testing.assert_array_equal(a.labels, b.labels[:30])


def test_tiny_covariance_concentrates_at_means():
    comp = ComponentParams(
        weight=1.0,
        mean_x=np.array([2.0, -1.0]),
        cov_x=1e-8 * np.eye(2),
        coeffs=np.array([[0.5, 0.5], [0.0, 0.0], [0.0, 0.0]]),
        cov_y=1e-8 * np.eye(2),
    )
    data = sample(GeneratorSpec(params=MixtureParams((comp,)), n=50, seed=0))
    assert np.max(np.abs(data.x - comp.mean_x)) < 1e-3
    assert np.max(np.abs(data.y - [0.5, 0.5])) < 1e-3


def test_dataset1_component1_mean_clt_bound(big_replica):
    x1 = big_replica.x[big_replica.labels == 0]
    np.testing.assert_allclose(x1.mean(axis=0), [3.0, 2.5], atol=0.02)


def test_dataset1_label_proportion_binomial_bound(big_replica):
    n = big_replica.n
    prop = np.mean(big_replica.labels == 0)
    assert abs(prop - 0.35) <= 3 * np.sqrt(0.35 * 0.65 / n)


def test_dataset1_empirical_covariances(big_replica):
    params = dataset1_params()
    xs = np.hstack([np.ones((big_replica.n, 1)), big_replica.x])
    for g, comp in enumerate(params.components):
        sel = big_replica.labels == g
        x = big_replica.x[sel]
        emp_x = np.cov(x.T, bias=True)
        np.testing.assert_allclose(emp_x, comp.cov_x, atol=0.05)
        resid = big_replica.y[sel] - xs[sel] @ comp.coeffs
        emp_y = np.cov(resid.T, bias=True)
        np.testing.assert_allclose(emp_y, comp.cov_y, atol=0.05)


def test_dataset1_small_label_proportion():
    data = dataset1(250, seed=7)
    prop = np.mean(data.labels == 0)
    assert abs(prop - 0.35) <= 3 * np.sqrt(0.35 * 0.65 / 250)


def test_dataset1_preset_values():
    params = dataset1_params()
    assert params.structure_y is CovStructure.VEE
    assert params.structure_x is CovStructure.VII
    c1, c2 = params.components
    assert c1.weight == pytest.approx(0.35)
    np.testing.assert_allclose(c1.mean_x, [3.0, 2.5])
    np.testing.assert_allclose(c2.mean_x, [1.1, -4.0])
    np.testing.assert_allclose(c1.cov_x, np.eye(2))
    np.testing.assert_allclose(c2.cov_x, 0.5 * np.eye(2))
    np.testing.assert_allclose(c1.coeffs, [[2, -2], [-0.5, 1.5], [-1, 2]])
    np.testing.assert_allclose(c2.coeffs, [[0, 1], [2.2, 2], [-1, 1.5]])
    np.testing.assert_allclose(c1.cov_y, [[0.92, 0.56], [0.56, 1.40]])
    np.testing.assert_allclose(c2.cov_y, [[1.725, 1.050], [1.050, 2.625]])


def test_dataset1_response_covariances_share_shape_and_orientation():
    """The preset response covariances differ only in volume (ratio 15/8)."""
    c1, c2 = dataset1_params().components
    t1 = decompose(c1.cov_y)
    t2 = decompose(c2.cov_y)
    assert t2.volume / t1.volume == pytest.approx(1.875, abs=1e-10)
    np.testing.assert_allclose(t1.shape, t2.shape, atol=1e-10)
    np.testing.assert_allclose(t1.orientation, t2.orientation, atol=1e-10)
    np.testing.assert_allclose(c2.cov_y, 1.875 * c1.cov_y, atol=1e-12)


def test_dataset1_minimum_size():
    with pytest.raises(ValueError):
        dataset1(1)
