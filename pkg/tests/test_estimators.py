import numpy as np
import pytest
from sklearn.base import clone

from emcwm import (
    ClusterWeightedModel,
    ClusterWeightedModelSearch,
    FitFailedError,
    ari,
    dataset1,
)


@pytest.fixture(scope="module")
def replica():
    return dataset1(200, seed=31)


def test_get_set_params_and_clone():
    est = ClusterWeightedModel(n_components=2, structure_y="VEE", structure_x="VII")
    params = est.get_params()
    assert params["n_components"] == 2 and params["structure_y"] == "VEE"
    est2 = clone(est).set_params(tol=1e-7)
    assert est2.get_params()["tol"] == 1e-7
    assert est.get_params()["tol"] == 1e-5  # original untouched


def test_fit_exposes_sklearn_style_attributes(replica):
    est = ClusterWeightedModel(n_components=2, structure_y="VEE", structure_x="VII")
    est.fit(replica.x, replica.y)
    assert est.weights_.shape == (2,)
    assert est.means_x_.shape == (2, 2)
    assert est.coefficients_.shape == (2, 3, 2)
    assert est.covariances_y_.shape == (2, 2, 2)
    assert est.responsibilities_.shape == (200, 2)
    assert est.converged_
    assert est.bic_ > est.icl_ - 1e-9
    assert ari(replica.labels, est.labels_) == 1.0


def test_predict_and_score_on_held_out(replica):
    est = ClusterWeightedModel(n_components=2, structure_y="VEE",
                               structure_x="VII").fit(replica.x, replica.y)
    new = dataset1(60, seed=77)
    proba = est.predict_proba(new.x, new.y)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    labels = est.predict(new.x, new.y)
    assert ari(new.labels, labels) == 1.0
    assert np.isfinite(est.score(new.x, new.y))


def test_explicit_label_init(replica):
    est = ClusterWeightedModel(n_components=2, structure_y="VEE",
                               structure_x="VII", init=replica.labels)
    est.fit(replica.x, replica.y)
    assert ari(replica.labels, est.labels_) == 1.0


def test_kmeans_init(replica):
    est = ClusterWeightedModel(n_components=2, init="kmeans")
    est.fit(replica.x, replica.y)
    assert est.n_iter_ >= 1


def test_fit_failure_raises(replica):
    est = ClusterWeightedModel(n_components=2, min_component_weight=500,
                               init=replica.labels)
    with pytest.raises(FitFailedError):
        est.fit(replica.x, replica.y)


def test_unfitted_predict_raises(replica):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        ClusterWeightedModel().predict(replica.x, replica.y)


def test_search_estimator_small_grid(replica):
    est = ClusterWeightedModelSearch(
        g_min=1, g_max=2, structures_y="VEE,EEE", structures_x="VII,EEE"
    ).fit(replica.x, replica.y)
    assert est.n_components_ == 2
    assert est.best_estimator_.converged_
    assert ari(replica.labels, est.labels_) == 1.0
    table = est.search_result_.table
    assert len(table) >= 4
    new = dataset1(40, seed=8)
    assert est.predict(new.x, new.y).shape == (40,)


def test_search_estimator_get_params_roundtrip():
    est = ClusterWeightedModelSearch(criterion="icl", g_max=3)
    cloned = clone(est)
    assert cloned.get_params()["criterion"] == "icl"
    assert cloned.get_params()["g_max"] == 3
