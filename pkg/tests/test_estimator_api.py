import numpy as np
import pytest
from sklearn.base import clone

from levyepi.estimator import DengueLevySimulator, check_state_array
from levyepi.thresholds import Verdict


def test_params_round_trip(persistence):
    est = DengueLevySimulator.from_scenario(persistence, t_end=5.0)
    params = est.get_params()
    assert params["lambda_h"] == 0.85 and params["t_end"] == 5.0
    assert clone(est).get_params() == params


def test_fit_sets_verdict(extinction, persistence):
    assert DengueLevySimulator().fit().verdict_ is Verdict.EXTINCTION
    assert DengueLevySimulator.from_scenario(persistence).fit().verdict_ is Verdict.PERSISTENCE


def test_transform_and_predict():
    est = DengueLevySimulator(t_end=60.0, seed=3).fit()
    X = np.array([[0.2, 0.1, 0.3, 0.4], [0.5, 0.0, 0.6, 0.0]])
    features = est.transform(X)
    assert features.shape == (2, len(est.get_feature_names_out()))
    assert np.all(est.predict(X) == 1)
    np.testing.assert_array_equal(est.transform(X), features)


def test_transform_requires_fit():
    with pytest.raises(Exception, match="not fitted"):
        DengueLevySimulator().transform([[0.2, 0.1, 0.3, 0.4]])


def test_state_validation():
    with pytest.raises(ValueError):
        check_state_array([[0.1, 0.2, 0.3]])
    with pytest.raises(ValueError):
        check_state_array([[0.1, -0.2, 0.3, 0.4]])
    with pytest.raises(ValueError):
        check_state_array([[0.1, np.nan, 0.3, 0.4]])


def test_invalid_params_fail_at_fit():
    with pytest.raises(ValueError):
        DengueLevySimulator(dt=0.0).fit()
    with pytest.raises(ValueError):
        DengueLevySimulator(jump_mass=(1.0, 1.0)).fit()
