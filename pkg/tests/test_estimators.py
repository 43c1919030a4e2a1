import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from nfisac.estimators import (ChannelSimulator, ComplexNoise, GlobalPhaseOffset, MatchedFilterLocalizer,
                               PeriodogramLocalizer, RealImagStacker)
from nfisac.exceptions import InvalidConfigError
from nfisac.geometry import build_cross_array, build_frequency_grid
from nfisac.targets import METAL, place_points

CARRIER = 4.9e9


@pytest.fixture(scope="module")
def setup():
    array = build_cross_array(16, 16, CARRIER)
    grid = build_frequency_grid(CARRIER, k_total=16, k_selected=4)
    pitch = array.carrier_wavelength / 10
    truths = np.array([[20.0, math.radians(10.0)], [35.0, math.radians(-25.0)]])
    scenes = [place_points([[r * math.cos(a), r * math.sin(a), 0.0]], METAL, pitch) for r, a in truths]
    X = ChannelSimulator(array, grid).fit().transform(scenes)
    return array, grid, X, truths


def test_simulator_shapes(setup):
    array, grid, X, _ = setup
    assert X.shape == (2, 16, 16, 4)
    empty = ChannelSimulator(array, grid).fit().transform([])
    assert empty.shape == (0, 16, 16, 4)
    with pytest.raises(InvalidConfigError):
        ChannelSimulator().fit()


def test_params_and_clone(setup):
    array, grid, _, _ = setup
    est = MatchedFilterLocalizer(array, grid.selected_frequencies)
    params = est.get_params()
    assert set(params) == {"array", "frequencies", "search"}
    est2 = clone(est).set_params(search=est.search)
    assert est2.array.n_tx == array.n_tx
    np.testing.assert_array_equal(est2.frequencies, grid.selected_frequencies)
    assert set(PeriodogramLocalizer().get_params()) == {"array", "frequencies", "zero_pad", "scan_axis", "search"}


def test_matched_filter_fit_predict_score(setup):
    array, grid, X, y = setup
    est = MatchedFilterLocalizer(array, grid.selected_frequencies).fit(X, y)
    pred = est.predict(X)
    assert pred.shape == (2, 2)
    assert est.score(X, y) >= -0.1
    assert est.predict(X[0]).shape == (1, 2)
    assert est.results(X)[0].estimator == "matched_filter"


def test_periodogram_localizer(setup):
    array, grid, X, y = setup
    est = PeriodogramLocalizer(array, grid.selected_frequencies, zero_pad=8).fit(X)
    pred = est.predict(X)
    assert np.all(pred[:, 0] > 0)
    assert est.score(X, y) <= 0


def test_unfitted_and_shape_mismatch(setup):
    array, grid, X, _ = setup
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        MatchedFilterLocalizer(array, grid.selected_frequencies).predict(X)
    with pytest.raises(InvalidConfigError):
        MatchedFilterLocalizer(array, grid.selected_frequencies[:2]).fit(X)
    with pytest.raises(InvalidConfigError):
        MatchedFilterLocalizer().fit(X)


def test_transformers_roundtrip_and_perturbations(setup):
    array, grid, X, y = setup
    stack = RealImagStacker().fit(X)
    R = stack.transform(X)
    assert R.shape == (2, 2, 16, 16, 4)
    np.testing.assert_array_equal(stack.inverse_transform(R), X)
    assert ComplexNoise(0.0).fit(X).transform(X) is X
    noisy = ComplexNoise(0.1, seed=3).fit(X).transform(X)
    again = ComplexNoise(0.1, seed=3).fit(X).transform(X)
    np.testing.assert_array_equal(noisy, again)
    assert not np.array_equal(noisy[0], noisy[1] * X[0] / X[1])
    with pytest.raises(InvalidConfigError):
        ComplexNoise(-1.0).fit(X)
    rot = GlobalPhaseOffset(0.4).fit(X).transform(X)
    np.testing.assert_allclose(np.abs(rot), np.abs(X), rtol=1e-12)


def test_pipeline_composition(setup):
    array, grid, X, y = setup
    pipe = make_pipeline(GlobalPhaseOffset(1.1), MatchedFilterLocalizer(array, grid.selected_frequencies))
    pipe.fit(X, y)
    direct = MatchedFilterLocalizer(array, grid.selected_frequencies).fit(X).predict(X)
    np.testing.assert_allclose(pipe.predict(X), direct, atol=1e-9)
