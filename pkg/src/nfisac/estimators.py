"""scikit-learn style wrappers.

Transformers map scenes to channel tensors and apply the test-time
perturbations; the two localizers expose the classical baselines through
``fit``/``predict``/``score`` so they compose with sklearn pipelines and
model-selection helpers.

Batches are complex arrays of shape ``(n_samples, N_r, N_t, K_s)``. Targets
``y`` are ``(n_samples, 2)`` arrays of ``[range_m, azimuth_rad]``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_channel_tensor
from .classical import SearchGrid, matched_filter_estimate, periodogram_estimate
from .dataset import add_complex_noise, apply_phase_offset, from_real_tensor
from .em import simulate_tensor
from .exceptions import InvalidConfigError
from .metrics import planar_error


def _batch(X):
    arr, is_batch = check_channel_tensor(X, allow_batch=True)
    return arr if is_batch else arr[None]


class ChannelSimulator(BaseEstimator, TransformerMixin):
    """Turn a list of placed scenes into a batch of channel tensors.

    Parameters
    ----------
    array : ArrayGeometry
    grid : FrequencyGrid
    method : str
        Forward-solver method, see :func:`nfisac.em.solve_total_fields`.
    """

    def __init__(self, array=None, grid=None, method="auto"):
        self.array = array
        self.grid = grid
        self.method = method

    def fit(self, X=None, y=None):
        if self.array is None or self.grid is None:
            raise InvalidConfigError("ChannelSimulator needs an array and a frequency grid")
        self.output_shape_ = (self.array.n_rx, self.array.n_tx, self.grid.k_selected)
        return self

    def transform(self, X):
        check_is_fitted(self, "output_shape_")
        scenes = list(X)
        if not scenes:
            return np.zeros((0,) + self.output_shape_, dtype=complex)
        return np.stack([simulate_tensor(s, self.array, self.grid, self.method) for s in scenes])


class RealImagStacker(BaseEstimator, TransformerMixin):
    """Complex ``(n, N_r, N_t, K_s)`` to real ``(n, 2, N_r, N_t, K_s)`` and back."""

    def fit(self, X, y=None):
        self.input_shape_ = _batch(X).shape[1:]
        return self

    def transform(self, X):
        H = np.asarray(X)
        H = H if H.ndim == 4 else H[None]
        return np.stack([H.real, H.imag], axis=1)

    def inverse_transform(self, X):
        R = np.asarray(X)
        if R.ndim != 5 or R.shape[1] != 2:
            raise InvalidConfigError(f"expected (n, 2, N_r, N_t, K_s), got {R.shape}")
        return np.stack([from_real_tensor(r) for r in R])


class ComplexNoise(BaseEstimator, TransformerMixin):
    """Additive circular Gaussian noise at ``scale * RMS(H)`` per sample.

    Sample ``i`` of a batch draws from ``default_rng([seed, i])``.
    """

    def __init__(self, scale=0.0, seed=0):
        self.scale = scale
        self.seed = seed

    def fit(self, X=None, y=None):
        if not float(self.scale) >= 0.0:
            raise InvalidConfigError("scale must be nonnegative")
        self.fitted_ = True
        return self

    def transform(self, X):
        check_is_fitted(self, "fitted_")
        H = np.asarray(X)
        if float(self.scale) == 0.0:
            return H
        return np.stack([add_complex_noise(h, self.scale, seed=[int(self.seed), i])[0]
                         for i, h in enumerate(H)])


class GlobalPhaseOffset(BaseEstimator, TransformerMixin):
    """Multiply every entry by ``exp(j * offset)`` (radians)."""

    def __init__(self, offset=0.0):
        self.offset = offset

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def transform(self, X):
        check_is_fitted(self, "fitted_")
        return apply_phase_offset(np.asarray(X), self.offset)


class _LocalizerBase(RegressorMixin, BaseEstimator):

    def fit(self, X, y=None):
        """Check that ``X`` matches the configured array and tone set."""
        if self.array is None or self.frequencies is None:
            raise InvalidConfigError(f"{type(self).__name__} needs an array and frequencies")
        H = _batch(X)
        freqs = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        expected = (self.array.n_rx, self.array.n_tx, freqs.size)
        if H.shape[1:] != expected:
            raise InvalidConfigError(f"batch entries are {H.shape[1:]}, expected {expected}")
        self.frequencies_ = freqs
        self.input_shape_ = expected
        return self

    def _estimate(self, H):
        raise NotImplementedError

    def predict(self, X):
        """``(n, 2)`` array of ``[range_hat_m, azimuth_hat_rad]``."""
        check_is_fitted(self, "frequencies_")
        H = _batch(X)
        return np.array([[r.range_hat, r.azimuth_hat] for r in map(self._estimate, H)]).reshape(-1, 2)

    def results(self, X):
        check_is_fitted(self, "frequencies_")
        return [self._estimate(h) for h in _batch(X)]

    def score(self, X, y, sample_weight=None):
        """Negative mean planar error (higher is better)."""
        y = np.asarray(y, dtype=float).reshape(-1, 2)
        pred = self.predict(X)
        err = planar_error(pred[:, 0], y[:, 0], pred[:, 1], y[:, 1])
        return -float(np.average(np.atleast_1d(err), weights=sample_weight))


class MatchedFilterLocalizer(_LocalizerBase):
    """Near-field point-target matched filter with coarse-to-fine polar search."""

    def __init__(self, array=None, frequencies=None, search=SearchGrid()):
        self.array = array
        self.frequencies = frequencies
        self.search = search

    def _estimate(self, H):
        return matched_filter_estimate(H, self.array, self.frequencies_, self.search)


class PeriodogramLocalizer(_LocalizerBase):
    """Far-field 2-D periodogram over one array axis and the tone axis."""

    def __init__(self, array=None, frequencies=None, zero_pad=8, scan_axis="tx", search=SearchGrid()):
        self.array = array
        self.frequencies = frequencies
        self.zero_pad = zero_pad
        self.scan_axis = scan_axis
        self.search = search

    def _estimate(self, H):
        return periodogram_estimate(H, self.array, self.frequencies_, self.zero_pad,
                                    self.scan_axis, self.search)
