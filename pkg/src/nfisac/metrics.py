"""Localization and classification metrics."""

from dataclasses import dataclass, astuple
import math

import numpy as np

from ._validation import check_aligned
from .exceptions import InvalidConfigError

REPORT_COLUMNS = ("accuracy", "range_mae_m", "azimuth_mae_deg", "planar_mae_m", "succ_1m", "n")
SUCCESS_RADIUS = 1.0


def wrap_angle(x):
    """Wrap angles to the half-open interval ``[-pi, pi)``."""
    out = np.mod(np.asarray(x, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return out.item() if out.ndim == 0 else out


def planar_error(r_hat, r, theta_hat, theta):
    """Euclidean distance between two polar points in the sensing plane.

    Uses the law of cosines with the wrapped azimuth difference. Vectorized.
    """
    r_hat = np.asarray(r_hat, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r_hat < 0) or np.any(r < 0):
        raise InvalidConfigError("ranges must be nonnegative")
    d = wrap_angle(np.asarray(theta_hat, dtype=float) - np.asarray(theta, dtype=float))
    sq = r_hat ** 2 + r ** 2 - 2.0 * r_hat * r * np.cos(d)
    out = np.sqrt(np.maximum(sq, 0.0))
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    range_mae: float
    azimuth_mae: float
    planar_mae: float
    success_at_1m: float
    sample_count: int

    def as_row(self):
        return list(astuple(self))

    def to_dict(self):
        return dict(zip(REPORT_COLUMNS, self.as_row()))


def aggregate(range_hat, azimuth_hat, range_true, azimuth_true, class_hat=None, class_true=None,
              success_radius=SUCCESS_RADIUS):
    """Mean absolute errors, success rate and (optionally) accuracy.

    Azimuth MAE is reported in degrees after wrapping. ``accuracy`` is NaN
    when class predictions are not given.
    """
    rh, ah, rt, at = check_aligned(range_hat, azimuth_hat, range_true, azimuth_true,
                                   names=("range_hat", "azimuth_hat", "range", "azimuth"))
    n = rh.shape[0]
    if n == 0:
        raise InvalidConfigError("cannot aggregate an empty batch")
    accuracy = math.nan
    if class_hat is not None:
        ch = np.asarray(class_hat)
        ct = np.asarray(class_true)
        if ch.shape != (n,) or ct.shape != (n,):
            raise InvalidConfigError("class predictions and labels must align with the batch")
        accuracy = float(np.mean(ch == ct))
    planar = planar_error(rh, rt, ah, at)
    return MetricReport(
        accuracy=accuracy,
        range_mae=float(np.mean(np.abs(rh - rt))),
        azimuth_mae=float(np.degrees(np.mean(np.abs(wrap_angle(ah - at))))),
        planar_mae=float(np.mean(planar)),
        success_at_1m=float(np.mean(planar <= success_radius)),
        sample_count=int(n),
    )


def gain_map_point(acc, acc_single, planar, planar_single):
    """Accuracy gain and relative planar-error reduction versus single-task references."""
    if planar_single <= 0:
        raise InvalidConfigError("single-task planar error must be positive")
    return acc - acc_single, (planar_single - planar) / planar_single
