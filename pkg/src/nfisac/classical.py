"""Model-based range-azimuth baselines.

* near-field point-target matched filter: exhaustive spherical-wave search
  on a polar grid with successive local refinement;
* far-field 2-D periodogram: zero-padded FFT over one array axis and the
  subcarrier axis.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import check_channel_tensor, check_positive
from .constants import C0, TWO_PI
from .exceptions import EstimatorNotApplicableError, InvalidConfigError, SingularityError
from .metrics import wrap_angle

ESTIMATORS = ("periodogram", "matched_filter")


@dataclass(frozen=True)
class SearchGrid:
    """Polar search region and refinement schedule (angles in radians)."""

    range_min: float = 5.0
    range_max: float = 50.0
    azimuth_min: float = math.radians(-60.0)
    azimuth_max: float = math.radians(60.0)
    range_step: float = 0.5
    azimuth_step: float = math.radians(1.0)
    levels: int = 3
    shrink: int = 5

    def __post_init__(self):
        check_positive(self.range_min, "range_min")
        if not self.range_max > self.range_min:
            raise InvalidConfigError("range_max must exceed range_min")
        if not self.azimuth_max > self.azimuth_min:
            raise InvalidConfigError("azimuth_max must exceed azimuth_min")
        check_positive(self.range_step, "range_step")
        check_positive(self.azimuth_step, "azimuth_step")
        if int(self.levels) < 0 or int(self.shrink) < 2:
            raise InvalidConfigError("levels must be >= 0 and shrink >= 2")

    @property
    def final_range_resolution(self):
        return self.range_step / self.shrink ** self.levels

    @property
    def final_azimuth_resolution(self):
        return self.azimuth_step / self.shrink ** self.levels

    def to_dict(self):
        return {
            "range_min_m": self.range_min, "range_max_m": self.range_max,
            "azimuth_min_deg": math.degrees(self.azimuth_min),
            "azimuth_max_deg": math.degrees(self.azimuth_max),
            "range_step_m": self.range_step, "azimuth_step_deg": math.degrees(self.azimuth_step),
            "levels": int(self.levels), "shrink": int(self.shrink),
        }


@dataclass(frozen=True)
class EstimationResult:
    range_hat: float
    azimuth_hat: float
    estimator: str
    score_peak: float
    grid_metadata: dict = field(default_factory=dict, compare=False)


def _polar_points(ranges, azimuths):
    """Cartesian points on the z = 0 plane, azimuth-major: shape ``(n_az * n_r, 3)``."""
    az, rr = np.meshgrid(azimuths, ranges, indexing="ij")
    pts = np.zeros(az.shape + (3,))
    pts[..., 0] = rr * np.cos(az)
    pts[..., 1] = rr * np.sin(az)
    return pts.reshape(-1, 3)


def _distances(positions, points):
    dist = np.linalg.norm(points[None, :, :] - positions[:, None, :], axis=-1)
    if np.any(dist <= 1e-12):
        raise SingularityError("steering point coincides with an array element")
    return dist


def _steering(positions, k0, points):
    """Unit-norm phase-only steering, shape ``(N_elements, n_points)``."""
    return np.exp(-1j * k0 * _distances(positions, points)) / math.sqrt(positions.shape[0])


def steering_vectors(array, k0, range_m, azimuth):
    """Spherical-wave steering vectors of a point at ``(range, azimuth)`` on z = 0.

    Returns ``(a_tx, a_rx)``, each unit norm with entries
    ``exp(-j k0 |p - r_element|) / sqrt(N)``.
    """
    k0 = check_positive(k0, "k0")
    p = _polar_points(np.array([float(range_m)]), np.array([float(azimuth)]))
    return _steering(array.tx_positions, k0, p)[:, 0], _steering(array.rx_positions, k0, p)[:, 0]


def matched_filter_scores(tensor, array, frequencies, points, chunk=4096):
    """``S = sum_k |a_r^H H_k conj(a_t)|^2`` at each point of ``points``."""
    wavenumbers = TWO_PI * np.asarray(frequencies, dtype=float) / C0
    out = np.zeros(points.shape[0])
    norm = 1.0 / math.sqrt(array.n_tx * array.n_rx)
    per_tone = np.ascontiguousarray(np.moveaxis(tensor, -1, 0))
    for start in range(0, points.shape[0], chunk):
        pts = points[start:start + chunk]
        d_tx = _distances(array.tx_positions, pts)
        d_rx = _distances(array.rx_positions, pts)
        acc = np.zeros(pts.shape[0])
        # conj(a_t), conj(a_r) are exp(+j k d); advance them tone to tone by a
        # phasor recurrence, recomputing the step only when the spacing changes
        ph_tx, ph_rx = np.exp(1j * wavenumbers[0] * d_tx), np.exp(1j * wavenumbers[0] * d_rx)
        last_dk, st_tx, st_rx = None, None, None
        for kk in range(wavenumbers.size):
            if kk:
                dk = wavenumbers[kk] - wavenumbers[kk - 1]
                if last_dk is None or abs(dk - last_dk) > 1e-12 * abs(dk):
                    st_tx, st_rx, last_dk = np.exp(1j * dk * d_tx), np.exp(1j * dk * d_rx), dk
                ph_tx *= st_tx
                ph_rx *= st_rx
            proj = per_tone[kk] @ ph_tx
            acc += np.abs(np.einsum("rp,rp->p", ph_rx, proj)) ** 2
        out[start:start + chunk] = acc * norm ** 2
    return out


def _check_sample(tensor, array, frequencies):
    H, batch = check_channel_tensor(tensor, allow_batch=False)
    if H.shape[0] != array.n_rx or H.shape[1] != array.n_tx:
        raise InvalidConfigError(
            f"tensor shape {H.shape[:2]} does not match array ({array.n_rx} rx, {array.n_tx} tx)")
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    if freqs.shape != (H.shape[2],):
        raise InvalidConfigError(f"{H.shape[2]} subcarriers in tensor but {freqs.size} frequencies given")
    return H, freqs


def _axis_values(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def matched_filter_estimate(tensor, array, frequencies, search=SearchGrid()):
    """Near-field point-target matched filter with coarse-to-fine search.

    The coarse polar grid is scanned exhaustively. Each refinement level
    re-grids plus/minus one previous cell around the current argmax with the
    step divided by ``search.shrink``; the previous argmax is always on the
    new grid, so the peak score never decreases. Ties resolve to the lowest
    azimuth index, then the lowest range index.
    """
    H, freqs = _check_sample(tensor, array, frequencies)
    ranges = _axis_values(search.range_min, search.range_max, search.range_step)
    azimuths = _axis_values(search.azimuth_min, search.azimuth_max, search.azimuth_step)
    if ranges.size == 0 or azimuths.size == 0:
        raise InvalidConfigError("empty search grid")
    scores = matched_filter_scores(H, array, freqs, _polar_points(ranges, azimuths))
    best = int(np.argmax(scores))
    i_az, i_r = divmod(best, ranges.size)
    r_best, a_best, s_best = ranges[i_r], azimuths[i_az], float(scores[best])
    history = [s_best]
    dr, da = search.range_step, search.azimuth_step
    offsets = np.arange(-search.shrink, search.shrink + 1)
    for _ in range(int(search.levels)):
        dr, da = dr / search.shrink, da / search.shrink
        ranges = r_best + dr * offsets
        ranges = ranges[(ranges >= search.range_min - 1e-12) & (ranges <= search.range_max + 1e-12)]
        azimuths = a_best + da * offsets
        azimuths = azimuths[(azimuths >= search.azimuth_min - 1e-12) & (azimuths <= search.azimuth_max + 1e-12)]
        scores = matched_filter_scores(H, array, freqs, _polar_points(ranges, azimuths))
        best = int(np.argmax(scores))
        i_az, i_r = divmod(best, ranges.size)
        if scores[best] > s_best:
            r_best, a_best, s_best = ranges[i_r], azimuths[i_az], float(scores[best])
        history.append(s_best)
    meta = {"search": search.to_dict(), "score_history": history,
            "final_range_step_m": dr, "final_azimuth_step_deg": math.degrees(da)}
    return EstimationResult(float(r_best), float(wrap_angle(a_best)), "matched_filter", s_best, meta)


def _parabolic_offset(left, center, right):
    denom = left - 2.0 * center + right
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def periodogram_estimate(tensor, array, frequencies, zero_pad=8, scan_axis="tx", search=SearchGrid()):
    """Far-field 2-D periodogram range-azimuth estimate.

    Parameters
    ----------
    tensor : ndarray, shape (N_r, N_t, K_s)
    array : ArrayGeometry
    frequencies : array_like, shape (K_s,)
        Selected subcarrier frequencies; their mean spacing is used as the
        tone spacing.
    zero_pad : int
        Zero-padding factor on both FFT axes.
    scan_axis : {"tx", "rx"}
        Array axis used for the angular FFT; the other axis is collapsed with
        uniform weights. The tx line lies along y, so ``"tx"`` resolves
        azimuth in the sensing plane.
    search : SearchGrid
        Only the azimuth bounds are used, to clip the angle estimate.
    """
    H, freqs = _check_sample(tensor, array, frequencies)
    if scan_axis not in ("tx", "rx"):
        raise InvalidConfigError("scan_axis must be 'tx' or 'rx'")
    n_scan = H.shape[1] if scan_axis == "tx" else H.shape[0]
    if freqs.size < 2:
        raise EstimatorNotApplicableError("periodogram needs at least two subcarriers for a range axis")
    if n_scan < 2:
        raise EstimatorNotApplicableError("periodogram needs at least two elements on the scanned axis")
    pad = int(zero_pad)
    if pad < 1:
        raise InvalidConfigError("zero_pad must be >= 1")
    if scan_axis == "tx":
        Y = H.sum(axis=0) / math.sqrt(H.shape[0])
    else:
        Y = H.sum(axis=1) / math.sqrt(H.shape[1])
    n_ant, n_tone = pad * n_scan, pad * freqs.size
    # tone phases rotate as exp(-j 2 pi df tau m): the inverse FFT maps delay to a positive bin
    spectrum = np.fft.fft(np.fft.ifft(Y, n=n_tone, axis=1), n=n_ant, axis=0)
    P = np.abs(spectrum)
    i, j = np.unravel_index(int(np.argmax(P)), P.shape)
    di = _parabolic_offset(P[(i - 1) % n_ant, j], P[i, j], P[(i + 1) % n_ant, j])
    dj = _parabolic_offset(P[i, (j - 1) % n_tone], P[i, j], P[i, (j + 1) % n_tone])
    u = ((i + di) / n_ant + 0.5) % 1.0 - 0.5
    nu = ((j + dj) / n_tone) % 1.0
    df = (freqs[-1] - freqs[0]) / (freqs.size - 1)
    tau = nu / df
    range_hat = max(C0 * tau / 2.0, 1e-6)
    sin_theta = u * array.carrier_wavelength / array.element_spacing
    lo, hi = math.sin(search.azimuth_min), math.sin(search.azimuth_max)
    azimuth_hat = math.asin(float(np.clip(sin_theta, lo, hi)))
    meta = {"zero_pad": pad, "scan_axis": scan_axis, "peak_bin": [int(i), int(j)],
            "effective_spacing_hz": float(df), "unambiguous_range_m": C0 / (2.0 * df)}
    return EstimationResult(float(range_hat), float(wrap_angle(azimuth_hat)), "periodogram",
                            float(P[i, j]), meta)


def estimate(tensor, array, frequencies, estimator="matched_filter", **options):
    """Dispatch to one of the two baselines by name."""
    name = estimator.replace("-", "_")
    if name == "matched_filter":
        return matched_filter_estimate(tensor, array, frequencies, **options)
    if name == "periodogram":
        return periodogram_estimate(tensor, array, frequencies, **options)
    raise InvalidConfigError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
