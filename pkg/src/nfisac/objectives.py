"""Structured training objectives with closed-form gradients.

Every differentiable loss ``f`` has a companion ``f_grad`` returning a dict
of partial derivatives keyed by argument name; :func:`gradient_check`
compares those against central finite differences.
"""

from dataclasses import dataclass
import math

import numpy as np

from ._validation import check_aligned
from .exceptions import InvalidConfigError
from .metrics import planar_error, wrap_angle

BREAKDOWN_COLUMNS = ("cls", "nll_r", "nll_theta", "planar", "peak", "coupling", "total")


@dataclass(frozen=True)
class LossWeights:
    lambda_r: float = 1.0
    lambda_theta: float = 1.8
    lambda_p: float = 0.2
    lambda_pk: float = 0.05
    lambda_c: float = 0.1
    epsilon_planar: float = 1e-6

    def __post_init__(self):
        for name in ("lambda_r", "lambda_theta", "lambda_p", "lambda_pk", "lambda_c"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise InvalidConfigError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)
        eps = float(self.epsilon_planar)
        if not math.isfinite(eps) or eps <= 0:
            raise InvalidConfigError(f"epsilon_planar must be > 0, got {eps}")
        object.__setattr__(self, "epsilon_planar", eps)


# -- azimuth codec ---------------------------------------------------------

def encode_azimuth(theta):
    """``[sin(theta), cos(theta)]``; vectorized over a leading axis."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.sin(theta), np.cos(theta)], axis=-1)


def normalize_azimuth(vec):
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise InvalidConfigError("cannot normalize a zero azimuth vector")
    return vec / norm


def decode_azimuth(vec):
    """Angle from a (not necessarily unit) sine-cosine vector, in ``[-pi, pi)``."""
    v = normalize_azimuth(vec)
    return wrap_angle(np.arctan2(v[..., 0], v[..., 1]))


# -- task losses -----------------------------------------------------------

def _log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _check_labels(logits, labels):
    logits = np.atleast_2d(np.asarray(logits, dtype=float))
    labels = np.atleast_1d(np.asarray(labels))
    if labels.shape != (logits.shape[0],):
        raise InvalidConfigError("labels must have one entry per row of logits")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise InvalidConfigError(f"labels must be class ids in [0, {logits.shape[1]})")
    return logits, labels


def cross_entropy(logits, labels):
    """Mean negative log-softmax at the true class."""
    logits, labels = _check_labels(logits, labels)
    return float(-np.mean(_log_softmax(logits)[np.arange(labels.size), labels]))


def cross_entropy_grad(logits, labels):
    logits, labels = _check_labels(logits, labels)
    p = np.exp(_log_softmax(logits))
    p[np.arange(labels.size), labels] -= 1.0
    return {"logits": p / labels.size}


def hetero_nll(errors, log_vars):
    """Heteroscedastic Gaussian NLL ``(1/2B) sum(exp(-s) e^2 + s)``."""
    e, s = check_aligned(errors, log_vars, names=("errors", "log_vars"))
    return float(np.sum(np.exp(-s) * e ** 2 + s) / (2.0 * e.size))


def hetero_nll_grad(errors, log_vars):
    e, s = check_aligned(errors, log_vars, names=("errors", "log_vars"))
    B = e.size
    w = np.exp(-s)
    return {"errors": w * e / B, "log_vars": (1.0 - w * e ** 2) / (2.0 * B)}


def azimuth_error(theta_hat, theta):
    """Normalized azimuth residual ``wrap(theta_hat - theta) / pi``."""
    return wrap_angle(np.asarray(theta_hat, dtype=float) - np.asarray(theta, dtype=float)) / np.pi


def planar_loss(r_hat, r, theta_hat, theta, epsilon=1e-6):
    """Mean of ``sqrt(r_hat^2 + r^2 - 2 r_hat r cos(dtheta) + epsilon)``."""
    if epsilon <= 0:
        raise InvalidConfigError("epsilon must be > 0")
    rh, rt, th, tt = check_aligned(r_hat, r, theta_hat, theta)
    d = wrap_angle(th - tt)
    return float(np.mean(np.sqrt(rh ** 2 + rt ** 2 - 2.0 * rh * rt * np.cos(d) + epsilon)))


def planar_loss_grad(r_hat, r, theta_hat, theta, epsilon=1e-6):
    rh, rt, th, tt = check_aligned(r_hat, r, theta_hat, theta)
    B = rh.size
    d = wrap_angle(th - tt)
    dist = np.sqrt(rh ** 2 + rt ** 2 - 2.0 * rh * rt * np.cos(d) + epsilon)
    dtheta = rh * rt * np.sin(d) / (B * dist)
    return {
        "r_hat": (rh - rt * np.cos(d)) / (B * dist),
        "r": (rt - rh * np.cos(d)) / (B * dist),
        "theta_hat": dtheta,
        "theta": -dtheta,
    }


def peak_reference(sample):
    """Argmax ``(rx, tx)`` of the magnitude map summed over subcarriers.

    Ties resolve to the lexicographically smallest index.
    """
    H = sample.tensor if hasattr(sample, "tensor") else np.asarray(sample)
    if H.size == 0:
        raise InvalidConfigError("empty tensor")
    M = np.abs(H).sum(axis=-1)
    return np.array(np.unravel_index(int(np.argmax(M)), M.shape))


def peak_loss(peak_hat, peak_ref):
    """Mean L1 distance between predicted and reference peak coordinates."""
    u = np.atleast_2d(np.asarray(peak_hat, dtype=float))
    ref = np.atleast_2d(np.asarray(peak_ref, dtype=float))
    if u.shape != ref.shape:
        raise InvalidConfigError(f"peak arrays must align, got {u.shape} vs {ref.shape}")
    return float(np.mean(np.abs(u - ref).sum(axis=1)))


def peak_loss_grad(peak_hat, peak_ref):
    u = np.atleast_2d(np.asarray(peak_hat, dtype=float))
    ref = np.atleast_2d(np.asarray(peak_ref, dtype=float))
    g = np.sign(u - ref) / u.shape[0]
    return {"peak_hat": g, "peak_ref": -g}


def coupling_loss(r_hat, r, theta_hat, theta):
    """Mean of ``| |r_hat - r| - |r * dtheta| |`` (radial vs tangential balance)."""
    rh, rt, th, tt = check_aligned(r_hat, r, theta_hat, theta)
    d = wrap_angle(th - tt)
    return float(np.mean(np.abs(np.abs(rh - rt) - np.abs(rt * d))))


def coupling_loss_grad(r_hat, r, theta_hat, theta):
    """Subgradient; zero at every kink."""
    rh, rt, th, tt = check_aligned(r_hat, r, theta_hat, theta)
    B = rh.size
    d = wrap_angle(th - tt)
    outer = np.sign(np.abs(rh - rt) - np.abs(rt * d))
    radial = np.sign(rh - rt)
    tangential = np.sign(rt * d)
    return {
        "r_hat": outer * radial / B,
        "r": outer * (-radial - tangential * d) / B,
        "theta_hat": -outer * tangential * rt / B,
        "theta": outer * tangential * rt / B,
    }


GRADIENTS = {
    cross_entropy: cross_entropy_grad,
    hetero_nll: hetero_nll_grad,
    planar_loss: planar_loss_grad,
    peak_loss: peak_loss_grad,
    coupling_loss: coupling_loss_grad,
}


def gradient_check(loss_fn, inputs, step=1e-5, wrt=None, grad_fn=None):
    """Largest relative deviation between analytic and central-difference gradients.

    Parameters
    ----------
    loss_fn : callable
        One of the losses above (or any function with ``grad_fn`` given).
    inputs : dict
        Keyword arguments for ``loss_fn``.
    step : float
        Finite-difference step.
    wrt : iterable of str, optional
        Arguments to differentiate; defaults to every key the analytic
        gradient returns.

    Returns
    -------
    float
        ``max over args of ||analytic - numeric||_inf / ||numeric||_inf``.
    """
    grad_fn = grad_fn or GRADIENTS.get(loss_fn)
    if grad_fn is None:
        raise InvalidConfigError(f"no analytic gradient registered for {loss_fn!r}")
    base = dict(inputs)
    analytic = grad_fn(**base)
    names = list(wrt) if wrt is not None else list(analytic)
    worst = 0.0
    for name in names:
        x = np.array(base[name], dtype=float)
        num = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            xp = x.copy()
            xm = x.copy()
            xp[idx] += step
            xm[idx] -= step
            fp = loss_fn(**{**base, name: xp})
            fm = loss_fn(**{**base, name: xm})
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise InvalidConfigError(f"non-finite loss while differencing {name}")
            num[idx] = (fp - fm) / (2.0 * step)
        a = np.asarray(analytic[name], dtype=float).reshape(x.shape)
        scale = max(np.max(np.abs(num)), 1e-300)
        worst = max(worst, float(np.max(np.abs(a - num)) / scale))
    return worst


# -- composition -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BatchPredictions:
    """Head outputs for a batch of ``B`` samples."""

    class_logits: np.ndarray
    range_hat: np.ndarray
    log_var_range: np.ndarray
    azimuth_vec: np.ndarray
    log_var_azimuth: np.ndarray
    peak_hat: np.ndarray

    @property
    def azimuth_hat(self):
        return decode_azimuth(self.azimuth_vec)


@dataclass(frozen=True, eq=False)
class BatchTargets:
    class_id: np.ndarray
    range: np.ndarray
    azimuth: np.ndarray
    peak_ref: np.ndarray


@dataclass(frozen=True)
class LossBreakdown:
    """Raw per-term values and the weights used to combine them."""

    cls: float
    nll_r: float
    nll_theta: float
    planar: float
    peak: float
    coupling: float
    weights: LossWeights

    def contributions(self):
        w = self.weights
        return {
            "cls": self.cls,
            "nll_r": w.lambda_r * self.nll_r,
            "nll_theta": w.lambda_theta * self.nll_theta,
            "planar": w.lambda_p * self.planar,
            "peak": w.lambda_pk * self.peak,
            "coupling": w.lambda_c * self.coupling,
        }

    @property
    def total(self):
        return math.fsum(self.contributions().values())

    def as_row(self):
        """Weighted contributions followed by the total, in CSV column order."""
        c = self.contributions()
        return [c[k] for k in BREAKDOWN_COLUMNS[:-1]] + [self.total]


def total_loss(batch, targets, weights=LossWeights()):
    """Task plus physics-guided objective.

    Returns ``(total, breakdown)``; ``breakdown.contributions()`` sums to
    ``total`` (compensated summation).
    """
    theta_hat = batch.azimuth_hat
    breakdown = LossBreakdown(
        cls=cross_entropy(batch.class_logits, targets.class_id),
        nll_r=hetero_nll(np.asarray(batch.range_hat) - np.asarray(targets.range), batch.log_var_range),
        nll_theta=hetero_nll(azimuth_error(theta_hat, targets.azimuth), batch.log_var_azimuth),
        planar=planar_loss(batch.range_hat, targets.range, theta_hat, targets.azimuth,
                           weights.epsilon_planar),
        peak=peak_loss(batch.peak_hat, targets.peak_ref),
        coupling=coupling_loss(batch.range_hat, targets.range, theta_hat, targets.azimuth),
        weights=weights,
    )
    return breakdown.total, breakdown


__all__ = [
    "LossWeights", "BatchPredictions", "BatchTargets", "LossBreakdown", "BREAKDOWN_COLUMNS",
    "encode_azimuth", "decode_azimuth", "normalize_azimuth", "azimuth_error",
    "cross_entropy", "hetero_nll", "planar_loss", "peak_reference", "peak_loss", "coupling_loss",
    "total_loss", "gradient_check", "planar_error",
]
