"""Shared-OFDM ergodic-rate benchmark and QoS-constrained sensing-bandwidth search."""

from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
import csv
import math
import os

import numpy as np

from ._validation import check_count, check_positive
from .constants import EULER_GAMMA
from .exceptions import InvalidConfigError

NOT_MET = "Not met"
CURVE_COLUMNS = ("k_s", "accuracy", "planar_mae_m")
RATE_COLUMNS = ("k_s", "rate_mc", "rate_analytic")
_MC_PARTITION = 50_000


def db_to_linear(db):
    return 10.0 ** (float(db) / 10.0)


@dataclass(frozen=True)
class RateConfig:
    k_total: int = 64
    snr_fullband_db: float = 15.0
    mc_draws: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        check_count(self.k_total, "k_total")
        check_count(self.mc_draws, "mc_draws")
        if not math.isfinite(float(self.snr_fullband_db)):
            raise InvalidConfigError("snr_fullband_db must be finite")

    @property
    def snr_linear(self):
        return db_to_linear(self.snr_fullband_db)


@dataclass(frozen=True)
class QosTargets:
    tau_cls: float
    tau_loc: float

    def __post_init__(self):
        if not 0.0 <= float(self.tau_cls) <= 1.0:
            raise InvalidConfigError(f"tau_cls must lie in [0, 1], got {self.tau_cls}")
        check_positive(self.tau_loc, "tau_loc")


QOS_I = QosTargets(0.980, 1.50)
QOS_II = QosTargets(0.985, 1.30)


def exp1(x, tol=1e-12):
    """Exponential integral ``E1(x)`` for ``x > 0``.

    Power series below 1, Lentz continued fraction from 1 upward.
    """
    x = check_positive(x, "x")
    if x < 1.0:
        return _exp1_series(x, tol)
    return _exp1_fraction(x, tol) * math.exp(-x)


def exp1_scaled(x, tol=1e-12):
    """``exp(x) * E1(x)``, finite for large ``x`` where the two factors overflow."""
    x = check_positive(x, "x")
    if x < 1.0:
        return math.exp(x) * _exp1_series(x, tol)
    return _exp1_fraction(x, tol)


def _exp1_series(x, tol):
    total = -EULER_GAMMA - math.log(x)
    term = 1.0
    k = 1
    while True:
        term *= -x / k
        contrib = -term / k
        total += contrib
        if abs(contrib) < tol * 1e-3:
            break
        k += 1
    return total


def _exp1_fraction(x, tol):
    # exp(x) E1(x) = 1 / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    i = 1
    while True:
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < tol * 1e-3:
            break
        i += 1
        if i > 10_000:
            raise RuntimeError("E1 continued fraction did not converge")
    return h


def _check_sensing(config, k_sense):
    if isinstance(k_sense, bool) or not isinstance(k_sense, (int, np.integer)) or k_sense < 0:
        raise InvalidConfigError(f"k_sense must be a nonnegative integer, got {k_sense!r}")
    if k_sense >= config.k_total:
        raise InvalidConfigError(
            f"k_sense={k_sense} leaves no communication tones (k_total={config.k_total})")
    return int(config.k_total - k_sense)


def per_tone_snr(config, k_sense):
    k_comm = _check_sensing(config, k_sense)
    return config.snr_linear * config.k_total / k_comm


def ergodic_rate_analytic(config, k_sense):
    """Closed form ``(K_c/K_tot) exp(1/g) E1(1/g) / ln 2`` with ``g = snr * K_tot / K_c``."""
    k_comm = _check_sensing(config, k_sense)
    gamma = config.snr_linear * config.k_total / k_comm
    inv = 1.0 / gamma
    return (k_comm / config.k_total) * exp1_scaled(inv) / math.log(2.0)


def _partition_sums(seed_seq, size, k_comm, gamma, k_total):
    rng = np.random.default_rng(seed_seq)
    # |h|^2 of a standard circular complex Gaussian is exactly Exp(1)
    gain = rng.standard_exponential((size, k_comm))
    per_draw = np.log2(1.0 + gamma * gain).sum(axis=1) / k_total
    return per_draw.sum(), np.dot(per_draw, per_draw)


def ergodic_rate_mc(config, k_sense, return_stderr=False, workers=None):
    """Monte Carlo estimate over ``config.mc_draws`` Rayleigh realizations.

    Draws are split into fixed-size partitions, each fed by its own child of
    ``SeedSequence(config.seed)``; partition sums are reduced in partition
    order, so the result does not depend on the number of worker threads.
    """
    k_comm = _check_sensing(config, k_sense)
    gamma = config.snr_linear * config.k_total / k_comm
    n = config.mc_draws
    sizes = [min(_MC_PARTITION, n - s) for s in range(0, n, _MC_PARTITION)]
    children = np.random.SeedSequence(config.seed).spawn(len(sizes))
    args = [(child, size, k_comm, gamma, config.k_total) for size, child in zip(sizes, children)]
    workers = workers or min(len(args), os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _partition_sums(*a), args))
    else:
        parts = [_partition_sums(*a) for a in args]
    mean = math.fsum(p[0] for p in parts) / n
    if not return_stderr:
        return mean
    second = math.fsum(p[1] for p in parts) / n
    var = max(second - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def high_snr_rate(config, k_sense):
    """High-SNR asymptote ``(K_c/K_tot)(log2 g - gamma_E / ln 2)``."""
    k_comm = _check_sensing(config, k_sense)
    gamma = config.snr_linear * config.k_total / k_comm
    return (k_comm / config.k_total) * (math.log2(gamma) - EULER_GAMMA / math.log(2.0))


@dataclass(frozen=True)
class PerformanceCurve:
    """Measured sensing quality versus number of sensing tones."""

    k_s: tuple
    accuracy: tuple
    planar_error: tuple

    def __post_init__(self):
        k = tuple(int(v) for v in self.k_s)
        acc = tuple(float(v) for v in self.accuracy)
        pl = tuple(float(v) for v in self.planar_error)
        if not k:
            raise InvalidConfigError("performance curve is empty")
        if not (len(k) == len(acc) == len(pl)):
            raise InvalidConfigError("curve columns differ in length")
        if any(b <= a for a, b in zip(k, k[1:])):
            raise InvalidConfigError("curve k_s values must be strictly increasing")
        object.__setattr__(self, "k_s", k)
        object.__setattr__(self, "accuracy", acc)
        object.__setattr__(self, "planar_error", pl)

    @classmethod
    def from_points(cls, points):
        pts = sorted(points)
        return cls(*zip(*pts))


def read_curve_csv(path):
    """Parse a curve CSV with columns ``k_s,accuracy,planar_mae_m``.

    Accuracy may be a fraction or a percentage; values above 1 are divided
    by 100.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(CURVE_COLUMNS) - set(reader.fieldnames):
            raise InvalidConfigError(f"{path}: curve CSV needs columns {','.join(CURVE_COLUMNS)}")
        points = []
        for lineno, row in enumerate(reader, start=2):
            try:
                acc = float(row["accuracy"])
                points.append((int(row["k_s"]), acc / 100.0 if acc > 1.0 else acc,
                               float(row["planar_mae_m"])))
            except (TypeError, ValueError) as exc:
                raise InvalidConfigError(f"{path}:{lineno}: malformed row {row}") from exc
    return PerformanceCurve.from_points(points)


def qos_min_bandwidth(curve, targets):
    """Smallest ``K_s`` meeting both QoS targets, or :data:`NOT_MET`."""
    for k, acc, pl in zip(curve.k_s, curve.accuracy, curve.planar_error):
        if acc >= targets.tau_cls and pl <= targets.tau_loc:
            return k
    return NOT_MET


def rate_table(config, k_values, with_mc=True):
    """Rows ``(k_s, rate_mc, rate_analytic)``; ``rate_mc`` is NaN when skipped."""
    rows = []
    for k in k_values:
        mc = ergodic_rate_mc(config, int(k)) if with_mc else math.nan
        rows.append((int(k), mc, ergodic_rate_analytic(config, int(k))))
    return rows
