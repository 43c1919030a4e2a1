"""Physics and operator invariant suite run by ``nfisac selfcheck``.

Every check returns a :class:`CheckResult` holding the measured worst-case
value and the tolerance it was compared against.
"""

from dataclasses import dataclass
import math
import time

import numpy as np

from . import attention, em, objectives
from .constants import EPS0
from .geometry import build_cross_array, colocated_array, wavenumber
from .metrics import wrap_angle
from .targets import FREE_SPACE, Material, place_points

CARRIER = 4.9e9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: value={self.value:.3e} tol={self.tolerance:.1e} {self.detail}".rstrip()


def _result(name, value, tol, detail="", lower_is_better=True):
    ok = bool(np.isfinite(value) and (value <= tol if lower_is_better else value >= tol))
    return CheckResult(name, ok, float(value), float(tol), detail)


def _random_separation(rng, n):
    """Observation/source pairs with separations spanning near and far zones."""
    src = rng.uniform(-1.0, 1.0, (n, 3))
    direction = rng.standard_normal((n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    dist = 10.0 ** rng.uniform(-2.0, 2.0, n)
    return src + direction * dist[:, None], src


def check_dipole_green(seed=0, n=1000, tol=1e-12):
    """``eps0 * E_dipole == k0^2 G p`` over random geometries."""
    rng = np.random.default_rng(seed)
    obs, src = _random_separation(rng, n)
    k0 = wavenumber(CARRIER) * rng.uniform(0.5, 2.0, n)
    p = rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))
    worst = 0.0
    for i in range(n):
        lhs = EPS0 * em.dipole_field(k0[i], obs[i], src[i], p[i])
        rhs = k0[i] ** 2 * em.dyadic_green(k0[i], obs[i], src[i]) @ p[i]
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)))
    return _result("dipole_green_consistency", worst, tol, f"n={n}")


def check_green_symmetry(seed=1, n=200, tol=1e-14):
    """``G(r, r') == G(r', r) == G(r, r')^T``."""
    rng = np.random.default_rng(seed)
    obs, src = _random_separation(rng, n)
    k0 = wavenumber(CARRIER)
    worst = 0.0
    for i in range(n):
        G = em.dyadic_green(k0, obs[i], src[i])
        Gs = em.dyadic_green(k0, src[i], obs[i])
        scale = np.max(np.abs(G))
        worst = max(worst, float(np.max(np.abs(G - G.T)) / scale), float(np.max(np.abs(G - Gs)) / scale))
    return _result("green_transpose_symmetry", worst, tol, f"n={n}")


def _small_scene(material, k0, n_side=2, pitch_fraction=0.1, center=(3.0, 0.5, 0.0)):
    lam = 2.0 * math.pi / k0
    pitch = pitch_fraction * lam
    ax = (np.arange(n_side) - (n_side - 1) / 2.0) * pitch
    pts = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3) + np.asarray(center)
    return place_points(pts, material, pitch)


def _desk_array():
    return build_cross_array(4, 4, CARRIER)


def check_zero_contrast(tol=0.0):
    """Free-space voxels scatter nothing and leave the incident field untouched."""
    array = _desk_array()
    k0 = wavenumber(CARRIER)
    scene = _small_scene(FREE_SPACE, k0)
    worst = 0.0
    for method in ("dense_direct", "iterative"):
        sol = em.solve_total_fields(scene, array, k0, method=method)
        H = em.channel_matrix(sol, scene, array, k0).entries
        a_inc = em.incident_matrices(array, k0, scene.world_positions)
        worst = max(worst, float(np.max(np.abs(H))),
                    float(np.max(np.abs(sol.transfer - a_inc)) / np.max(np.abs(a_inc))))
    return _result("zero_contrast", worst, tol)


def born_slope(scales=None):
    """Log-log slope of ``||H - H_Born||`` against the contrast scale."""
    scales = np.logspace(-2, -1, 5) if scales is None else np.asarray(scales, dtype=float)
    array = _desk_array()
    k0 = wavenumber(CARRIER)
    errs = []
    for c in scales:
        scene = _small_scene(Material(1.0 + c, 0.0), k0)
        H = em.channel_matrix(em.solve_total_fields(scene, array, k0, "dense_direct"), scene, array, k0).entries
        Hb = em.channel_matrix(em.solve_total_fields(scene, array, k0, "born"), scene, array, k0).entries
        errs.append(np.linalg.norm(H - Hb))
    return float(np.polyfit(np.log(scales), np.log(errs), 1)[0])


def check_born_slope(tol=0.1):
    slope = born_slope()
    return _result("born_error_slope", abs(slope - 2.0), tol, f"slope={slope:.4f}")


def rayleigh_error(chi_value, ka, offset=(4.0, 1.0, 0.3)):
    """Relative gap between a one-voxel solve and the Clausius-Mossotti dipole."""
    array = _desk_array()
    k0 = wavenumber(CARRIER)
    a = ka / k0
    dv = 4.0 * math.pi * a ** 3 / 3.0
    pitch = dv ** (1.0 / 3.0)
    omega = 2.0 * math.pi * CARRIER
    mat = Material(1.0 + chi_value.real, -chi_value.imag * omega * EPS0)
    scene = place_points([offset], mat, pitch)
    H = em.channel_matrix(em.solve_total_fields(scene, array, k0, "dense_direct"), scene, array, k0).entries
    alpha = 3.0 * dv * chi_value / (chi_value + 3.0)
    A = em.incident_matrices(array, k0, scene.world_positions)[0]
    B = em.receive_matrices(array, k0, scene.world_positions)[0]
    H_ref = k0 ** 2 * alpha * (B @ A)
    return float(np.linalg.norm(H - H_ref) / np.linalg.norm(H_ref))


def check_rayleigh(tol=0.10):
    worst = 0.0
    for chi_value in (0.1, 0.5, 1.0, 0.5 - 0.5j, 0.3 - 0.9j):
        for ka in (0.05, 0.15, 0.3):
            worst = max(worst, rayleigh_error(complex(chi_value), ka))
    return _result("rayleigh_clausius_mossotti", worst, tol, "|chi|<=1, k0*a<=0.3")


def check_reciprocity(tol=1e-8):
    array = colocated_array(_desk_array())
    k0 = wavenumber(CARRIER)
    scene = _small_scene(Material(3.0, 0.5), k0, n_side=3)
    H = em.channel_matrix(em.solve_total_fields(scene, array, k0, "dense_direct"), scene, array, k0).entries
    return _result("reciprocity", float(np.max(np.abs(H - H.T)) / np.max(np.abs(H))), tol)


def check_codec(seed=2, n=10_000, tol=1e-12):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-10.0, 10.0, n)
    back = objectives.decode_azimuth(objectives.encode_azimuth(theta))
    err = np.abs(wrap_angle(back - theta))
    return _result("azimuth_codec_roundtrip", float(np.max(err)), tol)


def gradient_cases(seed=3):
    """Inputs for every loss, chosen away from kinks and wrap boundaries."""
    rng = np.random.default_rng(seed)
    B = 6
    r = rng.uniform(5.0, 50.0, B)
    th = rng.uniform(-1.0, 1.0, B)
    r_hat = r + rng.choice([-1.0, 1.0], B) * rng.uniform(0.5, 3.0, B)
    th_hat = th + rng.choice([-1.0, 1.0], B) * rng.uniform(0.2, 0.5, B)
    return {
        objectives.cross_entropy: {"logits": rng.standard_normal((B, 2)), "labels": rng.integers(0, 2, B)},
        objectives.hetero_nll: {"errors": rng.standard_normal(B), "log_vars": rng.uniform(-1.0, 1.0, B)},
        objectives.planar_loss: {"r_hat": r_hat, "r": r, "theta_hat": th_hat, "theta": th},
        objectives.peak_loss: {"peak_hat": rng.uniform(0.0, 8.0, (B, 2)) + 0.37,
                               "peak_ref": rng.integers(0, 8, (B, 2)).astype(float)},
        objectives.coupling_loss: {"r_hat": r_hat, "r": r, "theta_hat": th_hat, "theta": th},
    }


_GRAD_WRT = {"cross_entropy": ["logits"], "peak_loss": ["peak_hat"]}


def check_gradients(tol=1e-6):
    worst, names = 0.0, []
    for fn, inputs in gradient_cases().items():
        err = objectives.gradient_check(fn, inputs, step=1e-5, wrt=_GRAD_WRT.get(fn.__name__))
        names.append(f"{fn.__name__}={err:.1e}")
        worst = max(worst, err)
    return _result("loss_gradients", worst, tol, " ".join(names))


def check_cta(seed=4, tol=1e-6):
    rng = np.random.default_rng(seed)
    w = attention.CtaWeights.random(8, 4, seed=seed, alpha=0.0)
    f_cls = rng.standard_normal((5, 8))
    f_loc = rng.standard_normal((7, 8))
    rc, rl, maps = attention.cross_attend(f_cls, f_loc, w)
    identity_gap = float(max(np.max(np.abs(rc - f_cls)), np.max(np.abs(rl - f_loc))))
    w1 = attention.CtaWeights.random(8, 4, seed=seed, alpha=0.3)
    _, _, maps1 = attention.cross_attend(f_cls, f_loc, w1)
    row_gap = max(float(np.max(np.abs(m.sum(axis=1) - 1.0))) for m in maps1.values())
    ok = identity_gap == 0.0 and row_gap <= tol
    return CheckResult("cta_reductions", ok, max(identity_gap, row_gap), tol,
                       f"alpha0_gap={identity_gap:.1e} row_sum_gap={row_gap:.1e}")


CHECKS = (
    check_dipole_green, check_green_symmetry, check_zero_contrast, check_born_slope,
    check_rayleigh, check_reciprocity, check_codec, check_gradients, check_cta,
)


def run_selfcheck(checks=CHECKS):
    """Run every check; exceptions are reported as failures, not raised."""
    results = []
    for check in checks:
        t0 = time.perf_counter()
        try:
            res = check()
        except Exception as exc:  # a crashing check is a failed check
            res = CheckResult(check.__name__.replace("check_", ""), False, math.nan, math.nan,
                              f"raised {type(exc).__name__}: {exc}")
        results.append(res)
        res_time = time.perf_counter() - t0
        results[-1] = CheckResult(res.name, res.passed, res.value, res.tolerance,
                                  (res.detail + f" ({res_time:.2f}s)").strip())
    return results
