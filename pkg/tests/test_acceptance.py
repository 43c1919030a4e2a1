"""End-to-end acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line that is printed in the terminal
summary. Set ``NFISAC_PAPER_SCALE=1`` to also run the 64x64, 16-tone
estimator comparison on extended targets (about a minute and a half).
"""

import math
import os
import time

import numpy as np
import pytest

from nfisac import attention, objectives, selfcheck
from nfisac.config import RunConfig, profile_defaults
from nfisac.dataset import read_container, write_container
from nfisac.em import simulate_tensor
from nfisac.geometry import build_cross_array, build_frequency_grid
from nfisac.metrics import aggregate, planar_error
from nfisac.pipeline import build_dataset, estimate_samples
from nfisac.targets import METAL, place_points
from nfisac.tradeoff import (QOS_I, QOS_II, RateConfig, ergodic_rate_analytic, ergodic_rate_mc,
                             qos_min_bandwidth, read_curve_csv)

# operating points of the shared-OFDM benchmark (bit/s/Hz), 64 tones at 15 dB
REFERENCE_RATES = {16: 3.5361, 8: 3.9467, 4: 4.1436, 2: 4.2400}


def test_rate_table(acceptance):
    t0 = time.perf_counter()
    rc = RateConfig(k_total=64, snr_fullband_db=15.0, mc_draws=1_000_000, seed=0)
    gaps_a, gaps_mc = [], []
    for k, ref in REFERENCE_RATES.items():
        gaps_a.append(abs(ergodic_rate_analytic(rc, k) - ref))
        gaps_mc.append(abs(ergodic_rate_mc(rc, k) - ref))
    elapsed = time.perf_counter() - t0
    ok = max(gaps_a) <= 0.02 and max(gaps_mc) <= 0.05 and elapsed < 10.0
    acceptance("1 rate table", ok, f"max|analytic-ref|={max(gaps_a):.4f} (tol 0.02) "
               f"max|mc-ref|={max(gaps_mc):.4f} (tol 0.05) time={elapsed:.2f}s (limit 10s)")
    assert ok


def test_qos_allocation(acceptance, data_path):
    t0 = time.perf_counter()
    curve = read_curve_csv(data_path("curve_proposed_full.csv"))
    k1, k2 = qos_min_bandwidth(curve, QOS_I), qos_min_bandwidth(curve, QOS_II)
    elapsed = time.perf_counter() - t0
    ok = k1 == 2 and k2 == 4 and elapsed < 1.0
    acceptance("2 QoS allocation", ok, f"QoS-I K_s*={k1} (want 2) QoS-II K_s*={k2} (want 4) time={elapsed:.3f}s")
    assert ok


PHYSICS = (selfcheck.check_dipole_green, selfcheck.check_green_symmetry, selfcheck.check_zero_contrast,
           selfcheck.check_born_slope, selfcheck.check_rayleigh, selfcheck.check_reciprocity)


def test_physics_suite(acceptance):
    t0 = time.perf_counter()
    results = selfcheck.run_selfcheck(PHYSICS)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results) and elapsed < 120.0
    summary = " ".join(f"{r.name}={r.value:.1e}/{r.tolerance:.0e}" for r in results)
    acceptance("3 physics invariants", ok, f"{summary} time={elapsed:.1f}s (limit 120s)")
    assert ok, [r.line() for r in results if not r.passed]


def test_point_target_paper_array(acceptance):
    doc = profile_defaults("paper")
    array = build_cross_array(doc["array"]["n_tx"], doc["array"]["n_rx"], doc["array"]["carrier_hz"])
    grid = build_frequency_grid(doc["array"]["carrier_hz"], doc["grid"]["spacing_hz"],
                                doc["grid"]["k_total"], doc["grid"]["k_selected"])
    r, az = 20.0, math.radians(10.0)
    scene = place_points([[r * math.cos(az), r * math.sin(az), 0.0]], METAL, array.carrier_wavelength / 10)
    H = simulate_tensor(scene, array, grid)
    rows = estimate_samples([_Sample("p", H)], array, grid.selected_frequencies, "matched_filter")
    err = float(planar_error(rows[0][2], r, rows[0][3], az))
    ok = err <= 0.1
    acceptance("4a point target, 64x64 matched filter", ok, f"planar error={err:.4f} m (tol 0.1 m)")
    assert ok


class _Sample:
    def __init__(self, sample_id, tensor):
        self.sample_id = sample_id
        self.tensor = tensor


def _ordering(overrides, count):
    cfg = RunConfig({**overrides, "seed": 11, "scene": {**overrides.get("scene", {}), "count": count}})
    samples, _ = build_dataset(cfg)
    array, freqs = cfg.array(), cfg.grid().selected_frequencies
    out = {}
    for name in ("matched_filter", "periodogram"):
        rows = estimate_samples(samples, array, freqs, name, cfg.estimator_options(name))
        assert all(row[4] != "failed" for row in rows)
        out[name] = aggregate([x[2] for x in rows], [x[3] for x in rows],
                              [s.truth.range for s in samples], [s.truth.azimuth for s in samples]).planar_mae
    return out


def test_extended_target_ordering(acceptance):
    mae = _ordering({"array": {"n_tx": 16, "n_rx": 16}, "grid": {"k_selected": 4},
                     "scene": {"pitch_m": 0.3}}, count=50)
    ok = mae["matched_filter"] < mae["periodogram"]
    acceptance("4b ordering, 50 extended targets at 16x16/K_s=4", ok,
               f"matched filter MAE={mae['matched_filter']:.3f} m < periodogram MAE={mae['periodogram']:.3f} m")
    assert ok


@pytest.mark.skipif(os.environ.get("NFISAC_PAPER_SCALE") != "1", reason="set NFISAC_PAPER_SCALE=1")
def test_extended_target_ordering_paper_scale(acceptance):
    mae = _ordering({"profile": "paper", "array": {"n_tx": 64, "n_rx": 64}, "grid": {"k_selected": 16},
                     "scene": {"pitch_m": 0.3}}, count=50)
    acceptance("4c ordering at 64x64/K_s=16", "INFO",
               f"matched filter MAE={mae['matched_filter']:.3f} m, periodogram MAE={mae['periodogram']:.3f} m")


def test_objective_suite(acceptance):
    worst = 0.0
    for fn, inputs in selfcheck.gradient_cases(seed=21).items():
        wrt = {"cross_entropy": ["logits"], "peak_loss": ["peak_hat"]}.get(fn.__name__)
        worst = max(worst, objectives.gradient_check(fn, inputs, step=1e-5, wrt=wrt))
    # stationary point of the heteroscedastic term at s = ln e^2
    rng = np.random.default_rng(22)
    e = rng.uniform(0.2, 3.0, 50)
    s_star = np.log(e ** 2)
    grad_s = np.max(np.abs(objectives.hetero_nll_grad(e, s_star)["log_vars"]))
    base = objectives.hetero_nll(e, s_star)
    is_min = all(objectives.hetero_nll(e, s_star + d) > base for d in (-1e-3, 1e-3))
    # vanishing smoothing recovers the planar error
    r, rh = rng.uniform(5, 50, 200), rng.uniform(5, 50, 200)
    th, thh = rng.uniform(-1, 1, 200), rng.uniform(-1, 1, 200)
    gap = abs(objectives.planar_loss(rh, r, thh, th, epsilon=1e-14) - float(np.mean(planar_error(rh, r, thh, th))))
    # peak reference ignores a common phase
    H = rng.standard_normal((8, 8, 4)) + 1j * rng.standard_normal((8, 8, 4))
    phase_ok = all(np.array_equal(objectives.peak_reference(H), objectives.peak_reference(H * np.exp(1j * p)))
                   for p in rng.uniform(-np.pi, np.pi, 20))
    ok = worst <= 1e-6 and grad_s <= 1e-15 and is_min and gap <= 1e-6 and phase_ok
    acceptance("5 objectives", ok, f"grad rel err={worst:.1e} (tol 1e-6) |dL/ds*|={grad_s:.1e} "
               f"planar gap={gap:.1e} (tol 1e-6) phase invariant={phase_ok}")
    assert ok


def test_cta_suite(acceptance):
    rng = np.random.default_rng(31)
    worst_id = worst_row = worst_perm = 0.0
    shapes_ok = True
    for i in range(20):
        d_f, d_a = int(rng.integers(2, 17)), int(rng.integers(1, 9))
        Lc, Ll = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        f_cls, f_loc = rng.standard_normal((Lc, d_f)), rng.standard_normal((Ll, d_f))
        zero = attention.CtaWeights.random(d_f, d_a, seed=i, alpha=0.0)
        rc0, rl0, _ = attention.cross_attend(f_cls, f_loc, zero)
        worst_id = max(worst_id, np.max(np.abs(rc0 - f_cls)), np.max(np.abs(rl0 - f_loc)))
        w = attention.CtaWeights.random(d_f, d_a, seed=i, alpha=float(rng.uniform(0.05, 1.0)))
        rc, rl, maps = attention.cross_attend(f_cls, f_loc, w)
        shapes_ok &= rc.shape == f_cls.shape and rl.shape == f_loc.shape
        shapes_ok &= maps["cls_to_loc"].shape == (Lc, Ll) and maps["loc_to_cls"].shape == (Ll, Lc)
        worst_row = max(worst_row, *(np.max(np.abs(m.sum(axis=1) - 1.0)) for m in maps.values()))
        perm = rng.permutation(Ll)
        rc_p, rl_p, _ = attention.cross_attend(f_cls, f_loc[perm], w)
        worst_perm = max(worst_perm, np.max(np.abs(rc_p - rc)), np.max(np.abs(rl_p - rl[perm])))
    ok = worst_id == 0.0 and worst_row <= 1e-6 and worst_perm <= 1e-9 and shapes_ok
    acceptance("6 cross-task attention", ok, f"alpha=0 gap={worst_id:.1e} (exact) row-sum gap={worst_row:.1e} "
               f"(tol 1e-6) permutation gap={worst_perm:.1e} (tol 1e-9) shapes={shapes_ok}")
    assert ok


# hand fixture: (range_hat, azimuth_hat_deg, range, azimuth_deg)
METRIC_FIXTURE = [
    (10.0, 0.0, 10.0, 0.0), (10.5, 0.0, 10.0, 0.0), (12.0, 0.0, 10.0, 0.0), (10.0, 3.0, 10.0, 0.0),
    (20.0, 2.0, 20.0, 0.0), (30.0, -1.0, 30.5, -1.0), (5.0, 30.0, 5.0, 40.0), (45.0, -60.0, 44.2, -60.5),
    (25.0, 179.0, 25.0, -179.0), (7.3, 12.0, 7.0, 12.0), (15.0, -20.0, 15.9, -20.0), (40.0, 5.0, 40.0, 6.0),
    (33.3, 33.0, 33.0, 33.0), (8.0, -45.0, 6.0, -45.0), (50.0, 0.5, 49.6, 0.0), (18.0, 10.0, 18.0, 10.0),
    (12.2, -5.0, 12.0, -5.5), (26.0, 15.0, 24.0, 15.0), (9.9, 1.0, 10.0, 1.2), (35.0, -30.0, 35.0, -28.0),
]


def test_metric_identity(acceptance):
    rng = np.random.default_rng(41)
    n = 100_000
    rh, r = rng.uniform(0, 100, n), rng.uniform(0, 100, n)
    th, t = rng.uniform(-4 * np.pi, 4 * np.pi, n), rng.uniform(-4 * np.pi, 4 * np.pi, n)
    cart = np.hypot(rh * np.cos(th) - r * np.cos(t), rh * np.sin(th) - r * np.sin(t))
    gap = float(np.max(np.abs(planar_error(rh, r, th, t) - cart)))
    # brute-force oracle with plain floats, one row at a time
    errs, hits, r_abs, a_abs = [], 0, [], []
    for a, b, c, d in METRIC_FIXTURE:
        x1, y1 = a * math.cos(math.radians(b)), a * math.sin(math.radians(b))
        x2, y2 = c * math.cos(math.radians(d)), c * math.sin(math.radians(d))
        e = math.sqrt((x1 - x2) ** 2 + (y1 - y2) ** 2)
        errs.append(e)
        hits += e <= 1.0
        r_abs.append(abs(a - c))
        a_abs.append(min(abs(b - d), 360.0 - abs(b - d)))
    fx = np.array(METRIC_FIXTURE)
    rep = aggregate(fx[:, 0], np.radians(fx[:, 1]), fx[:, 2], np.radians(fx[:, 3]))
    agg_gap = max(abs(rep.planar_mae - sum(errs) / 20), abs(rep.success_at_1m - hits / 20),
                  abs(rep.range_mae - sum(r_abs) / 20), abs(rep.azimuth_mae - sum(a_abs) / 20))
    ok = gap <= 1e-9 and agg_gap <= 1e-9
    acceptance("7 metric identity", ok, f"max|planar-cartesian|={gap:.1e} over 1e5 (tol 1e-9) "
               f"fixture gap={agg_gap:.1e} Succ@1m={rep.success_at_1m:.2f}")
    assert ok


def test_data_integrity(acceptance, tmp_path):
    doc = {"seed": 7, "array": {"n_tx": 4, "n_rx": 4}, "grid": {"k_selected": 2},
           "scene": {"count": 12, "meshes_per_class": 4, "pitch_m": 0.6}}
    paths = []
    for run in range(2):
        samples, manifest = build_dataset(RunConfig(doc))
        paths.append(tmp_path / f"run{run}.nfct")
        write_container(samples, manifest, paths[-1])
    same_bytes = paths[0].read_bytes() == paths[1].read_bytes()
    back, man = read_container(paths[0])
    exact = len(back) == len(samples) and all(
        np.array_equal(a.tensor, b.tensor.astype(np.complex64)) and a.truth == b.truth
        for a, b in zip(back, samples))
    # exhaustive: every pair of samples in different splits uses different meshes
    split_of = {s.sample_id: man.splits[s.mesh_id] for s in back}
    disjoint = all(a.mesh_id != b.mesh_id for a in back for b in back
                   if split_of[a.sample_id] != split_of[b.sample_id])
    covered = all(s.mesh_id in man.splits for s in back)
    ok = same_bytes and exact and disjoint and covered
    acceptance("8 data integrity", ok, f"bit-exact={exact} same-seed bytes equal={same_bytes} "
               f"mesh-disjoint={disjoint}")
    assert ok


def test_declared_not_reproducible(acceptance):
    acceptance("9 learned-model tables and curves", "DECLARED",
               "need trained networks and the original mesh dataset; covered only via criteria 2 and 4")
