"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion
lines and timings.  Expensive artifacts (the obstruction experiment, the
annulus solve, the Loewner profile) are shared session fixtures.
"""
import json
import math
import time

import numpy as np
import pytest

from qclab import contacto, geodesics, modulus, obstruction, planar, volume
from qclab.cli import RunConfig, dispatch
from qclab.geodesics import DirectBudget, build_flow_graph, graph_distance
from qclab.modulus import (CurveFamily, annulus_extremal_density, annulus_family,
                           brute_force_modulus, energy, loewner_profile,
                           q_modulus, rho_shortest_path)
from qclab.obstruction import ExperimentConfig, run_obstruction_experiment
from qclab.spaces import get_space

H = get_space("heisenberg")
RT = get_space("rototranslation")
E3 = get_space("euclidean3")

_REPORT = []


def record(criterion, ok, detail, budget_s, elapsed_s):
    line = (f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail} "
            f"({elapsed_s:.1f}s / budget {budget_s:.0f}s)")
    _REPORT.append(line)
    print(line)
    assert ok, line
    assert elapsed_s < budget_s, f"criterion {criterion} exceeded runtime budget: {line}"


@pytest.fixture(scope="session")
def obstruction_report():
    # bracket tightness is not asserted here, so the modulus solves run on a
    # short budget; the lower bounds stay certified and monotone regardless
    cfg = ExperimentConfig(h=0.75, image_h=0.75,
                           volume_radii=(4.0, 8.0, 16.0, 32.0),
                           volume_cells=10,
                           solver_kwargs={"outer_cap": 10, "cg_rounds": 0,
                                          "check_every": 5})
    t0 = time.perf_counter()
    rep = run_obstruction_experiment(cfg)
    rep["_elapsed"] = time.perf_counter() - t0
    return rep


@pytest.fixture(scope="session")
def annulus_solution():
    t0 = time.perf_counter()
    fam = annulus_family(h=0.02)
    res = q_modulus(fam, 2.0, tol=0.02, gap_target=0.10, outer_cap=60, seed=0)
    return fam, res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def loewner_samples():
    t0 = time.perf_counter()
    samples = loewner_profile(H, 4.0, [1.0, 0.5, 0.25], 1.0)
    return samples, time.perf_counter() - t0


def test_criterion_01_contactomorphism_identity():
    t0 = time.perf_counter()
    analytic = contacto.pullback_check(10_000, seed=0)
    fd = contacto.pullback_check(10_000, seed=0, use_fd=True)
    elapsed = time.perf_counter() - t0
    ok = analytic <= 1e-10 and fd <= 1e-5
    record(1, ok, f"pullback residual analytic {analytic:.2e} (<=1e-10), "
                  f"finite-difference {fd:.2e} (<=1e-5)", 5, elapsed)


def test_criterion_02_unit_jacobian():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    exact = all(RT.left_translation_jacobian(g) == 1.0
                for g in rng.uniform(-50, 50, size=(10_000, 3)))
    dets = [np.linalg.det(RT.left_translation_differential(g))
            for g in rng.uniform(-50, 50, size=(100, 3))]
    cross = max(abs(d - 1.0) for d in dets)
    elapsed = time.perf_counter() - t0
    record(2, exact and cross <= 1e-12,
           f"symbolic determinant 1.0 at 10^4 samples, matrix det within {cross:.1e}",
           1, elapsed)


def test_criterion_03_axis_distances():
    t0 = time.perf_counter()
    d_h = geodesics.cc_distance_direct(H, [0, 0, 0], [1, 0, 0], DirectBudget()).value
    d_rt = geodesics.cc_distance_direct(RT, [0, 0, 0], [0, 0, 1.0], DirectBudget()).value
    g_h = geodesics.cc_distance_graph(H, [0, 0, 0], [1, 0, 0], 0.05).value
    g_rt = geodesics.cc_distance_graph(RT, [0, 0, 0], [0, 0, 1.0], 0.05).value
    elapsed = time.perf_counter() - t0
    errs = [abs(v - 1.0) for v in (d_h, d_rt, g_h, g_rt)]
    record(3, max(errs) <= 0.02,
           f"H1 direct {d_h:.4f} graph {g_h:.4f}, RT direct {d_rt:.4f} graph {g_rt:.4f} "
           f"(all within 0.02 of 1)", 120, elapsed)


def test_criterion_04_volume_exponents():
    t0 = time.perf_counter()
    fit_h, _ = volume.growth_curve(H, [0, 0, 0],
                                   [0.5, 0.7071, 1.0, 1.4142, 2.0, 2.8284, 4.0],
                                   cells_per_radius=12)
    fit_rt_large, _ = volume.growth_curve(RT, [0, 0, 0],
                                          [8.0, 11.31, 16.0, 22.63, 32.0],
                                          cells_per_radius=12)
    fit_rt_small, _ = volume.growth_curve(RT, [0, 0, 0],
                                          [0.1, 0.1414, 0.2, 0.2828, 0.4, 0.5],
                                          cells_per_radius=16)
    elapsed = time.perf_counter() - t0
    ok = (abs(fit_h.exponent - 4.0) <= 0.3 and
          abs(fit_rt_large.exponent - 3.0) <= 0.4 and
          abs(fit_rt_small.exponent - 4.0) <= 0.4)
    record(4, ok,
           f"H1 {fit_h.exponent:.3f} (4+-0.3), RT large {fit_rt_large.exponent:.3f} "
           f"(3+-0.4), RT small {fit_rt_small.exponent:.3f} (4+-0.4)", 900, elapsed)


def test_criterion_05_modulus_oracle(annulus_solution):
    fam, res, elapsed = annulus_solution
    target = 2.0 * math.pi / math.log(2.0)
    t0 = time.perf_counter()
    rho_star = annulus_extremal_density(fam)
    c_star, _ = rho_shortest_path(fam, rho_star)
    en_star = energy(fam.graph, rho_star, 2.0)
    elapsed += time.perf_counter() - t0
    oracle_ok = c_star >= 0.95 and abs(en_star / target - 1.0) <= 0.08
    mid = 0.5 * (res.lower + res.upper)
    ok = (oracle_ok and res.lower <= target <= res.upper and res.gap <= 0.10
          and abs(mid / target - 1.0) <= 0.05)
    record(5, ok,
           f"bracket [{res.lower:.3f}, {res.upper:.3f}] around {target:.3f}, gap "
           f"{res.gap:.3f} (<=0.10), midpoint off {abs(mid/target-1)*100:.1f}% (<=5%), "
           f"oracle integral {c_star:.3f} energy {en_star:.3f}", 120, elapsed)


def test_criterion_06_brute_force_equivalence():
    t0 = time.perf_counter()
    from qclab.geodesics import BuildParams, FlowGraph

    rng = np.random.default_rng(42)
    checked, worst = 0, 0.0
    while checked < 20:
        n = int(rng.integers(6, 13))
        edges = set()
        for i in range(1, n):
            edges.add((int(rng.integers(0, i)), i))
        for _ in range(int(rng.integers(1, n))):
            a, b = rng.integers(0, n, size=2)
            if a != b:
                edges.add((min(int(a), int(b)), max(int(a), int(b))))
        edges = sorted(edges)
        bp = BuildParams("euclidean3", 1.0, (1, 1, 1), (0, 0, 0), (1, 1, 1),
                         (n, 1, 1), 1, 1.0, (0, 0, 0))
        g = FlowGraph("euclidean3", np.zeros((n, 3)),
                      np.array([e[0] for e in edges], dtype=np.int32),
                      np.array([e[1] for e in edges], dtype=np.int32),
                      rng.uniform(0.5, 2.0, len(edges)),
                      rng.uniform(0.5, 2.0, n), bp)
        fam = CurveFamily(g, [0], [n - 1])
        Q = 2.0 if checked % 2 == 0 else 4.0
        bf = brute_force_modulus(fam, Q)
        res = q_modulus(fam, Q, tol=0.005, gap_target=0.01, outer_cap=80,
                        cg_rounds=20, seed=0)
        mid = 0.5 * (res.lower + res.upper)
        rel = abs(mid - bf) / max(bf, 1e-12)
        worst = max(worst, rel)
        checked += 1
    elapsed = time.perf_counter() - t0
    record(6, worst <= 0.01,
           f"{checked} random graphs, worst relative mismatch {worst*100:.2f}% (<=1%)",
           60, elapsed)


def test_criterion_07_density_admissibility(obstruction_report):
    rep = obstruction_report
    rows = rep["source_rows"]
    adm = min(r["admissibility_min_integral"] for r in rows)
    lb = min(r["length_bound_min_ratio"] for r in rows)
    ok = adm >= 0.95 and lb >= 0.95
    record(7, ok,
           f"min admissibility integral {adm:.3f} (>=0.95), min length-bound ratio "
           f"{lb:.3f} (>=0.95) over indices {[r['n'] for r in rows]}",
           600, rep["_elapsed"])


def test_criterion_08_bounded_modulus(obstruction_report):
    rep = obstruction_report
    B = rep["energy_bound"]["numeric"]
    rows = rep["source_rows"]
    worst = max(r["modulus"]["upper"] for r in rows)
    tail_err = rep["energy_bound"]["tail_rel_err"]
    ok = (rep["source_bounded"] and worst <= 1.1 * B and tail_err <= 0.01
          and rep["source_lower_nondecreasing"])
    record(8, ok,
           f"max modulus upper {worst:.4g} <= 1.1 * energy bound {B:.4g}; tail "
           f"closed form vs quadrature off {tail_err*100:.3f}% (<=1%); lower bounds "
           f"nondecreasing {rep['source_lower_nondecreasing']}",
           1200, rep["_elapsed"])


def test_criterion_09_image_blowup(obstruction_report):
    rep = obstruction_report
    rows = rep["image_rows"]
    diam_ratios = [min(rows[i + 1]["diam_E"] / rows[i]["diam_E"],
                       rows[i + 1]["diam_F"] / rows[i]["diam_F"])
                   for i in range(len(rows) - 1)]
    sep_ok = all(r["separation"] <= rows[0]["separation"] + 1e-9 for r in rows)
    lower_ok = rep["image_lower_nondecreasing"]
    ok = min(diam_ratios) >= 1.3 and sep_ok and lower_ok
    record(9, ok,
           f"diameter growth ratios {[round(r, 2) for r in diam_ratios]} (>=1.3), "
           f"separations bounded by first ({sep_ok}), image modulus lower bounds "
           f"nondecreasing ({lower_ok})", 1200, rep["_elapsed"])


def test_criterion_10_loewner_growth(loewner_samples):
    samples, elapsed = loewner_samples
    mids = {s.t: 0.5 * (s.modulus.lower + s.modulus.upper) for s in samples}
    inc1 = mids[0.5] - mids[1.0]
    inc2 = mids[0.25] - mids[0.5]
    ratio = max(inc1, inc2) / min(inc1, inc2)
    ok = inc1 > 0 and inc2 > 0 and ratio <= 3.0
    record(10, ok,
           f"moduli {mids[1.0]:.4f} < {mids[0.5]:.4f} < {mids[0.25]:.4f} as t halves; "
           f"increment ratio {ratio:.2f} (<=3)", 600, elapsed)


def test_criterion_11_quasi_isometry_fit():
    t0 = time.perf_counter()
    a = obstruction.estimate_qi_constants(1000, 50.0, seed=0)
    b = obstruction.estimate_qi_constants(1000, 50.0, seed=1)
    elapsed = time.perf_counter() - t0
    stable = (abs(a.L_hat - b.L_hat) / a.L_hat <= 0.25 and
              abs(a.b_hat - b.b_hat) / max(a.b_hat, 1e-9) <= 0.25)
    ok = (np.isfinite(a.L_hat) and np.isfinite(a.b_hat)
          and a.max_violation <= 1e-9 and stable)
    record(11, ok,
           f"(L, b) = ({a.L_hat:.3f}, {a.b_hat:.3f}) satisfied by 100% of "
           f"{a.n_pairs} pairs; resample ({b.L_hat:.3f}, {b.b_hat:.3f}) within 25%",
           600, elapsed)


def test_criterion_12_planar_examples():
    t0 = time.perf_counter()
    dil = planar.dilatation_estimate("exp_strip", [0.0, 1.0], [1e-2, 1e-3])
    exp_ok = dil.H_estimates[-1] <= 1.01
    rng = np.random.default_rng(0)
    law_err = 0.0
    lam = 1.5
    for _ in range(200):
        z = complex(rng.uniform(-30, 30), rng.uniform(-1, 1))
        w = planar.radial_stretch(z, lam)
        expect = abs(z) ** (1.0 / (2.0 - lam))
        law_err = max(law_err, abs(abs(w) - expect) / max(1.0, expect))
    a = planar.shape_inclusion_fit(lam, boundary_samples=10_000)
    xs = np.geomspace(1e-3, 1e4, 5_000)
    pass_all = True
    for sign in (1.0, -1.0):
        w = np.array([planar.radial_stretch(complex(x, sign), lam) for x in xs])
        X, Y = np.abs(w.real), np.abs(w.imag)
        pass_all &= bool(np.all(((X <= a) & (Y <= a)) | (Y <= a * X ** (lam - 1.0))))
    fit = planar.stretched_strip_growth(lam, [10.0, 20.0, 40.0, 80.0], depth=10)
    growth_ok = abs(fit.exponent - lam) <= 0.1
    elapsed = time.perf_counter() - t0
    ok = exp_ok and law_err <= 1e-12 and pass_all and growth_ok
    record(12, ok,
           f"exp dilatation {dil.H_estimates[-1]:.4f} (<=1.01 at r=1e-3); modulus law "
           f"err {law_err:.1e} (<=1e-12); envelope a={a:.3f} passes all samples "
           f"({pass_all}); growth exponent {fit.exponent:.3f} ({lam}+-0.1)",
           120, elapsed)


def test_criterion_13_determinism():
    t0 = time.perf_counter()
    cfgs = [
        dict(command="distance", space="rototranslation", src=(0, 0, 0),
             dst=(0, 0, 1.0), method="both", h=0.08, seed=11),
        dict(command="planar", example="radial_stretch", lam=1.5,
             point=(1.0, 0.0), seed=11),
        dict(command="contacto-check", samples=2000, seed=11),
    ]
    ok = True
    for kw in cfgs:
        a = dispatch(RunConfig(**kw))
        b = dispatch(RunConfig(**kw))
        ok &= a.payload_bytes() == b.payload_bytes()
    elapsed = time.perf_counter() - t0
    record(13, ok, "byte-identical JSON payloads across repeated runs "
                   f"of {len(cfgs)} commands", 300, elapsed)


def test_zz_report_summary():
    print()
    for line in _REPORT:
        print(line)
    assert len(_REPORT) == 13
