"""End-to-end acceptance: one test and one printed verdict line per criterion.

Every Monte Carlo criterion runs at a fixed budget with seed 1, the first
seed tried, never reselected.  Symbolic criteria are exact; quadrature and
stochastic criteria carry their tolerance in the assertion.  Budgets are
module constants so a failed line can be reproduced in isolation.
"""

import glob
import math
import os
import time
from fractions import Fraction

import pytest

from focdiff import (
    DioStep,
    MultiIndex,
    ScatteringSetup,
    SimConfig,
    bgk_second_order_eidf,
    canonical_focusing_eidf,
    equilibrium_check,
    estimate_kappa_dv,
    estimate_kappa_tgk,
    equilibrium_pitch_cdf,
    fick_coefficient,
    gombosi_roundtrip,
    kappa_dv_symbolic,
    ks_statistic,
    rc,
    rc_index,
    run_dio_step,
    run_ensemble,
    standard_scripts,
    symbol,
    verify_scripts,
)
from focdiff import coefficients as co

SEED = 1

# xi = 0.3 reference points: continuum displacement-variance rate and the
# uniform-start autocorrelation integral
KDV_03 = 0.162
KTGK_03 = 0.165675
LANGEVIN_05 = 0.1639534137

# small-xi slope targets and the tabulated slope ratios for n = 3..7
SERIES_XIS = (0.02, 0.04, 0.06, 0.08, 0.10)
RATIO_TABLE = {3: -0.5125205128, 4: -0.5041666667, 5: -0.5013774105,
               6: -0.5004578755, 7: -0.5001524855}

# stated ensemble budget for the accuracy checks
MC_N = 200_000
MC_DT = 5e-3
MC_TMAX = 100.0
TGK_N = 4_000_000
# the separation check needs smaller errors than the accuracy budget gives:
# there the expected gap is only about twice the combined standard error, so
# the verdict would ride on noise; these sizes put it near four
SEP_DV_N = 800_000
SEP_TGK_N = 12_000_000


def _verdict(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_criterion_1_dv_invariance_suite():
    t0 = time.monotonic()
    results = verify_scripts(max_weight=4)
    # the (4, 1) substitution target is only tracked from truncation weight 5
    extra = [s for s in standard_scripts(5) if "4th" in s[0]]
    results += verify_scripts(max_weight=5, scripts=extra)
    elapsed = time.monotonic() - t0
    ok = len(results) == 19 and all(r.dv_invariant for r in results) and elapsed < 10.0
    _verdict(1, ok, f"19 scripts, all invariant, {elapsed:.2f}s")


def test_criterion_2_fick_mutations():
    t0 = time.monotonic()
    kz, ktz = rc_index(0, 1), rc_index(1, 1)
    kzz, kzzz = rc_index(0, 2), rc_index(0, 3)
    eq = canonical_focusing_eidf(4)
    out, _ = run_dio_step(eq, DioStep(family="PzI", a=0, b=1, target=MultiIndex(1, 1)))
    ok = fick_coefficient(out) == kzz - ktz * kz
    out, _ = run_dio_step(eq, DioStep(family="PzI", a=0, b=1, target=MultiIndex(0, 3)))
    ok = ok and fick_coefficient(out) == kzz + kzzz * kz / kzz
    for step in (DioStep(family="PtI", a=1, b=0, target=MultiIndex(1, 1)),
                 DioStep(family="PtI", a=2, b=0, target=MultiIndex(2, 1)),
                 DioStep(family="PtzI", a=1, b=1, target=MultiIndex(2, 1)),
                 DioStep(family="PzI", a=0, b=2, target=MultiIndex(1, 2))):
        out, _ = run_dio_step(eq, step)
        ok = ok and fick_coefficient(out) == kzz
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 10.0
    _verdict(2, ok, f"exact mutation forms, {elapsed:.2f}s")


def test_criterion_3_relaxation_time_roundtrip():
    t0 = time.monotonic()
    g = gombosi_roundtrip()
    v, lam, tau = rc(symbol("v")), rc(symbol("lam")), rc(symbol("tau"))
    start = bgk_second_order_eidf()
    ok = (g.start == start
          and start.term((0, 2)) == v * lam / 3
          and start.term((1, 2)) == lam * lam * Fraction(-2, 3)
          and start.term((0, 4)) == v * lam ** 3 / 5
          and g.intermediate.term((1, 2)) == lam * lam * Fraction(-1, 15)
          and g.final.term((2, 0)).substitute({symbol("lam"): tau * v}) == -tau / 5
          and g.final.term((0, 2)) == v * lam / 3)
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 1.0
    _verdict(3, ok, f"exact roundtrip, {elapsed:.2f}s")


def test_criterion_4_small_xi_series():
    t0 = time.monotonic()
    grid = co.default_grid(256)

    def setup_at(xi):
        return ScatteringSetup(v=1.0, dcoeff=1.0, xi=xi)

    checks = []
    fit = co.series_fit(lambda x: co.kappa_z(setup_at(x)), SERIES_XIS, parity="odd")
    checks.append(("kappa_z slope 1/3", abs(fit.leading - 1 / 3) <= 1e-3 / 3))
    fit = co.series_fit(lambda x: co.kappa_tz(setup_at(x), grid=grid), SERIES_XIS, parity="odd")
    checks.append(("kappa_tz slope 2/9", abs(fit.leading - 2 / 9) <= 1e-2 * 2 / 9))
    fit = co.series_fit(lambda x: co.kappa_ntz(2, setup_at(x), grid=grid), SERIES_XIS, parity="odd")
    checks.append(("kappa_ttz slope -13/108", abs(fit.leading + 13 / 108) <= 2e-2 * 13 / 108))
    fit = co.series_fit(lambda x: co.kappa_ntz(3, setup_at(x), grid=grid), SERIES_XIS, parity="odd")
    checks.append(("kappa_3tz slope 5/81", abs(fit.leading - 5 / 81) <= 2e-2 * 5 / 81))
    fit = co.series_fit(lambda x: co.kappa_tzz(setup_at(x), grid=grid), SERIES_XIS, parity="even")
    checks.append(("kappa_tzz(0) = -1/36", abs(fit.leading + 1 / 36) <= 1e-3 / 36))
    table = co.ntz_table(xis=SERIES_XIS, grid=grid)
    got = dict(table.ratios)
    for n, want in RATIO_TABLE.items():
        checks.append((f"ratio {n}", abs(got[n] - want) <= 1e-3))
    elapsed = time.monotonic() - t0
    bad = [name for name, good in checks if not good]
    ok = not bad and elapsed < 60.0
    _verdict(4, ok, f"{len(checks)} series checks{': ' + ', '.join(bad) if bad else ''}, {elapsed:.1f}s")


def test_criterion_5_quadrature_vs_expansion():
    t0 = time.monotonic()
    k0 = 1.0 / 6.0
    bad = []
    for xi, tol in ((0.1, 1e-3), (0.3, 1e-3), (0.5, 1e-2)):
        val = co.kappa_zz_bw(ScatteringSetup(v=1.0, dcoeff=1.0, xi=xi))
        series = k0 * (1.0 - xi**2 / 15.0 + 2.0 * xi**4 / 315.0)
        if abs(val - series) / series > tol:
            bad.append(f"xi={xi}")
    elapsed = time.monotonic() - t0
    ok = not bad and elapsed < 10.0
    _verdict(5, ok, f"three xi points{': ' + ', '.join(bad) if bad else ''}, {elapsed:.2f}s")


def test_criterion_6_unfocused_ensemble():
    cfg = SimConfig(setup=ScatteringSetup(v=1.0, dcoeff=1.0, xi=0.0),
                    n_particles=MC_N, dt=MC_DT, t_max=MC_TMAX, seed=SEED)
    est = estimate_kappa_dv(run_ensemble(cfg), cfg)
    rel = abs(est.value - 1.0 / 6.0) / (1.0 / 6.0)
    z = abs(est.value - 1.0 / 6.0) / est.stderr
    ok = rel <= 0.02 and z <= 3.0
    _verdict(6, ok, f"kappa_dv={est.value:.6f}+/-{est.stderr:.6f}, rel={rel:.3%}, z={z:.2f}")


def test_criterion_7_focused_ensemble_and_separation():
    setup = ScatteringSetup(v=1.0, dcoeff=1.0, xi=0.3)
    cfg = SimConfig(setup=setup, n_particles=MC_N, dt=MC_DT, t_max=MC_TMAX, seed=SEED)
    dv = estimate_kappa_dv(run_ensemble(cfg), cfg)
    rel_dv = abs(dv.value - KDV_03) / KDV_03

    tgk = estimate_kappa_tgk(SimConfig(setup=setup, n_particles=TGK_N, dt=MC_DT,
                                       t_max=MC_TMAX, seed=SEED, vacf_cutoff=10.0))
    rel_tgk = abs(tgk.value - KTGK_03) / KTGK_03

    dv_cfg = SimConfig(setup=setup, n_particles=SEP_DV_N, dt=MC_DT, t_max=MC_TMAX, seed=SEED)
    dv_big = estimate_kappa_dv(run_ensemble(dv_cfg), dv_cfg)
    tgk_big = estimate_kappa_tgk(SimConfig(setup=setup, n_particles=SEP_TGK_N, dt=MC_DT,
                                           t_max=MC_TMAX, seed=SEED, vacf_cutoff=10.0))
    gap = tgk_big.value - dv_big.value
    need = 2.0 * math.hypot(dv_big.stderr, tgk_big.stderr)
    ok = rel_dv <= 0.03 and rel_tgk <= 0.03 and gap >= need
    _verdict(7, ok, f"dv={dv.value:.6f} ({rel_dv:.3%}), tgk={tgk.value:.6f} ({rel_tgk:.3%}), "
                    f"gap={gap:.6f} vs 2se={need:.6f}")


def test_criterion_8_equilibrium_distribution():
    setup = ScatteringSetup(v=1.0, dcoeff=1.0, xi=0.5)
    with pytest.warns(RuntimeWarning):
        cfg = SimConfig(setup=setup, n_particles=100_000, dt=2.5e-3, t_max=20.0, seed=SEED)
    check = equilibrium_check(cfg)
    z = abs(check.mean_mu - LANGEVIN_05) / check.mean_mu_se
    # the same sample must reject a flat pitch distribution
    stats = run_ensemble(cfg)
    flat = ScatteringSetup(v=1.0, dcoeff=1.0, xi=0.0)
    d_flat = ks_statistic(stats.final_mu, lambda m: equilibrium_pitch_cdf(flat, m))
    ok = check.passes and z <= 3.0 and d_flat > check.critical_value
    _verdict(8, ok, f"ks={check.statistic:.5f} (crit {check.critical_value:.5f}), "
                    f"mean_mu={check.mean_mu:.5f} (z={z:.2f}), flat rejected at {d_flat:.4f}")


def test_criterion_9_property_suites_run_headless():
    assert not os.environ.get("DISPLAY")
    here = os.path.dirname(__file__)
    with_properties = []
    for path in glob.glob(os.path.join(here, "test_*.py")):
        if os.path.samefile(path, __file__):
            continue
        with open(path) as fh:
            if "@given(" in fh.read():
                with_properties.append(os.path.basename(path))
    import matplotlib
    matplotlib.use("Agg")
    import io
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots()
    ax.plot([0, 1], [0, 1])
    buf = io.BytesIO()
    fig.savefig(buf, format="png")
    plt.close(fig)
    ok = len(with_properties) >= 4 and buf.getvalue()[:4] == b"\x89PNG"
    _verdict(9, ok, f"property suites in {sorted(with_properties)}, agg render ok")
