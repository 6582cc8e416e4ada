"""Acceptance suite: the thirteen desk-scale verification criteria.

Each test prints one PASS/FAIL line (written past pytest's capture so the
lines always appear) and asserts the same condition.  Long runs are shared
through the disk cache in helpers.py.
"""

import warnings

import numpy as np

import conftest

from thinflow.experiments import (
    consistency_spread,
    dissipation_scaling,
    fit_loglog,
    palinstrophy_growth,
    windowed_inf,
)
from thinflow.key_integral import SingularIntegrand, compute_I_refined
from thinflow.lagrangian import yudovich_check
from thinflow.solver import FlowState, SolverConfig, run
from thinflow.spectral import (
    Grid,
    SpectralScalarField,
    biot_savart,
    curl,
    divergence,
    l2_norm,
    odd_odd_residual,
)

from helpers import (
    B_RATIO_BOUND,
    C1,
    KAPPA,
    PERSIST_C,
    YUDOVICH_C,
    control_result,
    euler_diag,
    monotone_gap_records,
    s_values,
    sweep_result,
    yudovich_run,
)

warnings.filterwarnings("ignore", category=SingularIntegrand)


def report(num: int, ok: bool, detail: str):
    line = f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} -- {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)


def test_criterion_01_taylor_green_decay():
    g = Grid(64)
    X, Y = g.meshgrid()
    w0 = SpectralScalarField.from_samples(g, np.sin(np.pi * X) * np.sin(np.pi * Y))
    st = FlowState.from_field(w0, nu=1e-2)
    run(st, 1.0, SolverConfig(fixed_dt=2e-3))
    expect = np.exp(-2.0 * np.pi**2 * 1e-2) * w0.samples
    err = l2_norm(st.omega - SpectralScalarField.from_samples(g, expect)) / l2_norm(w0)
    ok = err <= 1e-8
    report(1, ok, f"viscous single-mode relative error {err:.2e} (tol 1e-8)")
    assert ok


def test_criterion_02_euler_conservation():
    d = euler_diag(2, N=512)
    rows = d.diag_rows
    e0, z0 = rows[0]["energy"], rows[0]["enstrophy"]
    energy_drift = max(abs(r["energy"] - e0) for r in rows) / e0
    resolved = [r for r in rows if r["t"] <= d.resolved_until + 1e-9]
    enstrophy_drift = max(abs(r["enstrophy"] - z0) for r in resolved) / z0
    final = SpectralScalarField.from_samples(Grid(d.N), d.final_omega)
    residual = odd_odd_residual(final)
    ok = energy_drift <= 1e-6 and enstrophy_drift <= 1e-3 and residual <= 1e-10
    report(2, ok, f"energy drift {energy_drift:.2e} (1e-6), enstrophy drift "
                  f"{enstrophy_drift:.2e} while resolved t<={d.resolved_until:.2f} "
                  f"(1e-3), odd-odd residual {residual:.2e} (1e-10)")
    assert ok


def test_criterion_03_biot_savart_identities():
    g = Grid(64)
    rng = np.random.default_rng(42)
    worst_div, worst_curl = 0.0, 0.0
    for _ in range(20):
        f = SpectralScalarField.from_samples(g, rng.standard_normal((64, 64)))
        c = f.coeffs.copy()
        c[0, 0] = 0.0
        w = SpectralScalarField.from_coeffs(g, c)
        u = biot_savart(w)
        wn = l2_norm(w)
        worst_div = max(worst_div, l2_norm(divergence(u)) / wn)
        worst_curl = max(worst_curl, l2_norm(curl(u) - w) / wn)
    ok = worst_div <= 1e-12 and worst_curl <= 1e-10
    report(3, ok, f"20 random fields: div {worst_div:.2e} (1e-12), "
                  f"curl round-trip {worst_curl:.2e} (1e-10)")
    assert ok


def test_criterion_04_annulus_integral():
    def annulus(s, th):
        s = np.asarray(s, dtype=float)
        return ((s >= 0.25) & (s <= 0.5)).astype(float)

    val, est = compute_I_refined(annulus, r=0.0, tol=1e-9)
    exact = 4.0 / np.pi * np.log(2.0)
    err = abs(val - exact)
    ok = err <= 1e-6
    report(4, ok, f"annulus integral error {err:.2e} after refinement (tol 1e-6)")
    assert ok


def test_criterion_05_b_ratio_bounded_and_stable():
    base = {n: [r["ratio"] for r in euler_diag(n).b_reports] for n in (2, 3, 4)}
    refined = {n: [r["ratio_refined"] for r in euler_diag(n).b_reports] for n in (2, 3, 4)}
    sup = max(max(v) for v in base.values())
    sup_refined = max(max(v) for v in refined.values())
    # grid doubling at n=2 (N=256 -> 512), other n already at the N cap
    doubled = dict(base)
    doubled[2] = [r["ratio"] for r in euler_diag(2, N=512).b_reports]
    sup_doubled = max(max(v) for v in doubled.values())
    quad_shift = abs(sup_refined - sup) / sup
    grid_shift = abs(sup_doubled - sup) / sup
    ok = (sup <= B_RATIO_BOUND and sup_doubled <= B_RATIO_BOUND
          and quad_shift <= 0.2 and grid_shift <= 0.2)
    report(5, ok, f"sup|B|/||omega|| = {sup:.4f} (bound {B_RATIO_BOUND}); "
                  f"quadrature doubling {quad_shift:.1%}, grid doubling "
                  f"{grid_shift:.1%} (both <=20%)")
    assert ok


def test_criterion_06_origin_fixed_point():
    d = euler_diag(2, N=512)
    o = d.origin
    diag = max(np.max(np.abs(o["du11"])), np.max(np.abs(o["du22"])))
    offdiag = max(np.max(np.abs(o["du12"])), np.max(np.abs(o["du21"])))
    det_dev = np.max(np.abs(o["det"] - 1.0))
    ok = offdiag <= 1e-8 * diag and det_dev <= 1e-4
    report(6, ok, f"off-diagonal grad u(0) {offdiag:.2e} vs diagonal {diag:.3f} "
                  f"(1e-8 rel), det deformation deviation {det_dev:.2e} (1e-4)")
    assert ok


def test_criterion_07_origin_deformation_growth():
    # positivity on each run's stated window; consistency across n over the
    # common window in rescaled time S_n t (see the decisions ledger)
    runs = {2: euler_diag(2, N=512), 3: euler_diag(3), 4: euler_diag(4)}
    s2 = float(s_values(2)[-1])
    full_slopes, common_slopes, infs = [], [], []
    for n, d in runs.items():
        o, t = d.origin, d.origin["t"]
        s_n = float(s_values(n)[-1])
        md = np.maximum(o["deta11"], o["deta22"])
        lo = 2.0 * C1 / s_n
        m_full = (t >= lo) & (t <= 1.0)
        m_common = (t >= lo) & (t <= min(1.0, s2 / s_n))
        full_slopes.append(fit_loglog(s_n * t[m_full], md[m_full]).slope)
        common_slopes.append(fit_loglog(s_n * t[m_common], md[m_common]).slope)
        infs.append(windowed_inf(t, t * np.abs(o["du22"]), (lo, 1.0)))
    slope_spread = consistency_spread(common_slopes)
    inf_spread = consistency_spread(infs)
    ok = (all(s > 0 for s in full_slopes) and slope_spread <= 0.3
          and all(v > 0.01 for v in infs) and inf_spread <= 0.3)
    report(7, ok, f"deformation exponents {np.round(full_slopes, 3).tolist()} all "
                  f"positive, common-window spread {slope_spread:.1%} (<=30%); "
                  f"inf t|d2u2(0)| {np.round(infs, 4).tolist()} > 0.01, spread "
                  f"{inf_spread:.1%} (<=30%)")
    assert ok


def test_criterion_08_per_bubble_persistence():
    d = euler_diag(4)
    s = s_values(4)
    worst = np.inf
    for k in range(2, 5):
        ratios = d.key_I_k[k] / d.key_I_k[k][0]
        window = d.key_times <= C1 / float(s[k]) + 1e-9
        worst = min(worst, float(np.min(ratios[window])))
    ok = worst >= PERSIST_C
    report(8, ok, f"min I_k(t)/I_k(0) over [0, c1/S_k], k in 2..4: {worst:.4f} "
                  f"(c = {PERSIST_C}, c1 = {C1})")
    assert ok


def test_criterion_09_palinstrophy_growth():
    runs = {2: euler_diag(2, N=512), 3: euler_diag(3), 4: euler_diag(4)}
    common_hi = min(min(d.resolved_until, 1.0) for d in runs.values())
    slopes, monos = [], []
    for n, d in runs.items():
        s_n = float(s_values(n)[-1])
        own = palinstrophy_growth(d.dense_t, d.dense_palinstrophy, s_n,
                                  window=(0.05, min(d.resolved_until, 1.0)))
        monos.append(own["monotone_fraction"])
        fit = palinstrophy_growth(d.dense_t, d.dense_palinstrophy, s_n,
                                  window=(0.05, common_hi))
        slopes.append(fit["fit"].slope)
    spread = consistency_spread(slopes)
    ok = (all(m >= 0.99 for m in monos) and all(s > 0 for s in slopes)
          and spread <= 0.3)
    report(9, ok, f"monotone fractions {np.round(monos, 3).tolist()} on own "
                  f"resolved windows; exponents {np.round(slopes, 5).tolist()} "
                  f"positive on common window (0.05, {common_hi:.2f}), spread "
                  f"{spread:.1%} (<=30%)")
    assert ok


def test_criterion_10_dissipation_scaling():
    # synthetic calibration first: the fitting machinery must recover known laws
    class R:
        def __init__(self, nu, chi):
            self.nu, self.chi = nu, chi

    lin = dissipation_scaling([R(nu, nu) for nu in np.logspace(-6, -2, 5)])
    flat = dissipation_scaling([R(nu, 1.0 / np.log(1.0 / nu))
                                for nu in np.logspace(-12, -4, 9)])
    calib_ok = (abs(lin.slope - 1.0) <= 1e-6
                and abs(flat.c0_fit - 1.0) <= 0.05)

    fit = sweep_result()["scaling_fit"]
    sweep_ok = fit.slope < 1.0 and fit.slope_ci[1] < 1.0
    ok = calib_ok and sweep_ok
    band = "excludes" if fit.slope_ci[1] < 1.0 else "does not exclude"
    report(10, ok, f"calibration slope {lin.slope:.8f}, c0 {flat.c0_fit:.3f}; "
                   f"sweep slope {fit.slope:.3f}, 95% CI "
                   f"({fit.slope_ci[0]:.3f}, {fit.slope_ci[1]:.3f}) {band} 1 "
                   f"(needs slope < 1 with band excluding 1; at the N=1024 "
                   f"desk cap the fine-scale blobs for n >= 4 are truncated, "
                   f"so the averaged palinstrophy saturates and chi tracks nu "
                   f"almost linearly -- see the decisions ledger)")
    assert ok


def test_criterion_11_gap_monotonicity_and_targeting():
    recs = monotone_gap_records()
    gaps = [r.omega_gap_T for r in recs]  # listed from largest nu downward
    monotone = all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))
    sweep_recs = sweep_result()["records"]
    in_band = all(0.5 * KAPPA <= r.h1_gap_T <= KAPPA for r in sweep_recs)
    ok = monotone and in_band
    report(11, ok, f"terminal vorticity gaps {np.round(gaps, 4).tolist()} "
                   f"nonincreasing as nu halves; paired H1 gaps "
                   f"{[round(float(r.h1_gap_T), 3) for r in sweep_recs]} all in "
                   f"[{0.5 * KAPPA}, {KAPPA}]")
    assert ok


def test_criterion_12_yudovich_bound():
    y = yudovich_run()
    pos = y["pos"]
    P = pos.shape[1] // 2
    failures = 0
    checked = 0
    for i, t in enumerate(y["times"]):
        if t <= 0:
            continue
        eta = pos[i].reshape(P, 2, 2)
        rep = yudovich_check(y["pairs0"], eta, float(t), y["omega_inf"], c=YUDOVICH_C)
        checked += 1
        failures += int(np.sum(~rep["pass"]))
    ok = failures == 0 and checked > 0
    report(12, ok, f"{P} tracer pairs at {checked} times: {failures} violations "
                   f"of the two-sided Holder bound with c = {YUDOVICH_C}")
    assert ok


def test_criterion_13_trivial_control():
    recs = control_result()
    chis = [r.chi for r in recs]
    spread = consistency_spread(chis)
    ok = spread <= 0.2
    report(13, ok, f"rescaled-family chi {[f'{c:.3e}' for c in chis]} for "
                   f"A in {[r.amplitude for r in recs]}: spread {spread:.1%} (<=20%)")
    assert ok
