"""Experiment drivers: paired inviscid/viscous runs, dissipation sweeps over
viscosity, origin-deformation diagnostics, and the trivial-dissipation control.

All fits are ordinary least squares in log coordinates with 95 percent
confidence intervals from the t distribution.
"""

from __future__ import annotations

import hashlib
import pickle
import time
from dataclasses import dataclass, field as dc_field, asdict
from pathlib import Path

import numpy as np
from scipy import stats

from .initial_data import BubbleConfig, assemble_omega0, partial_sums
from .key_integral import PolarQuadrature, compute_I, decompose_B, make_bubble_tracks, per_bubble_I
from .lagrangian import OriginTracker, TracerEnsemble
from .solver import (
    DiagnosticsRecorder,
    FlowState,
    SolverConfig,
    cfl_dt,
    diagnostics,
    run,
    spectral_reductions,
    step,
)
from .spectral import Grid, SpectralScalarField, l2_norm


# ---------------------------------------------------------------------------
# plans and records


@dataclass(frozen=True)
class ExperimentPlan:
    """A viscosity sweep over the family index n."""

    n_list: tuple = (2, 3, 4, 5)
    l0: int = 2
    eps: float = 0.125
    amplitude: float = 1.0
    small_scale_amplitude: float = 1.0
    background_amplitude: float = 1.0
    bg_outer: float = 5.0 / 16.0
    bg_inner: float = 7.0 / 16.0
    T: float = 1.0
    N_max: int = 1024
    pairing: str = "explicit"  # "explicit": nu_n = prefactor * 2^(-c n); "gap": bisect on the H1 gap
    pair_c: float = 2.0
    pair_prefactor: float = 1e-3
    kappa: float = 0.5
    cadence: float = 0.02
    cfl_number: float = 0.4
    max_dt: float = 5e-3
    tail_threshold: float = 1e-6

    def bubble_config(self, n: int) -> BubbleConfig:
        return BubbleConfig(
            l0=self.l0, n=n, eps=self.eps, amplitude=self.amplitude,
            small_scale_amplitude=self.small_scale_amplitude,
            background_amplitude=self.background_amplitude,
            bg_outer=self.bg_outer, bg_inner=self.bg_inner,
        )

    def grid_for(self, n: int) -> Grid:
        return Grid(min(2 ** (2 * n + 4), self.N_max))

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            cfl_number=self.cfl_number, cadence=self.cadence,
            max_dt=self.max_dt, tail_threshold=self.tail_threshold,
        )


@dataclass
class GapSeries:
    """Distances between the paired viscous and inviscid solutions over time."""

    t: np.ndarray
    u_gap: np.ndarray
    omega_gap: np.ndarray
    h1_gap: np.ndarray


@dataclass
class DissipationRecord:
    """One paired run: viscous enstrophy dissipation against the inviscid twin."""

    n: int
    nu: float
    N: int
    T: float
    chi: float
    chi_budget: float
    enstrophy0: float
    enstrophyT: float
    u_gap_T: float
    omega_gap_T: float
    h1_gap_T: float
    resolved_until_euler: float
    resolved_until_ns: float
    wall_time: float
    gaps: GapSeries | None = None

    def row(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "n", "nu", "N", "T", "chi", "chi_budget", "enstrophy0", "enstrophyT",
            "u_gap_T", "omega_gap_T", "h1_gap_T",
            "resolved_until_euler", "resolved_until_ns", "wall_time")}
        return d


@dataclass
class ScalingFit:
    """Power-law and log-flatness fits of dissipation against viscosity."""

    slope: float
    slope_ci: tuple
    intercept: float
    c0_fit: float
    c0_ci: tuple
    n_points: int


@dataclass
class LinearFit:
    slope: float
    intercept: float
    slope_ci: tuple
    r2: float
    n_points: int


# ---------------------------------------------------------------------------
# fits


def fit_linear(x, y) -> LinearFit:
    """OLS y = a x + b with a 95 percent CI on the slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = x.size
    if m < 2:
        raise ValueError("need at least two points to fit")
    res = stats.linregress(x, y)
    if m > 2:
        halfwidth = stats.t.ppf(0.975, m - 2) * res.stderr
    else:
        halfwidth = np.inf
    return LinearFit(
        slope=float(res.slope), intercept=float(res.intercept),
        slope_ci=(float(res.slope - halfwidth), float(res.slope + halfwidth)),
        r2=float(res.rvalue**2), n_points=m,
    )


def fit_loglog(x, y) -> LinearFit:
    """Power-law exponent from OLS in log-log coordinates."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    return fit_linear(np.log(x), np.log(y))


def dissipation_scaling(records) -> ScalingFit:
    """Fit chi against nu two ways: as a power nu^slope and as a flat
    logarithmic decay (log 1/nu)^(-c0)."""
    nus = np.array([r.nu for r in records], dtype=float)
    chis = np.array([r.chi for r in records], dtype=float)
    power = fit_loglog(nus, chis)
    flat = fit_linear(np.log(np.log(1.0 / nus)), np.log(chis))
    return ScalingFit(
        slope=power.slope, slope_ci=power.slope_ci, intercept=power.intercept,
        c0_fit=-flat.slope, c0_ci=(-flat.slope_ci[1], -flat.slope_ci[0]),
        n_points=len(records),
    )


def palinstrophy_growth(times, palinstrophy, s_n: float, window=(0.0, np.inf)) -> dict:
    """Monotonicity and log-log growth of palinstrophy against s_n * t."""
    t = np.asarray(times, dtype=float)
    p = np.asarray(palinstrophy, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    t, p = t[sel], p[sel]
    if t.size < 3:
        raise ValueError("window contains too few samples")
    dp = np.diff(p)
    fit = fit_loglog(s_n * t[t > 0], p[t > 0])
    return {
        "fit": fit,
        "increase": float(p[-1] - p[0]),
        "relative_increase": float((p[-1] - p[0]) / p[0]),
        "monotone_fraction": float(np.mean(dp >= 0.0)),
        "window": (float(t[0]), float(t[-1])),
    }


def windowed_inf(times, values, window) -> float:
    """Infimum of a sampled series over a closed time window."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    if not np.any(sel):
        raise ValueError("window contains no samples")
    return float(np.min(v[sel]))


def consistency_spread(values) -> float:
    """Max relative deviation from the mean, for cross-n consistency checks."""
    v = np.asarray(values, dtype=float)
    m = float(np.mean(v))
    if m == 0.0:
        raise ValueError("mean is zero")
    return float(np.max(np.abs(v - m)) / abs(m))


# ---------------------------------------------------------------------------
# paired viscous/inviscid runs


def _gap_metrics(grid: Grid, wh_ns, wh_euler) -> tuple:
    from .solver import _half_arrays

    _, _, ksq, inv_ksq, _, wgt, _ = _half_arrays(grid.N)
    d = wgt * np.abs(wh_ns - wh_euler) ** 2
    u_gap = np.sqrt(4.0 * float(np.sum(inv_ksq * d)))
    omega_gap = np.sqrt(4.0 * float(np.sum(d)))
    h1_gap = np.sqrt(4.0 * float(np.sum(ksq * d)))
    return u_gap, omega_gap, h1_gap


def run_pair(plan: ExperimentPlan, n: int, nu: float, omega0: SpectralScalarField | None = None,
             keep_gap_series: bool = True) -> DissipationRecord:
    """Evolve viscous and inviscid twins from the same data in lockstep.

    Both use the step sequence dictated by the inviscid CFL condition so the
    gap series compares states at identical times.
    """
    t_start = time.perf_counter()
    cfg = plan.bubble_config(n)
    grid = plan.grid_for(n)
    if omega0 is None:
        omega0 = assemble_omega0(cfg, grid, allow_underresolved=True)
    sc = plan.solver_config()
    eul = FlowState.from_field(omega0, nu=0.0)
    vis = FlowState.from_field(omega0, nu=nu)
    rec_e = DiagnosticsRecorder(tail_threshold=plan.tail_threshold)
    rec_v = DiagnosticsRecorder(tail_threshold=plan.tail_threshold)
    ts, ug, og, hg = [], [], [], []

    def record():
        rec_e.step_callback(eul)
        rec_v.step_callback(vis)
        if keep_gap_series:
            a, b, c = _gap_metrics(grid, vis.wh, eul.wh)
            ts.append(eul.t)
            ug.append(a)
            og.append(b)
            hg.append(c)

    ens0 = spectral_reductions(vis)["enstrophy"]
    record()
    while eul.t < plan.T - 1e-12:
        dt = min(cfl_dt(eul, sc), plan.T - eul.t)
        step(eul, dt, sc)
        step(vis, dt, sc, check_cfl=False)
        record()

    u_gap, omega_gap, h1_gap = _gap_metrics(grid, vis.wh, eul.wh)
    ens_T = spectral_reductions(vis)["enstrophy"]
    # chi = nu * time average of the viscous palinstrophy; the enstrophy
    # budget 2 chi T = enstrophy(0) - enstrophy(T) cross-checks it
    tarr = np.array(rec_v.dense_t)
    parr = np.array(rec_v.dense_palinstrophy)
    chi = nu * np.trapezoid(parr, tarr) / plan.T
    chi_budget = 0.5 * (ens0 - ens_T) / plan.T
    return DissipationRecord(
        n=n, nu=nu, N=grid.N, T=plan.T, chi=float(chi), chi_budget=float(chi_budget),
        enstrophy0=float(ens0), enstrophyT=float(ens_T),
        u_gap_T=u_gap, omega_gap_T=omega_gap, h1_gap_T=h1_gap,
        resolved_until_euler=rec_e.resolved_horizon(plan.T),
        resolved_until_ns=rec_v.resolved_horizon(plan.T),
        wall_time=time.perf_counter() - t_start,
        gaps=GapSeries(np.array(ts), np.array(ug), np.array(og), np.array(hg))
        if keep_gap_series else None,
    )


class _EulerReference:
    """One inviscid run stored as (step sizes, terminal spectrum) so that gap
    bisection can replay viscous twins without recomputing the reference."""

    def __init__(self, plan: ExperimentPlan, n: int, omega0: SpectralScalarField):
        sc = plan.solver_config()
        st = FlowState.from_field(omega0, nu=0.0)
        self.dts = []
        while st.t < plan.T - 1e-12:
            dt = min(cfl_dt(st, sc), plan.T - st.t)
            step(st, dt, sc)
            self.dts.append(dt)
        self.wh_T = st.wh.copy()
        self.grid = st.grid
        self.sc = sc

    def terminal_h1_gap(self, omega0: SpectralScalarField, nu: float) -> float:
        st = FlowState.from_field(omega0, nu=nu)
        for dt in self.dts:
            step(st, dt, self.sc, check_cfl=False)
        return _gap_metrics(self.grid, st.wh, self.wh_T)[2]


def pair_viscosity(plan: ExperimentPlan, n: int, omega0: SpectralScalarField | None = None,
                   max_iter: int = 12) -> dict:
    """Choose the viscosity paired with family index n.

    "explicit" evaluates the closed-form schedule; "gap" bisects in log nu
    until the terminal H1 gap to the inviscid twin lands in [kappa/2, kappa].
    """
    if plan.pairing == "explicit":
        return {"nu": plan.pair_prefactor * 2.0 ** (-plan.pair_c * n), "evaluations": []}
    if plan.pairing != "gap":
        raise ValueError(f"unknown pairing rule: {plan.pairing!r}")
    cfg = plan.bubble_config(n)
    grid = plan.grid_for(n)
    if omega0 is None:
        omega0 = assemble_omega0(cfg, grid, allow_underresolved=True)
    ref = _EulerReference(plan, n, omega0)
    kappa = plan.kappa
    evals = []

    def gap(nu):
        g = ref.terminal_h1_gap(omega0, nu)
        evals.append((nu, g))
        return g

    nu = plan.pair_prefactor
    g = gap(nu)
    grow = 0
    while g < 0.5 * kappa and grow < max_iter:
        nu *= 4.0
        g = gap(nu)
        grow += 1
    while g > kappa and grow < max_iter:
        nu /= 4.0
        g = gap(nu)
        grow += 1
    if 0.5 * kappa <= g <= kappa:
        return {"nu": nu, "evaluations": evals}
    # bracket between the last two evaluations and bisect in log nu
    lo_nu, lo_g = max(((v, gg) for v, gg in evals if gg < 0.5 * kappa),
                      key=lambda p: p[0], default=(None, None))
    hi_nu, hi_g = min(((v, gg) for v, gg in evals if gg > kappa),
                      key=lambda p: p[0], default=(None, None))
    if lo_nu is None or hi_nu is None:
        raise RuntimeError("failed to bracket the gap target; is the gap monotone in nu?")
    for _ in range(max_iter):
        mid = float(np.sqrt(lo_nu * hi_nu))
        g = gap(mid)
        if 0.5 * kappa <= g <= kappa:
            return {"nu": mid, "evaluations": evals}
        if g < 0.5 * kappa:
            lo_nu = mid
        else:
            hi_nu = mid
    raise RuntimeError(f"gap bisection did not converge; evaluations: {evals}")


def sweep(plan: ExperimentPlan, keep_gap_series: bool = False, progress=None) -> dict:
    """Run the viscosity sweep and fit the dissipation scaling."""
    records = []
    for n in plan.n_list:
        cfg = plan.bubble_config(n)
        grid = plan.grid_for(n)
        omega0 = assemble_omega0(cfg, grid, allow_underresolved=True)
        nu = pair_viscosity(plan, n, omega0)["nu"]
        rec = run_pair(plan, n, nu, omega0, keep_gap_series=keep_gap_series)
        records.append(rec)
        if progress is not None:
            progress(rec)
    fit = dissipation_scaling(records)
    return {"plan": plan, "records": records, "scaling_fit": fit}


def summary_dict(result: dict) -> dict:
    """JSON-ready view of a sweep result."""
    fit = result["scaling_fit"]
    return {
        "plan": asdict(result["plan"]),
        "records": [r.row() for r in result["records"]],
        "scaling_fit": {
            "slope": fit.slope,
            "slope_ci": list(fit.slope_ci),
            "c0_fit": fit.c0_fit,
            "c0_ci": list(fit.c0_ci),
            "n_points": fit.n_points,
        },
    }


# ---------------------------------------------------------------------------
# diagnostic runs (origin deformation, key-integral tracks, passive tracers)


@dataclass
class DiagnosticRun:
    """Everything measured along one run that the CSV reports are built from."""

    cfg: BubbleConfig
    N: int
    T: float
    nu: float
    diag_rows: list
    dense_t: np.ndarray
    dense_palinstrophy: np.ndarray
    dense_enstrophy: np.ndarray
    resolved_until: float
    origin: dict | None = None
    key_times: np.ndarray | None = None
    key_I: np.ndarray | None = None
    key_I_k: dict | None = None
    key_radii: np.ndarray | None = None
    key_I_r: np.ndarray | None = None
    b_reports: list = dc_field(default_factory=list)
    tracer_times: list = dc_field(default_factory=list)
    tracer_pos: list = dc_field(default_factory=list)
    tracer_det: list = dc_field(default_factory=list)
    final_omega: np.ndarray | None = None
    wall_time: float = 0.0


def diagnostic_run(cfg: BubbleConfig, N: int, T: float, nu: float = 0.0,
                   solver_config: SolverConfig | None = None,
                   with_origin: bool = True,
                   with_tracks: bool = False,
                   track_until: float | None = None,
                   key_radii=(),
                   quad: PolarQuadrature | None = None,
                   b_times=(),
                   b_region=(0.05, 0.5),
                   b_refine: bool = False,
                   tracer_points=None,
                   keep_final: bool = False) -> DiagnosticRun:
    """Evolve the bubble data while recording origin, integral, and tracer series.

    Key integrals and the polar-decomposition residual are evaluated at the
    output cadence (tracks only until track_until, where they are cheap and
    meaningful); the origin deformation is advanced every step.
    """
    t_start = time.perf_counter()
    sc = solver_config or SolverConfig()
    quad = quad or PolarQuadrature()
    grid = Grid(N)
    omega0 = assemble_omega0(cfg, grid, allow_underresolved=True)
    state = FlowState.from_field(omega0, nu=nu)
    if with_origin:
        state.origin = OriginTracker()
    tracks = make_bubble_tracks(state, cfg) if with_tracks else None
    if tracer_points is not None:
        state.tracers = TracerEnsemble.from_points(np.asarray(tracer_points, dtype=float))
    rec = DiagnosticsRecorder(tail_threshold=sc.tail_threshold)
    out = DiagnosticRun(cfg=cfg, N=N, T=T, nu=nu, diag_rows=rec.rows,
                        dense_t=None, dense_palinstrophy=None, dense_enstrophy=None,
                        resolved_until=T)
    key_t, key_vals, key_k = [], [], {k: [] for k in (tracks.keys if tracks else [])}
    radii = np.asarray(key_radii, dtype=float)
    key_r_rows = []
    b_remaining = sorted(b_times)

    def cadence_cb(st: FlowState):
        rec.cadence_callback(st)
        horizon = track_until if track_until is not None else T
        if tracks is not None and st.t <= horizon + 1e-12:
            om = st.omega
            key_t.append(st.t)
            key_vals.append(compute_I(om, quad=quad))
            for k in tracks.keys:
                key_k[k].append(per_bubble_I(tracks, k, quad=quad))
            if radii.size:
                key_r_rows.append([compute_I(om, r=float(r), quad=quad) for r in radii])
        while b_remaining and st.t >= b_remaining[0] - 1e-9:
            b_remaining.pop(0)
            rep = decompose_B(st.velocity(), st.omega, region=b_region, quad=quad)
            rep["t"] = st.t
            if b_refine:
                fine = decompose_B(st.velocity(), st.omega, region=b_region,
                                   quad=quad.refined())
                rep["ratio_refined"] = fine["ratio"]
            out.b_reports.append(rep)
        if st.tracers is not None:
            out.tracer_times.append(st.t)
            out.tracer_pos.append(st.tracers.pos.copy())
            out.tracer_det.append(st.tracers.det().copy())

    run(state, T, sc, callbacks=(cadence_cb,), step_callbacks=(rec.step_callback,))
    out.dense_t = np.array(rec.dense_t)
    out.dense_palinstrophy = np.array(rec.dense_palinstrophy)
    out.dense_enstrophy = np.array(rec.dense_enstrophy)
    out.resolved_until = rec.resolved_horizon(T)
    if with_origin:
        out.origin = state.origin.series()
    if tracks is not None:
        out.key_times = np.array(key_t)
        out.key_I = np.array(key_vals)
        out.key_I_k = {k: np.array(v) for k, v in key_k.items()}
        if radii.size:
            out.key_radii = radii
            out.key_I_r = np.array(key_r_rows)
    if keep_final:
        out.final_omega = state.omega.samples.copy()
    out.wall_time = time.perf_counter() - t_start
    return out


# ---------------------------------------------------------------------------
# trivial-dissipation control


@dataclass
class ControlRecord:
    amplitude: float
    nu: float
    T: float
    reynolds: float
    chi: float


def trivial_dissipation_control(cfg: BubbleConfig, N: int, amplitudes=(1.0, 2.0, 4.0),
                                nu0: float = 1e-3, T0: float = 0.5,
                                solver_config: SolverConfig | None = None) -> list:
    """Rescaled family omega -> A omega with nu = nu0 / A^2 and horizon T0 / A.

    Along this family the Reynolds number grows like A^3 while the time-mean
    dissipation stays constant up to viscous corrections, which is the
    trivial scaling any genuine anomalous-dissipation claim must beat.
    """
    sc = solver_config or SolverConfig()
    grid = Grid(N)
    base = assemble_omega0(cfg, grid, allow_underresolved=True)
    out = []
    for amp in amplitudes:
        omega0 = base * float(amp)
        nu = nu0 / amp**2
        horizon = T0 / amp
        st = FlowState.from_field(omega0, nu=nu)
        u = st.velocity()
        u_inf = max(float(np.max(np.abs(u.u1.samples))), float(np.max(np.abs(u.u2.samples))))
        rec = DiagnosticsRecorder(tail_threshold=sc.tail_threshold)
        run(st, horizon, sc, step_callbacks=(rec.step_callback,))
        chi = nu * np.trapezoid(np.array(rec.dense_palinstrophy), np.array(rec.dense_t)) / horizon
        out.append(ControlRecord(
            amplitude=float(amp), nu=nu, T=horizon,
            reynolds=u_inf * grid.L / nu, chi=float(chi),
        ))
    return out


# ---------------------------------------------------------------------------
# cache


def cached(cache_dir, name: str, key, builder):
    """Pickle-backed memoization of an expensive run, keyed by its parameters."""
    if cache_dir is None:
        return builder()
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(repr(key).encode()).hexdigest()[:16]
    path = cache_dir / f"{name}-{digest}.pkl"
    if path.exists():
        with open(path, "rb") as f:
            return pickle.load(f)
    obj = builder()
    with open(path, "wb") as f:
        pickle.dump(obj, f)
    return obj
