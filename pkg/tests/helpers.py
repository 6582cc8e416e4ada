"""Shared fixtures-by-function for the test suite.

Expensive runs are disk-cached under .thinflow-cache at the repo root, keyed
by their parameters, so repeated pytest invocations (and the acceptance
suite) reuse them.  Frozen desk-scale constants live here.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from thinflow.experiments import (
    ExperimentPlan,
    cached,
    diagnostic_run,
    run_pair,
    sweep,
)
from thinflow.initial_data import BubbleConfig, partial_sums
from thinflow.key_integral import PolarQuadrature
from thinflow.lagrangian import TracerEnsemble
from thinflow.solver import DiagnosticsRecorder, FlowState, SolverConfig, run
from thinflow.spectral import Grid
from thinflow.initial_data import assemble_omega0

CACHE = Path(__file__).resolve().parent.parent / ".thinflow-cache"

# frozen desk-scale constants (see calibration helpers below)
C1 = 0.2                 # persistence-window constant: t_k = C1 / S_k
KAPPA = 0.5              # gap-target for paired viscosities
YUDOVICH_C = 0.11        # calibrated: max required c over the n=2 ensemble was
                         # 0.090 across t in [0,1]; frozen with x1.2 headroom

B_TIMES = (0.0, 0.25, 0.5, 0.75, 1.0)


def desk_cfg(n: int, **kw) -> BubbleConfig:
    """The family member used throughout the desk-scale runs."""
    base = dict(l0=2, n=n, eps=0.125, bg_outer=5.0 / 16.0, bg_inner=7.0 / 16.0)
    base.update(kw)
    return BubbleConfig(**base)


def desk_N(n: int) -> int:
    return min(2 ** (2 * n + 4), 1024)


def s_values(n: int) -> np.ndarray:
    return partial_sums(desk_cfg(n))


def fit_window(n: int) -> tuple:
    s_n = float(s_values(n)[-1])
    return (2.0 * C1 / s_n, 1.0)


def euler_diag(n: int, N: int | None = None, T: float = 1.0):
    """Shared inviscid diagnostic run: origin series, tracks, B snapshots."""
    N = N if N is not None else desk_N(n)
    key = ("euler-diag", n, N, T, "v1")

    def build():
        return diagnostic_run(
            desk_cfg(n), N, T, nu=0.0,
            with_origin=True, with_tracks=True, track_until=0.12,
            quad=PolarQuadrature(),
            b_times=B_TIMES, b_refine=True, keep_final=True,
        )

    return cached(CACHE, f"euler-diag-n{n}-N{N}", key, build)


def tracer_pairs(count: int = 100, seed: int = 7) -> np.ndarray:
    """Random tracer pairs (count, 2, 2): base points plus small separations."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(-0.9, 0.9, size=(count, 2))
    delta = rng.uniform(-0.2, 0.2, size=(count, 2))
    return np.stack([base, base + delta], axis=1)


def yudovich_run(T: float = 1.0, N: int = 256, count: int = 100):
    """n=2 run advecting the Yudovich pair ensemble; returns (times, positions,
    pair_index, omega_inf)."""
    key = ("yudovich", N, T, count, 7, "v1")

    def build():
        pairs = tracer_pairs(count)
        pts = pairs.reshape(-1, 2)
        grid = Grid(N)
        omega0 = assemble_omega0(desk_cfg(2), grid, allow_underresolved=True)
        st = FlowState.from_field(omega0, nu=0.0)
        st.tracers = TracerEnsemble.from_points(pts)
        omega_inf = float(np.max(np.abs(st.omega.samples)))
        times, snaps, dets = [], [], []

        def cb(s):
            times.append(s.t)
            snaps.append(s.tracers.pos.copy())
            dets.append(s.tracers.det().copy())

        run(st, T, SolverConfig(cadence=0.1), callbacks=(cb,))
        return {
            "times": np.array(times),
            "pos": np.array(snaps),
            "det": np.array(dets),
            "pairs0": pairs,
            "omega_inf": omega_inf,
        }

    return cached(CACHE, f"yudovich-N{N}", key, build)


def sweep_plan() -> ExperimentPlan:
    return ExperimentPlan(
        n_list=(2, 3, 4, 5), l0=2, eps=0.125,
        bg_outer=5.0 / 16.0, bg_inner=7.0 / 16.0,
        T=0.5, N_max=1024, pairing="gap", kappa=KAPPA, pair_prefactor=1e-4,
    )


def sweep_result():
    plan = sweep_plan()
    key = ("sweep", plan, "v1")
    return cached(CACHE, "sweep", key, lambda: sweep(plan, keep_gap_series=True))


def monotone_gap_records(nus=(4e-4, 2e-4, 1e-4, 5e-5)):
    """n=2 records at a ladder of viscosities for the gap-monotonicity check."""
    plan = ExperimentPlan(n_list=(2,), l0=2, bg_outer=5.0 / 16.0, bg_inner=7.0 / 16.0,
                          T=0.5, N_max=256)
    key = ("monotone-gaps", plan, tuple(nus), "v1")

    def build():
        grid = plan.grid_for(2)
        omega0 = assemble_omega0(plan.bubble_config(2), grid, allow_underresolved=True)
        return [run_pair(plan, 2, nu, omega0, keep_gap_series=False) for nu in nus]

    return cached(CACHE, "monotone-gaps", key, build)


def control_result(N: int = 256, amplitudes=(1.0, 2.0, 4.0), nu0: float = 2e-5):
    """Trivial-rescaling dissipation control at the n=2 configuration.

    The base viscosity must keep every member near-inviscid over its horizon
    (nu k^2 T << 1 at the finest data scale), otherwise the A=1 member damps
    the small blob and the chi-collapse premise fails.
    """
    from thinflow.experiments import trivial_dissipation_control

    key = ("control", N, amplitudes, nu0, 0.5, "v1")
    return cached(CACHE, "control", key,
                  lambda: trivial_dissipation_control(desk_cfg(2), N,
                                                      amplitudes=amplitudes,
                                                      nu0=nu0, T0=0.5))


# frozen acceptance thresholds measured on the cached desk-scale runs
B_RATIO_BOUND = 0.165    # sup |B| / ||omega||_inf across n in {2,3,4}, t in [0,1]
PERSIST_C = 0.9          # lower bound on I_k(t)/I_k(0) over [0, C1/S_k]
