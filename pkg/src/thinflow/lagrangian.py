"""Tracer trajectories, deformation gradients, and origin-stagnation diagnostics.

Tracers are advanced in lockstep with the field solver (RK4 sharing the
solver's stage velocity fields).  The deformation matrix is integrated by
the variational equation dD/dt = (grad u)(eta) D rather than by finite
differences of auxiliary tracers, which collapse exponentially under
thinning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import Grid, SpectralScalarField, VelocityField


def eval_coeffs_at_points(grid: Grid, coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Exact evaluation of the truncated Fourier series at arbitrary points.

    Direct summation over all retained modes; meant for a handful of tracked
    points, not for resampling whole fields.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    m = grid.modes
    e1 = np.exp(1j * np.pi * np.outer(pts[:, 0], m))
    e2 = np.exp(1j * np.pi * np.outer(pts[:, 1], m))
    return np.real(np.einsum("pm,mn,pn->p", e1, coeffs, e2, optimize=True))


def eval_half_at_points(grid: Grid, half: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Same as eval_coeffs_at_points for an rfft2 half-spectrum (already /N^2)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    N = grid.N
    m1 = grid.modes
    m2 = np.arange(N // 2 + 1)
    e1 = np.exp(1j * np.pi * np.outer(pts[:, 0], m1))
    t = e1 @ half  # (P, N//2+1)
    phase = np.exp(1j * np.pi * np.outer(pts[:, 1], m2))
    w = np.full(N // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return np.real(np.sum(t * phase * w, axis=1))


def velocity_at(u: VelocityField, pts: np.ndarray) -> np.ndarray:
    """Velocity vectors at the given points; grid samples when a point is a node."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    grid = u.grid
    idx = pts / grid.h
    on_node = np.allclose(idx, np.round(idx), atol=1e-12)
    if on_node:
        i = np.mod(np.round(idx[:, 0]).astype(int), grid.N)
        j = np.mod(np.round(idx[:, 1]).astype(int), grid.N)
        return np.stack([u.u1.samples[i, j], u.u2.samples[i, j]], axis=-1)
    return np.stack(
        [
            eval_coeffs_at_points(grid, u.u1.coeffs, pts),
            eval_coeffs_at_points(grid, u.u2.coeffs, pts),
        ],
        axis=-1,
    )


def gradient_multipliers(kx, ky):
    """Spectral multipliers taking omega_hat to the four entries of grad u.

    Ordering: (d1u1, d2u1, d1u2, d2u2).  Uses u_hat = i k-perp omega_hat/|k|^2.
    """
    ksq = kx * kx + ky * ky
    inv = np.zeros_like(ksq)
    nz = ksq > 0
    inv[nz] = 1.0 / ksq[nz]
    return (
        -kx * ky * inv,
        -ky * ky * inv,
        kx * kx * inv,
        kx * ky * inv,
    )


def grad_u_at_origin(u: VelocityField) -> np.ndarray:
    """The 2x2 matrix (d_j u_i)(x=0) by spectral differentiation."""
    grid = u.grid
    kx, ky = grid.wavenumbers()
    g = np.empty((2, 2))
    for i, comp in enumerate((u.u1, u.u2)):
        c = comp.coeffs
        g[i, 0] = float(np.real(np.sum(1j * kx * c)))
        g[i, 1] = float(np.real(np.sum(1j * ky * c)))
    return g


def grad_u_at_origin_from_omega(omega: SpectralScalarField) -> np.ndarray:
    kx, ky = omega.grid.wavenumbers()
    mults = gradient_multipliers(kx, ky)
    c = omega.coeffs
    vals = [float(np.real(np.sum(m * c))) for m in mults]
    return np.array([[vals[0], vals[1]], [vals[2], vals[3]]])


@dataclass
class TracerEnsemble:
    """Lagrangian points with attached 2x2 deformation matrices."""

    x0: np.ndarray
    pos: np.ndarray
    D: np.ndarray

    @classmethod
    def from_points(cls, points) -> "TracerEnsemble":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        P = pts.shape[0]
        D = np.tile(np.eye(2), (P, 1, 1))
        return cls(x0=pts.copy(), pos=pts.copy(), D=D)

    def __len__(self):
        return self.pos.shape[0]

    def det(self) -> np.ndarray:
        return np.linalg.det(self.D)

    def wrap(self):
        self.pos = np.mod(self.pos, 2.0)


def _stage_list(u_stages):
    if isinstance(u_stages, VelocityField):
        return [u_stages] * 4
    u_stages = list(u_stages)
    if len(u_stages) != 4:
        raise ValueError("need one velocity field or four RK stage fields")
    return u_stages


def _grad_u_eval(u: VelocityField, pts: np.ndarray) -> np.ndarray:
    """(P,2,2) velocity-gradient matrices at points, by spectral differentiation."""
    grid = u.grid
    kx, ky = grid.wavenumbers()
    out = np.empty((pts.shape[0], 2, 2))
    for i, comp in enumerate((u.u1, u.u2)):
        c = comp.coeffs
        out[:, i, 0] = eval_coeffs_at_points(grid, 1j * kx * c, pts)
        out[:, i, 1] = eval_coeffs_at_points(grid, 1j * ky * c, pts)
    return out


def advance_tracers(ens: TracerEnsemble, u_stages, dt: float) -> TracerEnsemble:
    """One RK4 step of positions and deformation matrices.

    u_stages: a single (steady) VelocityField or the four solver RK stage
    velocity fields at times (t, t+dt/2, t+dt/2, t+dt).
    """
    us = _stage_list(u_stages)

    def f(stage, pts, D):
        v = velocity_at(us[stage], pts)
        g = _grad_u_eval(us[stage], pts)
        return v, np.einsum("pij,pjk->pik", g, D)

    x, D = ens.pos, ens.D
    k1x, k1d = f(0, x, D)
    k2x, k2d = f(1, x + 0.5 * dt * k1x, D + 0.5 * dt * k1d)
    k3x, k3d = f(2, x + 0.5 * dt * k2x, D + 0.5 * dt * k2d)
    k4x, k4d = f(3, x + dt * k3x, D + dt * k3d)
    ens.pos = np.mod(x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x), 2.0)
    ens.D = D + dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
    return ens


@dataclass
class OriginTracker:
    """Time series of grad u(t,0) and the origin deformation matrix.

    The origin is a fixed point by odd-odd symmetry, so only the 2x2
    variational ODE dD/dt = grad u(t,0) D is integrated.
    """

    D: np.ndarray = field(default_factory=lambda: np.eye(2))
    times: list = field(default_factory=list)
    grads: list = field(default_factory=list)
    Ds: list = field(default_factory=list)

    def record(self, t: float, g: np.ndarray):
        self.times.append(float(t))
        self.grads.append(np.array(g, dtype=float))
        self.Ds.append(self.D.copy())

    def rk4_update(self, g_stages, dt: float):
        """Advance D with the four stage gradient matrices."""
        D = self.D
        k1 = g_stages[0] @ D
        k2 = g_stages[1] @ (D + 0.5 * dt * k1)
        k3 = g_stages[2] @ (D + 0.5 * dt * k2)
        k4 = g_stages[3] @ (D + dt * k3)
        self.D = D + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def series(self):
        """(t, du11, du22, du12, du21, d11, d22, d12, d21, det) arrays."""
        t = np.asarray(self.times)
        g = np.asarray(self.grads)
        d = np.asarray(self.Ds)
        det = d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]
        return {
            "t": t,
            "du11": g[:, 0, 0],
            "du22": g[:, 1, 1],
            "du12": g[:, 0, 1],
            "du21": g[:, 1, 0],
            "deta11": d[:, 0, 0],
            "deta22": d[:, 1, 1],
            "deta12": d[:, 0, 1],
            "deta21": d[:, 1, 0],
            "det": det,
        }


def torus_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-image Euclidean distance on the period-2 torus."""
    d = np.mod(np.asarray(a) - np.asarray(b) + 1.0, 2.0) - 1.0
    return np.sqrt(np.sum(d * d, axis=-1))


def yudovich_check(x_pairs, eta_pairs, t: float, omega_inf: float, c: float):
    """Two-sided Holder bound on pair separations under the flow map.

    x_pairs, eta_pairs: (P, 2, 2) arrays of initial and current positions for
    P point pairs.  Returns a report dict with per-pair pass flags.
    """
    x_pairs = np.asarray(x_pairs, dtype=float)
    eta_pairs = np.asarray(eta_pairs, dtype=float)
    d0 = torus_distance(x_pairs[:, 0], x_pairs[:, 1])
    dt_ = torus_distance(eta_pairs[:, 0], eta_pairs[:, 1])
    expo = c * t * omega_inf
    lower = d0 ** (1.0 + expo)
    upper = d0 ** (1.0 - expo)
    ok = (dt_ >= lower) & (dt_ <= upper)
    return {
        "d0": d0,
        "dt": dt_,
        "lower": lower,
        "upper": upper,
        "pass": ok,
        "all_pass": bool(np.all(ok)),
    }


def min_yudovich_c(x_pairs, eta_pairs, t: float, omega_inf: float) -> float:
    """Smallest c for which the two-sided bound holds for these pairs at time t.

    With alpha = ln d(t) / ln d(0) (separations below 1, so logs negative),
    the bound reads |alpha - 1| <= c t ||omega_0||_inf.
    """
    d0 = torus_distance(np.asarray(x_pairs)[:, 0], np.asarray(x_pairs)[:, 1])
    dt_ = torus_distance(np.asarray(eta_pairs)[:, 0], np.asarray(eta_pairs)[:, 1])
    good = (d0 > 0) & (d0 < 1.0) & (dt_ > 0)
    alpha = np.log(dt_[good]) / np.log(d0[good])
    if t <= 0 or omega_inf <= 0 or alpha.size == 0:
        return 0.0
    return float(np.max(np.abs(alpha - 1.0)) / (t * omega_inf))


def polar_consistency(times, traj, I_of_tr, B_bound: float):
    """Residual of the radial trajectory equation d|eta|/dt = |eta| cos(2 theta) I(t,|eta|) + B-term.

    times: (T,) sample times; traj: (T, P, 2) positions (origin-centered
    coordinates in [-1,1)); I_of_tr: callable (time index, radius) -> key
    integral value; B_bound: measured sup |B|.  Returns per-(time, tracer)
    residuals and the allowed bound |eta| * B_bound.
    """
    times = np.asarray(times, dtype=float)
    traj = np.asarray(traj, dtype=float)
    ctr = np.mod(traj + 1.0, 2.0) - 1.0
    r = np.hypot(ctr[..., 0], ctr[..., 1])
    theta = np.arctan2(ctr[..., 1], ctr[..., 0])
    T = times.size
    resid = np.full((T - 2, r.shape[1]), np.nan)
    allowed = np.full_like(resid, np.nan)
    for i in range(1, T - 1):
        drdt = (r[i + 1] - r[i - 1]) / (times[i + 1] - times[i - 1])
        ivals = np.array([I_of_tr(i, rr) for rr in r[i]])
        model = r[i] * np.cos(2.0 * theta[i]) * ivals
        resid[i - 1] = np.abs(drdt - model)
        allowed[i - 1] = r[i] * B_bound
    return {"residual": resid, "allowed": allowed, "r": r, "theta": theta}
