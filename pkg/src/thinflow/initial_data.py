"""Multi-scale odd-odd vorticity data: quadrupole bubbles over a plateau background.

All generators evaluate analytic formulas at sample points (never in spectral
space) so that odd-odd symmetry and support disjointness hold exactly on the
grid.  Points are taken modulo the period into [-1, 1)^2, with the stagnation
point at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .spectral import Grid, SpectralScalarField, UnderResolved
from .util import smoothstep


def bump(r):
    """Smooth radial profile: 1 on [0, 1/8], 0 on [1/4, inf), C-infinity monotone."""
    return smoothstep((0.25 - np.asarray(r, dtype=float)) * 8.0)


def a_seq(ell, eps: float):
    """Bubble amplitude a_ell = ell^(-1/2 - eps)."""
    ell = np.asarray(ell, dtype=float)
    out = ell ** (-0.5 - eps)
    if out.ndim == 0:
        return float(out)
    return out


def _wrap(x):
    """Map coordinates into the centered fundamental domain [-1, 1)."""
    return np.mod(np.asarray(x, dtype=float) + 1.0, 2.0) - 1.0


def phi0(x1, x2):
    """Odd-odd quadrupole: signed copies of the radial bump at (+-1, +-1).

    The four supports live in separate quadrants, so the sum reduces to a
    sign times a single bump evaluation in quadrant magnitudes.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = np.hypot(np.abs(x1) - 1.0, np.abs(x2) - 1.0)
    return np.sign(x1) * np.sign(x2) * bump(r)


@dataclass(frozen=True)
class BubbleConfig:
    """Parameters fully determining the initial vorticity family.

    l0, n bound the bubble scales 2^-l0 .. 2^-n; the smallest blob sits at
    scale 2^-2n.  bg_outer/bg_inner are the background plateau margins
    (defaults reproduce the construction margins 2^(-l0+2), 2^(-l0+3),
    which require l0 >= 5 to be geometrically nonempty; desk-scale configs
    with small l0 must set them explicitly).
    """

    l0: int = 10
    n: int = 12
    eps: float = 0.125
    amplitude: float = 1.0
    small_scale_amplitude: float = 1.0
    background_amplitude: float = 1.0
    bg_outer: float | None = None
    bg_inner: float | None = None

    def __post_init__(self):
        if self.l0 < 1:
            raise ValueError("l0 must be >= 1")
        if self.n < self.l0:
            raise ValueError("need n >= l0")
        if not (0.0 < self.eps < 0.25):
            raise ValueError("eps must lie in (0, 1/4)")
        mo, mi = self.margins()
        if self.background_amplitude != 0.0:
            if not (0.0 < mo < mi < 0.5):
                raise ValueError(
                    f"background margins (outer={mo:g}, inner={mi:g}) leave no plateau; "
                    "set bg_outer/bg_inner explicitly or disable the background"
                )
            if mo < 1.25 * 2.0**-self.l0:
                raise ValueError(
                    f"bg_outer={mo:g} overlaps the scale-2^-{self.l0} bubble support"
                )

    def margins(self):
        mo = 2.0 ** (-self.l0 + 2) if self.bg_outer is None else self.bg_outer
        mi = 2.0 ** (-self.l0 + 3) if self.bg_inner is None else self.bg_inner
        return mo, mi

    @property
    def min_grid_size(self) -> int:
        return 2 ** (2 * self.n + 4)

    def a(self, ell):
        return a_seq(ell, self.eps)


def background_omega_tilde(x1, x2, cfg: BubbleConfig):
    """Odd-odd plateau background: 1 on the inner square of [0,1]^2, 0 outside the outer one."""
    mo, mi = cfg.margins()
    x1 = _wrap(x1)
    x2 = _wrap(x2)

    def ramp(a):
        a = np.abs(a)
        rise = smoothstep((a - mo) / (mi - mo))
        fall = smoothstep((1.0 - mo - a) / (mi - mo))
        return rise * fall

    return np.sign(x1) * np.sign(x2) * ramp(x1) * ramp(x2)


def component_keys(cfg: BubbleConfig) -> list:
    """Keys of the additive pieces: bubble scales l0..n, 2n, "background"."""
    keys = list(range(cfg.l0, cfg.n + 1))
    if 2 * cfg.n not in keys:
        keys.append(2 * cfg.n)
    if cfg.background_amplitude != 0.0:
        keys.append("background")
    return keys


def component_value(x1, x2, cfg: BubbleConfig, key):
    """Unit-amplitude point evaluation of one additive component of the data."""
    x1 = _wrap(x1)
    x2 = _wrap(x2)
    if key == "background":
        return background_omega_tilde(x1, x2, cfg)
    s = 2.0 ** int(key)
    return phi0(s * x1, s * x2)


def component_amplitude(cfg: BubbleConfig, key) -> float:
    """Signed coefficient multiplying the unit-amplitude component."""
    if key == "background":
        return cfg.amplitude * cfg.background_amplitude
    if key == 2 * cfg.n and not (cfg.l0 <= key <= cfg.n):
        return cfg.amplitude * cfg.small_scale_amplitude
    amp = cfg.amplitude * cfg.a(int(key))
    if key == 2 * cfg.n:
        # the scale coincides with a bubble scale: the blob rides on top
        amp += cfg.amplitude * cfg.small_scale_amplitude
    return amp


def omega0_value(x1, x2, cfg: BubbleConfig):
    """Point evaluation of the initial vorticity (vectorized over arrays)."""
    total = np.zeros(np.broadcast(x1, x2).shape)
    for key in component_keys(cfg):
        total += component_amplitude(cfg, key) * component_value(x1, x2, cfg, key)
    return total


def assemble_omega0(cfg: BubbleConfig, grid: Grid, allow_underresolved: bool = False) -> SpectralScalarField:
    """Sample the initial vorticity on the grid.

    Refuses grids too coarse for the smallest blob (N < 2^(2n+4)) unless
    explicitly overridden, in which case the caller owns the aliasing.
    """
    if grid.N < cfg.min_grid_size and not allow_underresolved:
        raise UnderResolved(
            f"N={grid.N} < 2^(2n+4)={cfg.min_grid_size} would alias the scale-2^-{2 * cfg.n} blob"
        )
    X1, X2 = grid.meshgrid()
    return SpectralScalarField.from_samples(grid, omega0_value(X1, X2, cfg))


def partial_sums(cfg: BubbleConfig) -> np.ndarray:
    """S_0..S_n with S_0 = 1, S_k = S_{k-1} + a_k."""
    s = np.ones(cfg.n + 1)
    if cfg.n >= 1:
        s[1:] = 1.0 + np.cumsum(cfg.a(np.arange(1, cfg.n + 1)))
    return s


def continuum_value(x1, x2, eps: float):
    """Continuum analogue g(r) sin(2 theta) with g(r) = |ln r|^(-1/2-eps), cut off past r = 1/2."""
    x1 = _wrap(x1)
    x2 = _wrap(x2)
    r = np.hypot(x1, x2)
    # the cutoff kills r >= 0.7 anyway; restricting first keeps |ln r| bounded
    # away from 0 (r -> 1 would otherwise blow up g before the cutoff applies)
    inside = (r > 0.0) & (r < 0.7)
    rs = np.where(inside, r, 0.5)
    g = np.where(inside, np.abs(np.log(rs)) ** (-0.5 - eps), 0.0)
    sin2t = np.where(inside, 2.0 * x1 * x2 / rs**2, 0.0)
    cut = smoothstep((0.7 - r) / 0.2)  # 1 for r <= 1/2, 0 for r >= 0.7
    return g * sin2t * cut


def continuum_data(grid: Grid, eps: float, n: int = 8) -> SpectralScalarField:
    """Grid field of the continuum data, mollified at scale 2^(-n-1)."""
    X1, X2 = grid.meshgrid()
    f = SpectralScalarField.from_samples(grid, continuum_value(X1, X2, eps))
    sigma = 2.0 ** (-n - 1)
    mollifier = np.exp(-0.5 * grid.ksq() * sigma**2)
    return SpectralScalarField.from_coeffs(grid, f.coeffs * mollifier)


def rescaled(cfg: BubbleConfig, delta: float, c0: float) -> BubbleConfig:
    """Variant with the smallest blob damped by (S_n * delta)^(-c0/4)."""
    sn = partial_sums(cfg)[-1]
    return replace(cfg, small_scale_amplitude=cfg.small_scale_amplitude * (sn * delta) ** (-c0 / 4.0))
