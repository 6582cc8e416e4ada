"""Periodic scalar/vector fields on the period-2 torus and their spectral calculus.

Conventions used throughout the package:

* the domain is [0, 2)^2 with N samples per axis, so the physical
  wavevector is k = pi * (m1, m2) for integer mode indices m;
* Fourier coefficients are averages (forward DFT divided by N^2), so the
  coefficient at k = 0 equals the mean of the samples;
* L2 norms carry the domain area factor: ||f||_{L2}^2 = 4 * sum |f_hat|^2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .util import fft2, ifft2

MAGIC = b"THINFLOW1"

#: domain period; fixed, everything assumes it
PERIOD = 2.0


class UnderResolved(Exception):
    """Requested construction needs a finer grid than provided."""


@dataclass(frozen=True)
class Grid:
    """Uniform N x N sampling of the torus [0, 2)^2, N a power of two >= 16."""

    N: int
    L: float = PERIOD

    def __post_init__(self):
        if self.L != PERIOD:
            raise ValueError("only the period-2 torus is supported")
        if self.N < 16 or (self.N & (self.N - 1)) != 0:
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        """1D sample coordinates in [0, 2)."""
        return np.arange(self.N) * self.h

    @property
    def modes(self) -> np.ndarray:
        """Integer mode indices in FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    def wavenumbers(self):
        """(kx, ky) physical wavevector arrays, k = pi * m."""
        k1 = np.pi * self.modes
        return np.meshgrid(k1, k1, indexing="ij")

    def ksq(self) -> np.ndarray:
        kx, ky = self.wavenumbers()
        return kx * kx + ky * ky

    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep |m| <= N/3 per axis."""
        m = np.abs(self.modes)
        keep = m <= self.N / 3.0
        return np.logical_and.outer(keep, keep)

    def meshgrid(self):
        return np.meshgrid(self.x, self.x, indexing="ij")


class SpectralScalarField:
    """Real periodic scalar with lazily synchronized sample/coefficient views."""

    def __init__(self, grid: Grid, samples=None, coeffs=None):
        if samples is None and coeffs is None:
            raise ValueError("need samples or coeffs")
        self.grid = grid
        self._samples = None if samples is None else np.asarray(samples, dtype=float)
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=complex)
        for a in (self._samples, self._coeffs):
            if a is not None and a.shape != (grid.N, grid.N):
                raise ValueError(f"array shape {a.shape} does not match grid N={grid.N}")

    @classmethod
    def from_samples(cls, grid: Grid, samples) -> "SpectralScalarField":
        return cls(grid, samples=samples)

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs) -> "SpectralScalarField":
        return cls(grid, coeffs=coeffs)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralScalarField":
        return cls(grid, samples=np.zeros((grid.N, grid.N)))

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            self._samples = np.real(ifft2(self._coeffs * self.grid.N**2))
        return self._samples

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = fft2(self._samples) / self.grid.N**2
        return self._coeffs

    @property
    def has_samples(self) -> bool:
        return self._samples is not None

    @property
    def has_coeffs(self) -> bool:
        return self._coeffs is not None

    def mean(self) -> float:
        if self._coeffs is not None:
            return float(np.real(self._coeffs[0, 0]))
        return float(np.mean(self._samples))

    def __add__(self, other):
        return SpectralScalarField(self.grid, samples=self.samples + other.samples)

    def __sub__(self, other):
        return SpectralScalarField(self.grid, samples=self.samples - other.samples)

    def __mul__(self, scalar):
        return SpectralScalarField(self.grid, samples=self.samples * float(scalar))

    __rmul__ = __mul__


@dataclass
class VelocityField:
    """Divergence-free velocity with two scalar components."""

    u1: SpectralScalarField
    u2: SpectralScalarField

    @property
    def grid(self) -> Grid:
        return self.u1.grid


def forward_transform(f: SpectralScalarField) -> np.ndarray:
    """Coefficient view of f (computing it if stale)."""
    return f.coeffs


def inverse_transform(grid: Grid, coeffs) -> SpectralScalarField:
    return SpectralScalarField.from_coeffs(grid, coeffs)


def gradient(f: SpectralScalarField):
    kx, ky = f.grid.wavenumbers()
    c = f.coeffs
    fx = SpectralScalarField.from_coeffs(f.grid, 1j * kx * c)
    fy = SpectralScalarField.from_coeffs(f.grid, 1j * ky * c)
    return fx, fy


def laplacian(f: SpectralScalarField) -> SpectralScalarField:
    return SpectralScalarField.from_coeffs(f.grid, -f.grid.ksq() * f.coeffs)


def dealias(f: SpectralScalarField) -> SpectralScalarField:
    return SpectralScalarField.from_coeffs(f.grid, f.coeffs * f.grid.dealias_mask())


def biot_savart(omega: SpectralScalarField) -> VelocityField:
    """Velocity u with curl u = omega, div u = 0, both components mean-free.

    Spectrally: u_hat = i k-perp / |k|^2 * omega_hat, zero at k = 0.
    Rejects fields whose mean is not negligible against ||omega||_{L2};
    a nonzero mean signals broken odd-odd symmetry upstream.
    """
    c = omega.coeffs
    l2 = l2_norm(omega)
    mean = abs(np.real(c[0, 0]))
    if mean > 1e-10 * l2 and l2 > 0:
        raise ValueError(f"biot_savart: field mean {mean:g} exceeds 1e-10 * ||omega||_L2 = {1e-10 * l2:g}")
    grid = omega.grid
    kx, ky = grid.wavenumbers()
    ksq = kx * kx + ky * ky
    inv = np.zeros_like(ksq)
    nz = ksq > 0
    inv[nz] = 1.0 / ksq[nz]
    u1c = 1j * ky * inv * c
    u2c = -1j * kx * inv * c
    return VelocityField(
        SpectralScalarField.from_coeffs(grid, u1c),
        SpectralScalarField.from_coeffs(grid, u2c),
    )


def curl(u: VelocityField) -> SpectralScalarField:
    kx, ky = u.grid.wavenumbers()
    return SpectralScalarField.from_coeffs(
        u.grid, 1j * kx * u.u2.coeffs - 1j * ky * u.u1.coeffs
    )


def divergence(u: VelocityField) -> SpectralScalarField:
    kx, ky = u.grid.wavenumbers()
    return SpectralScalarField.from_coeffs(
        u.grid, 1j * kx * u.u1.coeffs + 1j * ky * u.u2.coeffs
    )


def l2_norm(f: SpectralScalarField) -> float:
    """||f||_{L2([0,2)^2)} via Parseval."""
    if f.has_samples and not f.has_coeffs:
        return float(np.sqrt(4.0 * np.mean(f.samples**2)))
    return float(np.sqrt(4.0 * np.sum(np.abs(f.coeffs) ** 2)))


def linf_norm(f: SpectralScalarField) -> float:
    return float(np.max(np.abs(f.samples)))


def h1_seminorm(f: SpectralScalarField) -> float:
    """||grad f||_{L2}, the palinstrophy norm when f is vorticity."""
    return float(np.sqrt(4.0 * np.sum(f.grid.ksq() * np.abs(f.coeffs) ** 2)))


def norms(f: SpectralScalarField) -> dict:
    return {"l2": l2_norm(f), "linf": linf_norm(f), "h1": h1_seminorm(f)}


def velocity_l2(u: VelocityField) -> float:
    return float(np.sqrt(l2_norm(u.u1) ** 2 + l2_norm(u.u2) ** 2))


def odd_odd_residual(f: SpectralScalarField) -> float:
    """Max deviation from odd symmetry in each axis, at sample points."""
    s = f.samples
    # reflection x -> -x on the sample set maps index j to (-j) mod N
    refl1 = np.roll(s[::-1, :], 1, axis=0)
    refl2 = np.roll(s[:, ::-1], 1, axis=1)
    r1 = np.max(np.abs(s + refl1))
    r2 = np.max(np.abs(s + refl2))
    return float(max(r1, r2))


# --- checkpoint format -----------------------------------------------------
# header: magic "THINFLOW1", N u32 LE, t f64 LE, nu f64 LE,
# then N^2 f64 LE samples row-major.


def write_checkpoint(path, f: SpectralScalarField, t: float, nu: float) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Idd", f.grid.N, float(t), float(nu)))
        fh.write(np.ascontiguousarray(f.samples, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Returns (field, t, nu)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
        N, t, nu = struct.unpack("<Idd", fh.read(4 + 8 + 8))
        data = np.frombuffer(fh.read(8 * N * N), dtype="<f8").reshape(N, N)
    return SpectralScalarField.from_samples(Grid(N), data.copy()), t, nu
