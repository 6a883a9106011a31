"""
Spacetime grids, spectral transforms, and Sobolev norms.

The spatial domain is the periodic box [-Lx, Lx)^n sampled on Nx points per
axis; the time window is [0, T] sampled inclusively on Nt points.  All
spectral operations use the continuum-normalized transform pair

    F(xi) = sum_x f(x) exp(-i x.xi) dx^n,       xi in (pi/Lx) * Z^n,
    f(x)  = (2 Lx)^{-n} sum_xi F(xi) exp(i x.xi),

so that discrete sums mirror the corresponding integrals.  The box is large
enough (support invariant) that nothing propagating at unit speed wraps
around within the data window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "GridSpec",
    "SpatialField",
    "ScalarField",
    "SpectrumTable",
    "SupportError",
    "fft_spatial",
    "ifft_spatial",
    "sobolev_norm",
    "l2_norm_spatial",
    "l2_norm_spacetime",
    "inner_spatial",
    "inner_spacetime",
    "time_weights",
    "time_truncation_weights",
    "validate_support",
    "xi_axes",
    "xi_norm",
    "random_bandlimited",
]


class SupportError(ValueError):
    """Declared data support is too large for the periodic box."""


def _is_pow2(k: int) -> bool:
    return k >= 2 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """
    Discretization of the spacetime slab [0, T] x [-Lx, Lx)^n.

    Parameters
    ----------
    n : spatial dimension, 2 or 3.
    Nx : samples per spatial axis (power of two).
    Lx : half-width of the periodic spatial box.
    Nt : time samples on [0, T] inclusive (power of two).
    T : final time of the computational window.
    t1 : end of the data window, 0 < t1 < T; must lie on the time grid.
    """

    n: int
    Nx: int
    Lx: float
    Nt: int
    T: float
    t1: float

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"spatial dimension must be 2 or 3, got {self.n}")
        if not _is_pow2(self.Nx):
            raise ValueError(f"Nx must be a power of two, got {self.Nx}")
        if not _is_pow2(self.Nt):
            raise ValueError(f"Nt must be a power of two, got {self.Nt}")
        if not (self.Lx > 0 and self.T > 0):
            raise ValueError("Lx and T must be positive")
        if not (0.0 < self.t1 < self.T):
            raise ValueError(f"need 0 < t1 < T, got t1={self.t1}, T={self.T}")

    @property
    def dx(self) -> float:
        return 2.0 * self.Lx / self.Nx

    @property
    def dt(self) -> float:
        return self.T / (self.Nt - 1)

    @property
    def i_t1(self) -> int:
        """Index of the data-window end on the time grid."""
        return int(round(self.t1 / self.dt))

    @property
    def nyquist(self) -> float:
        return np.pi / self.dx

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.Nx,) * self.n

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.Nt)

    def x_axis(self) -> np.ndarray:
        return -self.Lx + self.dx * np.arange(self.Nx)

    def xi_axis(self) -> np.ndarray:
        """Dual frequencies (pi/Lx) * k in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.Nx, d=self.dx)

    def with_refined(self, factor: int = 2) -> "GridSpec":
        """Grid with factor-times more points per spatial and time axis."""
        return GridSpec(self.n, self.Nx * factor, self.Lx, self.Nt * factor,
                        self.T, self.t1)


@lru_cache(maxsize=64)
def xi_axes(spec: GridSpec) -> tuple[np.ndarray, ...]:
    """Per-axis dual frequencies, shaped for broadcasting over the box."""
    ax = spec.xi_axis()
    out = []
    for m in range(spec.n):
        shape = [1] * spec.n
        shape[m] = spec.Nx
        out.append(ax.reshape(shape))
    return tuple(out)


@lru_cache(maxsize=64)
def xi_norm(spec: GridSpec) -> np.ndarray:
    """|xi| on the full spatial frequency grid."""
    axes = xi_axes(spec)
    r2 = np.zeros(spec.spatial_shape)
    for a in axes:
        r2 = r2 + a * a
    return np.sqrt(r2)


@lru_cache(maxsize=64)
def _phase_signs(spec: GridSpec) -> np.ndarray:
    """(-1)^(k1+...+kn): the grid-origin phase of the normalized transform."""
    s = 1.0 - 2.0 * (np.arange(spec.Nx) & 1)
    out = np.ones(spec.spatial_shape)
    for m in range(spec.n):
        shape = [1] * spec.n
        shape[m] = spec.Nx
        out = out * s.reshape(shape)
    return out


@dataclass
class SpatialField:
    """Complex samples of a function on the spatial box."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.spec.spatial_shape:
            raise ValueError(
                f"spatial field shape {self.values.shape} does not match "
                f"grid {self.spec.spatial_shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spatial field contains non-finite values")

    def copy(self) -> "SpatialField":
        return SpatialField(self.spec, self.values.copy())


@dataclass
class ScalarField:
    """Complex samples of a spacetime function, indexed (time, space...)."""

    spec: GridSpec
    values: np.ndarray
    support_radius: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        expect = (self.spec.Nt,) + self.spec.spatial_shape
        if self.values.shape != expect:
            raise ValueError(
                f"scalar field shape {self.values.shape} does not match grid {expect}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field contains non-finite values")

    def copy(self) -> "ScalarField":
        return ScalarField(self.spec, self.values.copy(), self.support_radius)


@dataclass
class SpectrumTable:
    """Normalized spatial spectrum on the dual grid, FFT ordering."""

    spec: GridSpec
    values: np.ndarray


def validate_support(spec: GridSpec, support_radius: float):
    """
    Enforce Lx >= R0 + T + 4 dx so that, at unit propagation speed, nothing
    started inside radius R0 reaches the periodic boundary within [0, T].
    """
    need = support_radius + spec.T + 4.0 * spec.dx
    if spec.Lx < need - 1e-12:
        raise SupportError(
            f"support radius {support_radius} with window T={spec.T} needs "
            f"Lx >= {need:.6g}, box has Lx={spec.Lx}")


def fft_spatial(f: SpatialField) -> SpectrumTable:
    """Normalized forward transform F(xi) = sum f(x) e^{-i x.xi} dx^n."""
    spec = f.spec
    vals = spec.dx ** spec.n * _phase_signs(spec) * np.fft.fftn(f.values)
    return SpectrumTable(spec, vals)


def ifft_spatial(table: SpectrumTable) -> SpatialField:
    """Inverse of :func:`fft_spatial`; roundtrips to machine precision."""
    spec = table.spec
    vals = np.fft.ifftn(table.values * _phase_signs(spec)) / spec.dx ** spec.n
    return SpatialField(spec, vals)


def time_weights(spec: GridSpec) -> np.ndarray:
    """Trapezoid weights for integrals over [0, T] on the time grid."""
    w = np.full(spec.Nt, spec.dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def time_truncation_weights(spec: GridSpec, t1: float | None = None) -> np.ndarray:
    """
    Cell-averaged characteristic function of [0, t1] on the time grid: each
    sample carries the fraction of its cell lying below t1 (1/2 when t1 sits
    exactly on a grid point).
    """
    if t1 is None:
        t1 = spec.t1
    return np.clip((t1 - spec.times()) / spec.dt + 0.5, 0.0, 1.0)


def inner_spatial(f: SpatialField, g: SpatialField) -> complex:
    return complex(spec_dx_pow(f.spec) * np.sum(f.values * np.conj(g.values)))


def spec_dx_pow(spec: GridSpec) -> float:
    return spec.dx ** spec.n


def l2_norm_spatial(f: SpatialField) -> float:
    return float(np.sqrt(spec_dx_pow(f.spec) * np.sum(np.abs(f.values) ** 2)))


def inner_spacetime(u: ScalarField, v: ScalarField) -> complex:
    w = time_weights(u.spec)
    acc = np.sum(u.values * np.conj(v.values), axis=tuple(range(1, u.spec.n + 1)))
    return complex(spec_dx_pow(u.spec) * np.sum(w * acc))


def l2_norm_spacetime(u: ScalarField) -> float:
    w = time_weights(u.spec)
    acc = np.sum(np.abs(u.values) ** 2, axis=tuple(range(1, u.spec.n + 1)))
    return float(np.sqrt(spec_dx_pow(u.spec) * np.sum(w * acc)))


def sobolev_norm(f: SpatialField, s: float) -> float:
    """
    H^s norm: ((2pi)^{-n} int (1+|xi|^2)^s |F(xi)|^2 dxi)^{1/2}, realized as
    the plain sum over the dual grid.  s=0 recovers the L^2 norm.
    """
    if not np.isfinite(s):
        raise ValueError("Sobolev order must be finite")
    spec = f.spec
    F = fft_spatial(f).values
    weight = (1.0 + xi_norm(spec) ** 2) ** s
    total = np.sum(weight * np.abs(F) ** 2) / (2.0 * spec.Lx) ** spec.n
    return float(np.sqrt(total))


def random_bandlimited(spec: GridSpec, rng: np.random.Generator,
                       band: tuple[float, float],
                       window_radius: float | None = None) -> SpatialField:
    """
    Random smooth field with spatial spectrum concentrated in the annulus
    band=(lo, hi), optionally localized by a smooth spatial window.
    """
    lo, hi = band
    r = xi_norm(spec)
    mask = _smooth_annulus(r, lo, hi)
    coeff = rng.standard_normal(spec.spatial_shape) + 1j * rng.standard_normal(spec.spatial_shape)
    f = ifft_spatial(SpectrumTable(spec, coeff * mask))
    if window_radius is not None:
        x = spec.x_axis()
        rad2 = np.zeros(spec.spatial_shape)
        for m in range(spec.n):
            shape = [1] * spec.n
            shape[m] = spec.Nx
            rad2 = rad2 + x.reshape(shape) ** 2
        f.values *= _taper(np.sqrt(rad2), window_radius)
    # normalize to unit L2
    nrm = l2_norm_spatial(f)
    if nrm > 0:
        f.values /= nrm
    return f


def _smooth_annulus(r: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """C^inf bump equal to 1 on [lo, hi] with smooth shoulders of width lo/2, hi/4."""
    wlo = 0.5 * lo
    whi = 0.25 * hi
    up = _smoothstep((r - (lo - wlo)) / wlo)
    down = 1.0 - _smoothstep((r - hi) / whi)
    return up * down


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """C^inf transition: 0 for x<=0, 1 for x>=1."""
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0.0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
        b = np.where(x < 1.0, np.exp(-1.0 / np.maximum(1.0 - x, 1e-300)), 0.0)
    return a / (a + b)


def _taper(r: np.ndarray, radius: float) -> np.ndarray:
    """Smooth radial window: 1 inside radius/2, 0 beyond radius."""
    return 1.0 - _smoothstep((r - 0.5 * radius) / (0.5 * radius))
