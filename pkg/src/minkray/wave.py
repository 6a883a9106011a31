"""
Spectral solvers for the model operator and constant-coefficient normally
hyperbolic equations, plus a finite-difference path for variable coefficients.

Sign conventions, fixed once and unit-tested against plane waves:
the principal part is -d_t^2 + sum_j d_j^2, so a plane wave
exp(i(t tau + x.xi)) is annihilated when tau^2 - |xi|^2 + i(A0 tau + A'.xi)
+ B = 0.  The half-wave propagators act frequency-wise as exp(+-i t |xi|),
and the Cauchy data are re-parametrized by

    h1hat = (f1hat + f2hat / (i|xi|)) / 2,
    h2hat = (f1hat - f2hat / (i|xi|)) / 2,

with the zero-frequency slope f2hat(0) carried separately, since the split
divides by |xi|.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (GridSpec, ScalarField, SpatialField, validate_support,
                   time_weights, xi_axes, xi_norm)

__all__ = [
    "CauchyData",
    "ModePair",
    "WaveCoefficients",
    "DegenerateRootsError",
    "split_cauchy",
    "merge_modes",
    "half_wave",
    "half_wave_slice",
    "half_wave_adjoint",
    "mode_adjoint",
    "solve_cauchy_flat",
    "flat_solution",
    "mode_roots",
    "solve_cauchy_const",
    "const_solution",
    "solve_source_flat",
    "solve_cauchy_fd",
]


class DegenerateRootsError(ValueError):
    """Characteristic roots coincide at a nonzero frequency."""


@dataclass
class CauchyData:
    """Initial value and initial time derivative on the surface t=0."""

    f1: SpatialField
    f2: SpatialField
    support_radius: float = 0.0

    def __post_init__(self):
        if self.f1.spec != self.f2.spec:
            raise ValueError("Cauchy data components must share one grid")

    @property
    def spec(self) -> GridSpec:
        return self.f1.spec


@dataclass
class ModePair:
    """Re-parametrized Cauchy data feeding the two half-wave branches."""

    h1: SpatialField
    h2: SpatialField
    mean_slope: complex = 0.0 + 0.0j  # raw DC coefficient of f2

    def __post_init__(self):
        if self.h1.spec != self.h2.spec:
            raise ValueError("mode pair components must share one grid")

    @property
    def spec(self) -> GridSpec:
        return self.h1.spec


@dataclass
class WaveCoefficients:
    """
    Lower-order coefficients: constants A (length n+1, time component first)
    and B, with optional sampled fields for the finite-difference path.
    """

    A: tuple[float, ...]
    B: complex = 0.0
    variable_A: tuple[ScalarField, ...] | None = None
    variable_B: ScalarField | None = None

    def __post_init__(self):
        self.A = tuple(float(a) for a in self.A)
        if self.variable_A is not None and len(self.variable_A) != len(self.A):
            raise ValueError("variable_A must provide one field per coefficient")

    @property
    def is_constant(self) -> bool:
        return self.variable_A is None and self.variable_B is None

    @property
    def a_time(self) -> float:
        return self.A[0]

    def a_space(self, n: int) -> np.ndarray:
        if len(self.A) != n + 1:
            raise ValueError(f"expected {n + 1} coefficients, got {len(self.A)}")
        return np.asarray(self.A[1:], dtype=float)


def _raw_fft(values: np.ndarray, spec: GridSpec, spatial_offset: int = 0) -> np.ndarray:
    axes = tuple(range(spatial_offset, spatial_offset + spec.n))
    return np.fft.fftn(values, axes=axes)


def _raw_ifft(values: np.ndarray, spec: GridSpec, spatial_offset: int = 0) -> np.ndarray:
    axes = tuple(range(spatial_offset, spatial_offset + spec.n))
    return np.fft.ifftn(values, axes=axes)


def _safe_inv_r(spec: GridSpec) -> np.ndarray:
    r = xi_norm(spec)
    out = np.zeros_like(r)
    np.divide(1.0, r, out=out, where=r > 0)
    return out


_DC = None  # placeholder to keep imports tidy


def _dc_index(spec: GridSpec) -> tuple[int, ...]:
    return (0,) * spec.n


def split_cauchy(d: CauchyData) -> ModePair:
    """Frequency-wise split into the two characteristic branches."""
    spec = d.spec
    F1 = _raw_fft(d.f1.values, spec)
    F2 = _raw_fft(d.f2.values, spec)
    inv = _safe_inv_r(spec)
    half_ratio = (-0.5j) * F2 * inv  # f2hat / (2 i |xi|)
    h1 = 0.5 * F1 + half_ratio
    h2 = 0.5 * F1 - half_ratio
    dc = _dc_index(spec)
    slope = complex(F2[dc])
    h1[dc] = 0.5 * F1[dc]
    h2[dc] = 0.5 * F1[dc]
    return ModePair(SpatialField(spec, _raw_ifft(h1, spec)),
                    SpatialField(spec, _raw_ifft(h2, spec)),
                    mean_slope=slope)


def merge_modes(m: ModePair, support_radius: float = 0.0) -> CauchyData:
    """Exact inverse of the split away from xi=0; the DC slope is restored."""
    spec = m.spec
    H1 = _raw_fft(m.h1.values, spec)
    H2 = _raw_fft(m.h2.values, spec)
    F1 = H1 + H2
    F2 = 1j * xi_norm(spec) * (H1 - H2)
    F2[_dc_index(spec)] = m.mean_slope
    return CauchyData(SpatialField(spec, _raw_ifft(F1, spec)),
                      SpatialField(spec, _raw_ifft(F2, spec)),
                      support_radius=support_radius)


_evolution_cache: dict = {}


def _evolution_table(spec: GridSpec, sign: int) -> np.ndarray:
    """exp(sign * i * t_j * |xi|) for every grid time; cached when small."""
    key = (spec, sign)
    tab = _evolution_cache.get(key)
    if tab is not None:
        return tab
    times = spec.times()
    r = xi_norm(spec)
    tab = np.exp(1j * sign * times.reshape((-1,) + (1,) * spec.n) * r)
    if spec.Nt * spec.Nx ** spec.n <= 3 * 10 ** 7:
        if len(_evolution_cache) > 4:
            _evolution_cache.clear()
        _evolution_cache[key] = tab
    return tab


def half_wave(h: SpatialField, sign: int, support_radius: float = 0.0) -> ScalarField:
    """Unitary one-way evolution: uhat(t, xi) = exp(sign i t |xi|) hhat(xi)."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    spec = h.spec
    H = _raw_fft(h.values, spec)
    u_hat = _evolution_table(spec, sign) * H
    return ScalarField(spec, _raw_ifft(u_hat, spec, 1), support_radius=support_radius)


def half_wave_slice(h: SpatialField, sign: int, t: float) -> SpatialField:
    """Single time slice of the half-wave evolution, any real t."""
    spec = h.spec
    H = _raw_fft(h.values, spec)
    return SpatialField(spec, _raw_ifft(np.exp(1j * sign * t * xi_norm(spec)) * H, spec))


def half_wave_adjoint(v: ScalarField, sign: int,
                      time_weight: np.ndarray | None = None) -> SpatialField:
    """
    Adjoint of the half-wave propagator with an optional time weight:
    ghat(xi) = int_0^T exp(-sign i t |xi|) w(t) vhat(t, xi) dt by trapezoid.
    With w = 1 this is the exact discrete adjoint of :func:`half_wave` for
    the trapezoid spacetime inner product.
    """
    spec = v.spec
    wt = time_weights(spec)
    if time_weight is not None:
        wt = wt * np.asarray(time_weight, dtype=float)
    v_hat = _raw_fft(v.values, spec, 1)
    tab = _evolution_table(spec, sign)
    acc = np.zeros(spec.spatial_shape, dtype=np.complex128)
    for j in range(spec.Nt):
        if wt[j] != 0.0:
            acc += wt[j] * (np.conj(tab[j]) * v_hat[j])
    return SpatialField(spec, _raw_ifft(acc, spec))


def mode_adjoint(v: ScalarField, coeff: np.ndarray, tau: np.ndarray,
                 time_weight: np.ndarray | None = None) -> SpatialField:
    """
    Adjoint of the general one-branch propagator h -> coeff(xi) e^{i t tau(xi)} h:
    ghat = conj(coeff) * int exp(-i t conj(tau)) w(t) vhat dt.
    """
    spec = v.spec
    wt = time_weights(spec)
    if time_weight is not None:
        wt = wt * np.asarray(time_weight, dtype=float)
    v_hat = _raw_fft(v.values, spec, 1)
    times = spec.times()
    acc = np.zeros(spec.spatial_shape, dtype=np.complex128)
    ctau = np.conj(tau)
    for j in range(spec.Nt):
        if wt[j] != 0.0:
            acc += wt[j] * (np.exp(-1j * times[j] * ctau) * v_hat[j])
    acc *= np.conj(coeff)
    return SpatialField(spec, _raw_ifft(acc, spec))


@dataclass
class FlatSolution:
    """Per-frequency representation of a model Cauchy solution."""

    spec: GridSpec
    H1: np.ndarray
    H2: np.ndarray
    mean_slope: complex
    support_radius: float = 0.0

    def at_times(self, times: np.ndarray, derivative: int = 0) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        spec = self.spec
        r = xi_norm(spec)
        tshape = (-1,) + (1,) * spec.n
        ep = np.exp(1j * times.reshape(tshape) * r)
        ir = (1j * r) ** derivative
        u_hat = ir * ep * self.H1 + np.conj(ep) * ((-1j * r) ** derivative * self.H2)
        dc = (slice(None),) + _dc_index(spec)
        if derivative == 0:
            u_hat[dc] = self.H1[_dc_index(spec)] + self.H2[_dc_index(spec)] \
                + times * self.mean_slope
        elif derivative == 1:
            u_hat[dc] = self.mean_slope
        else:
            u_hat[dc] = 0.0
        return _raw_ifft(u_hat, spec, 1)

    def field(self) -> ScalarField:
        return ScalarField(self.spec, self.at_times(self.spec.times()),
                           support_radius=self.support_radius)


def flat_solution(d: CauchyData) -> FlatSolution:
    validate_support(d.spec, d.support_radius)
    m = split_cauchy(d)
    spec = d.spec
    return FlatSolution(spec, _raw_fft(m.h1.values, spec), _raw_fft(m.h2.values, spec),
                        m.mean_slope, d.support_radius)


def solve_cauchy_flat(d: CauchyData) -> ScalarField:
    """Exact spectral solution of the model Cauchy problem on the grid."""
    return flat_solution(d).field()


def mode_roots(xi_vec: np.ndarray, c: WaveCoefficients):
    """
    Characteristic roots tau+-(xi) of tau^2 - |xi|^2 + i(A0 tau + A'.xi) + B,
    ordered by decreasing real part (ties by decreasing imaginary part).

    xi_vec has shape (n,) or (n, ...); returns (tau_p, tau_m, degenerate).
    """
    if not c.is_constant:
        raise ValueError("mode roots require constant coefficients")
    xi_vec = np.asarray(xi_vec, dtype=float)
    if len(c.A) != xi_vec.shape[0] + 1:
        raise ValueError(f"expected {xi_vec.shape[0] + 1} coefficients, got {len(c.A)}")
    a0 = c.a_time
    aspace = np.asarray(c.A[1:], dtype=float)
    adotxi = np.tensordot(aspace, xi_vec, axes=(0, 0))
    r2 = np.sum(xi_vec * xi_vec, axis=0)
    disc = 4.0 * r2 - a0 * a0 - 4.0 * c.B - 4.0j * adotxi
    root = np.sqrt(disc.astype(np.complex128))
    # principal sqrt has Re >= 0; resolve Re == 0 ties toward Im >= 0
    flip = (root.real == 0) & (root.imag < 0)
    root = np.where(flip, -root, root)
    tau_p = 0.5 * (-1j * a0 + root)
    tau_m = 0.5 * (-1j * a0 - root)
    scale = 1.0 + np.maximum(np.abs(tau_p), np.abs(tau_m))
    degenerate = np.abs(root) < 1e-6 * scale
    return tau_p, tau_m, degenerate


@dataclass
class ConstSolution:
    """Per-frequency two-branch representation for constant coefficients."""

    spec: GridSpec
    tau_p: np.ndarray
    tau_m: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    jordan: np.ndarray
    support_radius: float = 0.0

    def _branch_coeffs(self):
        dtau = self.tau_m - self.tau_p
        inv = np.zeros_like(dtau)
        np.divide(1.0, dtau, out=inv, where=~self.jordan)
        c1p = self.tau_m * inv
        c2p = 1j * inv
        c1m = -self.tau_p * inv
        c2m = -1j * inv
        return c1p, c2p, c1m, c2m

    def part_coeff_tau(self, which: str):
        """(coefficient table, root table) for one tagged part."""
        c1p, c2p, c1m, c2m = self._branch_coeffs()
        table = {"u1p": (c1p, self.tau_p), "u2p": (c2p, self.tau_p),
                 "u1m": (c1m, self.tau_m), "u2m": (c2m, self.tau_m)}
        return table[which]

    def at_times(self, times: np.ndarray, derivative: int = 0,
                 parts: bool = False):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        spec = self.spec
        tshape = (-1,) + (1,) * spec.n
        tt = times.reshape(tshape)
        c1p, c2p, c1m, c2m = self._branch_coeffs()
        ep = np.exp(1j * tt * self.tau_p)
        em = np.exp(1j * tt * self.tau_m)
        dp = (1j * self.tau_p) ** derivative
        dm = (1j * self.tau_m) ** derivative
        p1p = dp * ep * (c1p * self.F1)
        p2p = dp * ep * (c2p * self.F2)
        p1m = dm * em * (c1m * self.F1)
        p2m = dm * em * (c2m * self.F2)
        if np.any(self.jordan):
            # confluent limit u = (f1 + t(f2 - i tbar f1)) e^{i t tbar},
            # split evenly over the two branch tags
            tbar = 0.5 * (self.tau_p + self.tau_m)
            eb = np.exp(1j * tt * tbar)
            if derivative == 0:
                j1 = 0.5 * eb * (self.F1 - 1j * tbar * tt * self.F1)
                j2 = 0.5 * eb * tt * self.F2
            elif derivative == 1:
                j1 = 0.5 * eb * ((tbar ** 2) * tt * self.F1)
                j2 = 0.5 * eb * (self.F2 + 1j * tbar * tt * self.F2)
            else:
                raise ValueError("confluent modes support derivative <= 1")
            mask = self.jordan
            p1p = np.where(mask, j1, p1p)
            p1m = np.where(mask, j1, p1m)
            p2p = np.where(mask, j2, p2p)
            p2m = np.where(mask, j2, p2m)
        if parts:
            return tuple(_raw_ifft(p, spec, 1) for p in (p1p, p1m, p2p, p2m))
        return _raw_ifft(p1p + p1m + p2p + p2m, spec, 1)

    def field(self) -> ScalarField:
        return ScalarField(self.spec, self.at_times(self.spec.times()),
                           support_radius=self.support_radius)


def const_solution(d: CauchyData, c: WaveCoefficients) -> ConstSolution:
    """
    Exact per-frequency solution for constant coefficients.  Degenerate
    (double) characteristic roots are only admissible at the lowest
    frequencies (|xi| within two grid cells of zero), where the confluent
    limit is used; in-band degeneracy is refused.
    """
    if not c.is_constant:
        raise ValueError("constant-coefficient solver requires constant coefficients")
    spec = d.spec
    validate_support(spec, d.support_radius)
    xi_vec = np.stack(np.broadcast_arrays(*xi_axes(spec)), axis=0)
    tau_p, tau_m, degen = mode_roots(xi_vec, c)
    r = xi_norm(spec)
    dxi = np.pi / spec.Lx
    bad = degen & (r > 2.0 * dxi)
    if np.any(bad):
        worst = np.unravel_index(np.argmax(bad), bad.shape)
        raise DegenerateRootsError(
            f"{int(np.sum(bad))} in-band frequencies have coinciding roots "
            f"(e.g. |xi|={r[worst]:.4g}); the two-branch splitting degenerates")
    F1 = _raw_fft(d.f1.values, spec)
    F2 = _raw_fft(d.f2.values, spec)
    return ConstSolution(spec, tau_p, tau_m, F1, F2, degen, d.support_radius)


def solve_cauchy_const(d: CauchyData, c: WaveCoefficients):
    """
    Returns (u, parts) with parts the four tagged branch fields
    {"u1p", "u1m", "u2p", "u2m"}; they sum to u.
    """
    sol = const_solution(d, c)
    times = sol.spec.times()
    p1p, p1m, p2p, p2m = sol.at_times(times, parts=True)
    parts = {
        "u1p": ScalarField(sol.spec, p1p, d.support_radius),
        "u1m": ScalarField(sol.spec, p1m, d.support_radius),
        "u2p": ScalarField(sol.spec, p2p, d.support_radius),
        "u2m": ScalarField(sol.spec, p2m, d.support_radius),
    }
    u = ScalarField(sol.spec, p1p + p1m + p2p + p2m, d.support_radius)
    return u, parts


def solve_source_flat(f: ScalarField, pad_factor: int = 2) -> ScalarField:
    """
    Causal solution of box u = f (zero for t < 0) by the per-frequency
    Duhamel formula

        uhat(t, xi) = - int_0^t sin((t-s)|xi|)/|xi| fhat(s, xi) ds,

    evaluated exactly for the trigonometric interpolant of fhat on the
    zero-padded time grid (spectrally accurate for sources smooth and
    compactly supported inside the window).
    """
    spec = f.spec
    if pad_factor < 2:
        raise ValueError("time padding must be at least 2x for a causal window")
    npad = pad_factor * spec.Nt
    nt, dt = spec.Nt, spec.dt
    G = _raw_fft(f.values, spec, 1)
    M = int(np.prod(spec.spatial_shape))
    Gflat = np.zeros((npad, M), dtype=np.complex128)
    Gflat[:nt] = G.reshape(nt, M)
    g = np.fft.fft(Gflat, axis=0) / npad
    mu = (2.0 * np.pi * np.fft.fftfreq(npad, d=dt)).reshape(-1, 1)
    dmu = 2.0 * np.pi / (npad * dt)
    r_all = xi_norm(spec).reshape(M)
    times = spec.times().reshape(-1, 1)
    out = np.empty((nt, M), dtype=np.complex128)

    chunk = max(1, int(4e6) // npad)
    for lo in range(0, M, chunk):
        hi = min(M, lo + chunk)
        r = r_all[lo:hi].reshape(1, -1)
        gc = g[:, lo:hi]
        zero_r = r_all[lo:hi] < 1e-12
        term = {}
        for sgn, label in ((-1, "minus"), (+1, "plus")):
            nu = mu + sgn * r  # minus branch pairs with e^{+i t r}
            small = np.abs(nu) < 1e-4 * dmu
            denom = np.where(small, 1.0, 1j * nu)
            coeff = np.where(small, 0.0, gc / denom)
            Q = npad * np.fft.ifft(coeff, axis=0)[:nt]
            P = np.sum(coeff, axis=0, keepdims=True)
            rot = np.exp(-1j * sgn * times * r)
            extra = np.zeros((nt, hi - lo), dtype=np.complex128)
            if np.any(small):
                # near-resonant terms handled by the stable finite-difference
                # quotient (e^{i t nu} - 1)/(i nu) = t e^{i t nu/2} sinc(t nu / 2pi)
                for l_idx, m_idx in zip(*np.nonzero(small)):
                    nv = nu[l_idx, m_idx]
                    w = times[:, 0] * nv
                    stable = times[:, 0] * np.exp(0.5j * w) * np.sinc(w / (2.0 * np.pi))
                    extra[:, m_idx] += gc[l_idx, m_idx] * stable
            term[label] = Q - rot * P + rot * extra
        r_safe = np.where(zero_r, 1.0, r_all[lo:hi]).reshape(1, -1)
        u_chunk = -(term["minus"] - term["plus"]) / (2j * r_safe)
        if np.any(zero_r):
            u_chunk[:, zero_r] = _source_dc_modes(gc[:, zero_r], mu[:, 0], times[:, 0])
        out[:, lo:hi] = u_chunk

    vals = _raw_ifft(out.reshape((nt,) + spec.spatial_shape), spec, 1)
    return ScalarField(spec, vals, support_radius=f.support_radius + spec.T)


def _source_dc_modes(g0: np.ndarray, mu: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Zero-frequency limit: uhat(t) = - int_0^t (t-s) fhat(s) ds."""
    npad = mu.size
    nt = times.size
    nz = mu != 0.0
    inv = np.zeros_like(mu, dtype=np.complex128)
    inv[nz] = 1.0 / (1j * mu[nz])
    c1 = g0 * inv[:, None]          # g_l / (i mu)
    c2 = c1 * inv[:, None]          # g_l / (i mu)^2
    s1 = np.sum(c1, axis=0)
    s2 = np.sum(c2, axis=0)
    Q2 = npad * np.fft.ifft(c2, axis=0)[:nt]
    out = times[:, None] * s1[None, :] - (Q2 - s2[None, :])
    out -= 0.5 * g0[0][None, :] * (times ** 2)[:, None]
    return out


def solve_cauchy_fd(d: CauchyData, c: WaveCoefficients,
                    cfl_limit: float = 0.5) -> ScalarField:
    """
    Second-order leapfrog for (possibly variable) coefficients; refuses when
    the CFL bound dt <= cfl_limit * dx is violated.  Converges at second
    order to the spectral solver for constant coefficients.
    """
    spec = d.spec
    validate_support(spec, d.support_radius)
    if spec.dt > cfl_limit * spec.dx + 1e-14:
        raise ValueError(
            f"CFL violation: dt={spec.dt:.4g} exceeds {cfl_limit} * dx={cfl_limit * spec.dx:.4g}")
    dt, dx = spec.dt, spec.dx
    shape = spec.spatial_shape

    def coeff_slice(j):
        if c.variable_A is not None:
            a = [fld.values[j] for fld in c.variable_A]
        else:
            a = [np.full(shape, c.A[m]) for m in range(spec.n + 1)]
        if c.variable_B is not None:
            b = c.variable_B.values[j]
        else:
            b = np.full(shape, complex(c.B))
        return a, b

    def lap(u):
        out = np.zeros_like(u)
        for m in range(spec.n):
            out += (np.roll(u, -1, axis=m) - 2.0 * u + np.roll(u, 1, axis=m)) / dx ** 2
        return out

    def grad(u, m):
        return (np.roll(u, -1, axis=m) - np.roll(u, 1, axis=m)) / (2.0 * dx)

    out = np.empty((spec.Nt,) + shape, dtype=np.complex128)
    u0 = d.f1.values.copy()
    a, b = coeff_slice(0)
    rhs0 = lap(u0) + b * u0
    for m in range(spec.n):
        rhs0 += a[m + 1] * grad(u0, m)
    utt0 = rhs0 + a[0] * d.f2.values
    u1 = u0 + dt * d.f2.values + 0.5 * dt * dt * utt0
    out[0] = u0
    out[1] = u1
    for j in range(1, spec.Nt - 1):
        a, b = coeff_slice(j)
        uc = out[j]
        um = out[j - 1]
        rhs = lap(uc) + b * uc
        for m in range(spec.n):
            rhs += a[m + 1] * grad(uc, m)
        denom = 1.0 - 0.5 * a[0] * dt
        out[j + 1] = (2.0 * uc - (1.0 + 0.5 * a[0] * dt) * um + dt * dt * rhs) / denom
    return ScalarField(spec, out, support_radius=d.support_radius)
