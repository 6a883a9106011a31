"""
Binary file formats for fields and sinograms.

Field format "MRAYFLD1": 8-byte magic, little-endian u32 version=1, u32 n,
u32 Nt, u32 Nx, f64 Lx, f64 T, f64 t1, f64 R0, u8 isComplex, then row-major
f64 data (re, im interleaved when complex).

Sinogram format "MRAYSIN1": 8-byte magic, u32 version=1, u32 n, u32 Ny per
axis, f64 Lx, u32 Ntheta, u32 scheme id (0 = uniform angles, 1 = Gauss-
Legendre polar x uniform azimuth), then f64 directions (Ntheta x n), f64
weights (Ntheta), and the complex data, row-major with theta last.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import GridSpec, ScalarField
from .lightray import RayChart, Sinogram

__all__ = ["write_field", "read_field", "write_sinogram", "read_sinogram", "FormatError"]

FIELD_MAGIC = b"MRAYFLD1"
SINO_MAGIC = b"MRAYSIN1"


class FormatError(ValueError):
    """Malformed or unsupported file content."""


def write_field(path, f: ScalarField):
    spec = f.spec
    header = FIELD_MAGIC + struct.pack(
        "<IIIIddddB", 1, spec.n, spec.Nt, spec.Nx,
        spec.Lx, spec.T, spec.t1, f.support_radius, 1)
    with open(path, "wb") as fh:
        fh.write(header)
        np.ascontiguousarray(f.values, dtype="<c16").tofile(fh)


def read_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != FIELD_MAGIC:
            raise FormatError(f"bad field magic {magic!r}")
        head = fh.read(struct.calcsize("<IIIIddddB"))
        version, n, Nt, Nx, Lx, T, t1, r0, is_complex = struct.unpack("<IIIIddddB", head)
        if version != 1:
            raise FormatError(f"unsupported field version {version}")
        spec = GridSpec(n=n, Nx=Nx, Lx=Lx, Nt=Nt, T=T, t1=t1)
        count = Nt * Nx ** n
        if is_complex:
            data = np.fromfile(fh, dtype="<c16", count=count)
        else:
            data = np.fromfile(fh, dtype="<f8", count=count).astype(np.complex128)
        if data.size != count:
            raise FormatError("truncated field data")
    return ScalarField(spec, data.reshape((Nt,) + (Nx,) * n), support_radius=r0)


def write_sinogram(path, s: Sinogram):
    chart = s.chart
    spec = chart.spec
    ntheta = chart.directions.shape[0]
    header = SINO_MAGIC + struct.pack(
        "<IIIdII", 1, spec.n, spec.Nx, spec.Lx, ntheta, chart.scheme_id)
    with open(path, "wb") as fh:
        fh.write(header)
        np.ascontiguousarray(chart.directions, dtype="<f8").tofile(fh)
        np.ascontiguousarray(chart.weights, dtype="<f8").tofile(fh)
        np.ascontiguousarray(s.values, dtype="<c16").tofile(fh)


def read_sinogram(path, spec: GridSpec) -> Sinogram:
    """
    Read a sinogram; the grid spec supplies the time-window metadata that
    the chart itself does not carry.
    """
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SINO_MAGIC:
            raise FormatError(f"bad sinogram magic {magic!r}")
        head = fh.read(struct.calcsize("<IIIdII"))
        version, n, Ny, Lx, ntheta, scheme = struct.unpack("<IIIdII", head)
        if version != 1:
            raise FormatError(f"unsupported sinogram version {version}")
        if n != spec.n or Ny != spec.Nx or abs(Lx - spec.Lx) > 1e-12:
            raise FormatError("sinogram geometry does not match the grid spec")
        dirs = np.fromfile(fh, dtype="<f8", count=ntheta * n).reshape(ntheta, n)
        weights = np.fromfile(fh, dtype="<f8", count=ntheta)
        count = Ny ** n * ntheta
        data = np.fromfile(fh, dtype="<c16", count=count)
        if data.size != count:
            raise FormatError("truncated sinogram data")
    chart = RayChart(spec=spec, directions=dirs, weights=weights,
                     s_step=0.5 * spec.dx, scheme_id=scheme)
    return Sinogram(chart, data.reshape((Ny,) * n + (ntheta,)))
