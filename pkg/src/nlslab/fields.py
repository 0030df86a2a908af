"""Square periodic complex fields and their spectral calculus.

Fields live on an n x n grid over [-L, L)^2 with the FFT convention
x_j = (j - n/2) dx, dx = 2L/n, so the origin is an actual node and the
far corner wraps periodically.  All derivatives are spectral; all field
norms use the flat measure dx^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.fft import fft2, fftfreq, ifft2

from .errors import ConfigError


@dataclass
class ComplexField2D:
    """n x n complex samples on the square [-L, L)^2."""

    values: np.ndarray
    box: float
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        n = self.values.shape[0]
        if self.values.ndim != 2 or self.values.shape != (n, n):
            raise ConfigError(f"field must be square, got shape {self.values.shape}")
        if n < 2 or n & (n - 1):
            raise ConfigError(f"grid size {n} is not a power of two")
        if self.box <= 0:
            raise ConfigError(f"box half-width must be positive, got {self.box}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dx(self) -> float:
        return 2.0 * self.box / self.n

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx

    def meshgrid(self):
        x = self.axis
        return np.meshgrid(x, x, indexing="ij")

    def copy(self) -> "ComplexField2D":
        return ComplexField2D(self.values.copy(), self.box, dict(self.meta))

    def boundary_ratio(self) -> float:
        """Largest boundary magnitude relative to the field's peak."""
        v = np.abs(self.values)
        edge = max(v[0, :].max(), v[-1, :].max(), v[:, 0].max(), v[:, -1].max())
        peak = v.max()
        return float(edge / peak) if peak > 0 else 0.0


def wavenumbers(field: ComplexField2D) -> np.ndarray:
    return 2.0 * np.pi * fftfreq(field.n, d=field.dx)


def laplacian(field: ComplexField2D) -> ComplexField2D:
    k = wavenumbers(field)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    return ComplexField2D(ifft2(-k2 * fft2(field.values)), field.box)


def gradient(field: ComplexField2D) -> tuple[ComplexField2D, ComplexField2D]:
    k = wavenumbers(field)
    hat = fft2(field.values)
    gx = ifft2(1j * k[:, None] * hat)
    gy = ifft2(1j * k[None, :] * hat)
    return ComplexField2D(gx, field.box), ComplexField2D(gy, field.box)


def mass(field: ComplexField2D) -> float:
    """Integral of |u|^2."""
    return float(np.sum(np.abs(field.values) ** 2) * field.dx**2)


def inner(fa: ComplexField2D, fb: ComplexField2D) -> float:
    """Real planar pairing Re int fa conj(fb)."""
    if fa.n != fb.n or fa.box != fb.box:
        raise ConfigError("paired fields must share grid and box")
    return float(np.real(np.sum(fa.values * np.conj(fb.values))) * fa.dx**2)


def gradient_norm_sq(field: ComplexField2D) -> float:
    """Integral of |grad u|^2, evaluated in Fourier space."""
    k = wavenumbers(field)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    hat = fft2(field.values)
    return float(np.sum(k2 * np.abs(hat) ** 2) / field.n**4 * (2.0 * field.box) ** 2)


def quartic_power(field: ComplexField2D) -> float:
    """Integral of |u|^4."""
    return float(np.sum(np.abs(field.values) ** 4) * field.dx**2)


def hamiltonian(field: ComplexField2D) -> float:
    """Focusing cubic energy (1/2) int |grad u|^2 - (1/4) int |u|^4."""
    return 0.5 * gradient_norm_sq(field) - 0.25 * quartic_power(field)


def variance(field: ComplexField2D) -> float:
    """Integral of |x|^2 |u|^2."""
    xx, yy = field.meshgrid()
    return float(np.sum((xx**2 + yy**2) * np.abs(field.values) ** 2) * field.dx**2)


def quarter_rotate(field: ComplexField2D, times: int = 1) -> ComplexField2D:
    """Exact rotation by times * 90 degrees about the origin node.

    Index relabeling with periodic wrap; np.rot90 would pivot about the
    half-node center of the index box instead of x = 0.
    """
    v = field.values
    n = field.n
    perm = (n - np.arange(n)) % n
    for _ in range(times % 4):
        v = v.T[perm, :]
    return ComplexField2D(v.copy(), field.box)


def high_wavenumber_fraction(field: ComplexField2D) -> float:
    """Spectral mass fraction above two thirds of the Nyquist wavenumber.

    A cheap aliasing monitor: well-resolved fields keep this near machine
    epsilon, and growth flags under-resolution before it corrupts the run.
    """
    hat = np.abs(fft2(field.values)) ** 2
    k = np.abs(fftfreq(field.n)) * field.n  # integer mode numbers
    k_max = field.n // 2
    outer = (k[:, None] > 2 * k_max / 3) | (k[None, :] > 2 * k_max / 3)
    total = float(np.sum(hat))
    return float(np.sum(hat[outer]) / total) if total > 0 else 0.0


def write_field(path, field: ComplexField2D, provenance: dict | None = None) -> None:
    """Raw little-endian complex128 dump plus a JSON sidecar."""
    path = Path(path)
    field.values.astype("<c16").tofile(path)
    meta = {"n": field.n, "box": field.box, "dtype": "<c16", "order": "C"}
    for key, val in field.meta.items():
        meta.setdefault(key, val)
    if provenance:
        meta["provenance"] = provenance
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def read_field(path) -> ComplexField2D:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    raw = np.fromfile(path, dtype="<c16")
    n = meta["n"]
    if raw.size != n * n:
        raise ConfigError(f"{path} holds {raw.size} samples, expected {n * n}")
    extra = {k: v for k, v in meta.items() if k not in ("n", "box", "dtype", "order")}
    return ComplexField2D(raw.reshape(n, n), meta["box"], extra)
