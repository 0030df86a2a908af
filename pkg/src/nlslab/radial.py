"""Uniform radial grids, profiles, quadrature, and interpolation.

Radial functions live on uniform nodes r_i = i*h, i = 0..n-1, with the
planar measure 2*pi*r*dr understood by every integral in this module.
Profiles of definite parity are extended across r = 0 by ghost values so
that finite differences and splines keep fourth-order accuracy at the
origin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import ConfigError

PRODUCTION_R_MAX = 20.0
PRODUCTION_H = 0.01


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid on [0, r_max] with spacing h."""

    r_max: float = 30.0
    h: float = 0.005

    def __post_init__(self) -> None:
        if self.r_max <= 0 or self.h <= 0:
            raise ConfigError(f"grid needs positive r_max and h, got {self.r_max}, {self.h}")
        n_cells = self.r_max / self.h
        if abs(n_cells - round(n_cells)) > 1e-9 * n_cells:
            raise ConfigError(f"r_max = {self.r_max} is not a multiple of h = {self.h}")
        if self.r_max < PRODUCTION_R_MAX or self.h > PRODUCTION_H:
            warnings.warn(
                f"grid (r_max={self.r_max}, h={self.h}) is below production resolution",
                stacklevel=2,
            )

    @property
    def n(self) -> int:
        return round(self.r_max / self.h) + 1

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.n) * self.h


class RadialProfile:
    """Profile values sampled on a radial grid.

    Parameters
    ----------
    grid : RadialGrid
    values : array of grid.n samples
    parity : +1 if the planar function behind the profile is even across
        r = 0 (scalar radial functions), -1 if odd (radial factors of
        one-fold angular harmonics).
    """

    def __init__(self, grid: RadialGrid, values: np.ndarray, parity: int = 1) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise ConfigError(f"profile has {values.shape} values for a {grid.n}-node grid")
        if parity not in (1, -1):
            raise ConfigError("parity must be +1 or -1")
        self.grid = grid
        self.values = values
        self.parity = parity
        self._spline = None

    def interpolator(self):
        """Cubic interpolant in r, parity-extended at 0, zero beyond r_max."""
        if self._spline is None:
            g = self.grid
            ghost = 4
            r_ext = np.concatenate([-g.r[ghost:0:-1], g.r])
            v_ext = np.concatenate([self.parity * self.values[ghost:0:-1], self.values])
            self._spline = CubicSpline(r_ext, v_ext, extrapolate=False)
        spline, r_max = self._spline, self.grid.r_max

        def evaluate(r):
            r = np.asarray(r, dtype=float)
            out = spline(np.clip(r, 0.0, r_max))
            return np.where(r <= r_max, out, 0.0)

        return evaluate

    def __call__(self, r):
        return self.interpolator()(r)

    def derivative(self) -> "RadialProfile":
        """Fourth-order finite-difference radial derivative."""
        d = fd_derivative(self.values, self.grid.h, self.parity)
        return RadialProfile(self.grid, d, parity=-self.parity)

    def integral(self, weight: np.ndarray | None = None) -> float:
        """Planar integral of the profile (optionally * weight) against 2*pi*r*dr."""
        vals = self.values if weight is None else self.values * weight
        return radial_integral(self.grid, vals)

    def to_csv(self, path) -> None:
        write_profile_csv(path, self.grid.r, self.values)

    @classmethod
    def from_csv(cls, path, parity: int = 1) -> "RadialProfile":
        r, v = read_profile_csv(path)
        grid = RadialGrid(r_max=float(r[-1]), h=float(r[1] - r[0]))
        return cls(grid, v, parity=parity)


def radial_integral(grid: RadialGrid, values: np.ndarray) -> float:
    """Simpson integral of values(r) * 2*pi*r over [0, r_max]."""
    return float(simpson(np.asarray(values) * 2.0 * np.pi * grid.r, dx=grid.h))


def ghost_pad(values: np.ndarray, parity: int, width: int = 2) -> np.ndarray:
    """Extend values across r = 0 with the given parity."""
    return np.concatenate([parity * values[width:0:-1], values])


def fd_derivative(values: np.ndarray, h: float, parity: int = 1) -> np.ndarray:
    """First radial derivative, fourth-order central stencil with parity ghosts.

    The last two nodes use one-sided stencils; profiles that decay before
    r_max never notice.
    """
    v = ghost_pad(values, parity)
    n = len(values)
    d = np.empty(n)
    i = np.arange(2, n)
    d[: n - 2] = (v[i - 2] - 8 * v[i - 1] + 8 * v[i + 1] - v[i + 2]) / (12 * h)
    t = values[-5:]
    d[-2] = (-t[0] + 6 * t[1] - 18 * t[2] + 10 * t[3] + 3 * t[4]) / (12 * h)
    d[-1] = (3 * t[0] - 16 * t[1] + 36 * t[2] - 48 * t[3] + 25 * t[4]) / (12 * h)
    return d


def fd_second_derivative(values: np.ndarray, h: float, parity: int = 1) -> np.ndarray:
    """Second radial derivative, fourth-order central stencil with parity ghosts.

    The two outermost nodes fall back to second-order stencils, which is
    immaterial for exponentially decaying profiles.
    """
    v = ghost_pad(values, parity)
    n = len(values)
    d = np.empty(n)
    i = np.arange(2, n)
    d[: n - 2] = (-v[i - 2] + 16 * v[i - 1] - 30 * v[i] + 16 * v[i + 1] - v[i + 2]) / (12 * h**2)
    d[-2] = (values[-3] - 2 * values[-2] + values[-1]) / h**2
    d[-1] = (2 * values[-1] - 5 * values[-2] + 4 * values[-3] - values[-4]) / h**2
    return d


def write_profile_csv(path, r: np.ndarray, values: np.ndarray, header: str = "r,value") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for ri, vi in zip(r, values):
            fh.write(f"{ri:.17g},{vi:.17g}\n")


def read_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, comments="#", ndmin=2)
    if data.shape[0] == 0 or data.shape[1] != 2:
        raise ConfigError(f"{path} is not a two-column radial profile")
    return data[:, 0], data[:, 1]
