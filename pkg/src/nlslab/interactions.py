"""Bubble-overlap integrals and the attraction law between neighbors.

Everything here measures how exponentially localized bubbles feel each
other: brute-force planar quadratures of products of shifted copies of the
ground state, the closed-form asymptotic law those quadratures approach,
and the derived geometry constants (kappa, c_a) that turn the overlap
strength into the attraction coefficient a(z) of the reduced dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .groundstate import GroundStateData
from .radial import RadialProfile

DEFAULT_QUAD_POINTS = 2048


def kappa_of(K: int) -> float:
    """Distance |1 - exp(2 pi i / K)| between adjacent unit-circle K-th roots."""
    if K < 2:
        raise DomainError(f"need at least two bubbles, got K = {K}")
    return float(np.sqrt(2.0 - 2.0 * np.cos(2.0 * np.pi / K)))


@dataclass(frozen=True)
class GeometryConstants:
    """Ring geometry of K bubbles and the attraction constant c_a.

    c_a couples the nearest-neighbor overlap strength into the conformal
    parameter's source term; the K = 2 arrangement has a single closest
    neighbor per bubble, every K >= 3 ring has exactly two, whence the
    factor-2 split in the denominator.
    """

    K: int
    kappa: float
    c_a: float
    unit_vectors: np.ndarray

    def __post_init__(self):
        if self.K < 2:
            raise DomainError("construction requires at least two bubbles")
        if self.unit_vectors.shape != (self.K, 2):
            raise DomainError("unit_vectors must hold K planar directions")


def geometry_constants(gs: GroundStateData, K: int) -> GeometryConstants:
    kappa = kappa_of(K)
    angles = 2.0 * np.pi * np.arange(K) / K
    denom = 4.0 if K == 2 else 2.0
    c_a = np.sqrt(kappa) * gs.c_q * gs.i_q / (denom * gs.rho_dot_q)
    return GeometryConstants(
        K=K,
        kappa=kappa,
        c_a=float(c_a),
        unit_vectors=np.stack([np.cos(angles), np.sin(angles)], axis=1),
    )


def _cartesian_box(q: RadialProfile, n: int):
    """Quadrature nodes on [-L, L]^2 with L = r_max / sqrt(2).

    The box diagonal then matches the radial extent, so every node radius
    stays interpolable.
    """
    half = q.grid.r_max / np.sqrt(2.0)
    x = np.linspace(-half, half, n)
    return x, x[1] - x[0]


def _moment_weight(xx, yy, moment_q: int):
    if moment_q < 0:
        raise DomainError(f"moment order must be >= 0, got {moment_q}")
    if moment_q == 0:
        # moment 0 means unweighted, not 1 + |y|^0
        return 1.0
    return 1.0 + np.hypot(xx, yy) ** moment_q


def overlap_two(
    q: RadialProfile,
    omega: np.ndarray,
    moment_q: int = 0,
    n: int = DEFAULT_QUAD_POINTS,
) -> float:
    """Quadrature of (1 + |y|^moment) Q^3(y) Q(y - omega) over the plane."""
    omega = np.asarray(omega, dtype=float)
    if np.linalg.norm(omega) > q.grid.r_max / 2.0:
        raise DomainError(f"separation {np.linalg.norm(omega):.2f} exceeds half the radial extent")
    x, dx = _cartesian_box(q, n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    interp = q.interpolator()
    vals = (
        _moment_weight(xx, yy, moment_q)
        * interp(np.hypot(xx, yy)) ** 3
        * interp(np.hypot(xx - omega[0], yy - omega[1]))
    )
    return float(np.trapezoid(np.trapezoid(vals, dx=dx, axis=1), dx=dx))


def overlap_three(
    q: RadialProfile,
    omega: np.ndarray,
    omega2: np.ndarray,
    moment_q: int = 0,
    n: int = DEFAULT_QUAD_POINTS,
) -> float:
    """Quadrature of (1 + |y|^moment) Q^2(y) Q(y - omega) Q(y - omega2)."""
    omega = np.asarray(omega, dtype=float)
    omega2 = np.asarray(omega2, dtype=float)
    for sep in (omega, omega2):
        if np.linalg.norm(sep) > q.grid.r_max / 2.0:
            raise DomainError(f"separation {np.linalg.norm(sep):.2f} exceeds half the radial extent")
    x, dx = _cartesian_box(q, n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    interp = q.interpolator()
    vals = (
        _moment_weight(xx, yy, moment_q)
        * interp(np.hypot(xx, yy)) ** 2
        * interp(np.hypot(xx - omega[0], yy - omega[1]))
        * interp(np.hypot(xx - omega2[0], yy - omega2[1]))
    )
    return float(np.trapezoid(np.trapezoid(vals, dx=dx, axis=1), dx=dx))


def asymptotic_overlap(gs: GroundStateData, omega_norm: float) -> float:
    """Leading overlap law c_Q I_Q |omega|^{-1/2} e^{-|omega|}."""
    if omega_norm < 5.0:
        raise DomainError(f"asymptotic law needs |omega| >= 5, got {omega_norm}")
    return gs.c_q * gs.i_q * omega_norm**-0.5 * np.exp(-omega_norm)


def a_of_z(consts: GeometryConstants, z):
    """Attraction term a(z) = -c_a z^{1/2} e^{-kappa z}; scalar or array z."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("separation must be positive")
    out = -consts.c_a * np.sqrt(z) * np.exp(-consts.kappa * z)
    return float(out) if out.ndim == 0 else out


def a_prime_of_z(consts: GeometryConstants, z):
    """Closed-form derivative of a_of_z; scalar or array z."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("separation must be positive")
    out = (
        -consts.c_a
        * (0.5 / np.sqrt(z) - consts.kappa * np.sqrt(z))
        * np.exp(-consts.kappa * z)
    )
    return float(out) if out.ndim == 0 else out


def projection_G1_iQa(
    gs: GroundStateData,
    consts: GeometryConstants,
    p,
    n: int = DEFAULT_QUAD_POINTS,
) -> float:
    """Pairing of the first bubble's interaction field with i Q_a.

    Assembles, on a Cartesian grid centered at bubble 1,

        G_1 = 2 G^(I) + conj(G^(I)) + G^(II),
        G^(I)(y)  = e^{-i Gamma_1(y)} Q_a^2(y) * sum_{j != 1} [e^{i Gamma_j} Q_a](y - d_j),
        G^(II)(y) = e^{-2i Gamma_1(y)} Q_a(y) * sum over ordered pairs j != l (both != 1)
                     of the shifted-bubble product,

    with d_j = z_j - z_1 and Gamma_k(w) = beta_k . w - (b/4)|w|^2, and
    returns Re <G_1, i Q_a> = Im integral G_1 Q_a.  The parameter bundle p
    supplies z, b, beta (drift magnitude along each ring direction).
    """
    if consts.kappa * p.z > gs.grid.r_max:
        raise DomainError(
            f"bubbles separated by kappa z = {consts.kappa * p.z:.1f} are not "
            f"resolved within r_max = {gs.grid.r_max}"
        )
    a = a_of_z(consts, p.z)
    q_a = RadialProfile(gs.grid, gs.q.values + a * gs.rho.values, parity=1)
    interp = q_a.interpolator()

    x, dx = _cartesian_box(gs.q, n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    centers = p.z * consts.unit_vectors
    betas = p.beta * consts.unit_vectors

    def gamma(j, wx, wy):
        return betas[j, 0] * wx + betas[j, 1] * wy - 0.25 * p.b * (wx**2 + wy**2)

    shifted = []
    for j in range(1, consts.K):
        dj = centers[j] - centers[0]
        wx, wy = xx - dj[0], yy - dj[1]
        shifted.append(np.exp(1j * gamma(j, wx, wy)) * interp(np.hypot(wx, wy)))

    gamma_1 = gamma(0, xx, yy)
    q_a_here = interp(np.hypot(xx, yy))
    g_one = np.exp(-1j * gamma_1) * q_a_here**2 * sum(shifted)
    g_two = 0.0
    if consts.K > 2:
        cross = sum(
            shifted[j] * shifted[l]
            for j in range(len(shifted))
            for l in range(len(shifted))
            if j != l
        )
        g_two = np.exp(-2j * gamma_1) * q_a_here * cross
    g_total = 2.0 * g_one + np.conj(g_one) + g_two
    integral = np.trapezoid(np.trapezoid(g_total * q_a_here, dx=dx, axis=1), dx=dx)
    return float(np.imag(integral))
