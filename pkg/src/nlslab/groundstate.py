"""Townes ground state, its linearized sector operators, and derived constants.

The ground state Q is the positive radial solution of

    Q'' + Q'/r - Q + Q^3 = 0,   Q'(0) = 0,   Q(r) -> 0,

found by bisection on Q(0) (shooting) with the exponentially unstable tail
rebuilt by a backward integration from r_max, where the decaying solution
is the stable one.  The module also builds the two linearized operators

    L_plus  = -Lap + 1 - 3 Q^2,    L_minus = -Lap + 1 - Q^2,

restricted to angular harmonics exp(i*m*theta), solves the radial source
problem L_plus rho = r^2 Q / 4, and packages the scalar constants the rest
of the laboratory consumes.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import fft2, ifft2
from scipy.integrate import solve_ivp
from scipy.linalg import cho_solve_banded, cholesky_banded, eigh_tridiagonal, solve_banded
from scipy.sparse import diags
from scipy.sparse.linalg import LinearOperator, eigsh, lgmres

from .errors import (
    BracketNotFoundError,
    DomainError,
    NonConvergenceError,
    NumericalError,
    SingularSystemError,
    WindowError,
)
from .radial import (
    RadialGrid,
    RadialProfile,
    fd_derivative,
    fd_second_derivative,
    radial_integral,
)

DEFAULT_GRID = RadialGrid(r_max=30.0, h=0.005)


def _shoot_rhs(r: float, y: np.ndarray) -> list[float]:
    q, p = y
    if r == 0.0:
        return [p, 0.5 * (q - q**3)]
    return [p, q - q**3 - p / r]


def _classify(q0: float, r_max: float) -> int:
    """+1 if the shot crosses zero (Q(0) too large), -1 if it turns back up."""

    def crossing(r, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1.0

    def turning(r, y):
        return y[1]

    turning.terminal = True
    turning.direction = 1.0

    sol = solve_ivp(
        _shoot_rhs,
        (0.0, r_max),
        [q0, 0.0],
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
        events=(crossing, turning),
    )
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    # ran the full range while still positive and decreasing
    return -1


def solve_ground_state(
    grid: RadialGrid = DEFAULT_GRID,
    bracket: tuple[float, float] = (1.0, 4.0),
    tol: float = 1e-12,
    match_radius: float = 4.0,
) -> RadialProfile:
    """Shoot for the ground state and sample it on the grid.

    Bisection drives the bracket on Q(0) below tol; the profile on
    [0, match_radius] comes from the forward integration, while the tail is
    re-integrated backward from r_max (seeded with the r^-1/2 e^-r form and
    rescaled to match), which removes the growing-mode contamination that
    forward shooting cannot avoid in double precision.  The junction sits
    well inside the core so the leftover contamination there stays below
    the derivative-kink tolerance; a second backward pass re-seeds the tail
    at the matched amplitude so the cubic term is integrated consistently.
    """
    if tol <= 0:
        raise NonConvergenceError("bisection on Q(0) cannot terminate with tol <= 0")
    lo, hi = bracket
    if not (0 < lo < hi):
        raise BracketNotFoundError(f"bad bracket {bracket}")
    if _classify(lo, grid.r_max) != -1 or _classify(hi, grid.r_max) != 1:
        raise BracketNotFoundError(
            f"bracket {bracket} does not straddle the decay/crossing dichotomy"
        )
    max_iter = 200
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _classify(mid, grid.r_max) == 1:
            hi = mid
        else:
            lo = mid
    else:
        raise NonConvergenceError("bisection exceeded its iteration budget")

    q0 = 0.5 * (lo + hi)
    r = grid.r
    # snap the junction to a grid node so forward and backward branches are
    # compared at the same radius
    r_match = grid.h * round(match_radius / grid.h)
    if not (0 < r_match < grid.r_max):
        raise NumericalError(f"match radius {match_radius} falls outside the grid")
    inner = r <= r_match + 1e-12
    fwd = solve_ivp(
        _shoot_rhs,
        (0.0, r_match),
        [q0, 0.0],
        method="DOP853",
        rtol=1e-13,
        atol=1e-16,
        dense_output=True,
    )
    if not fwd.success:
        raise NumericalError("forward integration of the ground state failed")
    q_fwd, p_fwd = fwd.sol(np.minimum(r[inner], r_match))

    # backward passes: seed with the leading asymptotic form, rescale to the
    # forward value at the junction, then re-integrate at that amplitude so
    # the cubic term enters with the right weight
    r_top = grid.r_max
    c_est = float(q_fwd[-1]) * np.sqrt(r_match) * np.exp(r_match)
    bwd = None
    for _ in range(2):
        phi = c_est * r_top**-0.5 * np.exp(-r_top)
        bwd = solve_ivp(
            _shoot_rhs,
            (r_top, r_match),
            [phi, -(1.0 + 0.5 / r_top) * phi],
            method="DOP853",
            rtol=1e-12,
            atol=0.0,
            dense_output=True,
        )
        if not bwd.success:
            raise NumericalError("backward tail integration failed")
        c_est *= float(q_fwd[-1] / bwd.sol(r_match)[0])
    q_b = bwd.sol(r[~inner][::-1])[0]
    q_match, p_match = bwd.sol(r_match)
    alpha = float(q_fwd[-1] / q_match)
    mismatch = abs(alpha * p_match - p_fwd[-1]) / abs(p_fwd[-1])
    if mismatch > 1e-6:
        raise NumericalError(f"tail/core derivative mismatch {mismatch:.2e} at the junction")

    values = np.concatenate([q_fwd, (alpha * q_b)[::-1]])
    if np.any(values <= 0) or np.any(np.diff(values) >= 0):
        raise NumericalError("ground-state profile is not strictly positive decreasing")
    if values[-1] > 1e-12:
        raise NumericalError(f"profile does not decay at r_max: Q(r_max) = {values[-1]:.3e}")
    return RadialProfile(grid, values, parity=1)


def spectral_ground_state(
    n: int = 1024,
    box: float = 20.0,
    tol: float = 5e-13,
    max_iter: int = 400,
) -> dict:
    """Independent ground-state solve by normalized fixed-point iteration.

    Iterates u <- S^{3/2} (-Lap+1)^{-1} u^3 on a periodic 2D grid, with the
    stabilizing ratio S = <(-Lap+1)u, u> / <u^3, u> computed spectrally.
    Returns the peak value, the planar mass, and the grid field.
    """
    dx = 2.0 * box / n
    x = (np.arange(n) - n // 2) * dx
    xx, yy = np.meshgrid(x, x, indexing="ij")
    rsq = xx**2 + yy**2
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    ksq = k[:, None] ** 2 + k[None, :] ** 2
    sym = 1.0 + ksq

    u = 2.2 * np.exp(-rsq / 1.5)
    delta = np.inf
    for _ in range(max_iter):
        u_hat = fft2(u)
        cubic_hat = fft2(u**3)
        num = float(np.sum(sym * np.abs(u_hat) ** 2))
        den = float(np.real(np.sum(np.conj(u_hat) * cubic_hat)))
        if not np.isfinite(den) or den <= 0:
            raise NonConvergenceError("fixed-point iterate lost positivity")
        s_ratio = num / den
        u_next = np.real(ifft2(s_ratio**1.5 * cubic_hat / sym))
        delta = float(np.max(np.abs(u_next - u)) / np.max(np.abs(u_next)))
        u = u_next
        if delta <= tol:
            break
    else:
        raise NonConvergenceError(f"fixed-point iteration stalled at delta = {delta:.2e}")

    mass = float(np.sum(u**2) * dx * dx)
    return {"q_at_0": float(u[n // 2, n // 2]), "mass_q": mass, "field": u, "box": box, "n": n}


def _tail_fit(
    q: RadialProfile,
    window: tuple[float, float] = (8.0, 16.0),
    with_correction: bool = True,
) -> dict:
    """Least-squares tail fit with diagnostics; see fit_asymptotic_cQ."""
    r = q.grid.r
    lo, hi = window
    if hi > q.grid.r_max - 1.0:
        raise WindowError(f"window {window} leaves no tail margin before r_max")
    mask = (r >= lo) & (r <= hi)
    if np.count_nonzero(mask) < 50:
        raise WindowError(f"window {window} holds fewer than 50 grid nodes")
    rw = r[mask]
    basis = [rw**-0.5 * np.exp(-rw)]
    if with_correction:
        basis.append(rw**-1.5 * np.exp(-rw))
    a_mat = np.stack(basis, axis=1)
    coef, *_ = np.linalg.lstsq(a_mat, q.values[mask], rcond=None)
    resid = q.values[mask] - a_mat @ coef
    return {
        "c_q": float(coef[0]),
        "correction": float(coef[1]) if with_correction else 0.0,
        "window": window,
        "rms_residual": float(np.sqrt(np.mean(resid**2))),
    }


def fit_asymptotic_cQ(
    q: RadialProfile,
    window: tuple[float, float] = (8.0, 16.0),
    with_correction: bool = True,
) -> float:
    """Fit c in Q(r) ~ c r^-1/2 e^-r over the window.

    A second basis function r^-3/2 e^-r absorbs the first Bessel-type tail
    correction so the leading coefficient stays stable when the window
    slides; without it the fitted value drags by about 1.5e-3 per unit of
    window shift.
    """
    return _tail_fit(q, window, with_correction)["c_q"]


def compute_IQ(
    q: RadialProfile, n_theta: int = 256, direction: tuple[float, float] = (1.0, 0.0)
) -> float:
    """Planar integral of Q(x)^3 exp(x . direction/|direction|).

    Trapezoid in (r, theta); the angular trapezoid on a periodic analytic
    integrand is spectrally accurate, which is also why the value is
    rotation invariant to near machine precision: changing the direction
    only shifts the uniform theta nodes.
    """
    r = q.grid.r
    phi = np.arctan2(direction[1], direction[0])
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    angular = np.exp(np.outer(r, np.cos(theta - phi))).mean(axis=1) * 2.0 * np.pi
    integrand = q.values**3 * r * angular
    return float(np.trapezoid(integrand, dx=q.grid.h))


# ---------------------------------------------------------------------------
# sector operators


@dataclass
class SectorOperator:
    """Radial discretization of -Lap + m^2/r^2 + 1 - c Q^2 on one harmonic.

    kind 'plus' takes c = 3, 'minus' takes c = 1.  The tridiagonal matrix is
    symmetric after conjugation by the square root of the radial quadrature
    weights; `diag`/`off` store that symmetrized form.  Boundary conditions:
    natural (Neumann) at r = 0 for m = 0, Dirichlet for m >= 1, Dirichlet at
    r_max always.
    """

    kind: str
    m: int
    grid: RadialGrid
    diag: np.ndarray
    off: np.ndarray
    weights: np.ndarray
    nodes: slice = field(repr=False, default=slice(None))

    def to_sparse(self):
        return diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")

    def smallest_eigenvalues(self, k: int = 1) -> np.ndarray:
        return eigh_tridiagonal(
            self.diag, self.off, select="i", select_range=(0, k - 1), eigvals_only=True
        )

    def constrained_minimum(self, constraints: list[np.ndarray], seed: int = 7) -> float:
        """Smallest eigenvalue restricted to the weighted-orthogonal complement.

        Constraint vectors are nodal samples of radial profiles.  Works on
        the deflated operator P A P + mu Y Y^T (P the projector off the
        constraint block Y) through exact shift-invert: the rank-2k update
        of the shifted tridiagonal factors through the Woodbury identity, so
        Lanczos sees a spectrum with the constrained minimum isolated next
        to the shift.  Plain iteration (e.g. LOBPCG) stalls here because the
        constrained minimum can sit inside the near-continuum cluster above
        the essential-spectrum edge.
        """
        if not constraints:
            return float(self.smallest_eigenvalues(1)[0])
        sqrt_w = np.sqrt(self.weights)
        y = np.stack([sqrt_w * np.asarray(c, dtype=float) for c in constraints], axis=1)
        y, rr = np.linalg.qr(y)
        if np.min(np.abs(np.diag(rr))) < 1e-12 * np.max(np.abs(np.diag(rr))):
            raise SingularSystemError("constraint directions are numerically dependent")
        k = y.shape[1]
        n = self.diag.size
        a = self.to_sparse()

        # Courant-Fischer brackets: the constrained minimum lies between the
        # smallest and the (k+1)-th unconstrained eigenvalue
        low_evals = eigh_tridiagonal(
            self.diag, self.off, select="i", select_range=(0, k), eigvals_only=True
        )
        sigma = float(low_evals[0]) - 1.0
        mu = float(low_evals[k]) + 10.0

        g_mat = a @ y
        w_mat = y.T @ g_mat
        u_mat = np.hstack([y, g_mat])
        s_mat = np.block(
            [[w_mat + mu * np.eye(k), -np.eye(k)], [-np.eye(k), np.zeros((k, k))]]
        )
        s_inv = np.block(
            [[np.zeros((k, k)), -np.eye(k)], [-np.eye(k), -(w_mat + mu * np.eye(k))]]
        )

        # banded Cholesky of A - sigma I (positive definite: sigma < lambda_1)
        ab = np.zeros((2, n))
        ab[0, 1:] = self.off
        ab[1] = self.diag - sigma
        cb = cholesky_banded(ab, lower=False)
        b_inv_u = cho_solve_banded((cb, False), u_mat)
        capacitance = s_inv + u_mat.T @ b_inv_u

        def op_inv(v):
            bv = cho_solve_banded((cb, False), v)
            return bv - b_inv_u @ np.linalg.solve(capacitance, u_mat.T @ bv)

        def deflated(v):
            t = v - y @ (y.T @ v)
            s = a @ t
            s -= y @ (y.T @ s)
            return s + mu * (y @ (y.T @ v))

        vals = eigsh(
            LinearOperator((n, n), matvec=deflated, dtype=float),
            k=1,
            sigma=sigma,
            OPinv=LinearOperator((n, n), matvec=op_inv, dtype=float),
            which="LM",
            v0=np.random.default_rng(seed).standard_normal(n),
            return_eigenvectors=False,
        )
        return float(vals[0])


def sector_operator(q: RadialProfile, m: int, kind: str) -> SectorOperator:
    """Assemble the symmetrized tridiagonal sector operator."""
    if kind not in ("plus", "minus"):
        raise NumericalError(f"unknown operator kind {kind!r}")
    c = 3.0 if kind == "plus" else 1.0
    g = q.grid
    h, r, n = g.h, g.r, g.n
    idx = slice(0, n - 1) if m == 0 else slice(1, n - 1)
    rn = r[idx]
    qn = q.values[idx]
    # lumped radial weights; the r = 0 cell carries h^2/8
    w = rn * h
    r_half_up = rn + h / 2.0
    r_half_dn = rn - h / 2.0
    if m == 0:
        w = w.copy()
        w[0] = h**2 / 8.0
        r_half_dn = r_half_dn.copy()
        r_half_dn[0] = 0.0
    k_diag = (r_half_up + r_half_dn) / h
    k_off = -r_half_up[:-1] / h
    potential = 1.0 - c * qn**2
    if m > 0:
        potential = potential + m**2 / rn**2
    sqrt_w = np.sqrt(w)
    diag_sym = k_diag / w + potential
    off_sym = k_off / (sqrt_w[:-1] * sqrt_w[1:])
    return SectorOperator(kind=kind, m=m, grid=g, diag=diag_sym, off=off_sym, weights=w, nodes=idx)


def _pentadiagonal_m0(q: RadialProfile, kind: str):
    """Fourth-order pentadiagonal discretization of the m = 0 sector operator.

    Rows cover nodes 0..n-2 with even-parity ghosts folded at r = 0 and
    Dirichlet (zero) values beyond r_max.  Returns (band, sparse) where band
    is laid out for scipy.linalg.solve_banded with (l, u) = (2, 2).
    """
    c = 3.0 if kind == "plus" else 1.0
    g = q.grid
    h, n = g.h, g.n
    size = n - 1
    r = g.r[:size]
    pot = 1.0 - c * q.values[:size] ** 2

    d2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    d1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)

    # base[j] holds the row coefficients for offset j-2
    base = np.zeros((size, 5))
    base[1:, :] = -d2[None, :] - np.outer(1.0 / r[1:], d1)
    base[0, :] = -2.0 * d2  # -Lap f = -2 f''(0) for even f at the origin

    dia = base[:, 2] + pot
    sup1 = base[:-1, 3]
    sup2 = base[:-2, 4]
    sub1 = base[1:, 1]
    sub2 = base[2:, 0]

    # even-parity folds across r = 0
    sup2 = sup2.copy()
    sup1 = sup1.copy()
    dia = dia.copy()
    sup2[0] += base[0, 0]  # row 0, column -2 -> +2
    sup1[0] += base[0, 1]  # row 0, column -1 -> +1
    dia[1] += base[1, 0]  # row 1, column -1 -> +1

    band = np.zeros((5, size))
    band[0, 2:] = sup2
    band[1, 1:] = sup1
    band[2, :] = dia
    band[3, : size - 1] = sub1
    band[4, : size - 2] = sub2
    sparse = diags([sub2, sub1, dia, sup1, sup2], [-2, -1, 0, 1, 2], format="csr")
    return band, sparse


def apply_sector_operator(
    q: RadialProfile, values: np.ndarray, m: int, kind: str, parity: int
) -> np.ndarray:
    """Fourth-order application of the sector operator to nodal values.

    Used by the null-space residual suite; the tridiagonal matrices keep
    their second-order form for eigenvalue work.
    """
    c = 3.0 if kind == "plus" else 1.0
    g = q.grid
    r = g.r
    d2 = fd_second_derivative(values, g.h, parity)
    d1 = fd_derivative(values, g.h, parity)
    out = np.empty_like(values)
    out[1:] = -d2[1:] - d1[1:] / r[1:] + (1.0 - c * q.values[1:] ** 2) * values[1:]
    if m > 0:
        out[1:] += m**2 / r[1:] ** 2 * values[1:]
        out[0] = 0.0
    else:
        out[0] = -2.0 * d2[0] + (1.0 - c * q.values[0] ** 2) * values[0]
    return out


def solve_rho(q: RadialProfile) -> RadialProfile:
    """Solve L_plus rho = r^2 Q / 4 in the m = 0 sector (fourth order, direct).

    rho is the radial response of the ground state to the quadratic phase
    well; it grows like r^3 Q before the exponential tail wins.
    """
    g = q.grid
    size = g.n - 1
    band, sparse = _pentadiagonal_m0(q, "plus")
    rhs = g.r[:size] ** 2 * q.values[:size] / 4.0
    try:
        sol = solve_banded((2, 2), band, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SingularSystemError("pentadiagonal solve for rho failed") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("rho solve produced non-finite values")
    resid = sparse @ sol - rhs
    wnorm = np.sqrt(radial_integral(g, np.append(resid, 0.0) ** 2))
    if wnorm > 1e-8:
        raise NumericalError(f"rho defining residual {wnorm:.2e} exceeds 1e-8")
    return RadialProfile(g, np.append(sol, 0.0), parity=1)


def rho_iterative_check(q: RadialProfile, rho: RadialProfile, tol: float = 1e-10) -> float:
    """Re-solve the rho system iteratively (lgmres) and return the L2 gap.

    Dual route to the banded direct solve; the two must agree to 1e-8.
    The stopping tolerance sits above the ~1e-11 roundoff floor of the
    preconditioned iteration but well below the agreement requirement.
    """
    g = q.grid
    size = g.n - 1
    band, sparse = _pentadiagonal_m0(q, "plus")
    rhs = g.r[:size] ** 2 * q.values[:size] / 4.0

    # precondition with the second-order discretization of the same operator,
    # whose FD symbol stays within a bounded factor of the fourth-order one
    r_in = g.r[1:size]
    h = g.h
    dia2 = np.full(size, 2.0 / h**2) + (1.0 - 3.0 * q.values[:size] ** 2)
    dia2[0] = 4.0 / h**2 + (1.0 - 3.0 * q.values[0] ** 2)
    sup2 = np.empty(size - 1)
    sup2[0] = -4.0 / h**2
    sup2[1:] = -1.0 / h**2 - 1.0 / (2.0 * h * r_in[:-1])
    sub2 = -1.0 / h**2 + 1.0 / (2.0 * h * r_in)
    ab = np.zeros((3, size))
    ab[0, 1:] = sup2
    ab[1] = dia2
    ab[2, : size - 1] = sub2
    tri = LinearOperator(
        (size, size), matvec=lambda v: solve_banded((1, 1), ab, v), dtype=float
    )
    sol, info = lgmres(sparse, rhs, M=tri, rtol=tol, atol=0.0, maxiter=2000)
    if info != 0:
        raise NonConvergenceError(f"lgmres on the rho system returned info = {info}")
    gap = np.append(sol, 0.0) - rho.values
    return float(np.sqrt(radial_integral(g, gap**2)))


def nullspace_residuals(q: RadialProfile, rho: RadialProfile) -> dict:
    """Weighted-L2 residuals of the exact kernel/response relations.

    Checks, with fourth-order stencils on the grid:
        L_minus Q = 0
        L_plus (Q + r Q') = -2 Q
        L_minus (r^2 Q) = -4 (Q + r Q')
        L_plus rho = r^2 Q / 4
        L_plus Q' = 0          (m = 1)
        L_minus (r Q) = -2 Q'  (m = 1)
    """
    g = q.grid
    r = g.r

    def wnorm(res):
        return float(np.sqrt(radial_integral(g, res**2)))

    qv = q.values
    dq = fd_derivative(qv, g.h, parity=1)
    scaling = qv + r * dq  # generator of the L2-critical rescaling

    return {
        "minus_q": wnorm(apply_sector_operator(q, qv, 0, "minus", 1)),
        "plus_scaling": wnorm(apply_sector_operator(q, scaling, 0, "plus", 1) + 2.0 * qv),
        "minus_square_moment": wnorm(
            apply_sector_operator(q, r**2 * qv, 0, "minus", 1) + 4.0 * scaling
        ),
        "plus_rho": wnorm(apply_sector_operator(q, rho.values, 0, "plus", 1) - r**2 * qv / 4.0),
        "plus_gradient": wnorm(apply_sector_operator(q, dq, 1, "plus", -1)),
        "minus_translation": wnorm(apply_sector_operator(q, r * qv, 1, "minus", -1) + 2.0 * dq),
    }


def sector_minima(q: RadialProfile, rho: RadialProfile, m_max: int = 4) -> dict:
    """Smallest sector eigenvalues with and without the pairing constraints.

    The constrained directions per sector mirror the orthogonality
    conditions the bubble decomposition imposes: m = 0 constrains the plus
    form to {Q, r^2 Q} and the minus form to {rho}; m = 1 constrains plus
    to {r Q} and minus to {Q'}; higher sectors are unconstrained.
    """
    dq = fd_derivative(q.values, q.grid.h, parity=1)
    table: dict[tuple[int, str], list[np.ndarray]] = {
        (0, "plus"): [q.values, q.grid.r**2 * q.values],
        (0, "minus"): [rho.values],
        (1, "plus"): [q.grid.r * q.values],
        (1, "minus"): [dq],
    }
    results: dict = {}
    for m in range(m_max + 1):
        for kind in ("plus", "minus"):
            op = sector_operator(q, m, kind)
            unconstrained = float(op.smallest_eigenvalues(1)[0])
            cons = [c[op.nodes] for c in table.get((m, kind), [])]
            constrained = op.constrained_minimum(cons) if cons else unconstrained
            results[(m, kind)] = {
                "unconstrained_min": unconstrained,
                "constrained_min": constrained,
                "n_constraints": len(cons),
            }
    results["min_constrained"] = min(
        v["constrained_min"] for k, v in results.items() if isinstance(k, tuple)
    )
    return results


def coercivity_spectrum(gs: "GroundStateData", m_max: int = 4) -> list[tuple[int, str, float]]:
    """Constrained minimum eigenvalue per (harmonic, kind) sector.

    The coercivity content used downstream: every returned value must be
    strictly positive once the decomposition's orthogonality directions
    are projected out.
    """
    if m_max < 2:
        raise DomainError("m_max must cover at least the first free sector (>= 2)")
    detail = sector_minima(gs.q, gs.rho, m_max=m_max)
    return [
        (m, kind, detail[(m, kind)]["constrained_min"])
        for m in range(m_max + 1)
        for kind in ("plus", "minus")
    ]


# ---------------------------------------------------------------------------
# packaged ground-state data


@dataclass
class GroundStateData:
    """Ground state, correction profile, and the scalar constants."""

    q: RadialProfile
    rho: RadialProfile
    q_at_0: float
    mass_q: float
    grad_q_sq: float
    quartic_q: float
    c_q: float
    i_q: float
    rho_dot_q: float
    rho_growth_constant: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> RadialGrid:
        return self.q.grid

    def scalars(self) -> dict:
        return {
            "r_max": self.grid.r_max,
            "h": self.grid.h,
            "q_at_0": self.q_at_0,
            "mass_q": self.mass_q,
            "grad_q_sq": self.grad_q_sq,
            "quartic_q": self.quartic_q,
            "energy_q": 0.5 * self.grad_q_sq - 0.25 * self.quartic_q,
            "c_q": self.c_q,
            "i_q": self.i_q,
            "rho_dot_q": self.rho_dot_q,
            "rho_growth_constant": self.rho_growth_constant,
        }

    def save(self, out_dir, provenance: dict | None = None) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.q.to_csv(out / "q_profile.csv")
        self.rho.to_csv(out / "rho_profile.csv")
        payload = dict(self.scalars())
        payload["q_profile"] = "q_profile.csv"
        payload["rho_profile"] = "rho_profile.csv"
        if provenance:
            payload["provenance"] = provenance
        with open(out / "groundstate.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        return payload

    @classmethod
    def load(cls, out_dir) -> "GroundStateData":
        out = Path(out_dir)
        with open(out / "groundstate.json", encoding="utf-8") as fh:
            payload = json.load(fh)
        q = RadialProfile.from_csv(out / payload["q_profile"])
        rho = RadialProfile.from_csv(out / payload["rho_profile"])
        return cls(
            q=q,
            rho=rho,
            q_at_0=payload["q_at_0"],
            mass_q=payload["mass_q"],
            grad_q_sq=payload["grad_q_sq"],
            quartic_q=payload["quartic_q"],
            c_q=payload["c_q"],
            i_q=payload["i_q"],
            rho_dot_q=payload["rho_dot_q"],
            rho_growth_constant=payload["rho_growth_constant"],
        )


def compute_ground_state(grid: RadialGrid = DEFAULT_GRID, tol: float = 1e-12) -> GroundStateData:
    """One-stop pipeline: Q, rho, and every scalar constant."""
    q = solve_ground_state(grid, tol=tol)
    rho = solve_rho(q)
    dq = fd_derivative(q.values, grid.h, parity=1)
    mass_q = radial_integral(grid, q.values**2)
    grad_q_sq = radial_integral(grid, dq**2)
    quartic_q = radial_integral(grid, q.values**4)
    fit = _tail_fit(q)
    i_q = compute_IQ(q)
    rho_dot_q = radial_integral(grid, rho.values * q.values)
    growth = float(np.max(np.abs(rho.values) / ((1.0 + grid.r**3) * q.values)))
    if rho_dot_q <= 0:
        warnings.warn(
            "SIGN FLAG: <rho, Q> <= 0; the attraction constant would change sign "
            "and the approach/collapse phenomenology would reverse",
            stacklevel=2,
        )
    return GroundStateData(
        q=q,
        rho=rho,
        q_at_0=float(q.values[0]),
        mass_q=mass_q,
        grad_q_sq=grad_q_sq,
        quartic_q=quartic_q,
        c_q=fit["c_q"],
        i_q=i_q,
        rho_dot_q=rho_dot_q,
        rho_growth_constant=growth,
        diagnostics={
            "tail_fit": fit,
            "nullspace_residuals": nullspace_residuals(q, rho),
        },
    )
