"""Near-ansatz decomposition and localized energy bookkeeping.

A field close to the K-bubble ansatz is written as
u(x) = (e^{i gamma}/lam)(P + eps)(x/lam) with the residual pinned by five
scalar pairings at bubble 1: against |w|^2 Q, the e_1 component of w Q,
i rho, the e_1 component of i grad Q, and i Lam Q, where w = y - z e_1
and the bubble phase has been unwound.  Ring symmetry kills the
transverse components of the two vector pairings, which is what closes
the five-parameter, five-equation system.

The residual grid is the physical grid relabeled y = x/lam, so forming
eps never interpolates the evolving field; only the radial profiles are
evaluated off their native nodes.  The localized functional F = H - J
uses a C^2 radial bump whose plateau [0, 1/10] and support [0, 1/8] are
scaled by log(s) around each bubble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pde
from .ansatz import ParamState, ParamVelocity, build_ansatz, modulation_vector, to_physical
from .errors import (
    ConfigError,
    DecompositionError,
    DomainError,
    NumericalError,
    SingularSystemError,
)
from .fields import ComplexField2D, gradient, gradient_norm_sq, inner, mass
from .groundstate import GroundStateData
from .interactions import GeometryConstants
from .reduced_ode import (
    BootstrapTube,
    ReducedState,
    ShootingConfig,
    final_data,
    integrate_backward,
    reduced_rhs,
    time_map,
)

CLOSENESS_DEFAULT = 0.3
NEWTON_MAX_ITER = 25
FD_REL_STEP = 1e-6

TRACK_COLUMNS = (
    "t",
    "s_proxy",
    "lambda",
    "z",
    "gamma",
    "beta",
    "b",
    "eps_H1",
    "eta1_dot_Q",
    "H",
    "J",
    "F",
    "mass",
    "energy",
    "variance",
)


@dataclass(frozen=True)
class Decomposition:
    """Fitted parameters plus the pinned residual.

    epsilon lives on the rescaled grid y = x/lam; eta1 holds the same
    samples with bubble 1's phase Gamma_1(y - z e_1) removed, so pairings
    of eta1 against bubble-frame profiles are plain grid sums.
    """

    p: ParamState
    epsilon: ComplexField2D
    eta1: ComplexField2D
    ansatz: ComplexField2D
    ortho_residuals: np.ndarray
    iterations: int
    closeness: float


@dataclass(frozen=True)
class FunctionalValues:
    H: float
    J: float
    F: float
    eps_H1_sq: float

    def __post_init__(self):
        vals = (self.H, self.J, self.F, self.eps_H1_sq)
        if not all(np.isfinite(v) for v in vals):
            raise NumericalError(f"functional values must be finite, got {vals}")


def chi_cutoff(x):
    """C2 radial bump: 1 on [0, 1/10], 0 from 1/8 on, quintic between."""
    x = np.asarray(x, dtype=float)
    t = np.clip((x - 0.1) * 40.0, 0.0, 1.0)
    out = 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
    # Pin the plateaus exactly; the polynomial leaves O(eps) dust at the
    # joints when (x - 1/10) * 40 rounds short of 1.
    out = np.where(x >= 0.125, 0.0, np.where(x <= 0.1, 1.0, out))
    return float(out) if out.ndim == 0 else out


def _bubble_frame(consts: GeometryConstants, p: ParamState, tmpl: ComplexField2D):
    """Coordinates and phase of bubble 1 on the template grid."""
    e = consts.unit_vectors[0]
    xx, yy = tmpl.meshgrid()
    wx = xx - p.z * e[0]
    wy = yy - p.z * e[1]
    r = np.hypot(wx, wy)
    ew = e[0] * wx + e[1] * wy
    phase = np.exp(1j * (p.beta * ew - 0.25 * p.b * (wx**2 + wy**2)))
    return r, ew, phase


def pairing_directions(
    gs: GroundStateData, consts: GeometryConstants, p: ParamState, tmpl: ComplexField2D
) -> list[ComplexField2D]:
    """The five fields whose real pairings with eps must vanish.

    Each is e^{i Gamma_1(w)} g_j(w) so that <eps, T_j> equals the
    corresponding pairing of the unwound residual eta_1 with g_j.
    """
    r, ew, phase = _bubble_frame(consts, p, tmpl)
    q = gs.q(r)
    qp = gs.q.derivative()(r)
    rho = gs.rho(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        e_dot_grad = np.where(r > 0.0, qp * ew / np.where(r > 0.0, r, 1.0), 0.0)
    shapes = [
        r**2 * q,
        ew * q,
        1j * rho,
        1j * e_dot_grad,
        1j * (q + r * qp),
    ]
    return [ComplexField2D(phase * g, tmpl.box) for g in shapes]


def _residual_pack(u, gs, consts, p):
    box_eps = u.box / p.lam
    ansatz = build_ansatz(gs, consts, p, u.n, box_eps)
    eps = ComplexField2D(
        p.lam * np.exp(-1j * p.gamma) * u.values - ansatz.values, box_eps
    )
    dirs = pairing_directions(gs, consts, p, eps)
    resid = np.array([inner(eps, d) for d in dirs])
    return resid, eps, ansatz


def _shift(p: ParamState, dp: np.ndarray) -> ParamState:
    return ParamState(
        lam=p.lam + dp[0],
        z=p.z + dp[1],
        gamma=p.gamma + dp[2],
        beta=p.beta + dp[3],
        b=p.b + dp[4],
    )


def decompose(
    u: ComplexField2D,
    gs: GroundStateData,
    consts: GeometryConstants,
    p_guess: ParamState,
    tol: float = 1e-10,
    window: float = CLOSENESS_DEFAULT,
    max_iter: int = NEWTON_MAX_ITER,
) -> Decomposition:
    """Newton-solve the five orthogonality pairings for p.

    Converged when every pairing is below tol * ||Q||_{L2}.  The Jacobian
    uses central differences with parameter-scaled steps; the closeness
    precondition is checked once at the guess.
    """
    if tol <= 0:
        raise ConfigError(f"tolerance must be positive, got {tol}")
    norm_q = float(np.sqrt(gs.mass_q))
    thresh = tol * norm_q

    resid, eps, ansatz = _residual_pack(u, gs, consts, p_guess)
    closeness = float(np.sqrt(mass(eps))) / norm_q
    if closeness > window:
        raise DecompositionError(
            f"field sits outside the closeness window: renormalized distance "
            f"{closeness:.3f} exceeds {window:.2f}"
        )

    p = p_guess
    iterations = 0
    while np.max(np.abs(resid)) > thresh:
        if iterations >= max_iter:
            raise DecompositionError(
                f"newton stalled after {max_iter} iterations; max pairing "
                f"{np.max(np.abs(resid)):.3e} vs target {thresh:.3e}"
            )
        iterations += 1
        deltas = FD_REL_STEP * np.array([p.lam, p.z, 1.0, 1.0, 1.0])
        jac = np.empty((5, 5))
        for j in range(5):
            step = np.zeros(5)
            step[j] = deltas[j]
            r_plus, _, _ = _residual_pack(u, gs, consts, _shift(p, step))
            r_minus, _, _ = _residual_pack(u, gs, consts, _shift(p, -step))
            jac[:, j] = (r_plus - r_minus) / (2.0 * deltas[j])
        try:
            dp = np.linalg.solve(jac, -resid)
        except np.linalg.LinAlgError as err:
            raise SingularSystemError(f"orthogonality Jacobian is singular: {err}")
        factor = 1.0
        for _ in range(8):
            try:
                trial = _shift(p, factor * dp)
                break
            except ConfigError:
                factor *= 0.5
        else:
            raise DecompositionError("newton step left the parameter domain")
        p = trial
        resid, eps, ansatz = _residual_pack(u, gs, consts, p)

    _, _, phase1 = _bubble_frame(consts, p, eps)
    eta1 = ComplexField2D(
        np.conj(phase1) * eps.values,
        eps.box,
        meta={"center": (p.z * consts.unit_vectors[0][0], p.z * consts.unit_vectors[0][1])},
    )
    return Decomposition(
        p=p,
        epsilon=eps,
        eta1=eta1,
        ansatz=ansatz,
        ortho_residuals=resid,
        iterations=iterations,
        closeness=closeness,
    )


def eta1_mass_pairing(dec: Decomposition, gs: GroundStateData, consts: GeometryConstants) -> float:
    """The degenerate pairing <eta_1, Q>, not solved for by decompose."""
    r, _, _ = _bubble_frame(consts, dec.p, dec.epsilon)
    return float(np.real(np.sum(dec.eta1.values * gs.q(r))) * dec.epsilon.dx**2)


def functionals(dec: Decomposition, consts: GeometryConstants, s_proxy: float) -> FunctionalValues:
    """Localized energy H, momentum correction J, and F = H - J.

    H subtracts the ansatz self-energy and its linear term from the full
    quartic so that only residual contributions remain; J localizes the
    drift momentum with the log(s)-scaled bump around each bubble.
    """
    if not s_proxy > np.e:
        raise DomainError(f"cutoff scale needs s > e, got {s_proxy}")
    eps = dec.epsilon
    pv = dec.ansatz.values
    ev = eps.values
    dx2 = eps.dx**2

    grad2 = gradient_norm_sq(eps)
    l2 = mass(eps)
    ap2 = np.abs(pv + ev) ** 2
    p2 = np.abs(pv) ** 2
    quart = float(np.sum(ap2**2 - p2**2 - 4.0 * p2 * np.real(ev * np.conj(pv))) * dx2)
    h_val = 0.5 * (grad2 + l2 - 0.5 * quart)

    gx, gy = gradient(eps)
    xx, yy = eps.meshgrid()
    width = np.log(s_proxy)
    j_val = 0.0
    for e in consts.unit_vectors:
        rk = np.hypot(xx - dec.p.z * e[0], yy - dec.p.z * e[1])
        chik = chi_cutoff(rk / width)
        deriv = dec.p.z * (e[0] * gx.values + e[1] * gy.values)
        j_val += dec.p.b * float(np.sum(np.imag(deriv * np.conj(ev)) * chik) * dx2)

    return FunctionalValues(H=h_val, J=j_val, F=h_val - j_val, eps_H1_sq=grad2 + l2)


@dataclass(frozen=True)
class TrackConfig:
    """Backward tracking run: grid, horizon, and decomposition settings."""

    s_in: float = 50.0
    s_end: float = 12.0
    zeta_sharp: float = 0.0
    n: int = 1024
    box: float = 9.0
    dt: float = -5e-4
    cadence: int = 250
    tol: float = 1e-8
    window: float = CLOSENESS_DEFAULT

    def __post_init__(self):
        if not self.s_end > 10.5:
            raise ConfigError(f"tracking floor must exceed 10.5, got {self.s_end}")
        if not self.s_in > self.s_end:
            raise ConfigError("seed time must exceed the tracking floor")
        if not self.dt < 0:
            raise ConfigError("tracking integrates backward; dt must be negative")
        if self.cadence < 1:
            raise ConfigError("cadence must be a positive step count")
        if not self.box > 0 or self.n < 64:
            raise ConfigError("grid must have positive box and n >= 64")


@dataclass
class TrackRecord:
    """Per-cadence decomposition history of a backward run."""

    t: np.ndarray
    s_proxy: np.ndarray
    params: np.ndarray
    eps_h1: np.ndarray
    eta1_dot_q: np.ndarray
    ortho: np.ndarray
    h: np.ndarray
    j: np.ndarray
    f: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    variance: np.ndarray
    mass_p: np.ndarray
    modulation_defect: np.ndarray
    truncated: bool
    truncation_reason: str | None

    def __len__(self) -> int:
        return self.t.size

    def to_table(self) -> tuple[tuple, np.ndarray]:
        cols = np.column_stack(
            [
                self.t,
                self.s_proxy,
                self.params,
                self.eps_h1,
                self.eta1_dot_q,
                self.h,
                self.j,
                self.f,
                self.mass,
                self.energy,
                self.variance,
            ]
        )
        return TRACK_COLUMNS, cols


def _open_tube() -> BootstrapTube:
    # The desk-scale reference only needs the time map; band exits are
    # meaningless this far below the asymptotic regime.
    def always(s, p):
        return 1.0

    return BootstrapTube(
        zeta_band=always, b_band=always, beta_band=always, eps_band=lambda s, h1: 1.0
    )


def _defect_estimates(s: np.ndarray, params: np.ndarray, consts: GeometryConstants) -> np.ndarray:
    out = np.full_like(params, np.nan)
    m = s.size
    if m < 2:
        return out
    for i in range(m):
        lo = max(i - 1, 0)
        hi = min(i + 1, m - 1)
        ds = s[hi] - s[lo]
        if ds == 0.0:
            continue
        rates = (params[hi] - params[lo]) / ds
        vel = ParamVelocity(*rates)
        p_i = ParamState(*params[i])
        out[i] = modulation_vector(p_i, vel, consts).as_array()
    return out


def track(gs: GroundStateData, consts: GeometryConstants, cfg: TrackConfig) -> TrackRecord:
    """Seed the backward run from final data and decompose on a cadence.

    The rescaled-time proxy comes from the reduced-flow time map; fits
    are seeded from the previous decomposition advanced by the reduced
    increments.  A decomposition or solver failure truncates the record
    gracefully instead of raising.
    """
    p_in = final_data(cfg.s_in, cfg.zeta_sharp, consts)
    ref_cfg = ShootingConfig(
        s_in=cfg.s_in,
        s0=max(10.2, cfg.s_end - 1.5),
        tube=_open_tube(),
        bisection_tol=1e-10,
    )
    ref_traj, _ = integrate_backward(ref_cfg, cfg.zeta_sharp, consts)
    tmap = time_map(ref_traj)
    ts = tmap[::-1]
    ss = ref_traj.s[::-1]
    ref_params = np.column_stack(
        [ref_traj.lam, ref_traj.z, ref_traj.gamma, ref_traj.beta, ref_traj.b]
    )[::-1]

    def s_of_t(t: float) -> float:
        return float(np.interp(t, ts, ss))

    def ref_at(s: float) -> np.ndarray:
        return np.array([np.interp(s, ss, ref_params[:, j]) for j in range(5)])

    box_y = cfg.box / p_in.lam
    seed = build_ansatz(gs, consts, p_in, cfg.n, box_y)
    u = to_physical(seed, p_in, t=0.0)

    seg = pde.EvolutionConfig(dt=cfg.dt, n_steps=cfg.cadence, monitor_stride=cfg.cadence)
    rows: list[dict] = []
    truncated = False
    reason = None
    t_cur = 0.0
    p_fit: ParamState | None = None
    s_prev = cfg.s_in

    while True:
        s_cur = s_of_t(t_cur)
        if p_fit is None:
            guess = p_in
        else:
            prev = np.array([p_fit.lam, p_fit.z, p_fit.gamma, p_fit.beta, p_fit.b])
            guess = ParamState(*(prev + ref_at(s_cur) - ref_at(s_prev)))
        try:
            dec = decompose(u, gs, consts, guess, tol=cfg.tol, window=cfg.window)
        except (DecompositionError, SingularSystemError) as err:
            truncated = True
            reason = f"decomposition failed at s = {s_cur:.3f}: {err}"
            break
        snap = pde.conserved(u, t_cur)
        vals = functionals(dec, consts, s_cur)
        rows.append(
            {
                "t": t_cur,
                "s": s_cur,
                "p": np.array([dec.p.lam, dec.p.z, dec.p.gamma, dec.p.beta, dec.p.b]),
                "eps_h1": np.sqrt(vals.eps_H1_sq),
                "eta1_q": eta1_mass_pairing(dec, gs, consts),
                "ortho": dec.ortho_residuals,
                "H": vals.H,
                "J": vals.J,
                "F": vals.F,
                "mass": snap.mass,
                "energy": snap.energy,
                "variance": snap.variance,
                "mass_p": mass(dec.ansatz),
            }
        )
        p_fit = dec.p
        s_prev = s_cur

        t_next = t_cur + cfg.dt * cfg.cadence
        if t_next < ts[0] or s_of_t(t_next) < cfg.s_end:
            break
        try:
            res = pde.evolve(u, seg, t0=t_cur)
        except NumericalError as err:
            truncated = True
            reason = f"evolution failed after t = {t_cur:.4f}: {err}"
            break
        u = res.field
        t_cur = t_next

    s_arr = np.array([r["s"] for r in rows])
    params = np.vstack([r["p"] for r in rows]) if rows else np.empty((0, 5))
    return TrackRecord(
        t=np.array([r["t"] for r in rows]),
        s_proxy=s_arr,
        params=params,
        eps_h1=np.array([r["eps_h1"] for r in rows]),
        eta1_dot_q=np.array([r["eta1_q"] for r in rows]),
        ortho=np.vstack([r["ortho"] for r in rows]) if rows else np.empty((0, 5)),
        h=np.array([r["H"] for r in rows]),
        j=np.array([r["J"] for r in rows]),
        f=np.array([r["F"] for r in rows]),
        mass=np.array([r["mass"] for r in rows]),
        energy=np.array([r["energy"] for r in rows]),
        variance=np.array([r["variance"] for r in rows]),
        mass_p=np.array([r["mass_p"] for r in rows]),
        modulation_defect=_defect_estimates(s_arr, params, consts),
        truncated=truncated,
        truncation_reason=reason,
    )
