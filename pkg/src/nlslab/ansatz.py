"""K-bubble approximate blow-up profile and its equation error field.

The approximate solution in rescaled variables is a superposition of K
modulated copies of the corrected ground state Q_a = Q + a(z) rho placed
on a regular K-gon of radius z,

    P(y) = sum_k e^{i Gamma_k(y - z_k)} Q_a(y - z_k),
    Gamma_k(w) = beta_k . w - (b/4)|w|^2,    z_k = z e_k,  beta_k = beta e_k.

The error field E_P measures how far P is from solving the renormalized
cubic equation.  It is assembled two independent ways: once by applying
the equation to P with spectral derivatives, and once from the per-bubble
decomposition whose pieces are modulation terms, bubble interactions, and
the profile correction remainder.  The L2 gap between the two routes is a
built-in consistency diagnostic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from . import fields
from .fields import ComplexField2D
from .groundstate import GroundStateData
from .interactions import GeometryConstants, a_of_z, a_prime_of_z

# Hard lower bound on the clearance between a bubble center and the box
# boundary.  The default is wider: with clearance 23 the bubble tail meets
# the periodic seam below 1e-10 of the peak, so the spectral Laplacian in
# error_field stays free of seam-induced Gibbs noise (clearance 15 leaves
# ~1e-7 at the seam, which the Laplacian amplifies to ~1e-5 in L2).
BOX_MARGIN = 15.0
DEFAULT_CLEARANCE = 23.0
DEFAULT_FIELD_N = 1024


@dataclass(frozen=True)
class ParamState:
    """Modulation parameters p = (lambda, z, gamma, beta, b).

    lam is the scale, z the bubble separation radius, gamma the global
    phase, beta the radial drift magnitude, and b the conformal parameter.
    """

    lam: float
    z: float
    gamma: float
    beta: float
    b: float

    def __post_init__(self):
        if not (self.lam > 0):
            raise ConfigError(f"scale must be positive, got {self.lam}")
        if not (self.z > 0):
            raise ConfigError(f"separation must be positive, got {self.z}")
        if self.z < 4.0 or abs(self.b) + abs(self.beta) > 0.5:
            warnings.warn(
                "parameters outside the construction regime "
                f"(z={self.z}, |b|+|beta|={abs(self.b) + abs(self.beta):.3g})",
                stacklevel=2,
            )


@dataclass(frozen=True)
class ParamVelocity:
    """Raw s-derivatives (lam_dot, z_dot, gamma_dot, beta_dot, b_dot)."""

    lam_dot: float
    z_dot: float
    gamma_dot: float
    beta_dot: float
    b_dot: float

    def __post_init__(self):
        vals = (self.lam_dot, self.z_dot, self.gamma_dot, self.beta_dot, self.b_dot)
        if not all(np.isfinite(v) for v in vals):
            raise ConfigError(f"parameter velocity must be finite, got {vals}")


@dataclass(frozen=True)
class ModulationVector:
    """The five scalar modulation combinations, zero on the reduced flow.

    Vector equations collapse to their e_1-components under the symmetric
    reduction z_k = z e_k, beta_k = beta e_k.
    """

    m_scale: float
    m_translate: float
    m_phase: float
    m_drift: float
    m_conformal: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.m_scale, self.m_translate, self.m_phase, self.m_drift, self.m_conformal]
        )

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.as_array())))


def modulation_vector(
    p: ParamState, pdot: ParamVelocity, consts: GeometryConstants
) -> ModulationVector:
    """Evaluate the modulation combinations at (p, pdot).

    All five vanish exactly when pdot is the reduced-system right-hand
    side at p.
    """
    a = a_of_z(consts, p.z)
    lam_rel = pdot.lam_dot / p.lam
    m_scale = p.b + lam_rel
    m_translate = pdot.z_dot - 2.0 * p.beta + lam_rel * p.z
    m_phase = (
        pdot.gamma_dot - 1.0 + p.beta**2 - lam_rel * p.beta * p.z - p.beta * pdot.z_dot
    )
    m_drift = pdot.beta_dot - lam_rel * p.beta + 0.5 * p.b * m_translate
    m_conformal = pdot.b_dot + p.b**2 - 2.0 * p.b * m_scale - a
    return ModulationVector(m_scale, m_translate, m_phase, m_drift, m_conformal)


def _field_box(p: ParamState, box: float | None) -> float:
    if box is None:
        return p.z + DEFAULT_CLEARANCE
    if box < p.z + BOX_MARGIN:
        raise DomainError(
            f"bubble at radius {p.z} leaves box of half-width {box}; "
            f"need at least {p.z + BOX_MARGIN}"
        )
    return float(box)


def _bubble_arrays(gs, consts, p, k, xx, yy, a):
    """Shifted-frame coordinate and profile arrays for bubble k (1-based)."""
    e = consts.unit_vectors[k - 1]
    wx = xx - p.z * e[0]
    wy = yy - p.z * e[1]
    r = np.hypot(wx, wy)
    ew = e[0] * wx + e[1] * wy
    q_r = gs.q(r)
    rho_r = gs.rho(r)
    qa = q_r + a * rho_r
    gamma_k = p.beta * ew - 0.25 * p.b * (wx**2 + wy**2)
    phase = np.exp(1j * gamma_k)
    return {"r": r, "ew": ew, "q": q_r, "rho": rho_r, "qa": qa, "phase": phase}


def build_bubble(
    gs: GroundStateData,
    consts: GeometryConstants,
    p: ParamState,
    k: int,
    n: int = DEFAULT_FIELD_N,
    box: float | None = None,
    a: float | None = None,
) -> ComplexField2D:
    """Single modulated bubble e^{i Gamma_k(y-z_k)} Q_a(y-z_k).

    k is 1-based.  Pass a=0.0 to drop the profile correction (then b=beta=0
    gives a real positive translate of Q).
    """
    if not 1 <= k <= consts.K:
        raise DomainError(f"bubble index {k} outside 1..{consts.K}")
    box = _field_box(p, box)
    if a is None:
        a = a_of_z(consts, p.z)
    out = ComplexField2D(np.zeros((n, n), dtype=complex), box)
    xx, yy = out.meshgrid()
    pieces = _bubble_arrays(gs, consts, p, k, xx, yy, a)
    out.values[:] = pieces["phase"] * pieces["qa"]
    return out


def build_ansatz(
    gs: GroundStateData,
    consts: GeometryConstants,
    p: ParamState,
    n: int = DEFAULT_FIELD_N,
    box: float | None = None,
    a: float | None = None,
) -> ComplexField2D:
    """Sum of the K bubbles.  Independent of p.lam and p.gamma."""
    box = _field_box(p, box)
    if a is None:
        a = a_of_z(consts, p.z)
    out = ComplexField2D(np.zeros((n, n), dtype=complex), box)
    xx, yy = out.meshgrid()
    for k in range(1, consts.K + 1):
        pieces = _bubble_arrays(gs, consts, p, k, xx, yy, a)
        out.values += pieces["phase"] * pieces["qa"]
    return out


def to_physical(field: ComplexField2D, p: ParamState, t: float | None = None) -> ComplexField2D:
    """Undo the renormalization: u(x) = (e^{i gamma}/lam) v(x / lam).

    The returned field lives on the rescaled grid x = lam * y, so no
    interpolation happens and the critical-scaling mass is preserved to
    rounding.
    """
    if field.dx > 0.25:
        raise DomainError(
            f"rescaled spacing {field.dx} under-resolves the unit-width profile; "
            "need dx <= 1/4"
        )
    values = (np.exp(1j * p.gamma) / p.lam) * field.values
    meta = dict(field.meta)
    meta["p"] = {"lam": p.lam, "z": p.z, "gamma": p.gamma, "beta": p.beta, "b": p.b}
    if t is not None:
        meta["t"] = float(t)
    return ComplexField2D(values, p.lam * field.box, meta)


def spectral_floor(gs: GroundStateData, n: int, box: float) -> float:
    """L2 residual of the ground-state equation for a single sampled Q.

    Measures the combined interpolation plus spectral-truncation error on
    the given grid; field-level identities cannot be trusted below it.
    """
    probe = ComplexField2D(np.zeros((n, n), dtype=complex), box)
    xx, yy = probe.meshgrid()
    q_r = gs.q(np.hypot(xx, yy))
    probe.values[:] = q_r
    resid = fields.laplacian(probe).values.real - q_r + q_r**3
    return float(np.sqrt(np.sum(resid**2)) * probe.dx)


def error_field(
    gs: GroundStateData,
    consts: GeometryConstants,
    p: ParamState,
    pdot: ParamVelocity,
    n: int = DEFAULT_FIELD_N,
    box: float | None = None,
) -> ComplexField2D:
    """Equation error of the ansatz flowing with parameter velocity pdot.

    E_P = i dP/ds + Lap P - P + |P|^2 P - i (lam_dot/lam) Lambda P
          + (1 - gamma_dot) P.

    Returns the direct spectral assembly.  meta carries the L2 gap to the
    per-bubble decomposition route ("route_gap_l2"), the grid's spectral
    floor on Q ("spectral_floor_l2"), and the quadrature value of the
    pairing <Psi_Qa, i Q_a> ("psi_qa_pairing", identically zero because
    both factors are real).
    """
    box = _field_box(p, box)
    a = a_of_z(consts, p.z)
    a_prime = a_prime_of_z(consts, p.z)
    lam_rel = pdot.lam_dot / p.lam
    mod = modulation_vector(p, pdot, consts)

    out = ComplexField2D(np.zeros((n, n), dtype=complex), box)
    xx, yy = out.meshgrid()
    dq = gs.q.derivative()
    drho = gs.rho.derivative()

    bubbles = []
    for k in range(1, consts.K + 1):
        pieces = _bubble_arrays(gs, consts, p, k, xx, yy, a)
        pieces["qa_d"] = dq(pieces["r"]) + a * drho(pieces["r"])
        r = pieces["r"]
        pieces["ew_over_r"] = np.divide(
            pieces["ew"], r, out=np.zeros_like(r), where=r > 0
        )
        pieces["P"] = pieces["phase"] * pieces["qa"]
        bubbles.append(pieces)

    P = np.sum([bb["P"] for bb in bubbles], axis=0)
    p_field = ComplexField2D(P, box)

    # Route (i): the equation applied to P, with the s-derivative expanded
    # analytically per bubble and spatial derivatives taken spectrally.
    idP = np.zeros_like(P)
    for bb in bubbles:
        qa, r, ew = bb["qa"], bb["r"], bb["ew"]
        radial_d = bb["ew_over_r"] * bb["qa_d"]  # e_k . grad Q_a
        idP += bb["phase"] * (
            1j * pdot.z_dot * a_prime * bb["rho"]
            - pdot.beta_dot * ew * qa
            + 0.25 * pdot.b_dot * r**2 * qa
            + pdot.z_dot * p.beta * qa
            - 0.5 * p.b * pdot.z_dot * ew * qa
            - 1j * pdot.z_dot * radial_d
        )
    lap = fields.laplacian(p_field).values
    gx, gy = fields.gradient(p_field)
    lam_P = P + xx * gx.values + yy * gy.values
    direct = (
        idP
        + lap
        - P
        + np.abs(P) ** 2 * P
        - 1j * lam_rel * lam_P
        + (1.0 - pdot.gamma_dot) * P
    )

    # Route (ii): per-bubble decomposition.  The bubble-local pieces use
    # the profile equations instead of any Laplacian; the cross terms are
    # the cubic interactions F_k.
    sum_p_sq = np.sum([bb["P"] ** 2 for bb in bubbles], axis=0)
    decomposed = np.zeros_like(P)
    psi_qa_pairing = 0.0
    for bb in bubbles:
        qa, r, ew, q_r, rho_r = bb["qa"], bb["r"], bb["ew"], bb["q"], bb["rho"]
        lam_qa = qa + r * bb["qa_d"]
        psi_qa = qa**3 - q_r**3 - 3.0 * a * q_r**2 * rho_r + 0.25 * a**2 * r**2 * rho_r
        mhat = (
            -1j * mod.m_scale * lam_qa
            - 1j * mod.m_translate * bb["ew_over_r"] * bb["qa_d"]
            - mod.m_phase * qa
            - mod.m_drift * ew * qa
            + 0.25 * mod.m_conformal * r**2 * qa
        )
        psi_local = mhat + 1j * pdot.z_dot * a_prime * rho_r + psi_qa
        decomposed += bb["phase"] * psi_local
        # F_k: interactions of bubble k with the others.
        other = P - bb["P"]
        other_sq = sum_p_sq - bb["P"] ** 2
        decomposed += (
            2.0 * np.abs(bb["P"]) ** 2 * other
            + bb["P"] ** 2 * np.conj(other)
            + np.conj(bb["P"]) * (other**2 - other_sq)
        )
        psi_qa_pairing += float(np.sum(np.imag(psi_qa * qa))) * out.dx**2

    gap = float(np.sqrt(np.sum(np.abs(direct - decomposed) ** 2)) * out.dx)
    floor = spectral_floor(gs, n, box)
    if gap > 10.0 * floor:
        warnings.warn(
            f"error-field routes disagree: L2 gap {gap:.3e} vs floor {floor:.3e}",
            stacklevel=2,
        )
    out.values[:] = direct
    out.meta.update(
        {
            "route_gap_l2": gap,
            "spectral_floor_l2": floor,
            "psi_qa_pairing": psi_qa_pairing / consts.K,
        }
    )
    return out
