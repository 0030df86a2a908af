"""Go/no-go battery: nine criteria covering every module end to end.

Each criterion is a library function returning a CriterionResult whose
sub-checks carry the measured value next to its pinned bound, so a red
line shows exactly which quantity missed by how much.  The CLI and the
test suite both run these functions; neither owns a private copy of a
bound.

Two criteria are known red at their pinned tolerances and are left that
way deliberately:

* criterion 6: along the surviving shot from s_in = 1e6, lambda * log s
  dips to 0.8938 against the pinned band [0.9, 1.1].  The trajectory is
  integrator-converged and the deviation sits exactly where the regime
  analysis predicts desk-scale corrections of size log^{-1/2} s.
* criterion 7: the soliton hold error at dt = 2e-4 measures above 1e-6.
  The stepper is cleanly second order (halving ratio 4.00); meeting the
  pinned number at that step size would need a higher-order splitting,
  which would then fail the ratio-4 sub-check.

Determinism (criterion 9) reruns the cheap criteria in full and the two
expensive ones at shortened horizons that exercise identical code paths;
the horizon is the only difference, and no routine here branches on it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pde, reporting
from .ansatz import ParamState, ParamVelocity, error_field
from .errors import AcceptanceError
from .fields import ComplexField2D
from .fields import mass as field_mass
from .groundstate import (
    GroundStateData,
    compute_ground_state,
    nullspace_residuals,
    sector_minima,
    spectral_ground_state,
)
from .interactions import (
    GeometryConstants,
    asymptotic_overlap,
    geometry_constants,
    overlap_two,
    projection_G1_iQa,
)
from .modulation_fit import TRACK_COLUMNS, TrackConfig, track
from .reduced_ode import (
    ShootingConfig,
    default_tube,
    regime_reference,
    shoot,
    trajectory_table,
    xi_of,
)

CRITERION_NAMES = {
    1: "ground-state oracle equivalence",
    2: "null-space relations",
    3: "coercivity spectrum",
    4: "interaction law",
    5: "ansatz error consistency",
    6: "reduced-ode regime",
    7: "pde solver validation",
    8: "end-to-end backward run",
    9: "determinism",
}

# Criterion-8 configuration: s_in inside the reachable 50-200 window and
# the longest s window the box permits (the rescaled box must keep
# covering z + clearance as lambda grows backward; box 9 holds to the
# config floor s_end = 12 with margin).
TRACK_FULL = TrackConfig(
    s_in=50.0, s_end=12.0, n=1024, box=9.0, dt=-5e-4, cadence=250, tol=1e-8
)

# Shortened determinism probes (criterion 9): same code paths, shorter
# horizons.
TRACK_SHORT = TrackConfig(
    s_in=50.0, s_end=47.5, n=512, box=9.0, dt=-5e-4, cadence=250, tol=1e-8
)
PDE_SHORT = dict(n=256, box=20.0, dt=2e-4, n_steps=250, monitor_stride=50)


@dataclass
class SubCheck:
    name: str
    value: float
    bound: str
    ok: bool


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    runtime_s: float
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bad = ", ".join(c.name for c in self.checks if not c.ok)
        tail = f" [failing: {bad}]" if bad else ""
        return f"criterion {self.index} ({self.name}): {status}{tail}"

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "name": self.name,
            "passed": self.passed,
            "runtime_s": self.runtime_s,
            "checks": [
                {"name": c.name, "value": c.value, "bound": c.bound, "ok": c.ok}
                for c in self.checks
            ],
            "artifacts": [str(a) for a in self.artifacts],
        }


@dataclass
class Workspace:
    """Shared inputs so the battery computes Q exactly once."""

    gs: GroundStateData
    consts2: GeometryConstants

    @classmethod
    def build(cls) -> "Workspace":
        gs = compute_ground_state()
        return cls(gs=gs, consts2=geometry_constants(gs, 2))


def _result(index: int, t0: float, checks: list, artifacts: list) -> CriterionResult:
    return CriterionResult(
        index=index,
        name=CRITERION_NAMES[index],
        passed=all(c.ok for c in checks),
        runtime_s=time.perf_counter() - t0,
        checks=checks,
        artifacts=artifacts,
    )


def _write(out_dir, name, columns, rows, stamp) -> list:
    if out_dir is None:
        return []
    return [reporting.write_table(Path(out_dir) / name, columns, rows, stamp)]


def criterion_1(ws: Workspace, out_dir=None, stamp=None) -> CriterionResult:
    """Shooting vs spectral-renormalization mass, and Pohozaev identities."""
    t0 = time.perf_counter()
    gs = ws.gs
    spectral = spectral_ground_state()
    checks = [
        SubCheck(
            "mass route agreement",
            abs(spectral["mass_q"] - gs.mass_q) / gs.mass_q,
            "<= 1e-6 relative",
            abs(spectral["mass_q"] - gs.mass_q) / gs.mass_q <= 1e-6,
        ),
        SubCheck(
            "pohozaev gradient identity",
            abs(gs.grad_q_sq - gs.mass_q) / gs.mass_q,
            "<= 1e-6 relative",
            abs(gs.grad_q_sq - gs.mass_q) / gs.mass_q <= 1e-6,
        ),
        SubCheck(
            "pohozaev quartic identity",
            abs(gs.quartic_q - 2.0 * gs.mass_q) / gs.mass_q,
            "<= 1e-6 relative",
            abs(gs.quartic_q - 2.0 * gs.mass_q) / gs.mass_q <= 1e-6,
        ),
    ]
    energy = 0.5 * gs.grad_q_sq - 0.25 * gs.quartic_q
    checks.append(
        SubCheck(
            "zero energy",
            abs(energy) / gs.mass_q,
            "<= 1e-6 relative",
            abs(energy) / gs.mass_q <= 1e-6,
        )
    )
    rows = [
        ("mass_shooting", gs.mass_q),
        ("mass_spectral", spectral["mass_q"]),
        ("peak_shooting", gs.q_at_0),
        ("peak_spectral", spectral["q_at_0"]),
        ("grad_sq", gs.grad_q_sq),
        ("quartic", gs.quartic_q),
        ("energy", energy),
    ]
    artifacts = _write(out_dir, "criterion1_groundstate.csv", ("quantity", "value"), rows, stamp)
    return _result(1, t0, checks, artifacts)


def criterion_2(ws: Workspace, out_dir=None, stamp=None) -> CriterionResult:
    """Kernel/response relations of the linearized operators."""
    t0 = time.perf_counter()
    resid = nullspace_residuals(ws.gs.q, ws.gs.rho)
    checks = []
    for name, value in resid.items():
        bound = 1e-8 if name == "plus_rho" else 1e-5
        checks.append(SubCheck(name, value, f"<= {bound:g}", value <= bound))
    artifacts = _write(
        out_dir,
        "criterion2_nullspace.csv",
        ("relation", "residual"),
        list(resid.items()),
        stamp,
    )
    return _result(2, t0, checks, artifacts)


def criterion_3(ws: Workspace, out_dir=None, stamp=None) -> CriterionResult:
    """Constrained positivity sector by sector, free negativity at m = 0."""
    t0 = time.perf_counter()
    detail = sector_minima(ws.gs.q, ws.gs.rho, m_max=4)
    checks = []
    rows = []
    for m in range(5):
        for kind in ("plus", "minus"):
            entry = detail[(m, kind)]
            rows.append(
                (m, kind, entry["constrained_min"], entry["unconstrained_min"], entry["n_constraints"])
            )
            checks.append(
                SubCheck(
                    f"constrained minimum m={m} {kind}",
                    entry["constrained_min"],
                    "> 0",
                    entry["constrained_min"] > 0.0,
                )
            )
    free_plus0 = detail[(0, "plus")]["unconstrained_min"]
    checks.append(SubCheck("free m=0 plus minimum", free_plus0, "< 0", free_plus0 < 0.0))
    free_plus1 = detail[(1, "plus")]["unconstrained_min"]
    checks.append(
        SubCheck(
            "free m=1 plus minimum near zero",
            abs(free_plus1),
            "<= 1e-4",
            abs(free_plus1) <= 1e-4,
        )
    )
    artifacts = _write(
        out_dir,
        "criterion3_coercivity.csv",
        ("m", "kind", "constrained_min", "unconstrained_min", "n_constraints"),
        rows,
        stamp,
    )
    return _result(3, t0, checks, artifacts)


def criterion_4(ws: Workspace, out_dir=None, stamp=None) -> CriterionResult:
    """Overlap quadrature against the separation law, with error order."""
    t0 = time.perf_counter()
    omegas = np.array([8.0, 10.0, 12.0, 14.0])
    quad = np.array([overlap_two(ws.gs.q, np.array([w, 0.0])) for w in omegas])
    asym = np.array([asymptotic_overlap(ws.gs, w) for w in omegas])
    ratio = quad / asym
    checks = [
        SubCheck(
            "ratio window",
            float(np.max(np.abs(ratio - 1.0))),
            "ratio in [0.85, 1.15]",
            bool(np.all((ratio >= 0.85) & (ratio <= 1.15))),
        ),
        SubCheck(
            "monotone approach to 1",
            float(np.abs(ratio - 1.0)[-1]),
            "|ratio - 1| strictly decreasing",
            bool(np.all(np.diff(np.abs(ratio - 1.0)) < 0.0)),
        ),
    ]
    # Residual order: with the exponential stripped, the remainder should
    # scale like a power within 0.3 of -3/2.
    resid = np.abs(quad - asym) * np.exp(omegas)
    slope = float(np.polyfit(np.log(omegas), np.log(resid), 1)[0])
    checks.append(
        SubCheck("residual order", slope, "within [-1.8, -1.2]", -1.8 <= slope <= -1.2)
    )
    rows = np.column_stack([omegas, quad, asym, ratio])
    artifacts = _write(
        out_dir,
        "criterion4_interactions.csv",
        ("omega_norm", "quadrature", "asymptotic", "ratio"),
        rows,
        stamp,
    )
    return _result(4, t0, checks, artifacts)


def criterion_5(ws: Workspace, out_dir=None, stamp=None) -> CriterionResult:
    """Ansatz error routes, symplectic pairing, interaction projection."""
    t0 = time.perf_counter()
    gs, consts = ws.gs, ws.consts2
    p = ParamState(lam=1.0, z=8.0, gamma=0.0, beta=0.0, b=1e-3)
    pdot = ParamVelocity(lam_dot=-p.lam * p.b, z_dot=p.b * p.z, gamma_dot=1.0, beta_dot=0.0, b_dot=0.0)
    err = error_field(gs, consts, p, pdot)
    gap = err.meta["route_gap_l2"]
    floor = err.meta["spectral_floor_l2"]
    pairing = abs(err.meta["psi_qa_pairing"])
    proj = projection_G1_iQa(gs, consts, p)
    closed = (
        -consts.kappa
        * consts.c_a
        * gs.rho_dot_q
        * p.b
        * p.z**1.5
        * np.exp(-consts.kappa * p.z)
    )
    match = abs(proj / closed - 1.0)
    checks = [
        SubCheck("route gap", gap, f"<= 10x spectral floor ({10 * floor:.3e})", gap <= 10.0 * floor),
        SubCheck("symplectic pairing", pairing, "<= 1e-12", pairing <= 1e-12),
        SubCheck("interaction projection match", match, "<= 0.25 relative", match <= 0.25),
    ]
    rows = [
        ("route_gap_l2", gap),
        ("spectral_floor_l2", floor),
        ("psi_qa_pairing", pairing),
        ("projection_quadrature", proj),
        ("projection_closed_form", closed),
    ]
    artifacts = _write(out_dir, "criterion5_ansatz.csv", ("quantity", "value"), rows, stamp)
    return _result(5, t0, checks, artifacts)


def criterion_6(ws: Workspace, out_dir=None, stamp=None) -> CriterionResult:
    """Shooting survives three decades; regime bands along the survivor."""
    t0 = time.perf_counter()
    consts = ws.consts2
    cfg = ShootingConfig(
        s_in=1e6,
        s0=1e3,
        tube=default_tube(consts),
        zeta_sharp_interval=(-1.0, 1.0),
        bisection_tol=1e-12,
    )
    res = shoot(cfg, consts)
    traj = res.trajectory
    lamlog = traj.lam * np.log(traj.s)
    bslog = traj.b * traj.s * np.log(traj.s)
    checks = [
        SubCheck("shot reaches s0", float(traj.s[-1]), "reaches 1e3", res.converged),
        SubCheck(
            "lambda log s band",
            float(np.min(lamlog)),
            "in [0.9, 1.1]",
            bool(np.all((lamlog >= 0.9) & (lamlog <= 1.1))),
        ),
        SubCheck(
            "b s log s band",
            float(np.min(bslog)),
            "in [0.8, 1.2]",
            bool(np.all((bslog >= 0.8) & (bslog <= 1.2))),
        ),
    ]
    # Transversality at interior zeta exits; runs that exit at the seed
    # itself (the bracket endpoints start on the band boundary) carry no
    # crossing slope.
    interior = [
        info
        for _, info in res.history
        if info.kind == "tube_exit" and info.s_star < (1.0 - 1e-6) * cfg.s_in
    ]
    worst_xidot = max((info.xi_dot for info in interior), default=-np.inf)
    checks.append(
        SubCheck(
            "zeta exit transversality",
            float(worst_xidot),
            "xi_dot < 0 at every interior bisection exit",
            all(info.xi_dot is not None and info.xi_dot < 0.0 for info in interior),
        )
    )
    # Reference residuals against the regime envelope shapes: finite
    # constants over three decades.
    s_grid = np.geomspace(1e3, 1e6, 61)
    env = s_grid**-2 * np.log(s_grid) ** -1.5
    resid = np.empty_like(s_grid)
    for i, s in enumerate(s_grid):
        ref = regime_reference(s, consts)
        da = -consts.c_a * np.sqrt(ref.z) * np.exp(-consts.kappa * ref.z)
        resid[i] = abs(da + s**-2 / np.log(s))
    c_env = float(np.max(resid / env))
    checks.append(
        SubCheck(
            "reference residual envelope",
            c_env,
            "finite constant (<= 2)",
            bool(np.isfinite(c_env) and c_env <= 2.0),
        )
    )
    cols, table = trajectory_table(traj, consts)
    artifacts = _write(out_dir, "criterion6_survivor.csv", cols, table, stamp)
    return _result(6, t0, checks, artifacts)


def criterion_7(ws: Workspace, out_dir=None, stamp=None) -> CriterionResult:
    """Soliton hold, drift, order, virial identity, explicit symmetry."""
    t0 = time.perf_counter()
    gs = ws.gs

    # Hold at the pinned configuration.
    u0 = pde.ground_state_field(gs, 512, 20.0)
    hold = pde.evolve(u0, pde.EvolutionConfig(dt=2e-4, n_steps=5000, monitor_stride=1000))
    dev = hold.field.values - u0.values * np.exp(1.0j)
    hold_err = float(np.sqrt(np.sum(np.abs(dev) ** 2)) * u0.dx)
    checks = [SubCheck("soliton hold", hold_err, "<= 1e-6 in L2", hold_err <= 1e-6)]

    # Mass drift over 1e4 steps on traveling data (see module notes on the
    # quasi-static rounding bias).
    g = ComplexField2D(np.zeros((256, 256), dtype=complex), 20.0)
    xx, yy = g.meshgrid()
    g.values[:] = np.exp(-(xx**2 + yy**2) / 2.0) * np.exp(2.0j * xx)
    drift_run = pde.evolve(g, pde.EvolutionConfig(dt=1e-4, n_steps=10000, monitor_stride=1000))
    m = drift_run.log[:, 1]
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    checks.append(SubCheck("mass drift", drift, "<= 1e-12 over 1e4 steps", drift <= 1e-12))

    # Second order in dt.
    u1 = pde.ground_state_field(gs, 256, 20.0)
    errs = []
    for dt, steps in ((2e-4, 1250), (1e-4, 2500)):
        r = pde.evolve(u1, pde.EvolutionConfig(dt=dt, n_steps=steps, monitor_stride=steps))
        errs.append(float(np.max(np.abs(r.field.values - u1.values * np.exp(0.25j)))))
    ratio = errs[0] / errs[1]
    checks.append(SubCheck("halving ratio", ratio, "4 +- 20%", 3.2 <= ratio <= 4.8))

    # Virial curvature against 16E for Gaussian data.
    gauss = ComplexField2D(np.zeros((256, 256), dtype=complex), 20.0)
    gauss.values[:] = np.exp(-(xx**2 + yy**2) / 2.0)
    vr = pde.evolve(gauss, pde.EvolutionConfig(dt=1e-4, n_steps=200, monitor_stride=50))
    rep = pde.virial_check(vr.snapshots)
    checks.append(
        SubCheck("virial identity", rep.rel_error, "<= 1e-2", rep.rel_error <= 1e-2)
    )

    # Pseudo-conformal image of the soliton against the blow-up profile;
    # the image-side orbit phase e^{i/|t|} is carried explicitly.
    tconf = -0.1
    u2 = pde.ground_state_field(gs, 512, 20.0)
    image = pde.pseudo_conformal(u2, tconf)
    target = pde.blowup_profile(gs, tconf, image.n, image.box)
    pc_err = float(
        np.sqrt(np.sum(np.abs(image.values * np.exp(1j / abs(tconf)) - target.values) ** 2))
        * image.dx
    )
    checks.append(SubCheck("pseudo-conformal map", pc_err, "<= 1e-8 in L2", pc_err <= 1e-8))

    artifacts = []
    if out_dir is not None:
        artifacts = _write(
            out_dir, "criterion7_hold_log.csv", pde.LOG_COLUMNS, hold.log, stamp
        )
        artifacts += _write(
            out_dir, "criterion7_drift_log.csv", pde.LOG_COLUMNS, drift_run.log, stamp
        )
    return _result(7, t0, checks, artifacts)


def _fit_envelope(s, values, shape, n_fit=3):
    """Largest ratio value/shape over the first n_fit tracked points."""
    num = values[1 : 1 + n_fit]
    den = shape(s[1 : 1 + n_fit])
    return float(np.max(num / den))


def criterion_8(ws: Workspace, out_dir=None, stamp=None, cfg: TrackConfig = TRACK_FULL) -> CriterionResult:
    """Backward run from the prepared data, residuals under their envelopes."""
    t0 = time.perf_counter()
    record = track(ws.gs, ws.consts2, cfg)
    s = record.s_proxy

    checks = [
        SubCheck(
            "decomposition converged at every cadence point",
            float(len(record)),
            "no truncation",
            not record.truncated,
        )
    ]

    def su_shape(x):
        return 1.0 / (x * np.log(x) ** 1.5)

    c_su = _fit_envelope(s, record.eps_h1, su_shape)
    su_ok = bool(np.all(record.eps_h1[1:] <= 10.0 * c_su * su_shape(s[1:])))
    checks.append(
        SubCheck(
            "eps H1 under fitted envelope",
            float(np.max(record.eps_h1[1:] / (c_su * su_shape(s[1:])))),
            "<= 10x the s^-1 log^-3/2 s fit",
            su_ok,
        )
    )

    def os_shape(x):
        return 1.0 / (x**2 * np.log(x) ** 2)

    c_os = _fit_envelope(s, np.abs(record.eta1_dot_q), os_shape)
    os_ok = bool(np.all(np.abs(record.eta1_dot_q[1:]) <= 10.0 * c_os * os_shape(s[1:])))
    checks.append(
        SubCheck(
            "eta1.Q under fitted envelope",
            float(np.max(np.abs(record.eta1_dot_q[1:]) / (c_os * os_shape(s[1:])))),
            "<= 10x the s^-2 log^-2 s fit",
            os_ok,
        )
    )

    mass_drift = float(np.max(np.abs(record.mass - record.mass[0])) / record.mass[0])
    checks.append(
        SubCheck("total mass conservation", mass_drift, "<= 1e-9 relative", mass_drift <= 1e-9)
    )

    # |F| drift against the integrated almost-monotonicity envelope
    # |dF/ds| <= C (s^-2 log^-2 s ||eps|| + s^-1 log^-1 s ||eps||^2):
    # the measured constant must be finite; its size is reported.
    env_rate = (
        np.abs(s) ** -2 * np.log(s) ** -2 * record.eps_h1
        + np.abs(s) ** -1 * np.log(s) ** -1 * record.eps_h1**2
    )
    # integrate along decreasing s
    integ = np.concatenate(
        [[0.0], np.cumsum(0.5 * (env_rate[1:] + env_rate[:-1]) * -np.diff(s))]
    )
    f_drift = np.abs(record.f - record.f[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(integ > 0.0, f_drift / integ, 0.0)
    c_mono = float(np.max(ratios))
    checks.append(
        SubCheck(
            "F drift within integrated envelope",
            c_mono,
            "finite measured constant",
            bool(np.isfinite(c_mono)),
        )
    )

    artifacts = []
    if out_dir is not None:
        cols, table = record.to_table()
        artifacts = _write(out_dir, "criterion8_track.csv", cols, table, stamp)
    return _result(8, t0, checks, artifacts)


def _determinism_battery(ws: Workspace, out_dir: Path, stamp=None) -> list:
    """One full pass of the reproducibility probes; returns CSV paths."""
    paths = []
    for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6):
        paths.extend(fn(ws, out_dir, stamp).artifacts)
    u0 = pde.ground_state_field(ws.gs, PDE_SHORT["n"], PDE_SHORT["box"])
    run = pde.evolve(
        u0,
        pde.EvolutionConfig(
            dt=PDE_SHORT["dt"],
            n_steps=PDE_SHORT["n_steps"],
            monitor_stride=PDE_SHORT["monitor_stride"],
        ),
    )
    paths.extend(
        _write(out_dir, "criterion7_short_log.csv", pde.LOG_COLUMNS, run.log, stamp)
    )
    rec = track(ws.gs, ws.consts2, TRACK_SHORT)
    cols, table = rec.to_table()
    paths.extend(_write(out_dir, "criterion8_short_track.csv", cols, table, stamp))
    return paths


def criterion_9(ws: Workspace, out_dir=None, stamp=None) -> CriterionResult:
    """Byte-identical CSV bodies across repeated runs."""
    t0 = time.perf_counter()
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        base = Path(out_dir) if out_dir is not None else Path(tmp)
        dir_a = base / "determinism_a"
        dir_b = base / "determinism_b"
        dir_a.mkdir(parents=True, exist_ok=True)
        dir_b.mkdir(parents=True, exist_ok=True)
        paths_a = _determinism_battery(ws, dir_a, stamp)
        paths_b = _determinism_battery(ws, dir_b, stamp)

        checks = []
        artifacts = list(paths_a) + list(paths_b)
        for pa, pb in zip(paths_a, paths_b):
            same = reporting.table_body(pa) == reporting.table_body(pb)
            checks.append(
                SubCheck(f"identical bodies: {Path(pa).name}", float(same), "byte equality", same)
            )
        if out_dir is None:
            artifacts = []
    return _result(9, t0, checks, artifacts)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_suite(
    ws: Workspace | None = None,
    out_dir=None,
    stamp=None,
    indices=None,
    echo=print,
) -> list:
    """Run the battery in order, emitting one pass/fail line per criterion."""
    ws = ws or Workspace.build()
    results = []
    for index in indices or sorted(CRITERIA):
        result = CRITERIA[index](ws, out_dir=out_dir, stamp=stamp)
        results.append(result)
        if echo is not None:
            echo(result.summary_line())
    return results


def require_all_green(results) -> None:
    bad = [r for r in results if not r.passed]
    if bad:
        lines = "; ".join(r.summary_line() for r in bad)
        raise AcceptanceError(f"{len(bad)} criteria failed: {lines}")
