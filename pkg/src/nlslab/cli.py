"""Command-line front end: one subcommand per module, artifacts on disk.

Every subcommand reads an optional flat key=value config file, writes its
tables (CSV), a JSON summary, and an SVG figure into the output directory,
and stamps everything with the config hash and code version.  Exit codes:
0 success, 2 usage, 3 configuration, 4 numerical failure, 5 acceptance
failure.  The environment variable NLSLAB_THREADS caps FFT parallelism.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, acceptance, pde, reporting
from .ansatz import ParamState, ParamVelocity, build_ansatz, error_field, to_physical
from .config import ExperimentConfig, load_experiment_config
from .errors import AcceptanceError, ConfigError, NlslabError
from .fields import write_field
from .groundstate import compute_ground_state
from .interactions import asymptotic_overlap, geometry_constants, overlap_two
from .modulation_fit import TrackConfig, track
from .reduced_ode import ShootingConfig, default_tube, shoot, trajectory_table


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlslab",
        description="Numerical laboratory for multi-bubble blow-up in the 2D cubic focusing Schrodinger equation.",
    )
    parser.add_argument("--version", action="version", version=f"nlslab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--out-dir", default="out", help="artifact directory (default: out)")
        p.add_argument("--verbose", action="store_true")

    common(sub.add_parser("groundstate", help="solve Q and rho, dump profiles and constants"))
    common(sub.add_parser("interactions", help="overlap sweep against the separation law"))
    common(sub.add_parser("ansatz", help="assemble the K-bubble ansatz and its equation error"))

    p_red = sub.add_parser("reduced-ode", help="reduced parameter system")
    p_red.add_argument("action", choices=["shoot"], help="what to run")
    p_red.add_argument("--s-in", type=float, default=None, dest="s_in")
    p_red.add_argument("--s0", type=float, default=None)
    p_red.add_argument("--tol", type=float, default=None, help="bisection tolerance")
    p_red.add_argument("--out", default=None, help="trajectory CSV filename")
    common(p_red)

    common(sub.add_parser("pde", help="split-step run with conservation log"))
    common(sub.add_parser("track", help="backward run with bubble decomposition at cadence"))

    p_acc = sub.add_parser("acceptance", help="run the go/no-go battery")
    p_acc.add_argument("--suite", choices=["primary"], default="primary")
    p_acc.add_argument(
        "--criteria",
        default=None,
        help="comma-separated criterion indices (default: all nine)",
    )
    common(p_acc)

    p_plot = sub.add_parser("plot", help="line plot columns of a table CSV")
    p_plot.add_argument("csv", help="input table")
    p_plot.add_argument("--x", required=True, help="x column name")
    p_plot.add_argument("--y", required=True, help="comma-separated y column names")
    p_plot.add_argument("--out", default=None, help="output SVG path")
    p_plot.add_argument("--logx", action="store_true")
    p_plot.add_argument("--logy", action="store_true")
    p_plot.add_argument("--title", default=None)
    common(p_plot)

    return parser


def _check_threads() -> None:
    raw = os.environ.get("NLSLAB_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"NLSLAB_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"NLSLAB_THREADS must be >= 1, got {n}")


def _say(args, message: str) -> None:
    if getattr(args, "verbose", False):
        print(message)


def run_groundstate(args, cfg: ExperimentConfig) -> int:
    gs = compute_ground_state()
    out = cfg.out_dir
    q_rows = np.column_stack([gs.q.grid.r, gs.q.values])
    rho_rows = np.column_stack([gs.rho.grid.r, gs.rho.values])
    reporting.write_table(out / "q.csv", ("r", "value"), q_rows, cfg.stamp)
    reporting.write_table(out / "rho.csv", ("r", "value"), rho_rows, cfg.stamp)
    constants = {
        "q_at_0": gs.q_at_0,
        "mass_q": gs.mass_q,
        "grad_q_sq": gs.grad_q_sq,
        "quartic_q": gs.quartic_q,
        "c_q": gs.c_q,
        "i_q": gs.i_q,
        "rho_dot_q": gs.rho_dot_q,
        "rho_growth_constant": gs.rho_growth_constant,
        "profiles": {"q": "q.csv", "rho": "rho.csv"},
        "diagnostics": gs.diagnostics,
    }
    reporting.write_json(out / "constants.json", constants, cfg.stamp)
    reporting.line_plot(
        out / "q.csv", "r", ["value"], out / "profiles.svg", logy=True,
        title="ground state, radial profile",
    )
    _say(args, f"wrote q.csv, rho.csv, constants.json, profiles.svg to {out}")
    return 0


def run_interactions(args, cfg: ExperimentConfig) -> int:
    gs = compute_ground_state()
    k = cfg.get_int("interactions.k", 2)
    consts = geometry_constants(gs, k)
    omegas = cfg.get_floats("interactions.omegas", (8.0, 10.0, 12.0, 14.0))
    rows = []
    for w in omegas:
        quad = overlap_two(gs.q, np.array([w, 0.0]))
        asym = asymptotic_overlap(gs, w)
        rows.append((w, quad, asym, quad / asym))
    out = cfg.out_dir
    csv = reporting.write_table(
        out / "interactions.csv", ("omega_norm", "quadrature", "asymptotic", "ratio"), rows, cfg.stamp
    )
    reporting.write_json(
        out / "geometry.json",
        {"K": consts.K, "kappa": consts.kappa, "c_a": consts.c_a},
        cfg.stamp,
    )
    reporting.line_plot(
        csv, "omega_norm", ["ratio"], out / "interactions_ratio.svg",
        title="overlap quadrature / separation law",
    )
    _say(args, f"wrote interactions.csv, geometry.json, interactions_ratio.svg to {out}")
    return 0


def run_ansatz(args, cfg: ExperimentConfig) -> int:
    gs = compute_ground_state()
    k = cfg.get_int("ansatz.k", 2)
    consts = geometry_constants(gs, k)
    p = ParamState(
        lam=cfg.get_float("ansatz.lam", 1.0),
        z=cfg.get_float("ansatz.z", 8.0),
        gamma=cfg.get_float("ansatz.gamma", 0.0),
        beta=cfg.get_float("ansatz.beta", 0.0),
        b=cfg.get_float("ansatz.b", 1e-3),
    )
    n = cfg.get_int("ansatz.n", 256)
    prof = build_ansatz(gs, consts, p, n=n)
    pdot = ParamVelocity(
        lam_dot=-p.lam * p.b, z_dot=p.b * p.z, gamma_dot=1.0, beta_dot=0.0, b_dot=0.0
    )
    err = error_field(gs, consts, p, pdot, n=n)

    out = cfg.out_dir
    write_field(out / "ansatz_field.bin", to_physical(prof, p), provenance=cfg.stamp)
    reporting.write_matrix(out / "ansatz_abs.csv", np.abs(prof.values), cfg.stamp)
    reporting.write_matrix(out / "ansatz_arg.csv", np.angle(prof.values), cfg.stamp)
    reporting.write_matrix(out / "ansatz_err_abs.csv", np.abs(err.values), cfg.stamp)
    reporting.write_json(
        out / "ansatz.json",
        {
            "params": {"lam": p.lam, "z": p.z, "gamma": p.gamma, "beta": p.beta, "b": p.b},
            "route_gap_l2": err.meta["route_gap_l2"],
            "spectral_floor_l2": err.meta["spectral_floor_l2"],
            "psi_qa_pairing": err.meta["psi_qa_pairing"],
        },
        cfg.stamp,
    )
    # midline cut through the bubble centers
    mid = prof.n // 2
    x = (np.arange(prof.n) - prof.n // 2) * prof.dx
    cut = np.abs(prof.values[:, mid])
    reporting.write_table(
        out / "ansatz_midline.csv", ("x", "abs_p"), np.column_stack([x, cut]), cfg.stamp
    )
    reporting.line_plot(
        out / "ansatz_midline.csv", "x", ["abs_p"], out / "ansatz_midline.svg",
        title="|P| along the ring axis",
    )
    _say(args, f"wrote ansatz field, heatmap tables, ansatz.json, ansatz_midline.svg to {out}")
    return 0


def run_reduced(args, cfg: ExperimentConfig) -> int:
    gs = compute_ground_state()
    consts = geometry_constants(gs, cfg.get_int("reduced.k", 2))
    s_in = args.s_in if args.s_in is not None else cfg.get_float("reduced.s_in", 1e6)
    s0 = args.s0 if args.s0 is not None else cfg.get_float("reduced.s0", 1e3)
    tol = args.tol if args.tol is not None else cfg.get_float("reduced.tol", 1e-12)
    shot = shoot(
        ShootingConfig(
            s_in=s_in,
            s0=s0,
            tube=default_tube(consts),
            zeta_sharp_interval=(-1.0, 1.0),
            bisection_tol=tol,
        ),
        consts,
    )
    out = cfg.out_dir
    name = args.out or "trajectory.csv"
    cols, table = trajectory_table(shot.trajectory, consts)
    reporting.write_table(out / name, cols, table, cfg.stamp)
    reporting.write_json(
        out / "shoot.json",
        {
            "zeta_sharp": shot.zeta_sharp,
            "converged": shot.converged,
            "interval": list(shot.interval),
            "runs": len(shot.history),
            "exits": [
                {"zeta_sharp": zs, "kind": info.kind, "band": info.band, "s_star": info.s_star}
                for zs, info in shot.history
            ],
        },
        cfg.stamp,
    )
    # survivor diagnostics: lambda log s and b s log s, flat near 1 in regime
    traj = shot.trajectory
    diag_rows = np.column_stack(
        [traj.s, traj.lam * np.log(traj.s), traj.b * traj.s * np.log(traj.s)]
    )
    reporting.write_table(
        out / "survivor_bands.csv", ("s", "lam_log_s", "b_s_log_s"), diag_rows, cfg.stamp
    )
    reporting.line_plot(
        out / "survivor_bands.csv", "s", ["lam_log_s", "b_s_log_s"],
        out / "survivor_bands.svg", logx=True, title="survivor regime bands",
    )
    _say(args, f"wrote {name}, shoot.json, survivor_bands.csv/.svg to {out}")
    return 0


def run_pde(args, cfg: ExperimentConfig) -> int:
    gs = compute_ground_state()
    n = cfg.get_int("pde.n", 256)
    box = cfg.get_float("pde.box", 20.0)
    run_cfg = pde.EvolutionConfig(
        dt=cfg.get_float("pde.dt", 2e-4),
        n_steps=cfg.get_int("pde.steps", 1250),
        monitor_stride=cfg.get_int("pde.stride", 25),
    )
    data = cfg.get_str("pde.data", "soliton")
    if data == "soliton":
        u0 = pde.ground_state_field(gs, n, box)
    elif data == "gaussian":
        u0 = pde.ground_state_field(gs, n, box)  # grid template
        xx, yy = u0.meshgrid()
        amp = cfg.get_float("pde.amp", 1.0)
        u0.values[:] = amp * np.exp(-(xx**2 + yy**2) / 2.0)
    else:
        raise ConfigError(f"pde.data must be 'soliton' or 'gaussian', got {data!r}")
    result = pde.evolve(u0, run_cfg)
    out = cfg.out_dir
    csv = reporting.write_table(out / "pde_log.csv", pde.LOG_COLUMNS, result.log, cfg.stamp)
    summary = {
        "t_final": result.log[-1, 0],
        "mass_drift": float(np.max(np.abs(result.log[:, 1] - result.log[0, 1]))),
        "energy_drift": float(np.max(np.abs(result.log[:, 2] - result.log[0, 2]))),
    }
    if data == "soliton":
        t_final = run_cfg.dt * run_cfg.n_steps
        dev = result.field.values - u0.values * np.exp(1j * t_final)
        summary["hold_error_l2"] = float(np.sqrt(np.sum(np.abs(dev) ** 2)) * u0.dx)
    reporting.write_json(out / "pde_summary.json", summary, cfg.stamp)
    reporting.line_plot(
        csv, "t", ["mass", "energy"], out / "pde_conserved.svg", title="conserved quantities"
    )
    _say(args, f"wrote pde_log.csv, pde_summary.json, pde_conserved.svg to {out}")
    return 0


def run_track(args, cfg: ExperimentConfig) -> int:
    gs = compute_ground_state()
    consts = geometry_constants(gs, cfg.get_int("track.k", 2))
    tcfg = TrackConfig(
        s_in=cfg.get_float("track.s_in", 50.0),
        s_end=cfg.get_float("track.s_end", 40.0),
        zeta_sharp=cfg.get_float("track.zeta_sharp", 0.0),
        n=cfg.get_int("track.n", 512),
        box=cfg.get_float("track.box", 9.0),
        dt=cfg.get_float("track.dt", -5e-4),
        cadence=cfg.get_int("track.cadence", 250),
        tol=cfg.get_float("track.tol", 1e-8),
    )
    record = track(gs, consts, tcfg)
    out = cfg.out_dir
    cols, table = record.to_table()
    csv = reporting.write_table(out / "track.csv", cols, table, cfg.stamp)
    reporting.write_json(
        out / "track_summary.json",
        {
            "points": len(record),
            "truncated": record.truncated,
            "truncation_reason": record.truncation_reason,
            "s_range": [record.s_proxy[0], record.s_proxy[-1]] if len(record) else [],
        },
        cfg.stamp,
    )
    reporting.line_plot(
        csv, "s_proxy", ["eps_H1", "eta1_dot_Q"], out / "track_residuals.svg",
        logy=True, title="decomposition residuals along the backward run",
    )
    _say(args, f"wrote track.csv, track_summary.json, track_residuals.svg to {out}")
    return 0


def run_acceptance(args, cfg: ExperimentConfig) -> int:
    indices = None
    if args.criteria:
        try:
            indices = sorted({int(tok) for tok in args.criteria.split(",") if tok.strip()})
        except ValueError as exc:
            raise ConfigError(f"--criteria expects integers, got {args.criteria!r}") from exc
        unknown = [i for i in indices if i not in acceptance.CRITERIA]
        if unknown:
            raise ConfigError(f"unknown criteria: {unknown}; valid are 1-9")
    ws = acceptance.Workspace.build()
    results = acceptance.run_suite(ws, out_dir=cfg.out_dir, stamp=cfg.stamp, indices=indices)
    payload = {
        "suite": args.suite,
        "all_passed": all(r.passed for r in results),
        "criteria": [r.as_dict() for r in results],
    }
    reporting.write_json(cfg.out_dir / "acceptance.json", payload, cfg.stamp)
    if not payload["all_passed"]:
        return 5
    return 0


def run_plot(args, cfg: ExperimentConfig) -> int:
    ys = [tok.strip() for tok in args.y.split(",") if tok.strip()]
    if not ys:
        raise ConfigError("--y needs at least one column name")
    out = Path(args.out) if args.out else cfg.out_dir / (Path(args.csv).stem + ".svg")
    reporting.line_plot(
        args.csv, args.x, ys, out, logx=args.logx, logy=args.logy, title=args.title
    )
    _say(args, f"wrote {out}")
    return 0


_RUNNERS = {
    "groundstate": run_groundstate,
    "interactions": run_interactions,
    "ansatz": run_ansatz,
    "reduced-ode": run_reduced,
    "pde": run_pde,
    "track": run_track,
    "acceptance": run_acceptance,
    "plot": run_plot,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        _check_threads()
        cfg = load_experiment_config(args.config, args.out_dir)
        return _RUNNERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except AcceptanceError as exc:
        print(f"acceptance failure: {exc}", file=sys.stderr)
        return 5
    except NlslabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
