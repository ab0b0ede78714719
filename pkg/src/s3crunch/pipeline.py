"""Stage functions behind the command line: each reads a RunConfig and writes into one directory."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import diagnostics as D
from . import io
from .config import RunConfig
from .errors import ConfigError, InsufficientTail, InvariantViolation
from .evolution import EvolutionConfig, evolve, make_initial_data
from .flrw import FlrwBackground, crunch_time_oracle, crunch_time_quadrature, solve_scale_factor
from .frame import FrameGeometry
from .geometry_check import bracket_test_function, verify_geometry
from .grid import HopfGrid

log = logging.getLogger("s3crunch")

GEOMETRY_TOL = 1e-12


def build_background(cfg: RunConfig) -> FlrwBackground:
    b = cfg.background
    return solve_scale_factor(rel_tol=b.rel_tol, abs_tol=b.abs_tol, a_min=b.a_min)


def build_geometry(cfg: RunConfig, mode: str) -> FrameGeometry:
    if mode == "homogeneous":
        return FrameGeometry()
    g = cfg.geometry
    grid = HopfGrid(g.n_eta, g.n_xi1, g.n_xi2, fd_order=g.fd_order)
    return FrameGeometry(grid=grid, fd_order=g.fd_order)


def stage_flrw(cfg: RunConfig, out: Path) -> dict:
    bg = build_background(cfg)
    rows = [{"t": t, "a": a, "a_prime": ap, "hubble": ap / a, "first_integral_residual": ap ** 2 + a ** (4 / 3) - 1}
            for t, a, ap in zip(bg.t_grid, bg.a, bg.a_prime)]
    io.write_csv(out / "flrw.csv", rows)
    summary = {
        "t_crunch_ode": bg.t_crunch,
        "t_crunch_quadrature": crunch_time_quadrature(cfg.background.rel_tol),
        "t_crunch_oracle": crunch_time_oracle(),
        "max_first_integral_drift": bg.first_integral_drift(),
    }
    io.write_json(out / "flrw_summary.json", summary)
    log.info("t_crunch = %.17g", bg.t_crunch)
    return summary


def _grid_derivative_error(grid: HopfGrid) -> float:
    """max |grid Z_A f - exact Z_A f| for the smooth bracket test function."""
    from .frame import FRAME_MATRICES
    e, x1, x2 = grid.mesh()
    f = bracket_test_function(e, x1, x2)
    y = grid.points() / 3.0
    # gradient in R^4 of f(y) = y0 y2 + y1^2 + sin(y3 + y0 / 2)
    c = np.cos(y[..., 3] + 0.5 * y[..., 0])
    grad = np.stack([y[..., 2] + 0.5 * c, 2 * y[..., 1], y[..., 0], c], axis=-1)
    exact = np.stack([np.sum(grad * (y @ m.T), axis=-1) for m in FRAME_MATRICES])
    return float(np.abs(grid.grad(f) - exact).max())


def stage_geometry(cfg: RunConfig, out: Path) -> dict:
    g = cfg.geometry
    report = verify_geometry(seed=cfg.seed, n_points=g.n_points, fd_order=g.fd_order)
    grid = HopfGrid(g.n_eta, g.n_xi1, g.n_xi2, fd_order=g.fd_order)
    report["grid_shape"] = list(grid.shape)
    report["grid_derivative_error"] = _grid_derivative_error(grid)
    e, x1, x2 = grid.mesh()
    f = bracket_test_function(e, x1, x2)
    d = grid.grad(f)
    io.write_grid_fields(out, "geometry_fields", {"f": f, "Z1f": d[0], "Z2f": d[1], "Z3f": d[2]}, grid.shape)
    io.write_json(out / "geometry_report.json", report)
    exact_keys = ("orthonormality", "tangency", "chart_coefficients", "inverse_metric_expansion",
                  "bracket_algebraic", "round_scalar_curvature", "round_ricci")
    bad = [k for k in exact_keys if report[k] > GEOMETRY_TOL]
    if abs(report["bracket_fd_order_min"] - g.fd_order) > 0.5:
        bad.append("bracket_fd_order_min")
    if bad:
        raise InvariantViolation(f"geometry oracles failed: {bad}")
    return report


def _energy_hook(bg, geom, dcfg):
    count = {"k": 0}

    def hook(state):
        k = count["k"]
        count["k"] += 1
        if k % dcfg.energy_every:
            return {"E_metric": float("nan"), "E_sf": float("nan"), "E_total": float("nan"),
                    "good_terms": float("nan")}
        rep = D.energies(state, bg, geom, order=dcfg.energy_order, lambda_star=dcfg.lambda_star)
        good = D.good_term_density(state, bg, geom) if dcfg.energy_order == 1 else 0.0
        return {"E_metric": rep.E_metric, "E_sf": rep.E_sf, "E_total": rep.E_total, "good_terms": good}
    return hook


def stage_evolve(cfg: RunConfig, out: Path, mode: str | None = None) -> dict:
    ecfg: EvolutionConfig = cfg.evolution
    if mode is not None and mode != ecfg.mode:
        ecfg = EvolutionConfig(**{**ecfg.__dict__, "mode": mode})
    bg = build_background(cfg)
    geom = build_geometry(cfg, ecfg.mode)
    initial = make_initial_data(ecfg.perturbation, bg, geom)
    traj = None
    try:
        traj = evolve(ecfg, bg, geom, initial, row_hook=_energy_hook(bg, geom, cfg.diagnostics))
    finally:
        if traj is not None:
            _write_evolution(cfg, out, traj, ecfg.mode)
    summary = {
        "mode": ecfg.mode, "stop_reason": traj.stop_reason, "n_rows": len(traj.rows),
        "final_t": traj.final.t, "final_a": bg.scale(traj.final.t),
        "final_ham_res": traj.rows[-1]["ham_res"], "final_mom_res": traj.rows[-1]["mom_res"],
    }
    io.write_json(out / "evolve_summary.json", summary)
    return summary


def _write_evolution(cfg: RunConfig, out: Path, traj, mode: str) -> None:
    io.write_csv(out / "evolve.csv", traj.rows)
    every = cfg.output.checkpoint_every
    states = traj.states[::every]
    if traj.states and states[-1] is not traj.states[-1]:
        states = states + [traj.states[-1]]
    if states:
        io.save_trajectory(out, states, mode)


def stage_diagnose(cfg: RunConfig, out: Path) -> dict:
    if not (out / "trajectory.json").exists():
        raise ConfigError(f"no trajectory in {out}; run the evolve stage first")
    bg = build_background(cfg)
    header, states = io.load_trajectory(out)
    dcfg = cfg.diagnostics
    notes = []
    summary = {"t_crunch": bg.t_crunch, "blowup_exponent": None, "psi_crunch": None,
               "k_crunch_components": None, "limiting_constraint_residual": None,
               "affine_bound": None, "monotonicity_exponent": None}
    try:
        summary["blowup_exponent"] = D.blowup_exponent(states, bg, a_max=dcfg.blowup_a_max)
    except InsufficientTail as exc:
        notes.append(f"blowup_exponent: {exc}")
    if header["mode"] == "homogeneous":
        try:
            lim = D.avtd_limits(states, bg, a_fit=dcfg.a_fit, degree=dcfg.fit_degree)
            summary.update(psi_crunch=float(lim.psi_crunch), k_crunch_components=lim.K_crunch.tolist(),
                           limiting_constraint_residual=lim.limiting_residual,
                           k_crunch_trace=lim.k_trace, decay_rate_k=lim.decay_rate_K,
                           decay_rate_psi=lim.decay_rate_psi)
        except InsufficientTail as exc:
            notes.append(f"avtd_limits: {exc}")
    else:
        notes.append("avtd_limits: computed for homogeneous trajectories only")
    bound = D.geodesic_affine_bound(bg, c_eps=dcfg.c_eps)
    summary["affine_bound"] = bound.value
    summary["affine_tail_exponent"] = bound.fitted_exponent
    summary["affine_marginal"] = bound.marginal
    rows = io.read_csv(out / "evolve.csv") if (out / "evolve.csv").exists() else []
    rows = [r for r in rows if np.isfinite(r.get("E_total", np.nan))]
    if rows:
        mon = D.energy_monotonicity_monitor([r["t"] for r in rows], [r["a"] for r in rows],
                                            [r["E_total"] for r in rows], [r["good_terms"] for r in rows],
                                            a_cut=dcfg.monotonicity_a_cut)
        summary["monotonicity_exponent"] = mon.exponent if mon.defined else None
        summary["good_integrals_positive"] = mon.positive
    summary["notes"] = notes
    io.write_json(out / "diagnose_summary.json", summary)

    tail = states[-cfg.output.tail_rows:]
    tail_rows = []
    for s in tail:
        a, ap, _ = bg.eval(s.t)
        resc, phys = D.curvature_invariant(s, bg)
        row = {"t": s.t, "a": a, "invariant_rescaled": float(np.max(resc)), "invariant": float(np.max(phys))}
        if header["mode"] == "homogeneous":
            ak = s.Khat - (ap / 3.0) * np.eye(3)
            row.update({f"ak{i + 1}{j + 1}": float(ak[i, j]) for i in range(3) for j in range(3)})
            row["a_dtphi"] = float((1.0 + a ** (4 / 3) * s.psi) * (s.Psi + np.sqrt(2 / 3)))
        tail_rows.append(row)
    io.write_csv(out / "diagnose_tail.csv", tail_rows)
    return summary


STAGE_FUNCS = {
    "flrw": stage_flrw,
    "geometry-verify": stage_geometry,
    "evolve": stage_evolve,
    "diagnose": stage_diagnose,
}


def run_stages(cfg: RunConfig, out: Path, stages=None, mode: str | None = None) -> dict:
    results = {}
    try:
        for name in stages or cfg.stages:
            log.info("stage %s", name)
            if name == "evolve":
                results[name] = stage_evolve(cfg, out, mode)
            else:
                results[name] = STAGE_FUNCS[name](cfg, out)
    finally:
        io.write_manifest(out, cfg.digest())
    return results
