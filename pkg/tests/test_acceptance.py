"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line in the summary."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from s3crunch import diagnostics as D
from s3crunch.config import DiagnosticsConfig
from s3crunch.evolution import EvolutionConfig, PerturbationSpec, deviation_from_flrw, evolve, make_initial_data
from s3crunch.flrw import crunch_time_oracle, crunch_time_quadrature, solve_scale_factor
from s3crunch.frame import FrameGeometry
from s3crunch.geometry_check import verify_geometry
from s3crunch.grid import HopfGrid
from s3crunch.lapse import solve_lapse_elliptic
from s3crunch.state import SQRT23, cmc_defect, constraint_residuals, flrw_state, unrescale


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def relative_ham(traj):
    # |ham| against the background energy density (Psi + sqrt(2/3))^2 of the slice
    return max(r["ham_res"] / (s.Psi + SQRT23) ** 2 for r, s in zip(traj.rows, traj.states))


def test_c01_crunch_time():
    t0 = time.perf_counter()
    bg = solve_scale_factor(rel_tol=1e-12)
    quad = crunch_time_quadrature(1e-12)
    oracle = crunch_time_oracle()
    dt = time.perf_counter() - t0
    errs = (abs(bg.t_crunch - quad), abs(bg.t_crunch - oracle), abs(quad - oracle))
    record(1, "crunch time ODE / quadrature / Beta oracle", max(errs) <= 1e-8 and dt < 1.0,
           f"T_ode={bg.t_crunch:.15f} T_quad={quad:.15f} max diff={max(errs):.1e} runtime={dt:.2f}s")


def test_c02_first_integral_drift():
    drift = solve_scale_factor(rel_tol=1e-12).first_integral_drift()
    record(2, "first-integral drift", drift <= 1e-10, f"max drift={drift:.2e}")


def test_c03_frame_geometry():
    t0 = time.perf_counter()
    reps = [verify_geometry(seed=0, n_points=20, fd_order=p) for p in (2, 4)]
    dt = time.perf_counter() - t0
    exact_keys = ("orthonormality", "tangency", "chart_coefficients", "inverse_metric_expansion",
                  "bracket_algebraic", "round_scalar_curvature", "round_ricci")
    worst = max(r[k] for r in reps for k in exact_keys)
    orders = [r["bracket_fd_order_min"] for r in reps]
    ok = worst <= 1e-12 and all(abs(o - r["fd_order"]) <= 0.5 for o, r in zip(orders, reps)) and dt < 10.0
    record(3, "frame orthonormality, brackets, round curvature", ok,
           f"worst exact residual={worst:.1e} bracket FD orders={orders[0]:.3f},{orders[1]:.3f} runtime={dt:.1f}s")


def test_c04_flrw_fixed_point(bg, hom):
    t0 = time.perf_counter()
    tr = evolve(EvolutionConfig(a_stop=1e-3), bg, hom, flrw_state(0.0))
    dt = time.perf_counter() - t0
    dev = max(deviation_from_flrw(s) for s in tr.states)
    record(4, "FLRW data stays FLRW", dev <= 1e-8 and dt < 30.0, f"max deviation={dev:.1e} runtime={dt:.2f}s")


def test_c05_perturbed_homogeneous_run(bg, hom):
    spec = PerturbationSpec(amplitude=1e-2)
    runs = {}
    for dts in (0.02, 0.01):
        cfg = EvolutionConfig(dt_scale=dts, a_stop=1e-3, perturbation=spec)
        runs[dts] = evolve(cfg, bg, hom, make_initial_data(spec, bg, hom))
    tr = runs[0.01]
    ham_rel = relative_ham(tr)
    trace = max(s.trace_defect() for s in tr.states)
    cmc = max(cmc_defect(unrescale(s, bg), bg) for s in tr.states)
    ratio = runs[0.02].rows[-1]["ham_res"] / tr.rows[-1]["ham_res"]
    ok = (all(r.stop_reason == "a_stop reached" for r in runs.values()) and ham_rel <= 1e-6
          and max(trace, cmc) <= 1e-10 and 12.0 <= ratio <= 20.0)
    record(5, "perturbed homogeneous run", ok,
           f"max relative Hamiltonian residual={ham_rel:.1e} CMC/trace defect={max(trace, cmc):.1e} "
           f"end-residual ratio under dt halving={ratio:.2f}")


def test_c06_curvature_blowup(bg, crunch_run):
    p = D.blowup_exponent(crunch_run.states, bg, a_max=1e-2)
    lim = D.avtd_limits(crunch_run.states, bg)
    ok = abs(p + 4.0) <= 0.05 and lim.limiting_residual <= 1e-6 and lim.invariant_limit_gap <= 1e-6
    record(6, "curvature blowup and limiting constraint", ok,
           f"exponent={p:.6f} |Psi_c^2 + K_c.K_c - 1|={lim.limiting_residual:.1e} "
           f"|a^4 I - Psi_c^4| at crunch={lim.invariant_limit_gap:.1e}")


def test_c07_avtd_convergence(bg, crunch_run):
    lim = D.avtd_limits(crunch_run.states, bg)
    target = 4.0 / 3.0 - 0.2
    dist = float(np.linalg.norm(lim.K_crunch - np.eye(3) / 3.0))
    ok = lim.decay_rate_K >= target and lim.decay_rate_psi >= target and dist <= 10 * 1e-2
    record(7, "AVTD convergence rates", ok,
           f"rate K={lim.decay_rate_K:.3f} rate Psi={lim.decay_rate_psi:.3f} (need >= {target:.3f}) "
           f"|K_c - I/3|={dist:.2e}")


def test_c08_divergence_identities(bg, hom):
    dcfg = DiagnosticsConfig()
    spec = PerturbationSpec(amplitude=1e-2)
    res, ratios = {}, {}
    for dts in (dcfg.identity_dt_scale, 0.5 * dcfg.identity_dt_scale):
        tr = evolve(EvolutionConfig(dt_scale=dts, perturbation=spec), bg, hom, make_initial_data(spec, bg, hom))
        stride = int(round(dcfg.identity_stride * dcfg.identity_dt_scale / dts))
        for kind in ("metric", "sf"):
            rep = D.divergence_identity(tr.states, bg, kind=kind, stride=stride)
            res[kind, dts] = rep.max_relative
            if dts == dcfg.identity_dt_scale:
                ratios[kind] = D.mutation_ratios(rep, names=list(rep.terms))
    d0 = dcfg.identity_dt_scale
    improve = {k: res[k, d0] / res[k, 0.5 * d0] for k in ("metric", "sf")}
    worst_mut = min(min(r.values()) for r in ratios.values())
    ok = (max(res[k, d0] for k in ("metric", "sf")) <= 1e-5
          and all(3.0 <= v <= 5.0 for v in improve.values()) and worst_mut >= 5.0)
    record(8, "divergence identities", ok,
           f"metric={res['metric', d0]:.1e} sf={res['sf', d0]:.1e} at dt_scale={d0:g}; "
           f"halving gains {improve['metric']:.2f}, {improve['sf']:.2f}; weakest mutation factor={worst_mut:.0f}")


def test_c09_energy_behavior(bg, hom, crunch_run):
    defect = max(D.energies(s, bg, hom).coercive_defect for s in crunch_run.states[::10])
    sup, cs = {}, []
    for amp in (1e-3, 5e-4):
        spec = PerturbationSpec(amplitude=amp)
        tr = evolve(EvolutionConfig(a_stop=1e-3, perturbation=spec), bg, hom, make_initial_data(spec, bg, hom))
        E = [D.energies(s, bg, hom).E_total for s in tr.states]
        a = [bg.scale(s.t) for s in tr.states]
        good = [D.good_term_density(s, bg, hom) for s in tr.states]
        mon = D.energy_monotonicity_monitor(tr.times, a, E, good)
        sup[amp] = mon.sup_sqrt_energy
        cs.append(mon.exponent)
    ratio = sup[1e-3] / sup[5e-4]
    ok = defect <= 1e-12 and max(cs) <= 0.2 and abs(ratio / 2.0 - 1.0) <= 0.2
    record(9, "energy coerciveness, envelope and amplitude scaling", ok,
           f"coercive defect={defect:.1e} envelope c={max(cs):.3f} sup E^1/2 ratio={ratio:.4f}")


def test_c10_geodesic_bound(bg):
    b = D.geodesic_affine_bound(bg, c_eps=0.0)
    ok = np.isfinite(b.value) and abs(b.fitted_exponent - (-1.0 / 3.0)) <= 0.02 and not b.marginal
    record(10, "timelike geodesic affine bound", ok,
           f"value={b.value:.12f} fitted tail exponent={b.fitted_exponent:.6f}")


@pytest.mark.slow
def test_c11_grid_convergence(bg):
    t0 = time.perf_counter()
    cfg = EvolutionConfig(mode="grid", dt_fixed=0.2 / 32, t_stop=0.2, record_every=10 ** 6, keep_states=False)
    spec = PerturbationSpec(grid_amplitude=0.05)
    finals = {}
    for n in (16, 32, 48):
        geom = FrameGeometry(grid=HopfGrid(n, n, n, fd_order=4), fd_order=4)
        finals[n] = (geom, evolve(cfg, bg, geom, make_initial_data(spec, bg, geom)).final)
    ref_geom, ref = finals[48]
    errs = {}
    for n in (16, 32):
        geom, s = finals[n]
        errs[n] = max(np.abs(ref_geom.grid.restrict_to(getattr(ref, k), geom.grid) - getattr(s, k)).max()
                      for k in ("G", "Khat", "Psi", "psi"))
    order = float(np.log2(errs[16] / errs[32]))
    geom, s = finals[32]
    hi = solve_lapse_elliptic(s, bg, geom, "HIGH", solver_tol=1e-12)
    lo = solve_lapse_elliptic(s, bg, geom, "LOW", solver_tol=1e-12)
    ham, _ = constraint_residuals(s, bg, geom)
    gap, ham_sup = float(np.abs(hi - lo).max()), float(np.abs(ham).max())
    dt = time.perf_counter() - t0
    ok = abs(order - 4.0) <= 0.5 and gap <= 10.0 * ham_sup and dt < 600.0
    record(11, "grid mode convergence and HIGH/LOW lapse", ok,
           f"errors 16:{errs[16]:.2e} 32:{errs[32]:.2e} order={order:.3f}; "
           f"|psi_HIGH - psi_LOW|={gap:.1e} vs 10 x ham={10 * ham_sup:.1e}; runtime={dt:.0f}s")
