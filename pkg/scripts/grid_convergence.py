"""Grid-mode self-convergence: evolve the same low-mode data at several resolutions
and compare against the finest one after spectral restriction."""

import argparse
import time

import numpy as np

from s3crunch.evolution import EvolutionConfig, PerturbationSpec, evolve, make_initial_data
from s3crunch.flrw import solve_scale_factor
from s3crunch.frame import FrameGeometry
from s3crunch.grid import HopfGrid
from s3crunch.lapse import solve_lapse_elliptic
from s3crunch.state import constraint_residuals


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 48])
    p.add_argument("--fd-order", type=int, default=4)
    p.add_argument("--t-stop", type=float, default=0.2)
    p.add_argument("--steps", type=int, default=32)
    p.add_argument("--amplitude", type=float, default=0.05)
    args = p.parse_args()

    bg = solve_scale_factor()
    cfg = EvolutionConfig(mode="grid", dt_fixed=args.t_stop / args.steps, t_stop=args.t_stop,
                          record_every=10 ** 6, keep_states=False)
    spec = PerturbationSpec(grid_amplitude=args.amplitude)
    finals = {}
    for n in args.sizes:
        t0 = time.perf_counter()
        geom = FrameGeometry(grid=HopfGrid(n, n, n, fd_order=args.fd_order), fd_order=args.fd_order)
        s = evolve(cfg, bg, geom, make_initial_data(spec, bg, geom)).final
        ham, _ = constraint_residuals(s, bg, geom)
        hi = solve_lapse_elliptic(s, bg, geom, "HIGH", solver_tol=1e-12)
        lo = solve_lapse_elliptic(s, bg, geom, "LOW", solver_tol=1e-12)
        print(f"n={n:3d}  {time.perf_counter() - t0:7.1f}s  sup|ham|={np.abs(ham).max():.3e}  "
              f"sup|psi_HIGH - psi_LOW|={np.abs(hi - lo).max():.3e}", flush=True)
        finals[n] = (geom, s)

    ref_geom, ref = finals[args.sizes[-1]]
    errs = []
    for n in args.sizes[:-1]:
        geom, s = finals[n]
        e = max(np.abs(ref_geom.grid.restrict_to(getattr(ref, k), geom.grid) - getattr(s, k)).max()
                for k in ("G", "Khat", "Psi", "psi"))
        errs.append(e)
        print(f"n={n:3d}  error vs n={args.sizes[-1]}: {e:.3e}")
    for (n1, e1), (n2, e2) in zip(zip(args.sizes, errs), zip(args.sizes[1:], errs[1:])):
        print(f"observed order {n1}->{n2}: {np.log(e1 / e2) / np.log(n2 / n1):.3f}")


if __name__ == "__main__":
    main()
