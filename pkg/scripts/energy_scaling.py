"""Order-one energies along homogeneous runs at several amplitudes: envelope
exponent and how sup E^{1/2} scales with the data size."""

import argparse

from s3crunch import diagnostics as D
from s3crunch.evolution import EvolutionConfig, PerturbationSpec, evolve, make_initial_data
from s3crunch.flrw import solve_scale_factor
from s3crunch.frame import FrameGeometry


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--amplitudes", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3, 5e-4])
    p.add_argument("--a-stop", type=float, default=1e-3)
    args = p.parse_args()

    bg = solve_scale_factor()
    hom = FrameGeometry()
    prev = None
    for amp in args.amplitudes:
        spec = PerturbationSpec(amplitude=amp)
        tr = evolve(EvolutionConfig(a_stop=args.a_stop, perturbation=spec), bg, hom, make_initial_data(spec, bg, hom))
        reps = [D.energies(s, bg, hom) for s in tr.states]
        mon = D.energy_monotonicity_monitor(tr.times, [r.a for r in reps], [r.E_total for r in reps],
                                            [D.good_term_density(s, bg, hom) for s in tr.states])
        ratio = "" if prev is None else f"  ratio to previous {prev / mon.sup_sqrt_energy:.4f}"
        print(f"amplitude={amp:g}  c={mon.exponent:.4f}  sup E^1/2={mon.sup_sqrt_energy:.5e}  "
              f"max coercive defect={max(r.coercive_defect for r in reps):.1e}{ratio}")
        prev = mon.sup_sqrt_energy


if __name__ == "__main__":
    main()
