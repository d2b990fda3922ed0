"""Natural flows of S1 and S2 at several energies with the Jacobi-metric integral.

For each energy above max V the quartic integral of the Jacobi metric at
that energy should be conserved along the natural flow.
"""
import argparse

from qfl import flow_sim as fs
from qfl import metric_family as mf
from qfl import psi_core as pc
from qfl import quartic_integral as qi


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=50.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    sol = pc.solve_psi(8.0, 1e-10)
    p0 = pc.compute_p0(sol).p0
    systems = {"S1": mf.build_natural(sol, mf.S1),
               "S2": mf.build_natural(sol, mf.S2, p0 + 1.0, p0=p0)}
    print("system,E,max_V,drift_H,drift_F,switches")
    for name, sys in systems.items():
        vmax = mf.max_potential(sys)[0]
        for E in (0.5, 1.0, 2.0, 4.0):
            s0 = fs.sample_energy_surface(sys, E, args.seed)
            J = mf.jacobi_metric(sys, E)
            F = qi.build_quartic(J) if J.positive else None
            tr = fs.integrate_natural(sys, s0, args.T, args.dt, F)
            dF = f"{tr.drift('F'):.3e}" if F is not None else "degenerate"
            print(f"{name},{E:g},{vmax:.6f},{tr.drift('H'):.3e},{dF},"
                  f"{tr.stepper_meta['switches']}")


if __name__ == "__main__":
    main()
