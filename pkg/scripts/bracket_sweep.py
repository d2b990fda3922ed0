"""max |{F, H}| over seeded states for a grid of family parameters.

The perturbed ansatz row shows the builder refusing a metric that fails the
integrability criterion. Brackets are absolute finite-difference values, so
they grow where Lambda comes close to zero (see the min_lambda column).
"""
import argparse
import itertools

import numpy as np

from qfl import metric_family as mf
from qfl import psi_core as pc
from qfl import quartic_integral as qi
from qfl.errors import QFLError


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    sol = pc.solve_psi(8.0, 1e-10)
    print("family,c,d1,p,positive,min_lambda,max_pde_residual,max_bracket")
    for c, d1 in itertools.product((0.75, 1.0, 2.0), (0.0, 0.2)):
        for name, metric, p in (("FAM1", mf.build_family1(sol, c, d1), ""),
                                ("FAM2", mf.build_family2(sol, c, d1, 1.0), 1.0)):
            res = float(np.max(np.abs(qi.residual_grid(metric.ansatz)[2])))
            try:
                F = qi.build_quartic(metric)
                b = max(abs(r["bracket_value"]) for r in qi.bracket_scan(F, args.n, args.seed))
                out = f"{b:.3e}"
            except QFLError as exc:
                out = exc.code
            print(f"{name},{c:g},{d1:g},{p},{metric.positive},{metric.min_lambda:.3e},{res:.3e},{out}")
    bad = mf.perturbed_family(mf.build_family2(sol, 1.0, 0.0, 1.0), 1.1)
    res = float(np.max(np.abs(qi.residual_grid(bad.ansatz)[2])))
    print(f"FAM2-perturbed,1,0,1,{bad.positive},{bad.min_lambda:.3e},{res:.3e},refused")


if __name__ == "__main__":
    main()
