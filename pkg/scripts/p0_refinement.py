"""nu(0), M1, M2 and p0 under refinement of the solution and of the Phi grid."""
import argparse

from qfl import psi_core as pc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.parse_args()
    print("y_max,tol,n_samples,nu0,M1,M2,p0")
    for y_max, tol in ((6.0, 1e-8), (8.0, 1e-10), (10.0, 1e-11)):
        sol = pc.solve_psi(y_max, tol)
        for n in (51, 101, 201):
            a = pc.compute_p0(sol, n)
            print(f"{y_max:g},{tol:g},{n},{a.nu0:.15f},{a.M1:.3e},{a.M2:.15f},{a.p0:.3e}")
    print(f"# nu0 from the inverse function: {pc.nu0_cross_check():.15f}")


if __name__ == "__main__":
    main()
