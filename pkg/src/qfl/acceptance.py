"""The acceptance checks, shared by the test-suite and ``qfl report``.

Each check returns a CheckResult with the measured values next to the
thresholds they were compared with. Tolerances are fixed here and nowhere
else.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import flow_sim as fs
from . import metric_family as mf
from . import psi_core as pc
from . import quartic_integral as qi


@dataclass
class CheckResult:
    cid: int
    title: str
    passed: bool
    values: dict = field(default_factory=dict)
    # wall-clock figures; kept apart so reports stay reproducible
    timing: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.cid}: {self.title}"


class Context:
    """Lazily built objects shared between checks."""

    def __init__(self, y_max: float = 8.0, tol: float = 1e-10, seed: int = 42):
        self.y_max = y_max
        self.tol = tol
        self.seed = seed

    @functools.cached_property
    def psi(self):
        return pc.solve_psi(self.y_max, self.tol)

    @functools.cached_property
    def asym(self):
        return pc.compute_p0(self.psi)

    @property
    def p0(self) -> float:
        return self.asym.p0

    @functools.cached_property
    def fam1(self):
        return mf.build_family1(self.psi, 1.0, 0.0)

    @functools.cached_property
    def fam2(self):
        return mf.build_family2(self.psi, 1.0, 0.0, self.p0 + 1.0)

    @functools.cached_property
    def quartic1(self):
        return qi.build_quartic(self.fam1)

    @functools.cached_property
    def quartic2(self):
        return qi.build_quartic(self.fam2)

    @functools.cached_property
    def s1(self):
        return mf.build_natural(self.psi, mf.S1)

    @functools.cached_property
    def s2(self):
        return mf.build_natural(self.psi, mf.S2, self.p0 + 1.0, p0=self.p0)


def check_first_integral(ctx: Context) -> CheckResult:
    t0 = time.perf_counter()
    sol = pc.solve_psi(8.0, 1e-10)
    elapsed = time.perf_counter() - t0
    ys = np.linspace(-8.0, 8.0, 20001)
    worst = float(np.max(np.abs(sol.first_integral_residual(ys))))
    return CheckResult(1, "ODE vs derived first integral", worst <= 1e-8 and elapsed < 1.0,
                       {"max_residual": worst, "limit": 1e-8, "runtime_limit_seconds": 1.0},
                       timing={"solve_seconds": elapsed})


def check_inverse_formula(ctx: Context) -> CheckResult:
    grid = np.geomspace(0.02, 200.0, 50)
    rep = pc.inverse_formula_check(ctx.psi, grid)
    return CheckResult(2, "closed-form inverse derivative identity",
                       rep.max_derivative_error <= 1e-8,
                       {"max_derivative_error": rep.max_derivative_error, "limit": 1e-8,
                        "additive_offset": rep.offset, "offset_spread": rep.offset_spread,
                        "pi_over_4": math.pi / 4})


def check_phase_plane(ctx: Context) -> CheckResult:
    rep = pc.verify_phase_analysis(ctx.psi)
    ok = (rep.eigenvalues_exact and sorted(rep.eigenvalues) == [-4, -3]
          and rep.g_residual_max <= 1e-12 and rep.g_residual_symbolic_zero
          and abs(rep.second_order_constant) <= 1e-9)
    return CheckResult(3, "phase-plane analysis", ok,
                       {"eigenvalues": [int(e) for e in rep.eigenvalues],
                        "g_residual_max": rep.g_residual_max,
                        "second_order_constant": rep.second_order_constant})


def check_criterion(ctx: Context) -> CheckResult:
    r1 = float(np.max(np.abs(qi.residual_grid(ctx.fam1.ansatz)[2])))
    r2 = float(np.max(np.abs(qi.residual_grid(ctx.fam2.ansatz)[2])))
    pert = mf.perturbed_family(ctx.fam2, 1.1)
    rp = float(np.max(np.abs(qi.residual_grid(pert.ansatz)[2])))
    return CheckResult(4, "integrability criterion", r1 <= 1e-8 and r2 <= 1e-8 and rp > 1e-3,
                       {"fam1_max": r1, "fam2_max": r2, "perturbed_max": rp})


def _fzz_oracle(psi, ansatz, x, y):
    """-4 f_zz from second derivatives of f written out by hand."""
    P, Q, U, _ = psi.full(y)
    xi2 = ansatz.xi_derivs(y)[0]
    d = ansatz.d
    fxx = -P * math.cos(x) + 2 * d
    fyy = (P + U) * math.cos(x) + xi2 - 2 * d
    fxy = -Q * math.sin(x)
    return -(fxx - fyy - 2j * fxy)


def check_quartic(ctx: Context) -> CheckResult:
    loops = []
    for F in (ctx.quartic1, ctx.quartic2):
        for corner in ((0.0, 0.0), (2.0, -1.5), (4.5, 0.5), (1.0, 1.0)):
            loops.append(qi.loop_residual(F, corner))
    rng = np.random.default_rng(ctx.seed)
    a1_err = 0.0
    for F in (ctx.quartic1, ctx.quartic2):
        for x, y in rng.uniform([0, -3], [2 * math.pi, 3], (25, 2)):
            a1_err = max(a1_err, abs(F.a1(x, y) * F.lam(x, y)
                                     - _fzz_oracle(ctx.psi, F.ansatz, x, y)))
    scale_err = 0.0
    for metric, F in ((ctx.fam1, ctx.quartic1), (ctx.fam2, ctx.quartic2)):
        G = qi.build_quartic(mf.rescaled(metric, 2.0))
        for x, y in rng.uniform([0, -3], [2 * math.pi, 3], (10, 2)):
            scale_err = max(scale_err, abs(G.a1(x, y) - F.a1(x, y)),
                            abs(G.a2(x, y) - F.a2(x, y)))
    ok = max(loops) <= 1e-8 and a1_err <= 1e-10 and scale_err <= 1e-10
    return CheckResult(5, "quartic construction", ok,
                       {"max_loop_residual": max(loops), "a1_lambda_error": a1_err,
                        "scale_invariance_error": scale_err})


def check_brackets(ctx: Context) -> CheckResult:
    b1 = max(abs(r["bracket_value"]) for r in qi.bracket_scan(ctx.quartic1, 100, ctx.seed))
    b2 = max(abs(r["bracket_value"]) for r in qi.bracket_scan(ctx.quartic2, 100, ctx.seed))
    rng = np.random.default_rng(ctx.seed + 1)
    pts = rng.uniform([0, -2], [2 * math.pi, 2], (20, 2))
    F = ctx.quartic1
    kill = max(abs(qi.killing_residual(F.killing_coeffs(), F.lam, k, p))
               for p in pts for k in range(6))
    Fp = F.perturbed(0.01)
    kill_p = max(abs(qi.killing_residual(Fp.killing_coeffs(), F.lam, k, p))
                 for p in pts for k in range(6))
    ok = b1 <= 1e-6 and b2 <= 1e-6 and kill <= 1e-6 and kill_p > 1e-4
    return CheckResult(6, "bracket scan and killing recursion", ok,
                       {"fam1_bracket_max": b1, "fam2_bracket_max": b2,
                        "killing_max": kill, "perturbed_killing_max": kill_p})


def check_flows(ctx: Context) -> CheckResult:
    s0 = qi.random_states(1, ctx.seed)[0]
    geo = fs.integrate_geodesic(ctx.fam1, s0, 100.0, 1e-3, ctx.quartic1)
    vals = {"fam1_drift_H": geo.drift("H"), "fam1_drift_F": geo.drift("F")}
    ok = vals["fam1_drift_H"] <= 1e-8 and vals["fam1_drift_F"] <= 1e-6
    for name, sys in (("S1", ctx.s1), ("S2", ctx.s2)):
        st = fs.sample_energy_surface(sys, 1.0, ctx.seed)
        FE = qi.build_quartic(mf.jacobi_metric(sys, 1.0))
        tr = fs.integrate_natural(sys, st, 100.0, 1e-3, FE)
        vals[f"{name}_drift_H"] = tr.drift("H")
        vals[f"{name}_drift_F"] = tr.drift("F")
        ok = ok and tr.drift("H") <= 1e-8 and tr.drift("F") <= 1e-6
    d1 = fs.integrate_geodesic(ctx.fam1, s0, 100.0, 1e-3, method=fs.MIDPOINT).drift("H")
    d2 = fs.integrate_geodesic(ctx.fam1, s0, 100.0, 5e-4, method=fs.MIDPOINT).drift("H")
    vals["midpoint_drift_ratio"] = d1 / d2
    ok = ok and 3.0 <= d1 / d2 <= 5.0
    return CheckResult(7, "flow conservation", ok, vals)


def check_maupertuis(ctx: Context) -> CheckResult:
    rng = np.random.default_rng(ctx.seed)
    worst = 0.0
    for E in (0.5, 1.0, 2.0):
        pairs = ((mf.jacobi_metric(ctx.s1, E), mf.build_family1(ctx.psi, E, 0.0)),
                 (mf.jacobi_metric(ctx.s2, E), mf.build_family2(ctx.psi, E, 0.0, ctx.s2.p)))
        for J, M in pairs:
            for x, y in rng.uniform([0, -ctx.y_max], [2 * math.pi, ctx.y_max], (100, 2)):
                worst = max(worst, abs(J(x, y) - M(x, y)))
    return CheckResult(8, "Maupertuis identity", worst <= 1e-12, {"max_difference": worst})


def check_sphere_smoothness(ctx: Context) -> CheckResult:
    fine = pc.compute_p0(ctx.psi, n_samples=201)
    p0_shift = abs(fine.p0 - ctx.p0)
    ys = np.linspace(-ctx.y_max, ctx.y_max, 401)
    k_min = float(np.min(ctx.s2.kinetic_coeff(ys)))
    plane_min = math.inf
    for chart in (mf.NORTH, mf.SOUTH):
        for u in np.linspace(-1.9, 1.9, 21):
            for v in np.linspace(-1.9, 1.9, 21):
                if u * u + v * v <= 4.0:
                    plane_min = min(plane_min, mf.to_plane_chart(ctx.s2, u, v, chart)[0])
    probe = 0.0
    for chart in (mf.NORTH, mf.SOUTH):
        for sys in (ctx.s1, ctx.s2):
            for k in (0, 1):
                pr = mf.c2_probe(lambda u, v: mf.to_plane_chart(sys, u, v, chart)[k])
                probe = max(probe, pr.mismatch)
    h_err = 0.0
    for sys in (ctx.s1, ctx.s2):
        for s in qi.random_states(50, ctx.seed):
            h_err = max(h_err, abs(fs.natural_energy(sys, fs.chart_switch(s))
                                   - fs.natural_energy(sys, s)))
    ok = p0_shift <= 1e-6 and k_min > 0 and plane_min > 0 and probe <= 1e-4 and h_err <= 1e-10
    return CheckResult(9, "sphere smoothness data", ok,
                       {"p0": ctx.p0, "p0_refined": fine.p0, "p0_shift": p0_shift,
                        "M1": ctx.asym.M1, "M2": ctx.asym.M2, "nu0": ctx.asym.nu0,
                        "kinetic_min_log": k_min, "kinetic_min_plane": plane_min,
                        "c2_probe_max": probe, "chart_switch_H_error": h_err})


def check_max_potential(ctx: Context) -> CheckResult:
    vmax, y_star, _ = mf.max_potential(ctx.s1)
    # independent 1-D oracle in the variable psi
    r = optimize.minimize_scalar(lambda s: -(s * math.sqrt(1 + s ** 4) - s ** 3),
                                 bounds=(0.0, 2.0), method="bounded",
                                 options={"xatol": 1e-12})
    exact = 3.0 ** -0.75
    err = abs(vmax - exact)
    return CheckResult(10, "maximum of the S1 potential", err <= 1e-6,
                       {"max_V": vmax, "exact": exact, "error": err,
                        "psi_sq_at_max": ctx.psi.psi(abs(y_star)) ** 2,
                        "oracle_max": -r.fun})


def check_nontriviality(ctx: Context) -> CheckResult:
    w1 = mf.nontriviality_witness(ctx.fam1)
    w2 = mf.nontriviality_witness(ctx.fam2)
    rs = mf.round_sphere()
    w0 = mf.nontriviality_witness(rs)
    rng = np.random.default_rng(ctx.seed)
    pts = rng.uniform([0, -3], [2 * math.pi, 3], (50, 2))
    k_round = [mf.gauss_curvature(rs, x, y) for x, y in pts]
    plane = mf.plane_sphere()
    k_plane = [mf.gauss_curvature(plane, x, y) for x, y in pts]
    round_spread = max(np.ptp(k_round), np.ptp(k_plane), abs(k_plane[0] - 1))
    k_fam = abs(mf.gauss_curvature(ctx.fam1, 0.0, 0.5)
                - mf.gauss_curvature(ctx.fam1, math.pi / 2, 0.5))
    roots = pc.potential_root_scan(ctx.psi)
    distinct = mf.distinctness_check(ctx.psi, ctx.p0 + 1.0, ctx.p0 + 2.0, p0=ctx.p0)
    P, Q, U, _ = ctx.psi.full(0.0)
    ok = (w1 is not None and w2 is not None and w0 is None and round_spread <= 1e-9
          and k_fam > 1e-3 and len(roots) == 1 and abs(roots[0]) <= 1e-10
          and distinct and abs(U) <= 1e-10)
    return CheckResult(11, "nontriviality and inequivalence", ok,
                       {"fam1_witness": w1, "fam2_witness": w2, "control_witness": w0,
                        "constant_curvature_spread": round_spread,
                        "fam1_curvature_difference": k_fam, "roots": roots,
                        "distinct": distinct, "psi2_minus_psi0_at_r1": U})


CHECKS = [check_first_integral, check_inverse_formula, check_phase_plane,
          check_criterion, check_quartic, check_brackets, check_flows,
          check_maupertuis, check_sphere_smoothness, check_max_potential,
          check_nontriviality]


def run_all(ctx: Context | None = None) -> list[CheckResult]:
    ctx = Context() if ctx is None else ctx
    return [chk(ctx) for chk in CHECKS]
