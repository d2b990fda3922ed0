import json
import math

import numpy as np
import pytest

from qfl import metric_family as mf
from qfl import quartic_integral as qi
from qfl.errors import AccuracyError, NotIntegrableError, SingularMetricError
from qfl.quartic_integral import PhaseState


def test_pde_residual_family1(ctx):
    assert abs(qi.pde_residual(ctx.fam1.ansatz, 0.7, 0.3)) <= 1e-8


def test_pde_residual_flat():
    a = mf.flat_ansatz(2.0)
    for x, y in [(0.1, 0.2), (3.0, -1.0)]:
        assert qi.pde_residual(a, x, y) == 0.0


def test_pde_residual_grid(ctx):
    for m in (ctx.fam1, ctx.fam2, mf.build_family1(ctx.psi, 2.0, 0.7),
              mf.build_family2(ctx.psi, 1.5, 0.4, 2.0)):
        assert np.max(np.abs(qi.residual_grid(m.ansatz)[2])) <= 1e-8


def test_perturbed_ansatz_breaks_criterion(ctx):
    bad = mf.perturbed_family(ctx.fam2, 1.1)
    assert np.max(np.abs(qi.residual_grid(bad.ansatz)[2])) > 1e-3
    with pytest.raises(NotIntegrableError):
        qi.build_quartic(bad)


def test_xi_consistency(ctx):
    a1 = mf.build_family1(ctx.psi, 1.3, 0.4).ansatz
    assert abs(qi.xi_consistency(a1, 0.8)) <= 1e-9
    a2 = mf.build_family2(ctx.psi, 1.0, 0.0, 1.0).ansatz
    assert abs(qi.xi_consistency(a2, 1.2)) <= 1e-9
    a3 = mf.build_family2(ctx.psi, 2.0, 0.5, 1.0).ansatz
    assert abs(qi.xi_consistency(a3, -0.6)) <= 1e-9
    zero = mf.build_family1(ctx.psi, 0.0, 0.0).ansatz
    assert qi.xi_consistency(zero, 0.5) == 0.0


def _const(val):
    return lambda xs, ys: np.full(np.shape(xs), val, dtype=complex)


def test_path_antiderivative_constants():
    assert qi.path_antiderivative(_const(1.0), (0, 0), (1.5, -0.7)) == pytest.approx(3.0)
    assert qi.path_antiderivative(_const(1j), (0, 0), (1.5, -0.7)) == pytest.approx(-1.4)


def test_path_antiderivative_order(ctx):
    F = ctx.quartic1
    a = qi.path_antiderivative(F.g_vec, (0.2, -0.4), (2.3, 1.1), "xy")
    b = qi.path_antiderivative(F.g_vec, (0.2, -0.4), (2.3, 1.1), "yx")
    assert abs(a - b) <= 1e-8


def test_path_antiderivative_budget():
    wild = lambda xs, ys: np.exp(40j * xs * xs)
    with pytest.raises(AccuracyError):
        qi.path_antiderivative(wild, (0, 0), (6.0, 0), max_panels=2)


def test_build_quartic_basics(ctx):
    F = ctx.quartic1
    assert F.loop_residual <= 1e-8
    assert F.h(*F.base_point) == 0.0
    for y in (-1.0, 0.5, 2.0):
        assert F.a1(0.0, y).imag == 0.0
    assert isinstance(F.a2(0.4, 0.3), float)


def test_loop_residual_square(ctx):
    for F in (ctx.quartic1, ctx.quartic2):
        assert qi.loop_residual(F, (0.0, 0.0)) <= 1e-8


def test_scale_invariance(ctx):
    G = qi.build_quartic(mf.rescaled(ctx.fam1, 2.0))
    for x, y in [(0.3, 0.2), (4.0, -1.5)]:
        assert abs(G.a1(x, y) - ctx.quartic1.a1(x, y)) <= 1e-10
        assert abs(G.a2(x, y) - ctx.quartic1.a2(x, y)) <= 1e-10


def test_singular_base_point(ctx):
    m = mf.build_family2(ctx.psi, 0.0, 0.0, 2.0)
    with pytest.raises(NotIntegrableError):
        qi.build_quartic(mf.kinetic_metric(ctx.s1))
    ok = mf.build_family1(ctx.psi, 0.1, 0.0)
    with pytest.raises(SingularMetricError):
        qi.build_quartic(ok, base_point=(0.0, 1.0))
    assert not m.positive


def test_gradient_of_h(ctx):
    F = ctx.quartic2
    step = 1e-4
    for x, y in [(0.5, 0.5), (3.0, -1.2), (5.0, 1.7)]:
        g = F.g(x, y)
        hx = (F.h(x + step, y) - F.h(x - step, y)) / (2 * step)
        hy = (F.h(x, y + step) - F.h(x, y - step)) / (2 * step)
        assert abs(hx - 2 * g.real) <= 1e-6
        assert abs(hy - 2 * g.imag) <= 1e-6


def test_eval_quartic_symmetries(ctx):
    F = ctx.quartic1
    s = PhaseState(mf.NORTH, 1.0, 0.4, 0.3, -0.8)
    v = qi.eval_quartic(F, s)
    assert qi.eval_quartic(F, PhaseState(mf.NORTH, 1.0, 0.4, 0.0, 0.0)) == 0.0
    assert qi.eval_quartic(F, PhaseState(mf.NORTH, 1.0, 0.4, -0.3, 0.8)) == pytest.approx(v, rel=1e-14)
    assert qi.eval_quartic(F, PhaseState(mf.NORTH, 1.0, 0.4, 0.6, -1.6)) == pytest.approx(16 * v, rel=1e-13)
    south = PhaseState(mf.SOUTH, -1.0, -0.4, -0.3, 0.8)
    assert abs(qi.eval_quartic(F, south) - v) <= 1e-8


def test_quartic_in_flat_case():
    # a1 = a2 = 0: F = 2 Re p_z^4 = (px^4 - 6 px^2 py^2 + py^4)/8
    px, py = 0.7, -1.3
    assert qi._quartic(0j, 0.0, px, py) == pytest.approx(
        (px ** 4 - 6 * px ** 2 * py ** 2 + py ** 4) / 8, rel=1e-14)


def test_phase_state():
    s = PhaseState(mf.NORTH, 7.0, 0.1, 0.0, 1.0)
    assert 0 <= s.x < 2 * math.pi
    assert s.x == pytest.approx(7.0 - 2 * math.pi)
    with pytest.raises(ValueError):
        PhaseState(mf.NORTH, 0.0, math.nan, 0.0, 0.0)
    with pytest.raises(ValueError):
        PhaseState("EAST", 0.0, 0.0, 0.0, 0.0)


def test_random_states_seeded():
    a = qi.random_states(10, 42)
    assert a == qi.random_states(10, 42)
    assert a != qi.random_states(10, 43)
    assert all(-2 <= s.y <= 2 and math.hypot(s.px, s.py) <= 2 for s in a)


def test_bracket_trivial(ctx):
    H, H_dp = qi.geodesic_hamiltonian(ctx.fam1)
    s = PhaseState(mf.NORTH, 0.4, 0.9, 0.5, -1.1)
    assert abs(qi.poisson_bracket(H, H, s)) <= 1e-12
    K = mf.kinetic_metric(ctx.s1)
    HK, HK_dp = qi.geodesic_hamiltonian(K)
    px = lambda x, y, a, b: a
    assert abs(qi.poisson_bracket(px, HK, s, G_dp=HK_dp)) <= 1e-10
    with pytest.raises(ValueError):
        qi.poisson_bracket(H, H, s, step=1e-2)


def test_bracket_scan(ctx):
    for F in (ctx.quartic1, ctx.quartic2):
        scan = qi.bracket_scan(F, 30)
        assert max(abs(r["bracket_value"]) for r in scan) <= 1e-6
    doc = json.loads(qi.bracket_report_json(scan))
    assert set(doc[0]) == {"state", "bracket_value"}


def test_gauge_shift(ctx):
    F = ctx.quartic1
    G = F.gauge_shifted(1.0)
    x, y, px, py = 0.8, -0.6, 1.1, 0.4
    lam = F.lam(x, y)
    m = (px * px + py * py) / 4
    assert G.value(x, y, px, py) - F.value(x, y, px, py) == pytest.approx(
        -(m / lam) ** 2, rel=1e-9)
    scan = qi.bracket_scan(G, 10)
    assert max(abs(r["bracket_value"]) for r in scan) <= 1e-6


def test_perturbed_a2_breaks_bracket(ctx):
    scan = qi.bracket_scan(ctx.quartic1.perturbed(0.01), 10)
    assert max(abs(r["bracket_value"]) for r in scan) > 1e-4


def test_killing_linear():
    theta = lambda x, y: 1.0 / math.cosh(y) ** 2
    one = lambda x, y: 1.0
    for k in range(3):
        assert abs(qi.killing_residual([one, one], theta, k, (0.3, 0.7))) <= 1e-9


def test_killing_quartic(ctx):
    F = ctx.quartic1
    b = F.killing_coeffs()
    pts = [(0.4, -1.0), (2.5, 0.3), (5.0, 1.6)]
    assert max(abs(qi.killing_residual(b, F.lam, k, p)) for p in pts for k in range(6)) <= 1e-6
    bp = F.perturbed(0.01).killing_coeffs()
    assert max(abs(qi.killing_residual(bp, F.lam, k, p)) for p in pts for k in range(6)) > 1e-4
    with pytest.raises(ValueError):
        qi.killing_residual(b, F.lam, 6, pts[0])


def test_residual_csv(ctx, tmp_path):
    xs, ys, res = qi.residual_grid(ctx.fam1.ansatz, n=4)
    path = tmp_path / "res.csv"
    qi.write_residual_csv(path, xs, ys, res)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,residual"
    assert len(lines) == 17
