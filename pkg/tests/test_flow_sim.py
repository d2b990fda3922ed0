import json
import math

import numpy as np
import pytest

from qfl import flow_sim as fs
from qfl import metric_family as mf
from qfl import psi_core as pc
from qfl import quartic_integral as qi
from qfl.errors import DomainExitError, NoRoomError
from qfl.quartic_integral import PhaseState


@pytest.fixture(scope="module")
def s0(ctx):
    return qi.random_states(1, ctx.seed)[0]


def test_chart_switch_involution():
    s = PhaseState(mf.NORTH, 1.2, 1.7, 0.3, -0.4)
    t = fs.chart_switch(s)
    assert t.chart == mf.SOUTH
    assert math.hypot(t.px, t.py) == math.hypot(s.px, s.py)
    back = fs.chart_switch(t)
    assert back.chart == s.chart
    assert (back.x, back.y, back.px, back.py) == pytest.approx((s.x, s.y, s.px, s.py), abs=1e-15)


def test_chart_switch_preserves_energy(ctx):
    rng = np.random.default_rng(9)
    for sys in (ctx.s1, ctx.s2):
        for x, y, px, py in rng.uniform([0, -3, -1, -1], [2 * math.pi, 3, 1, 1], (20, 4)):
            s = PhaseState(mf.NORTH, x, y, px, py)
            e0 = sys.hamiltonian(x, y, px, py)
            assert fs.natural_energy(sys, s) == pytest.approx(e0, abs=1e-14)
            assert abs(fs.natural_energy(sys, fs.chart_switch(s)) - e0) <= 1e-10


def test_rotational_symmetry(ctx):
    K = mf.kinetic_metric(ctx.s1)
    s = PhaseState(mf.NORTH, 0.5, 0.2, 0.7, 0.9)
    tr = fs.integrate_geodesic(K, s, 50.0, 1e-3)
    assert tr.drift("p_x") <= 1e-10
    assert tr.drift("H") <= 1e-10


def test_family_flow(ctx, s0):
    tr = fs.integrate_geodesic(ctx.fam1, s0, 20.0, 1e-3, ctx.quartic1)
    assert tr.drift("H") <= 1e-8
    assert tr.drift("F") <= 1e-6
    assert np.all(np.diff(tr.times) > 0)
    assert tr.samples["F"][0] == pytest.approx(qi.eval_quartic(ctx.quartic1, s0), rel=1e-9)


def test_time_reversal(ctx, s0):
    fwd = fs.integrate_geodesic(ctx.fam1, s0, 20.0, 1e-3)
    back = fs.integrate_geodesic(ctx.fam1, fwd.final, -20.0, -1e-3)
    a = np.array(back.final.north())
    b = np.array(s0.north())
    a[0] = (a[0] - b[0] + math.pi) % (2 * math.pi) - math.pi
    b[0] = 0.0
    assert np.max(np.abs(a - b)) <= 1e-7


def test_chart_switch_transparency(ctx):
    # starts near the equator heading north; with y_switch=6 it stays in one chart
    s = PhaseState(mf.NORTH, 0.3, 1.2, 0.2, 1.0)
    a = fs.integrate_geodesic(ctx.fam1, s, 3.0, 1e-3, stride=1)
    b = fs.integrate_geodesic(ctx.fam1, s, 3.0, 1e-3, stride=1, y_switch=6.0)
    assert a.stepper_meta["switches"] >= 1 and b.stepper_meta["switches"] == 0
    assert max(abs(st.north()[1]) for st in b.states) < 6.0
    worst = 0.0
    for sa, sb in zip(a.states, b.states):
        xa, ya, _, _ = sa.north()
        xb, yb, _, _ = sb.north()
        dx = (xa - xb + math.pi) % (2 * math.pi) - math.pi
        worst = max(worst, abs(dx), abs(ya - yb))
    assert worst <= 1e-6


def test_midpoint_order(ctx, s0):
    d1 = fs.integrate_geodesic(ctx.fam1, s0, 20.0, 2e-3, method=fs.MIDPOINT).drift("H")
    d2 = fs.integrate_geodesic(ctx.fam1, s0, 20.0, 1e-3, method=fs.MIDPOINT).drift("H")
    assert 3.0 <= d1 / d2 <= 5.0


def test_f_drift_refines(ctx, s0):
    F = ctx.quartic1
    coarse = fs.integrate_geodesic(ctx.fam1, s0, 20.0, 2e-3, F, method=fs.MIDPOINT)
    fine = fs.integrate_geodesic(ctx.fam1, s0, 20.0, 1e-3, F, method=fs.MIDPOINT)
    assert fine.drift("F") < coarse.drift("F")


def test_f_drift_broken_plateaus(ctx, s0):
    bad = ctx.quartic1.perturbed(0.05)
    drifts = [fs.integrate_geodesic(ctx.fam1, s0, 20.0, dt, bad).drift("F")
              for dt in (2e-3, 1e-3, 5e-4)]
    assert min(drifts) > 1e-3
    assert max(drifts) / min(drifts) < 1.1


@pytest.mark.parametrize("which", ["s1", "s2"])
def test_natural_flow(ctx, which):
    sys = getattr(ctx, which)
    s = fs.sample_energy_surface(sys, 1.0, ctx.seed)
    F = qi.build_quartic(mf.jacobi_metric(sys, 1.0))
    tr = fs.integrate_natural(sys, s, 20.0, 1e-3, F)
    assert tr.drift("H") <= 1e-8
    assert tr.drift("F") <= 1e-6
    assert tr.samples["H"][0] == pytest.approx(1.0, abs=1e-12)


def test_natural_flow_energy_mismatch(ctx):
    s = fs.sample_energy_surface(ctx.s1, 1.0, ctx.seed)
    F = qi.build_quartic(mf.jacobi_metric(ctx.s1, 2.0))
    with pytest.raises(ValueError):
        fs.integrate_natural(ctx.s1, s, 1.0, 1e-3, F)


def test_sample_energy_surface(ctx):
    a = fs.sample_energy_surface(ctx.s1, 1.0, 42)
    assert a == fs.sample_energy_surface(ctx.s1, 1.0, 42)
    assert a != fs.sample_energy_surface(ctx.s1, 1.0, 43)
    assert ctx.s1.hamiltonian(*a.north()) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(NoRoomError):
        fs.sample_energy_surface(ctx.s1, -1.0, 42)


def test_bad_step(ctx, s0):
    with pytest.raises(ValueError):
        fs.integrate_geodesic(ctx.fam1, s0, 1.0, 0.1)
    with pytest.raises(ValueError):
        fs.integrate_geodesic(ctx.fam1, s0, 1.0, -1e-3)
    with pytest.raises(ValueError):
        fs.integrate_geodesic(ctx.fam1, s0, 1.0, 1e-3, method="rk4")


def test_domain_exit():
    short = pc.solve_psi(2.0, 1e-10)
    m = mf.build_family1(short, 1.0, 0.0)
    s = PhaseState(mf.NORTH, 0.0, 1.5, 0.0, 2.0)
    with pytest.raises(DomainExitError):
        fs.integrate_geodesic(m, s, 10.0, 1e-3, y_switch=50.0)


def test_exports(ctx, s0, tmp_path):
    tr = fs.integrate_geodesic(ctx.fam1, s0, 1.0, 1e-3, ctx.quartic1)
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "time,chart,x,y,px,py,H,F"
    assert len(lines) == len(tr.states) + 1
    summary = json.loads(tr.to_json())
    assert [r["quantity"] for r in summary] == ["H", "F", "p_x"]
    assert set(summary[0]) == {"quantity", "initial", "max_abs_drift", "relative_drift",
                               "steps", "switches"}
    assert summary[0]["steps"] == 1000
