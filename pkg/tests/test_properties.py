"""Randomised properties over the continuous parameters."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfl import metric_family as mf
from qfl import psi_core as pc
from qfl import quartic_integral as qi
from qfl import flow_sim as fs
from qfl.quartic_integral import PhaseState
from qfl.cli import to_json

SOL = pc.solve_psi(8.0, 1e-10)

angles = st.floats(0.0, 2 * math.pi, allow_nan=False)
ys = st.floats(-3.0, 3.0, allow_nan=False)
moms = st.floats(-2.0, 2.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(y=st.floats(-7.5, 7.5))
def test_first_integral_pointwise(y):
    assert abs(SOL.first_integral_residual(y)) <= 1e-8
    assert SOL.psi(-y) == -SOL.psi(y)


@settings(max_examples=40, deadline=None)
@given(p=st.floats(0.0, 100.0))
def test_inverse_roundtrip(p):
    y = pc.closed_form_y(p)
    assert abs(SOL.psi(y) - p) <= 1e-8 * max(1.0, p)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.5, 3.0), d1=st.floats(-0.3, 0.3), x=angles, y=ys)
def test_family1_criterion(c, d1, x, y):
    assert abs(qi.pde_residual(mf.build_family1(SOL, c, d1).ansatz, x, y)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.5, 3.0), d1=st.floats(-0.3, 0.3), p=st.floats(0.5, 3.0), x=angles, y=ys)
def test_family2_criterion(c, d1, p, x, y):
    a = mf.build_family2(SOL, c, d1, p).ansatz
    assert abs(qi.pde_residual(a, x, y)) <= 1e-8
    assert abs(qi.xi_consistency(a, y)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(E=st.floats(0.45, 5.0), x=angles, y=st.floats(-6, 6))
def test_jacobi_equals_family(E, x, y):
    sys = mf.build_natural(SOL, mf.S1)
    J = mf.jacobi_metric(sys, E)
    F = mf.build_family1(SOL, E, 0.0)
    assert abs(J(x, y) - F(x, y)) <= 1e-12 * max(1.0, abs(F(x, y)))


@settings(max_examples=40, deadline=None)
@given(x=angles, y=ys, px=moms, py=moms, k=st.floats(-3, 3))
def test_quartic_homogeneous(x, y, px, py, k):
    a1 = complex(0.3, -0.7)
    v = qi._quartic(a1, 0.4, px, py)
    assert qi._quartic(a1, 0.4, k * px, k * py) == pytest.approx(k ** 4 * v, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(x=angles, y=ys, px=moms, py=moms)
def test_chart_switch_involution(x, y, px, py):
    s = PhaseState(mf.NORTH, x, y, px, py)
    t = fs.chart_switch(fs.chart_switch(s))
    assert t.chart == s.chart
    dx = (t.x - s.x + math.pi) % (2 * math.pi) - math.pi
    assert abs(dx) <= 1e-12 and (t.y, t.px, t.py) == (s.y, s.px, s.py)


@settings(max_examples=40, deadline=None)
@given(v=st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_json_float_roundtrip(v):
    import json
    assert json.loads(to_json([v]))[0] == v
