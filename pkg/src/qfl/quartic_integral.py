"""Fourth-degree integrals of geodesic flows of the integrable families.

Conventions: z = x + iy, p_z = (p_x - i p_y)/2, so p_z p_zbar = |p|^2/4 and
the geodesic Hamiltonian H = |p|^2/(2 Lambda) equals p_z p_zbar/(2 lambda)
with lambda = Lambda/4 = f_{z zbar}.

For a metric of the form lambda = f_{z zbar} the integral is

    F = 2 Re(p_z^4 + a1 p_z^3 p_zbar) + a2 (p_z p_zbar)^2,

with a1 lambda = -4 f_zz, and a2 = -h/lambda^2 where h is real with
h_zbar = g = d_z(a1 lambda^3)/lambda. Such an h exists exactly when
Im d_z g = 0, which in terms of A = Re f_zz, B = Im f_zz is the residual
``pde_residual`` below. h is obtained by integrating dh = 2 Re(conj(g) dz).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import AccuracyError, NotIntegrableError, SingularMetricError
from .metric_family import FAM1, FAM2, NORTH, SOUTH, ConformalMetric, FAnsatzData

REFUSE_THRESHOLD = 1e-6
PROBE_GRID = 16
PROBE_Y = 3.0
DEFAULT_SEED = 42

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


# --------------------------------------------------------------------------
# ansatz-level quantities


def pde_residual(ansatz: FAnsatzData, x: float, y: float) -> float:
    """6(A_y B_y + A_x B_x) + 2(B Lap A + A Lap B) + (B_xx - B_yy - 2 A_xy) lambda."""
    L, A, B = ansatz.partials(x, y)
    return float(K.pde_residual_kernel(L, A, B))


def _grid_eval(ansatz: FAnsatzData, xs, ys):
    xs = np.ascontiguousarray(np.ravel(xs), dtype=float)
    ys = np.ascontiguousarray(np.ravel(ys), dtype=float)
    res = np.empty(xs.size)
    g = np.empty(xs.size, dtype=complex)
    L = np.empty(xs.size)
    tab, hw = ansatz._tables
    K.vec_partials(tab, hw, xs, ys, ansatz.prm, res, g, L)
    return res, g, L


def residual_grid(ansatz: FAnsatzData, n: int = PROBE_GRID, y_half: float = PROBE_Y):
    """(xs, ys, residuals) on an n x n grid over [0, 2 pi] x [-y_half, y_half]."""
    xs, ys = np.meshgrid(np.linspace(0, 2 * math.pi, n), np.linspace(-y_half, y_half, n))
    res, _, _ = _grid_eval(ansatz, xs, ys)
    return xs, ys, res.reshape(xs.shape)


def xi_consistency(ansatz: FAnsatzData, y: float) -> float:
    """Residual of psi' xi''' + 2 psi'' xi'' - 4 d (psi'' - psi) - k.

    This is (psi'^2 xi'')'/psi' minus its expected value; the constant k is
    d1 for family 1 and c d1 for family 2 (xi'' carries the overall factor
    c there).
    """
    X = ansatz.xi_derivs(y) * ansatz.xi_scale
    if ansatz.psi is None:
        return float(-ansatz.d1)
    P, Q, U, _ = ansatz.psi.full(y)
    k = ansatz.d1 if ansatz.family_tag == FAM1 else ansatz.c * ansatz.d1
    return float(Q * X[1] + 2.0 * (P + U) * X[0] - 4.0 * ansatz.d * U - k)


# --------------------------------------------------------------------------
# path integration of dh


def _segment(g, a, b, tol, max_panels):
    """int_0^1 2 Re(conj(g(a + s(b - a))) (b - a)) ds by composite Gauss-Legendre.

    Panels are doubled until two successive estimates agree to tol relative
    to int |integrand|.
    """
    a = complex(*a)
    b = complex(*b)
    dz = b - a
    if dz == 0:
        return 0.0
    prev = None
    n = 1
    while n <= max_panels:
        s = ((np.arange(n)[:, None] + _GL_X[None, :]) / n).ravel()
        w = np.tile(_GL_W / n, n)
        pts = a + s * dz
        vals = np.asarray(g(pts.real, pts.imag))
        terms = w * 2.0 * (np.conj(vals) * dz).real
        cur = float(np.sum(terms))
        # relative to the size of the integrand, so rescaling g by a constant
        # does not change the panel count
        size = float(np.sum(np.abs(terms)))
        if prev is not None and abs(cur - prev) <= tol * size:
            return cur
        prev = cur
        n *= 2
    raise AccuracyError(f"path quadrature did not converge on {a} -> {b}")


def path_antiderivative(g: Callable, start: Sequence[float], end: Sequence[float],
                        order: str = "xy", tol: float = 1e-13,
                        max_panels: int = 1024) -> float:
    """h(end) - h(start) for the real h with h_zbar = g.

    Integrates dh = 2 Re(conj(g) dz) along the axis-aligned two-segment path
    (first along x then y for order="xy", the other way for "yx"). ``g`` is
    vectorised: g(xs, ys) -> complex array.
    """
    x0, y0 = map(float, start)
    x1, y1 = map(float, end)
    corner = (x1, y0) if order == "xy" else (x0, y1)
    return (_segment(g, (x0, y0), corner, tol, max_panels)
            + _segment(g, corner, (x1, y1), tol, max_panels))


def _chord(g, a, b):
    """Fixed 10-point rule on a short chord; used for local increments."""
    a = complex(*a)
    dz = complex(*b) - a
    pts = a + _GL_X * dz
    vals = np.asarray(g(pts.real, pts.imag))
    return float(np.sum(_GL_W * 2.0 * (np.conj(vals) * dz).real))


# --------------------------------------------------------------------------
# phase states


@dataclass(frozen=True)
class PhaseState:
    """Point of T*S^2 in a log chart; x is stored in [0, 2 pi)."""
    chart: str
    x: float
    y: float
    px: float
    py: float

    def __post_init__(self):
        if self.chart not in (NORTH, SOUTH):
            raise ValueError(f"unknown chart {self.chart!r}")
        vals = (self.x, self.y, self.px, self.py)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite phase state")
        object.__setattr__(self, "x", float(self.x) % (2 * math.pi))

    def north(self):
        """(x, y, p_x, p_y) in the north log chart."""
        if self.chart == NORTH:
            return self.x, self.y, self.px, self.py
        return -self.x, -self.y, -self.px, -self.py

    def as_dict(self) -> dict:
        return asdict(self)


def random_states(n: int, seed: int = DEFAULT_SEED, y_half: float = 2.0,
                  p_max: float = 2.0) -> list[PhaseState]:
    """x uniform on [0, 2 pi), y uniform on [-y_half, y_half], p uniform in a disc."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        x = rng.uniform(0.0, 2 * math.pi)
        y = rng.uniform(-y_half, y_half)
        r = p_max * math.sqrt(rng.uniform())
        a = rng.uniform(0.0, 2 * math.pi)
        out.append(PhaseState(NORTH, x, y, r * math.cos(a), r * math.sin(a)))
    return out


# --------------------------------------------------------------------------
# the integral


@dataclass(frozen=True, eq=False)
class QuarticIntegral:
    metric: ConformalMetric
    base_point: tuple
    loop_residual: float
    max_probe_residual: float
    a2_shift: float = 0.0
    h_shift: float = 0.0
    ansatz: FAnsatzData = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "ansatz", self.metric.ansatz)

    # pointwise coefficient data -------------------------------------------
    def _lam(self, x, y):
        L, A, B = self.ansatz.partials(x, y)
        lam = 0.25 * L[0, 0]
        if not lam > 0:
            raise SingularMetricError(f"lambda={lam} at ({x}, {y})")
        return L, A, B, lam

    def lam(self, x, y) -> float:
        return self._lam(x, y)[3]

    def a1(self, x, y) -> complex:
        _, A, B, lam = self._lam(x, y)
        return complex(-4.0 * (A[0, 0] + 1j * B[0, 0]) / lam)

    def g(self, x, y) -> complex:
        L, A, B = self.ansatz.partials(x, y)
        return complex(K.g_kernel(L, A, B))

    def g_vec(self, xs, ys):
        _, g, L = _grid_eval(self.ansatz, xs, ys)
        if np.any(L <= 0):
            raise SingularMetricError("lambda <= 0 on integration path")
        return g

    def h(self, x, y, order: str = "xy") -> float:
        """h with h(base_point) = 0 (plus h_shift), by path integration."""
        return path_antiderivative(self.g_vec, self.base_point, (x, y), order) + self.h_shift

    def a2(self, x, y, h: Optional[float] = None) -> float:
        lam = self.lam(x, y)
        h = self.h(x, y) if h is None else h
        return -h / (lam * lam) + self.a2_shift

    def coefficients(self, x, y):
        """(a1, a2) at (x, y)."""
        return self.a1(x, y), self.a2(x, y)

    def gauge_shifted(self, c0: float) -> "QuarticIntegral":
        """Same integral with h replaced by h + c0."""
        return QuarticIntegral(self.metric, self.base_point, self.loop_residual,
                               self.max_probe_residual, self.a2_shift, self.h_shift + c0)

    def perturbed(self, da2: float) -> "QuarticIntegral":
        """a2 + da2: no longer an integral; a sensitivity fixture."""
        return QuarticIntegral(self.metric, self.base_point, self.loop_residual,
                               self.max_probe_residual, self.a2_shift + da2, self.h_shift)

    # evaluation on phase space ---------------------------------------------
    def value(self, x, y, px, py, h: Optional[float] = None) -> float:
        """F in north log coordinates."""
        return _quartic(self.a1(x, y), self.a2(x, y, h), px, py)

    def local_function(self, x0: float, y0: float) -> Callable:
        """F(x, y, px, py) near (x0, y0) with h from one path integral plus chords.

        Much cheaper and smoother than re-integrating from the base point for
        every finite-difference probe.
        """
        h0 = self.h(x0, y0)

        def F(x, y, px, py):
            h = h0 + _chord(self.g_vec, (x0, y0), (x, y))
            return self.value(x, y, px, py, h)
        return F

    def killing_coeffs(self) -> list[Callable]:
        """b_0..b_4 with F = sum b_k p_z^k p_zbar^(4-k)."""
        a1 = lambda x, y: self.a1(x, y)
        return [lambda x, y: 1.0, lambda x, y: a1(x, y).conjugate(),
                lambda x, y: complex(self.a2(x, y)), a1, lambda x, y: 1.0]

    @property
    def kernel_params(self) -> np.ndarray:
        return self.ansatz.prm


def _quartic(a1: complex, a2: float, px, py) -> float:
    pz = 0.5 * (px - 1j * py)
    m = (pz * pz.conjugate()).real
    return float(2.0 * (pz ** 4 + a1 * pz ** 3 * pz.conjugate()).real + a2 * m * m)


def eval_quartic(F: QuarticIntegral, s: PhaseState) -> float:
    """2 Re(p_z^4 + a1 p_z^3 p_zbar) + a2 (p_z p_zbar)^2 at s."""
    x, y, px, py = s.north()
    return F.value(x, y, px, py)


def build_quartic(metric: ConformalMetric, base_point=(0.0, 0.0),
                  threshold: float = REFUSE_THRESHOLD) -> QuarticIntegral:
    """The fourth-degree integral of the geodesic flow of ``metric``.

    Refuses (NotIntegrableError) when the integrability residual exceeds
    ``threshold`` on the probe grid.
    """
    ansatz = metric.ansatz
    if ansatz is None:
        raise NotIntegrableError("metric carries no f-ansatz")
    _, _, res = residual_grid(ansatz)
    worst = float(np.max(np.abs(res)))
    if not worst <= threshold:
        raise NotIntegrableError(f"integrability residual {worst:.3e} > {threshold:.1e}")
    bx, by = map(float, base_point)
    if not 0.25 * ansatz.partials(bx, by)[0][0, 0] > 0:
        raise SingularMetricError(f"lambda <= 0 at base point {base_point}")
    F = QuarticIntegral(metric, (bx, by), 0.0, worst)
    loop = loop_residual(F, (bx, by))
    return QuarticIntegral(metric, (bx, by), loop, worst)


def loop_residual(F: QuarticIntegral, corner=(0.0, 0.0), side: float = 1.0) -> float:
    """Difference of h across the unit square between the two corner orderings."""
    far = (corner[0] + side, corner[1] + side)
    return abs(path_antiderivative(F.g_vec, corner, far, "xy")
               - path_antiderivative(F.g_vec, corner, far, "yx"))


# --------------------------------------------------------------------------
# brackets and the killing recursion


def _d1(f, t, step):
    """4th-order central difference."""
    return (8.0 * (f(t + step) - f(t - step)) - (f(t + 2 * step) - f(t - 2 * step))) / (12.0 * step)


def poisson_bracket(F_eval: Callable, G_eval: Callable, s: PhaseState, step: float = 1e-4,
                    F_dp: Optional[Callable] = None, G_dp: Optional[Callable] = None) -> float:
    """{F, G} at s in the coordinates of s's chart.

    F_eval, G_eval take (x, y, px, py). Coordinate derivatives use 4th-order
    central differences; momentum derivatives use F_dp / G_dp (returning
    (d/dpx, d/dpy)) when given, otherwise central differences too.
    """
    if not 1e-8 < step < 1e-3:
        raise ValueError("step must lie in (1e-8, 1e-3)")
    z = (s.x, s.y, s.px, s.py)

    def grad(fn, dp):
        out = []
        for i in range(2):
            out.append(_d1(lambda t: fn(*(z[:i] + (t,) + z[i + 1:])), z[i], step))
        if dp is not None:
            out.extend(dp(*z))
        else:
            for i in (2, 3):
                out.append(_d1(lambda t: fn(*(z[:i] + (t,) + z[i + 1:])), z[i], step))
        return out

    dF = grad(F_eval, F_dp)
    dG = grad(G_eval, G_dp)
    return float(dF[0] * dG[2] + dF[1] * dG[3] - dF[2] * dG[0] - dF[3] * dG[1])


def geodesic_hamiltonian(metric: ConformalMetric):
    """(H, dH/dp) for H = |p|^2/(2 Lambda) as phase functions."""
    def H(x, y, px, py):
        return (px * px + py * py) / (2.0 * metric.partials(x, y)[0, 0])

    def H_dp(x, y, px, py):
        lam = metric.partials(x, y)[0, 0]
        return px / lam, py / lam
    return H, H_dp


def quartic_dp(F: QuarticIntegral, x, y, px, py):
    """Analytic momentum gradient of F at (x, y)."""
    a1 = F.a1(x, y)
    a2 = F.a2(x, y)
    pz = 0.5 * (px - 1j * py)
    pb = pz.conjugate()
    m = (pz * pb).real
    dFdpz = 4 * pz ** 3 + 3 * a1 * pz ** 2 * pb + a1.conjugate() * pb ** 3 + 2 * a2 * m * pb
    # F real: dF/dpx = 2 Re(dF/dpz * dpz/dpx) with dpz/dpx = 1/2, dpz/dpy = -i/2
    return float(dFdpz.real), float((dFdpz * -1j).real)


def bracket_scan(F: QuarticIntegral, n: int = 100, seed: int = DEFAULT_SEED,
                 step: float = 1e-4) -> list[dict]:
    """|{F, H_geo}| at n seeded random states."""
    H, H_dp = geodesic_hamiltonian(F.metric)
    out = []
    for s in random_states(n, seed):
        Floc = F.local_function(s.x, s.y)
        val = poisson_bracket(Floc, H, s, step,
                              F_dp=lambda x, y, px, py: quartic_dp(F, x, y, px, py),
                              G_dp=H_dp)
        out.append({"state": s.as_dict(), "bracket_value": val})
    return out


def killing_residual(coeffs: Sequence[Callable], theta: Callable, k: int,
                     s: Sequence[float], step: float = 1e-4) -> complex:
    """k-th residual of the recursion for F = sum b_k p_z^k p_zbar^(n-k).

    {F, p_z p_zbar / theta} = 0 is equivalent to, for k = 0..n+1,

        theta d_z b_k + k b_k theta_z + theta d_zbar b_{k-1} + (n-k+1) b_{k-1} theta_zbar = 0

    with b_{-1} = b_{n+1} = 0. Derivatives by 4th-order central differences.
    """
    n = len(coeffs) - 1
    if not 0 <= k <= n + 1:
        raise ValueError("k must lie in [0, n+1]")
    x, y = map(float, s)

    def dz(f, conj):
        fx = _d1(lambda t: complex(f(t, y)), x, step)
        fy = _d1(lambda t: complex(f(x, t)), y, step)
        return 0.5 * (fx + 1j * fy) if conj else 0.5 * (fx - 1j * fy)

    th = theta(x, y)
    tot = 0j
    if k <= n:
        b = coeffs[k]
        tot += th * dz(b, False) + k * complex(b(x, y)) * dz(theta, False)
    if k >= 1:
        b = coeffs[k - 1]
        tot += th * dz(b, True) + (n - k + 1) * complex(b(x, y)) * dz(theta, True)
    return tot


# --------------------------------------------------------------------------
# reports


def bracket_report_json(scan: list[dict]) -> str:
    return json.dumps(scan, indent=1)


def write_residual_csv(path, xs, ys, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "residual"])
        for a, b, v in zip(np.ravel(xs), np.ravel(ys), np.ravel(values)):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(v))])
