"""The odd solution psi_0 of psi''' psi' + 2 psi''^2 - 3 psi^2 = 0.

Initial data psi(0) = 0, psi'(0) = 1, psi''(0) = 0. Everything downstream
(metrics, potentials, integrals) is built from this one function.

The ODE is integrated for y >= 0 with an explicit Dormand-Prince 8(5,3) pair
in the variables (psi, psi' - psi, psi'' - psi); negative y is obtained by
odd reflection. The dense output is resampled into Chebyshev panels so the
compiled kernels can evaluate psi cheaply.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import integrate, optimize

from . import _kernels as K
from .errors import DomainError, SolverError

PANEL_WIDTH = 0.125
PANEL_DEGREE = 15


def _rhs(y, s):
    P, W, U = s
    Q = P + W
    return [Q, U - W, -(4.0 * P * U + 2.0 * U * U + 2.0 * P * W + W * W) / Q]


@dataclass(frozen=True, eq=False)
class PsiSolution:
    y_max: float
    tol: float
    nodes: np.ndarray
    values: np.ndarray
    interpolant_order: int
    table: np.ndarray = field(repr=False)
    hw: float = PANEL_WIDTH

    def state(self, y):
        """(psi, psi' - psi, psi'' - psi), vectorised over y."""
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(np.abs(ys) > self.y_max * (1 + 1e-12)):
            raise DomainError(f"|y| exceeds y_max={self.y_max}")
        out = K.psi_states_many(self.table, self.hw, ys)
        if np.ndim(y) == 0:
            return tuple(out[0])
        return out[:, 0], out[:, 1], out[:, 2]

    def __call__(self, y):
        """(psi, psi', psi'') at y."""
        P, W, U = self.state(y)
        return P, P + W, P + U

    def psi(self, y):
        return self.state(y)[0]

    def dpsi(self, y):
        P, W, _ = self.state(y)
        return P + W

    def d2psi(self, y):
        P, _, U = self.state(y)
        return P + U

    def first_integral_residual(self, y):
        """psi'^4 - psi^4 - 1, evaluated without cancellation (even in y)."""
        P, W, U = self.state(np.abs(y))
        Q = P + W
        return W * (2.0 * P + W) * (Q * Q + P * P) - 1.0

    def orbit_residual(self, y):
        """psi'' psi'^2 - psi^3, evaluated without cancellation."""
        P, W, U = self.state(np.abs(y))
        r = P * P * (U + 2.0 * W) + P * (W * W + 2.0 * U * W) + U * W * W
        return np.sign(y) * r

    def full(self, y):
        """(psi, psi', psi'' - psi, psi'^2 - psi^2) at a scalar y."""
        self.state(float(y))
        return K.psi_full(self.table, self.hw, float(y))


_STEP_MARGIN = 0.003
# smallest relative tolerance the stepper accepts
_RTOL_FLOOR = 100 * np.finfo(float).eps


def solve_psi(y_max: float = 8.0, tol: float = 1e-10) -> PsiSolution:
    """Solve the initial value problem on [-y_max, y_max]."""
    if not (y_max >= 1.0 and y_max <= 12.0):
        raise ValueError("y_max must lie in [1, 12]")
    if not (1e-14 < tol < 1e-4):
        raise ValueError("tol must lie in (1e-14, 1e-4)")
    # Global error accumulates over [0, y_max]; a margin on the per-step
    # tolerance keeps the node invariants within 10 * tol, down to the
    # double-precision floor.
    step_tol = max(_STEP_MARGIN * tol, _RTOL_FLOOR)
    res = integrate.solve_ivp(
        _rhs, (0.0, y_max), [0.0, 1.0, 0.0], method="DOP853",
        rtol=step_tol, atol=1e-12 * step_tol, first_step=1e-4, dense_output=True)
    if res.status != 0:
        raise SolverError(f"integration failed: {res.message}")
    if np.any(res.y[0] + res.y[1] <= 0.0):
        raise SolverError("psi' <= 0 encountered")

    n_pan = int(math.ceil(y_max / PANEL_WIDTH - 1e-9))
    table = np.empty((n_pan, 3, PANEL_DEGREE + 1))
    for i in range(n_pan):
        lo = i * PANEL_WIDTH

        def f(t, lo=lo):
            return res.sol(np.clip(lo + 0.5 * (t + 1.0) * PANEL_WIDTH, 0.0, y_max))

        for comp in range(3):
            table[i, comp] = C.chebinterpolate(lambda t: f(t)[comp], PANEL_DEGREE)
    pos = res.t
    P, W, U = res.y
    nodes = np.concatenate([-pos[:0:-1], pos])
    vals_pos = np.column_stack([P, P + W, P + U])
    vals_neg = vals_pos[:0:-1] * np.array([-1.0, 1.0, -1.0])
    values = np.concatenate([vals_neg, vals_pos])
    return PsiSolution(y_max=float(y_max), tol=float(tol), nodes=nodes, values=values,
                       interpolant_order=7, table=table)


def higher_derivs(sol: PsiSolution, y: float, order: int = 3) -> list[float]:
    """psi, psi', ..., psi^(order) at y; orders >= 3 come from the ODE recurrence."""
    if order > 6 or order < 0:
        raise ValueError("order must be <= 6")
    P, Q, U, QP2 = sol.full(y)
    d, _ = K.psi_derivs(P, Q, U, QP2, max(order, 2))
    return [float(v) for v in d[:order + 1]]


def closed_form_y(psi_value: float) -> float:
    """y(psi) = int_0^psi (1 + s^4)^(-1/4) ds, the inverse of psi_0."""
    a = abs(float(psi_value))
    f = lambda s: (1.0 + s ** 4) ** -0.25
    if a <= 1.0:
        val = integrate.quad(f, 0.0, a, epsabs=1e-15, epsrel=1e-13)[0]
    else:
        # beyond 1 integrate the decaying difference to 1/s and add log a
        val = (integrate.quad(f, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)[0]
               + integrate.quad(lambda s: f(s) - 1.0 / s, 1.0, a,
                                epsabs=1e-14, epsrel=1e-13, limit=200)[0]
               + math.log(a))
    return math.copysign(val, psi_value)


def log_offset_oracle() -> float:
    """lim_{psi -> inf} (y(psi) - log psi), by quadrature on [0, inf)."""
    f = lambda s: (1.0 + s ** 4) ** -0.25
    return (integrate.quad(f, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)[0]
            + integrate.quad(lambda s: f(s) - 1.0 / s, 1.0, np.inf,
                             epsabs=1e-15, epsrel=1e-13, limit=200)[0])


def inverse_formula(psi):
    """Candidate closed form for the inverse of psi_0; real or complex psi > 0."""
    psi = np.asarray(psi)
    a = (psi ** 4 + 1.0) ** 0.25
    # a - psi rewritten to avoid cancellation for large psi
    a_minus = 1.0 / ((a + psi) * (a * a + psi * psi))
    return 0.25 * np.log((a + psi) / a_minus) - 0.5 * np.arctan(a / psi)


@dataclass
class InverseFormulaReport:
    grid: np.ndarray
    max_derivative_error: float
    offset: float
    offset_spread: float
    monotone: bool


def inverse_formula_check(sol: PsiSolution, grid) -> InverseFormulaReport:
    """Compare the candidate closed-form inverse with the quadrature inverse.

    The derivative is taken by complex step, so it is exact to rounding and
    independent of any finite-difference step.
    """
    grid = np.asarray(grid, dtype=float)
    top = sol.psi(sol.y_max)
    if np.any(grid <= 0) or np.any(grid >= top):
        raise ValueError("grid must lie in (0, psi(y_max))")
    h = 1e-30
    deriv = np.imag(inverse_formula(grid + 1j * h)) / h
    target = (1.0 + grid ** 4) ** -0.25
    vals = np.real(inverse_formula(grid))
    diffs = np.array([closed_form_y(p) for p in grid]) - vals
    return InverseFormulaReport(
        grid=grid,
        max_derivative_error=float(np.max(np.abs(deriv - target))),
        offset=float(np.mean(diffs)),
        offset_spread=float(np.ptp(diffs)),
        monotone=bool(np.all(np.diff(vals) > 0)),
    )


# name used by external callers
hadeler_inverse_check = inverse_formula_check


def _extrapolation_ys(sol):
    hi = sol.y_max
    lo = max(hi - 2.0, 0.5 * hi)
    return np.linspace(lo, hi, 3)


def _t_profiles(sol, y):
    P, W, U = sol.state(y)
    Q = P + W
    ey = np.exp(y)
    return Q / ey, ey * Q * Q * U, W * (2.0 * P + W)


def plane_profiles(sol: PsiSolution, t):
    """nu(t), mu(t) and D(t) = psi'^2 - psi^2, all at y = -log(t) / 2.

    nu = psi' e^-y and mu = e^y psi'^2 (psi'' - psi). Valid for t >= 0. Below
    t = e^(-2 y_max) (in particular at t = 0) the values come from quadratic
    extrapolation in t, the variable in which all three are smooth.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("t must be >= 0")
    t_min = math.exp(-2.0 * sol.y_max)
    out = np.empty((3, ts.size))
    direct = ts >= t_min
    if np.any(direct):
        out[:, direct] = _t_profiles(sol, -0.5 * np.log(ts[direct]))
    if np.any(~direct):
        ye = _extrapolation_ys(sol)
        te = np.exp(-2.0 * ye)
        for row, vals in zip(out, _t_profiles(sol, ye)):
            row[~direct] = np.polyval(np.polyfit(te, vals, 2), ts[~direct])
    if np.ndim(t) == 0:
        return tuple(float(r[0]) for r in out)
    return out[0], out[1], out[2]


def nu_mu(sol: PsiSolution, t):
    """nu(t) and mu(t); see plane_profiles."""
    nu, mu, _ = plane_profiles(sol, t)
    return nu, mu


def nu0_cross_check() -> float:
    """nu(0) from the inverse function alone: log nu(0) = -lim (y(psi) - log psi)."""
    return math.exp(-log_offset_oracle())


@dataclass(frozen=True)
class AsymptoticData:
    nu0: float
    t_samples: np.ndarray
    phi_samples: np.ndarray
    M1: float
    M2: float
    p0: float


def phi_function(sol: PsiSolution, t: float) -> float:
    """Phi(t) = int_t^1 mu(s) / nu(s) ds by adaptive quadrature."""
    g = lambda s: (lambda nm: nm[1] / nm[0])(nu_mu(sol, s))
    t_min = math.exp(-2.0 * sol.y_max)
    lo = max(t, t_min)
    val = integrate.quad(g, lo, 1.0, epsabs=1e-11, epsrel=1e-11, limit=200)[0]
    if t < t_min:
        # integrand is smooth in s down to 0
        val += integrate.quad(g, t, t_min, epsabs=1e-14)[0]
    return val


def compute_p0(sol: PsiSolution, n_samples: int = 101) -> AsymptoticData:
    if sol.y_max < 6:
        raise ValueError("compute_p0 needs y_max >= 6")
    ts = np.linspace(0.0, 1.0, n_samples)
    g = lambda s: (lambda nm: nm[1] / nm[0])(nu_mu(sol, s))
    phi = np.zeros(n_samples)
    for i in range(n_samples - 2, -1, -1):
        a, b = ts[i], ts[i + 1]
        phi[i] = phi[i + 1] + integrate.quad(g, a, b, epsabs=1e-12, epsrel=1e-12)[0]
    # refine the extremes between samples
    M1 = float(phi.max())
    M2 = float(-phi.min())
    for sign, idx in ((1.0, int(np.argmax(phi))), (-1.0, int(np.argmin(phi)))):
        lo = ts[max(idx - 1, 0)]
        hi = ts[min(idx + 1, n_samples - 1)]
        if hi - lo > 0 and 0 < idx < n_samples - 1:
            r = optimize.minimize_scalar(lambda t: -sign * phi_function(sol, t),
                                         bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-10})
            v = -r.fun * sign
            if sign > 0:
                M1 = max(M1, v)
            else:
                M2 = max(M2, -v)
    nu0 = nu_mu(sol, 0.0)[0]
    return AsymptoticData(nu0=nu0, t_samples=ts, phi_samples=phi, M1=M1, M2=M2,
                          p0=max(M1, M2) - 1.0)


@dataclass
class PhaseReport:
    eigenvalues: tuple
    eigenvalues_exact: bool
    linearization: np.ndarray
    g_residual_max: float
    g_residual_symbolic_zero: bool
    orbit_residual_max: float
    orbit_pq_residual_max: float
    second_order_residual_max: float
    second_order_constant: float
    first_integral_max: float


def verify_phase_analysis(sol: PsiSolution, n_s: int = 201) -> PhaseReport:
    """Numerical and symbolic checks of the (q, p) phase-plane reduction."""
    import sympy as sp

    q, p, s = sp.symbols("q p s")
    pdot = (-3 * q ** 4 - 7 * q ** 2 * p - 2 * p ** 2 + 3) / q
    J = sp.Matrix([[0, 1], [sp.diff(pdot, q), sp.diff(pdot, p)]]).subs({q: 1, p: 0})
    ev = J.eigenvals()
    exact = set(ev) == {-3, -4}
    g = s ** 3
    g_expr = sp.diff(g, s) * (1 - g * s) + 3 * g ** 2 - 3 * s ** 2
    g_zero = sp.simplify(g_expr) == 0
    g_num = sp.lambdify(s, g_expr, "numpy")
    ss = np.linspace(0.0, 1.0, n_s)
    g_res = float(np.max(np.abs(g_num(ss) * np.ones_like(ss))))

    ys = sol.nodes[sol.nodes > 0.1]
    orbit = np.abs(sol.orbit_residual(ys))
    P, W, U = sol.state(ys)
    Q = P + W
    # p + q^2 - 1/q^2 with q = psi'/psi, p = q'
    pq = np.abs(sol.orbit_residual(ys) / (P * Q * Q))

    second = []
    for y in sol.nodes:
        Pn, Qn, Un, Dn = sol.full(y)
        d, e = K.psi_derivs(Pn, Qn, Un, Dn, 3)
        # 2 psi''^2 - 3 psi^2 + psi' psi''' written in deviation form
        second.append(2 * (2 * Pn * Un + Un * Un) + Dn + Qn * e[3])
    d0 = higher_derivs(sol, 0.0, 3)
    const = 2 * d0[2] ** 2 - 3 * d0[0] ** 2 + d0[1] * d0[3]
    return PhaseReport(
        eigenvalues=tuple(sorted(int(k) for k in ev)),
        eigenvalues_exact=bool(exact),
        linearization=np.array(J.tolist(), dtype=float),
        g_residual_max=g_res,
        g_residual_symbolic_zero=bool(g_zero),
        orbit_residual_max=float(orbit.max()),
        orbit_pq_residual_max=float(pq.max()),
        second_order_residual_max=float(np.max(np.abs(second))),
        second_order_constant=float(const),
        first_integral_max=float(np.max(np.abs(sol.first_integral_residual(sol.nodes)))),
    )


def potential_root_scan(sol: PsiSolution, n: int = 4001) -> list[float]:
    """All roots of psi'' - psi on [-y_max, y_max] by sign-change bisection."""
    # offset grid so no node sits exactly on a root
    ys = np.linspace(-sol.y_max, sol.y_max, n) + 0.37 * (2 * sol.y_max / (n - 1))
    ys = ys[np.abs(ys) <= sol.y_max]
    u = sol.state(ys)[2]
    f = lambda y: sol.state(y)[2]
    roots = []
    for i in np.nonzero(np.sign(u[:-1]) * np.sign(u[1:]) <= 0)[0]:
        if u[i] == 0.0:
            roots.append(float(ys[i]))
            continue
        roots.append(optimize.brentq(f, ys[i], ys[i + 1], xtol=1e-15, rtol=1e-15))
    out = []
    for r in sorted(roots):
        if not out or abs(r - out[-1]) > 1e-9:
            out.append(r)
    return out
