"""Compiled scalar kernels shared by every module.

Everything here works on plain floats and small arrays so numba can compile
it. The psi solution enters as a table of Chebyshev coefficients for the
triple (psi, psi' - psi, psi'' - psi) on panels covering [0, y_max]; negative
arguments are handled by odd reflection.

Carrying the differences psi' - psi and psi'' - psi (instead of psi' and
psi'') keeps quantities such as psi'' - psi and psi'^2 - psi^2 accurate for
large |y|, where both terms are ~e^|y| but their difference decays like
e^-3|y|.
"""
import math

import numpy as np
from numba import njit

# derivative orders kept for functions of y (0..4 covers total order 4)
NJ = 5
# psi derivatives 0..NPSI
NPSI = 7

_BINOM = np.zeros((NPSI + 2, NPSI + 2))
for _n in range(NPSI + 2):
    for _k in range(_n + 1):
        _BINOM[_n, _k] = math.comb(_n, _k)

# flow status codes
OK = 0
NOT_CONVERGED = 1
DOMAIN_EXIT = 2
NONPOSITIVE = 3

KIND_FAMILY = 0
KIND_NATURAL = 1
KIND_KINETIC = 2

FAM1 = 0
FAM2 = 1
CUSTOM = 2


@njit(cache=True)
def _clenshaw(c, t):
    b1 = 0.0
    b2 = 0.0
    for k in range(c.shape[0] - 1, 0, -1):
        b1, b2 = 2.0 * t * b1 - b2 + c[k], b1
    return t * b1 - b2 + c[0]


@njit(cache=True)
def psi_state(table, hw, y):
    """(psi, psi' - psi, psi'' - psi) at y."""
    a = abs(y)
    if a == 0.0:
        # the initial data, exactly
        return 0.0, 1.0, 0.0
    i = int(a / hw)
    if i >= table.shape[0]:
        i = table.shape[0] - 1
    t = 2.0 * (a - i * hw) / hw - 1.0
    P = _clenshaw(table[i, 0], t)
    W = _clenshaw(table[i, 1], t)
    U = _clenshaw(table[i, 2], t)
    if y < 0.0:
        return -P, 2.0 * P + W, -U
    return P, W, U


@njit(cache=True)
def psi_full(table, hw, y):
    """(psi, psi', psi'' - psi, psi'^2 - psi^2) at y, accurate for either sign."""
    P, W, U = psi_state(table, hw, abs(y))
    QP2 = W * (2.0 * P + W)
    if y < 0.0:
        return -P, P + W, -U, QP2
    return P, P + W, U, QP2


@njit(cache=True)
def psi_derivs(P, Q, U, QP2, n):
    """Derivatives psi^(0..n) and their deviations from the base values.

    Base values are psi for even orders and psi' for odd orders; the
    deviations e_j obey a recurrence obtained by Leibniz-differentiating
    psi' psi''' + 2 psi''^2 - 3 psi^2 = 0, which never subtracts two large
    numbers.
    """
    b = np.empty(n + 1)
    e = np.zeros(n + 1)
    for j in range(n + 1):
        b[j] = P if j % 2 == 0 else Q
    if n >= 2:
        e[2] = U
    for m in range(0, n - 2):
        tot = QP2 if m == 0 else 0.0
        for k in range(m + 1):
            C = _BINOM[m, k]
            if k > 0:
                i = 1 + k
                j = 3 + m - k
                tot += C * (b[i] * e[j] + e[i] * b[j] + e[i] * e[j])
            i = 2 + k
            j = 2 + m - k
            tot += 2.0 * C * (b[i] * e[j] + e[i] * b[j] + e[i] * e[j])
            i = k
            j = m - k
            tot -= 3.0 * C * (b[i] * e[j] + e[i] * b[j] + e[i] * e[j])
        e[m + 3] = -tot / Q
    return b + e, e


@njit(cache=True)
def jmul(a, b):
    n = a.shape[0]
    out = np.zeros(n)
    for k in range(n):
        s = 0.0
        for i in range(k + 1):
            s += _BINOM[k, i] * a[i] * b[k - i]
        out[k] = s
    return out


@njit(cache=True)
def jrecip(a):
    n = a.shape[0]
    r = np.zeros(n)
    r[0] = 1.0 / a[0]
    for k in range(1, n):
        s = 0.0
        for i in range(1, k + 1):
            s += _BINOM[k, i] * a[i] * r[k - i]
        r[k] = -s * r[0]
    return r


@njit(cache=True)
def y_jets(table, hw, y):
    """Jets in y of psi, psi', psi''-psi, psi''+psi and psi'^2-psi^2.

    Computed at |y| and reflected by parity so the small combinations
    never come from cancellation at negative y.
    """
    P, W, U = psi_state(table, hw, abs(y))
    Q = P + W
    d, e = psi_derivs(P, Q, U, W * (2.0 * P + W), NJ + 1)
    Pj = np.empty(NJ)
    Qj = np.empty(NJ)
    Sj = np.empty(NJ)
    Tj = np.empty(NJ)
    Dj = np.empty(NJ)
    for k in range(NJ):
        Pj[k] = d[k]
        Qj[k] = d[k + 1]
        Sj[k] = e[k + 2] - e[k]
        Tj[k] = d[k + 2] + d[k]
        Dj[k] = (W if k % 2 == 0 else -W) + e[k + 1] - e[k]
    QP2 = jmul(Dj, Pj + Qj)
    if y < 0.0:
        for k in range(NJ):
            ev = 1.0 if k % 2 == 0 else -1.0
            Pj[k] *= -ev
            Qj[k] *= ev
            Sj[k] *= -ev
            Tj[k] *= -ev
            QP2[k] *= ev
    return Pj, Qj, Sj, Tj, QP2


@njit(cache=True)
def xi2_jet(Pj, Qj, QP2, fam, c, d1, p):
    """Jet of xi'' for the two metric families."""
    N = np.zeros(NJ)
    if fam == FAM1:
        for k in range(NJ):
            N[k] = d1 * Pj[k]
        N[0] += c
    else:
        for k in range(NJ):
            N[k] = c * (QP2[k] + d1 * Pj[k])
        N[0] += c * p
    return jmul(N, jrecip(jmul(Qj, Qj)))


@njit(cache=True)
def _cosd(a, x):
    return math.cos(x + 0.5 * math.pi * a)


@njit(cache=True)
def _sind(a, x):
    return math.sin(x + 0.5 * math.pi * a)


@njit(cache=True)
def ansatz_partials(table, hw, x, y, prm):
    """Partials of Lambda, A and B up to total order 4.

    prm = (fam, c, d1, p, d, xi_scale, scale). Entry [a, b] of each output is
    the derivative d^a/dx^a d^b/dy^b.
    """
    fam = int(prm[0])
    c = prm[1]
    d1 = prm[2]
    p = prm[3]
    dd = prm[4]
    xs = prm[5]
    s = prm[6]
    L = np.zeros((NJ, NJ))
    A = np.zeros((NJ, NJ))
    B = np.zeros((NJ, NJ))
    if fam == CUSTOM:
        X = np.zeros(NJ)
        X[0] = c * xs
        Sj = np.zeros(NJ)
        Tj = np.zeros(NJ)
        Qj = np.zeros(NJ)
    else:
        Pj, Qj, Sj, Tj, QP2 = y_jets(table, hw, y)
        X = xi2_jet(Pj, Qj, QP2, fam, c, d1, p) * xs
    for a in range(NJ):
        ca = _cosd(a, x)
        sa = _sind(a, x)
        for b in range(NJ - a):
            L[a, b] = s * Sj[b] * ca
            A[a, b] = -0.25 * s * Tj[b] * ca
            B[a, b] = 0.5 * s * Qj[b] * sa
            if a == 0:
                L[a, b] += s * X[b]
                A[a, b] -= 0.25 * s * X[b]
    A[0, 0] += s * dd
    return L, A, B


@njit(cache=True)
def pde_residual_kernel(L, A, B):
    lam = 0.25 * L[0, 0]
    return (6.0 * (A[0, 1] * B[0, 1] + A[1, 0] * B[1, 0])
            + 2.0 * (B[0, 0] * (A[2, 0] + A[0, 2]) + A[0, 0] * (B[2, 0] + B[0, 2]))
            + (B[2, 0] - B[0, 2] - 2.0 * A[1, 1]) * lam)


@njit(cache=True)
def g_kernel(L, A, B):
    """g = d_z(a1 lam^3) / lam with a1 lam = -4 f_zz."""
    lam = 0.25 * L[0, 0]
    lam_z = 0.125 * (L[1, 0] - 1j * L[0, 1])
    fzz = A[0, 0] + 1j * B[0, 0]
    fzzz = 0.5 * (A[1, 0] + B[0, 1] + 1j * (B[1, 0] - A[0, 1]))
    return -4.0 * (fzzz * lam + 2.0 * fzz * lam_z)


@njit(cache=True)
def natural_jets(table, hw, y, variant, p):
    """Jets of the kinetic coefficient K(y) and of v(y), where V = v(y) cos x."""
    Pj, Qj, Sj, Tj, QP2 = y_jets(table, hw, y)
    Q2 = jmul(Qj, Qj)
    iQ2 = jrecip(Q2)
    Q2S = jmul(Q2, Sj)
    if variant == 1:
        K = iQ2
        v = -Q2S
    else:
        M = QP2.copy()
        M[0] += p
        K = jmul(M, iQ2)
        v = -jmul(Q2S, jrecip(M))
    return K, v


@njit(cache=True)
def ham_fields(table, hw, x, y, mp):
    """K, K_x, K_y, V, V_x, V_y of H = |p|^2 / (2K) + V in north log coordinates.

    mp = (kind, fam, c, d1, p, d, xi_scale, scale, variant, p_natural).
    """
    kind = int(mp[0])
    if kind == KIND_FAMILY:
        L, A, B = ansatz_partials(table, hw, x, y, mp[1:8])
        return L[0, 0], L[1, 0], L[0, 1], 0.0, 0.0, 0.0
    K, v = natural_jets(table, hw, y, int(mp[8]), mp[9])
    if kind == KIND_KINETIC:
        return K[0], 0.0, K[1], 0.0, 0.0, 0.0
    cx = math.cos(x)
    sx = math.sin(x)
    return K[0], 0.0, K[1], v[0] * cx, -v[0] * sx, v[1] * cx


# --------------------------------------------------------------------------
# charts and flows
#
# A chart-tagged log state (x, y, px, py) lives in the north log coordinates
# (chart 0) or in the south ones (chart 1), related by (x, y) -> (-x, -y).
# Integration happens in the plane coordinates w = e^(y + ix) of the current
# chart so that the pole at y -> -inf is an ordinary point.


@njit(cache=True)
def log_to_plane(x, y, px, py):
    r = math.exp(y)
    u = r * math.cos(x)
    v = r * math.sin(x)
    r2 = r * r
    return u, v, (-v * px + u * py) / r2, (u * px + v * py) / r2


@njit(cache=True)
def plane_to_log(u, v, pu, pv):
    x = math.atan2(v, u)
    if x < 0.0:
        x += 2.0 * math.pi
    y = 0.5 * math.log(u * u + v * v)
    return x, y, -v * pu + u * pv, u * pu + v * pv


@njit(cache=True)
def plane_field(table, hw, z, chart, mp, ylim, out):
    """Hamiltonian vector field in plane coordinates; returns (H, status)."""
    u, v, pu, pv = z[0], z[1], z[2], z[3]
    r2 = u * u + v * v
    if r2 <= 0.0:
        return 0.0, DOMAIN_EXIT
    yc = 0.5 * math.log(r2)
    xc = math.atan2(v, u)
    if abs(yc) > ylim:
        return 0.0, DOMAIN_EXIT
    sg = 1.0 if chart == 0 else -1.0
    K, Kx, Ky, V, Vx, Vy = ham_fields(table, hw, sg * xc, sg * yc, mp)
    if K <= 0.0:
        return 0.0, NONPOSITIVE
    Kx *= sg
    Ky *= sg
    Vx *= sg
    Vy *= sg
    ir2 = 1.0 / r2
    xu = -v * ir2
    xv = u * ir2
    yu = u * ir2
    yv = v * ir2
    KP = K * ir2
    KPu = ir2 * (Kx * xu + Ky * yu - 2.0 * K * yu)
    KPv = ir2 * (Kx * xv + Ky * yv - 2.0 * K * yv)
    Vu = Vx * xu + Vy * yu
    Vv = Vx * xv + Vy * yv
    p2 = pu * pu + pv * pv
    out[0] = pu / KP
    out[1] = pv / KP
    q = p2 / (2.0 * KP * KP)
    out[2] = q * KPu - Vu
    out[3] = q * KPv - Vv
    return p2 / (2.0 * KP) + V, OK


_S3 = math.sqrt(3.0) / 6.0
_G4A = np.array([[0.25, 0.25 - _S3], [0.25 + _S3, 0.25]])


@njit(cache=True)
def _maxabs(a):
    m = 0.0
    for i in range(a.shape[0]):
        if abs(a[i]) > m:
            m = abs(a[i])
    return m


@njit(cache=True)
def gauss4_step(table, hw, z, dt, chart, mp, ylim, tol, maxit):
    """Two-stage Gauss-Legendre step (order 4, symplectic, symmetric)."""
    k1 = np.empty(4)
    k2 = np.empty(4)
    n1 = np.empty(4)
    n2 = np.empty(4)
    H, st = plane_field(table, hw, z, chart, mp, ylim, k1)
    if st != OK:
        return z, st
    k2[:] = k1
    scale = 1.0 + _maxabs(z)
    prev = 1e300
    for it in range(maxit):
        z1 = z + dt * (_G4A[0, 0] * k1 + _G4A[0, 1] * k2)
        z2 = z + dt * (_G4A[1, 0] * k1 + _G4A[1, 1] * k2)
        H, st = plane_field(table, hw, z1, chart, mp, ylim, n1)
        if st != OK:
            return z, st
        H, st = plane_field(table, hw, z2, chart, mp, ylim, n2)
        if st != OK:
            return z, st
        delta = abs(dt) * max(_maxabs(n1 - k1), _maxabs(n2 - k2))
        k1[:] = n1
        k2[:] = n2
        if delta <= tol * scale or (delta < 1e-12 * scale and delta >= prev):
            return z + 0.5 * dt * (k1 + k2), OK
        prev = delta
    return z, NOT_CONVERGED


@njit(cache=True)
def midpoint_step(table, hw, z, dt, chart, mp, ylim, tol, maxit):
    """Implicit midpoint step (order 2, symplectic, symmetric)."""
    k = np.empty(4)
    n = np.empty(4)
    H, st = plane_field(table, hw, z, chart, mp, ylim, k)
    if st != OK:
        return z, st
    scale = 1.0 + _maxabs(z)
    prev = 1e300
    for it in range(maxit):
        H, st = plane_field(table, hw, z + 0.5 * dt * k, chart, mp, ylim, n)
        if st != OK:
            return z, st
        delta = abs(dt) * _maxabs(n - k)
        k[:] = n
        if delta <= tol * scale or (delta < 1e-12 * scale and delta >= prev):
            return z + dt * k, OK
        prev = delta
    return z, NOT_CONVERGED


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@njit(cache=True)
def chord_dh(table, hw, qp, xa, ya, xb, yb):
    """Integral of dh = 2 Re g dx + 2 Im g dy along the straight chord a -> b."""
    dx = xb - xa
    dy = yb - ya
    length = math.sqrt(dx * dx + dy * dy)
    m = max(1, int(math.ceil(length / 0.05)))
    tot = 0.0
    for j in range(m):
        for i in range(_GL_X.shape[0]):
            s = (j + _GL_X[i]) / m
            L, A, B = ansatz_partials(table, hw, xa + s * dx, ya + s * dy, qp)
            g = g_kernel(L, A, B)
            tot += _GL_W[i] / m * (2.0 * g.real * dx + 2.0 * g.imag * dy)
    return tot


@njit(cache=True)
def quartic_value(table, hw, qp, x, y, px, py, h, a2_shift):
    L, A, B = ansatz_partials(table, hw, x, y, qp)
    lam = 0.25 * L[0, 0]
    a1 = -4.0 * (A[0, 0] + 1j * B[0, 0]) / lam
    a2 = -h / (lam * lam) + a2_shift
    pz = 0.5 * (px - 1j * py)
    pz2 = pz * pz
    m2 = (pz * pz.conjugate()).real
    return 2.0 * (pz2 * pz2 + a1 * pz2 * pz * pz.conjugate()).real + a2 * m2 * m2


@njit(cache=True)
def _wrap(dx):
    while dx > math.pi:
        dx -= 2.0 * math.pi
    while dx < -math.pi:
        dx += 2.0 * math.pi
    return dx


@njit(cache=True)
def run_flow(table, hw, s0, chart0, nsteps, dt, mp, qp, track_F, h0, a2_shift,
             y_switch, ylim, method, stride, tol, maxit):
    """Fixed-step symplectic integration with automatic chart switching.

    s0 is the chart-tagged log state. Returns a status code, the index of the
    failing step (or nsteps), stored log states/charts every `stride` steps,
    stored samples (H, F, p_phi) and the max absolute deviation of each
    sample over all steps.
    """
    nstore = nsteps // stride + 2
    states = np.zeros((nstore, 4))
    charts = np.zeros(nstore, dtype=np.int64)
    steps = np.zeros(nstore, dtype=np.int64)
    samples = np.zeros((nstore, 3))
    maxdev = np.zeros(3)
    buf = np.empty(4)

    x, y, px, py = s0[0], s0[1], s0[2], s0[3]
    chart = chart0
    switches = 0
    if y > y_switch:
        x, y, px, py = -x, -y, -px, -py
        chart = 1 - chart
        switches += 1
    u, v, pu, pv = log_to_plane(x, y, px, py)
    z = np.array([u, v, pu, pv])
    H0, st = plane_field(table, hw, z, chart, mp, ylim, buf)
    if st != OK:
        return st, 0, states[:0], charts[:0], steps[:0], samples[:0], maxdev, switches
    sg = 1.0 if chart == 0 else -1.0
    xn, yn = sg * x, sg * y
    h = h0
    F0 = 0.0
    if track_F:
        F0 = quartic_value(table, hw, qp, xn, yn, sg * px, sg * py, h, a2_shift)
    P0 = sg * px
    states[0, 0] = x
    states[0, 1] = y
    states[0, 2] = px
    states[0, 3] = py
    charts[0] = chart
    samples[0, 0] = H0
    samples[0, 1] = F0
    samples[0, 2] = P0
    ns = 1
    for n in range(1, nsteps + 1):
        if method == 0:
            z, st = gauss4_step(table, hw, z, dt, chart, mp, ylim, tol, maxit)
        else:
            z, st = midpoint_step(table, hw, z, dt, chart, mp, ylim, tol, maxit)
        if st != OK:
            return st, n, states[:ns], charts[:ns], steps[:ns], samples[:ns], maxdev, switches
        x, y, px, py = plane_to_log(z[0], z[1], z[2], z[3])
        if y > y_switch:
            x, y, px, py = -x, -y, -px, -py
            if x < 0.0:
                x += 2.0 * math.pi
            chart = 1 - chart
            switches += 1
            u, v, pu, pv = log_to_plane(x, y, px, py)
            z[0] = u
            z[1] = v
            z[2] = pu
            z[3] = pv
        H, st = plane_field(table, hw, z, chart, mp, ylim, buf)
        if st != OK:
            return st, n, states[:ns], charts[:ns], steps[:ns], samples[:ns], maxdev, switches
        sg = 1.0 if chart == 0 else -1.0
        xb = sg * x
        yb = sg * y
        F = 0.0
        if track_F:
            xb_u = xn + _wrap(xb - xn)
            h += chord_dh(table, hw, qp, xn, yn, xb_u, yb)
            F = quartic_value(table, hw, qp, xb, yb, sg * px, sg * py, h, a2_shift)
        xn = xb
        yn = yb
        Pphi = sg * px
        maxdev[0] = max(maxdev[0], abs(H - H0))
        maxdev[1] = max(maxdev[1], abs(F - F0))
        maxdev[2] = max(maxdev[2], abs(Pphi - P0))
        if n % stride == 0 or n == nsteps:
            states[ns, 0] = x
            states[ns, 1] = y
            states[ns, 2] = px
            states[ns, 3] = py
            charts[ns] = chart
            steps[ns] = n
            samples[ns, 0] = H
            samples[ns, 1] = F
            samples[ns, 2] = Pphi
            ns += 1
    return OK, nsteps, states[:ns], charts[:ns], steps[:ns], samples[:ns], maxdev, switches


@njit(cache=True)
def vec_partials(table, hw, xs, ys, prm, out_res, out_g, out_L):
    """Vectorised pde residual, g and Lambda over point arrays."""
    for i in range(xs.shape[0]):
        L, A, B = ansatz_partials(table, hw, xs[i], ys[i], prm)
        out_res[i] = pde_residual_kernel(L, A, B)
        out_g[i] = g_kernel(L, A, B)
        out_L[i] = L[0, 0]


@njit(cache=True)
def psi_states_many(table, hw, ys):
    out = np.empty((ys.shape[0], 3))
    for i in range(ys.shape[0]):
        P, W, U = psi_state(table, hw, ys[i])
        out[i, 0] = P
        out[i, 1] = W
        out[i, 2] = U
    return out
