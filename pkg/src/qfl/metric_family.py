"""Integrable conformal metrics, natural systems and their Jacobi metrics.

All coordinates are (x, y) = (phi, log r) on the sphere minus the poles, with
metric Lambda(x, y) (dx^2 + dy^2). The two families come from the ansatz

    f(x, y) = psi(y) cos x + xi(y) + d (x^2 - y^2),   Lambda = 4 f_{z zbar},

so Lambda = (psi'' - psi) cos x + xi''. Family 1 takes xi'' = (d1 psi + c)/psi'^2
with d = 0; family 2 takes xi'' = c (psi'^2 - psi^2 + d1 psi + p)/psi'^2 with
d = c/2. Plane charts around the poles live behind ``to_plane_chart``.
"""
from __future__ import annotations

import functools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sp
from scipy import optimize

from . import _kernels as K
from .errors import ChartError, DomainError, InconclusiveError, PositivityError
from .psi_core import PsiSolution, compute_p0, plane_profiles, potential_root_scan

FAM1 = "FAM1"
FAM2 = "FAM2"
CUSTOM = "CUSTOM"
_FAM_CODE = {FAM1: K.FAM1, FAM2: K.FAM2, CUSTOM: K.CUSTOM}

S1 = "S1"
S2 = "S2"
NORTH = "NORTH"
SOUTH = "SOUTH"

WITNESS_DELTA = 1e-6
WITNESS_GRID = 64
CHART_R2_MAX = 4.0


@dataclass(frozen=True, eq=False)
class FAnsatzData:
    """Parameters of f = psi cos x + xi + d (x^2 - y^2).

    ``xi_scale`` multiplies xi'' (1 for the genuine families; other values
    give perturbed, non-integrable fixtures) and ``scale`` multiplies f as a
    whole. CUSTOM drops psi and uses the constant xi'' = c.
    """
    psi: Optional[PsiSolution]
    d1: float
    c: float
    p: float
    d: float
    family_tag: str
    xi_scale: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.family_tag not in _FAM_CODE:
            raise ValueError(f"unknown family tag {self.family_tag!r}")
        if self.family_tag != CUSTOM and self.psi is None:
            raise ValueError("psi is required for FAM1/FAM2")

    @property
    def prm(self) -> np.ndarray:
        return np.array([_FAM_CODE[self.family_tag], self.c, self.d1, self.p,
                         self.d, self.xi_scale, self.scale], dtype=float)

    @property
    def _tables(self):
        if self.psi is None:
            return np.zeros((1, 3, 1)), 1.0
        return self.psi.table, self.psi.hw

    def partials(self, x: float, y: float):
        """(Lambda, A, B) partial-derivative arrays, entry [a, b] = d_x^a d_y^b."""
        if self.psi is not None and abs(y) > self.psi.y_max:
            raise DomainError(f"|y| exceeds y_max={self.psi.y_max}")
        tab, hw = self._tables
        return K.ansatz_partials(tab, hw, float(x), float(y), self.prm)

    def xi_derivs(self, y: float) -> np.ndarray:
        """Jet of xi'' in y (derivatives of xi of order 2..6), unscaled."""
        if self.psi is None:
            out = np.zeros(K.NJ)
            out[0] = self.c
            return out
        if abs(y) > self.psi.y_max:
            raise DomainError(f"|y| exceeds y_max={self.psi.y_max}")
        Pj, Qj, _, _, QP2 = K.y_jets(self.psi.table, self.psi.hw, float(y))
        return K.xi2_jet(Pj, Qj, QP2, _FAM_CODE[self.family_tag],
                         self.c, self.d1, self.p)

    def A(self, x, y):
        return self.partials(x, y)[1][0, 0]

    def B(self, x, y):
        return self.partials(x, y)[2][0, 0]

    def descriptor(self) -> dict:
        return {
            "family": self.family_tag,
            "c": self.c,
            "d1": self.d1,
            "p": self.p,
            "d": self.d,
            "psi_tolerance": None if self.psi is None else self.psi.tol,
            "y_max": None if self.psi is None else self.psi.y_max,
        }


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    """Lambda(x, y) (dx^2 + dy^2) with partials up to total order 4.

    ``ansatz`` is set whenever the metric is 4 f_{z zbar} for a known f, which
    is what the quartic-integral machinery needs. ``positive`` and
    ``min_lambda`` are advisory, taken on a probe grid.
    """
    kind: str
    partials_fn: Callable[[float, float], np.ndarray] = field(repr=False)
    ansatz: Optional[FAnsatzData] = None
    info: dict = field(default_factory=dict)
    positive: Optional[bool] = None
    min_lambda: Optional[float] = None

    def partials(self, x: float, y: float) -> np.ndarray:
        return self.partials_fn(float(x), float(y))

    def __call__(self, x, y):
        xs, ys = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.array([self.partials(a, b)[0, 0]
                        for a, b in zip(xs.ravel(), ys.ravel())])
        return out.reshape(xs.shape) if xs.ndim else float(out[0])

    def lambda_small(self, x, y):
        """lambda = Lambda / 4 = f_{z zbar}."""
        return 0.25 * self(x, y)

    @property
    def y_max(self) -> float:
        return self.info.get("y_max", math.inf)

    def descriptor(self) -> dict:
        if self.ansatz is not None:
            out = self.ansatz.descriptor()
            if self.kind != "family":
                out["family"] = f"{self.kind}:{out['family']}"
            return out
        return {"family": self.kind,
                **{k: v for k, v in self.info.items() if k != "system"}}

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)


def _probe_positivity(partials_fn, y_lim, n=WITNESS_GRID):
    xs = np.linspace(0.0, 2 * math.pi, n)
    ys = np.linspace(-y_lim, y_lim, n)
    m = min(partials_fn(a, b)[0, 0] for a in xs for b in ys)
    return bool(m > 0), float(m)


def _family_metric(ansatz: FAnsatzData, kind="family") -> ConformalMetric:
    fn = lambda x, y: ansatz.partials(x, y)[0]
    pos, m = _probe_positivity(fn, ansatz.psi.y_max)
    return ConformalMetric(kind=kind, partials_fn=fn, ansatz=ansatz,
                           info={"y_max": ansatz.psi.y_max},
                           positive=pos, min_lambda=m)


def build_family1(psi: PsiSolution, c: float, d1: float) -> ConformalMetric:
    """Lambda = (psi'' - psi) cos x + (d1 psi + c)/psi'^2."""
    return _family_metric(FAnsatzData(psi, float(d1), float(c), 0.0, 0.0, FAM1))


def build_family2(psi: PsiSolution, c: float, d1: float, p: float) -> ConformalMetric:
    """Lambda = (psi'' - psi) cos x + c (psi'^2 - psi^2 + d1 psi + p)/psi'^2."""
    return _family_metric(
        FAnsatzData(psi, float(d1), float(c), float(p), 0.5 * float(c), FAM2))


def perturbed_family(metric: ConformalMetric, xi_scale: float) -> ConformalMetric:
    """Same ansatz with xi'' multiplied by xi_scale (breaks integrability)."""
    a = metric.ansatz
    return _family_metric(FAnsatzData(a.psi, a.d1, a.c, a.p, a.d, a.family_tag,
                                      xi_scale=xi_scale, scale=a.scale))


def rescaled(metric: ConformalMetric, factor: float) -> ConformalMetric:
    """factor * Lambda, obtained by scaling f."""
    a = metric.ansatz
    return _family_metric(FAnsatzData(a.psi, a.d1, a.c, a.p, a.d, a.family_tag,
                                      xi_scale=a.xi_scale, scale=a.scale * factor))


def flat_ansatz(c: float = 1.0) -> FAnsatzData:
    """f = c (x^2 + y^2)/4 with psi dropped: the flat metric Lambda = c."""
    return FAnsatzData(None, 0.0, float(c), 0.0, 0.0, CUSTOM)


def _symbolic_metric(kind: str, expr, x, y, info) -> ConformalMetric:
    fns = [[sp.lambdify((x, y), sp.diff(expr, x, a, y, b), "math")
            for b in range(K.NJ)] for a in range(K.NJ)]

    def partials(xv, yv):
        out = np.zeros((K.NJ, K.NJ))
        for a in range(K.NJ):
            for b in range(K.NJ - a):
                out[a, b] = fns[a][b](xv, yv)
        return out

    return ConformalMetric(kind=kind, partials_fn=partials, info=info, positive=True)


def round_sphere() -> ConformalMetric:
    """Unit round sphere in (phi, log r) coordinates: Lambda = 1/cosh^2 y."""
    x, y = sp.symbols("x y", real=True)
    return _symbolic_metric("round_sphere", 1 / sp.cosh(y) ** 2, x, y, {})


def plane_sphere(c1: float = 4.0, dd: float = 1.0) -> ConformalMetric:
    """c1 / (1 + dd (u^2 + v^2))^2 in Cartesian plane coordinates."""
    u, v = sp.symbols("u v", real=True)
    expr = sp.Float(c1) / (1 + sp.Float(dd) * (u ** 2 + v ** 2)) ** 2
    return _symbolic_metric("plane_sphere", expr, u, v, {"c1": c1, "dd": dd})


# --------------------------------------------------------------------------
# natural systems


@functools.lru_cache(maxsize=8)
def _cached_p0(sol: PsiSolution) -> float:
    return compute_p0(sol).p0


@dataclass(frozen=True, eq=False)
class NaturalSystem:
    """H = (p_x^2 + p_y^2)/(2 K(y)) + V(x, y) with V = v(y) cos x.

    S1: K = 1/psi'^2, v = -psi'^2 (psi'' - psi).
    S2: K = (psi'^2 - psi^2 + p)/psi'^2, v = -psi'^2 (psi'' - psi)/(psi'^2 - psi^2 + p).
    """
    psi: PsiSolution
    variant: str
    p: float = 0.0

    def jets(self, y: float):
        """Jets (K, v) in y up to order 4."""
        if abs(y) > self.psi.y_max:
            raise DomainError(f"|y| exceeds y_max={self.psi.y_max}")
        return K.natural_jets(self.psi.table, self.psi.hw, float(y),
                              1 if self.variant == S1 else 2, self.p)

    def kinetic_coeff(self, y):
        ys = np.atleast_1d(np.asarray(y, float))
        out = np.array([self.jets(b)[0][0] for b in ys])
        return out if np.ndim(y) else float(out[0])

    def potential(self, x, y):
        xs, ys = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.array([self.jets(b)[1][0] * math.cos(a)
                        for a, b in zip(xs.ravel(), ys.ravel())])
        return out.reshape(xs.shape) if xs.ndim else float(out[0])

    def hamiltonian(self, x, y, px, py) -> float:
        k, v = self.jets(y)
        return (px * px + py * py) / (2.0 * k[0]) + v[0] * math.cos(x)

    @property
    def flow_params(self) -> np.ndarray:
        return np.array([K.KIND_NATURAL, 0, 0, 0, 0, 0, 1, 1,
                         1 if self.variant == S1 else 2, self.p], dtype=float)

    def descriptor(self) -> dict:
        return {"family": self.variant, "c": None, "d1": 0.0,
                "p": self.p if self.variant == S2 else None, "d": None,
                "psi_tolerance": self.psi.tol, "y_max": self.psi.y_max}

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)


def build_natural(psi: PsiSolution, variant: str, p: Optional[float] = None,
                  strict: bool = False, p0: Optional[float] = None) -> NaturalSystem:
    """S1 or S2(p). For S2 the kinetic coefficient needs p > p0."""
    if variant == S1:
        return NaturalSystem(psi, S1, 0.0)
    if variant != S2:
        raise ValueError(f"unknown variant {variant!r}")
    if p is None:
        raise ValueError("S2 needs p")
    p0 = _cached_p0(psi) if p0 is None else p0
    if p <= p0:
        msg = f"p={p} <= p0={p0}: kinetic coefficient not positive on the sphere"
        if strict:
            raise PositivityError(msg)
        warnings.warn(msg, stacklevel=2)
    return NaturalSystem(psi, S2, float(p))


def max_potential(sys: NaturalSystem, n: int = 2001):
    """(max V, y*, x*) over the sphere; V = v(y) cos x so this is 1-D in y."""
    ym = sys.psi.y_max
    ys = np.linspace(-ym, ym, n)
    av = np.array([abs(sys.jets(b)[1][0]) for b in ys])
    i = int(np.argmax(av))
    lo, hi = ys[max(i - 1, 0)], ys[min(i + 1, n - 1)]
    r = optimize.minimize_scalar(lambda b: -abs(sys.jets(b)[1][0]),
                                 bounds=(lo, hi), method="bounded",
                                 options={"xatol": 1e-12})
    y_star = float(r.x)
    v = sys.jets(y_star)[1][0]
    return float(abs(v)), y_star, 0.0 if v > 0 else math.pi


def kinetic_metric(sys: NaturalSystem) -> ConformalMetric:
    """The x-independent metric K(y) (dx^2 + dy^2) of the kinetic term alone."""
    def partials(x, y):
        out = np.zeros((K.NJ, K.NJ))
        out[0] = sys.jets(y)[0]
        return out

    pos, m = _probe_positivity(partials, sys.psi.y_max, n=8)
    return ConformalMetric(kind="kinetic", partials_fn=partials,
                           info={"variant": sys.variant, "p": sys.p,
                                 "y_max": sys.psi.y_max, "system": sys},
                           positive=pos, min_lambda=m)


def jacobi_metric(sys: NaturalSystem, E: float) -> ConformalMetric:
    """Lambda_J = (E - V) K, computed directly from the natural system.

    Geodesics of Lambda_J with H_J = |p|^2/(2 Lambda_J) = 1 are the orbits of
    the natural system at energy E. The matching family ansatz is attached so
    the quartic integral can be built on it.
    """
    E = float(E)

    def partials(x, y):
        k, v = sys.jets(y)
        kv = K.jmul(k, v)
        out = np.zeros((K.NJ, K.NJ))
        for a in range(K.NJ):
            ca = K._cosd(a, x)
            for b in range(K.NJ - a):
                out[a, b] = -kv[b] * ca + (E * k[b] if a == 0 else 0.0)
        return out

    if sys.variant == S1:
        ansatz = FAnsatzData(sys.psi, 0.0, E, 0.0, 0.0, FAM1)
    else:
        ansatz = FAnsatzData(sys.psi, 0.0, E, sys.p, 0.5 * E, FAM2)
    pos, m = _probe_positivity(partials, sys.psi.y_max)
    return ConformalMetric(kind="jacobi", partials_fn=partials, ansatz=ansatz,
                           info={"E": E, "variant": sys.variant, "p": sys.p,
                                 "y_max": sys.psi.y_max},
                           positive=pos, min_lambda=m)


# --------------------------------------------------------------------------
# plane charts near the poles


def to_plane_chart(sys: NaturalSystem, u: float, v: float, chart: str = NORTH):
    """(kinetic factor, potential) in the plane chart w = u + iv around a pole.

    NORTH: u + iv = e^(y + ix); SOUTH: the same with (x, y) -> (-x, -y). The
    kinetic factor is the conformal factor K/r^2, which for S1 is 1/nu^2(r^2).
    """
    r2 = u * u + v * v
    if r2 > CHART_R2_MAX:
        raise ChartError(f"r^2={r2} outside the chart (max {CHART_R2_MAX})")
    if chart not in (NORTH, SOUTH):
        raise ValueError(f"unknown chart {chart!r}")
    nu, mu, D = plane_profiles(sys.psi, r2)
    sign = 1.0 if chart == NORTH else -1.0
    if sys.variant == S1:
        return 1.0 / (nu * nu), sign * mu * u
    M = D + sys.p
    return M / (nu * nu), sign * mu * u / M


@dataclass(frozen=True)
class SmoothnessProbe:
    h: float
    d2_axis: tuple
    laplacian_plus: float
    laplacian_cross: float
    raw_mismatch: float
    mismatch: float


def _stencils(fn, h):
    f0 = fn(0.0, 0.0)
    duu = (fn(h, 0.0) - 2 * f0 + fn(-h, 0.0)) / h ** 2
    dvv = (fn(0.0, h) - 2 * f0 + fn(0.0, -h)) / h ** 2
    cross = (fn(h, h) + fn(h, -h) + fn(-h, h) + fn(-h, -h) - 4 * f0) / (2 * h * h)
    return duu, dvv, cross


def c2_probe(fn: Callable[[float, float], float], h: float = 1e-3) -> SmoothnessProbe:
    """Compare the Laplacian at the origin from the '+' and 'x' 5-point stencils.

    For a C^2 function both stencils estimate the same Laplacian and their
    difference is a h^2 + O(h^4). The reported mismatch combines step sizes
    h and h/2 to cancel the h^2 term, so a smooth but strongly curved
    function is not mistaken for a kink.
    """
    duu, dvv, cross = _stencils(fn, h)
    m1 = duu + dvv - cross
    a, b, c = _stencils(fn, 0.5 * h)
    m2 = a + b - c
    return SmoothnessProbe(h, (duu, dvv), duu + dvv, cross, abs(m1),
                           abs((4.0 * m2 - m1) / 3.0))


# --------------------------------------------------------------------------
# curvature and witnesses


def gauss_curvature(metric: ConformalMetric, x: float, y: float) -> float:
    L = metric.partials(x, y)
    lam = L[0, 0]
    if not lam > 0:
        raise DomainError(f"Lambda={lam} not positive at ({x}, {y})")
    return float(-(L[2, 0] + L[0, 2] - (L[1, 0] ** 2 + L[0, 1] ** 2) / lam)
                 / (2.0 * lam * lam))


def nontriviality_witness(metric: ConformalMetric, delta: float = WITNESS_DELTA,
                          n: int = WITNESS_GRID, y_half: float = 3.0):
    """Points where Lambda_xy and Lambda_xx - Lambda_yy are nonzero, or None."""
    p1 = p2 = None
    for yv in np.linspace(-y_half, y_half, n):
        for xv in np.linspace(0.0, 2 * math.pi, n):
            L = metric.partials(xv, yv)
            if p1 is None and abs(L[1, 1]) > delta:
                p1 = (float(xv), float(yv))
            if p2 is None and abs(L[2, 0] - L[0, 2]) > delta:
                p2 = (float(xv), float(yv))
            if p1 is not None and p2 is not None:
                return p1, p2
    return None


def distinctness_check(psi: PsiSolution, p1: float, p2: float,
                       p0: Optional[float] = None) -> bool:
    """Whether S2(p1) and S2(p2) are different systems.

    An equivalence would force the scale factor to 1 and then p1 = p2; the
    argument needs psi'' - psi to vanish only at y = 0.
    """
    p0 = _cached_p0(psi) if p0 is None else p0
    if p1 <= p0 or p2 <= p0:
        raise PositivityError(f"need p1, p2 > p0={p0}")
    roots = potential_root_scan(psi)
    if len(roots) != 1:
        raise InconclusiveError(f"root scan found {len(roots)} roots, need exactly 1")
    return p1 != p2
