"""Geodesic and natural Hamiltonian flows on the sphere.

States are chart-tagged points (x, y, p_x, p_y) of a log chart. The stepper
works in the plane coordinates u + iv = e^(y + ix) of the current chart, in
which the pole of that chart is an ordinary point; when the log coordinate
y of the current chart exceeds ``y_switch`` the state is moved to the other
chart by (x, y, p_x, p_y) -> (-x, -y, -p_x, -p_y).

Along the way the compiled loop records H, the quartic integral F (its h is
carried incrementally along the path) and p_x read in the north chart.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import DomainExitError, NoRoomError, PositivityError, StepperError
from .metric_family import NORTH, SOUTH, ConformalMetric, NaturalSystem
from .quartic_integral import PhaseState, QuarticIntegral

GAUSS4 = "gauss4"
MIDPOINT = "midpoint"
_METHODS = {GAUSS4: 0, MIDPOINT: 1}

Y_SWITCH = 1.5
STEP_TOL = 1e-14
MAX_ITER = 50
# stay this far inside the tabulated range of psi
_Y_MARGIN = 1e-6

CSV_HEADER = ["time", "chart", "x", "y", "px", "py", "H", "F"]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled trajectory; ``max_dev`` holds max |Q(t) - Q(0)| over every step."""
    times: np.ndarray
    states: list
    samples: dict
    stepper_meta: dict
    max_dev: dict = field(default_factory=dict)

    def drift(self, name: str) -> float:
        """max_t |Q(t) - Q(0)| / max(|Q(0)|, 1) for Q in {H, F, p_x}."""
        q0 = self.samples[name][0]
        return float(self.max_dev[name] / max(abs(q0), 1.0))

    @property
    def final(self) -> PhaseState:
        return self.states[-1]

    def drift_summary(self) -> list[dict]:
        out = []
        for name in ("H", "F", "p_x"):
            if name in self.samples:
                out.append({
                    "quantity": name,
                    "initial": float(self.samples[name][0]),
                    "max_abs_drift": float(self.max_dev[name]),
                    "relative_drift": self.drift(name),
                    "steps": self.stepper_meta["nsteps"],
                    "switches": self.stepper_meta["switches"],
                })
        return out

    def to_json(self) -> str:
        return json.dumps(self.drift_summary(), indent=1)

    def to_csv(self, path) -> None:
        F = self.samples.get("F")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for i, s in enumerate(self.states):
                w.writerow([repr(float(self.times[i])), s.chart, repr(s.x), repr(s.y),
                            repr(s.px), repr(s.py), repr(float(self.samples["H"][i])),
                            "" if F is None else repr(float(F[i]))])


def chart_switch(s: PhaseState) -> PhaseState:
    """The antipodal chart change (x, y, p_x, p_y) -> (-x, -y, -p_x, -p_y)."""
    other = SOUTH if s.chart == NORTH else NORTH
    return PhaseState(other, -s.x, -s.y, -s.px, -s.py)


def _flow_params(metric: ConformalMetric) -> tuple[np.ndarray, object]:
    if metric.kind == "kinetic":
        sys = metric.info["system"]
        v = 1 if sys.variant == "S1" else 2
        return np.array([K.KIND_KINETIC, 0, 0, 0, 0, 0, 1, 1, v, sys.p], float), sys.psi
    if metric.ansatz is None or metric.ansatz.psi is None:
        raise ValueError(f"no compiled flow for metric kind {metric.kind!r}")
    a = metric.ansatz
    return np.concatenate([[K.KIND_FAMILY], a.prm, [0.0, 0.0]]), a.psi


def _run(psi, mp, s0: PhaseState, T, dt, quartic, method, stride, y_switch,
         label) -> Trajectory:
    if not 0 < abs(dt) <= 1e-2:
        raise ValueError("need 0 < |dt| <= 1e-2")
    if T * dt < 0 or T == 0:
        raise ValueError("T must be nonzero with the sign of dt")
    nsteps = int(round(T / dt))
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}")
    stride = max(1, int(stride))
    s_vec = np.array([s0.x, s0.y, s0.px, s0.py], float)
    chart0 = 0 if s0.chart == NORTH else 1
    track = quartic is not None
    qp = quartic.kernel_params if track else np.zeros(7)
    h0 = 0.0
    a2_shift = 0.0
    if track:
        xn, yn, _, _ = s0.north()
        h0 = quartic.h(xn % (2 * math.pi), yn)
        a2_shift = quartic.a2_shift
    ylim = psi.y_max - _Y_MARGIN
    st, n, states, charts, steps, samples, maxdev, switches = K.run_flow(
        psi.table, psi.hw, s_vec, chart0, nsteps, float(dt), mp, qp, track, h0,
        a2_shift, y_switch, ylim, _METHODS[method], stride, STEP_TOL, MAX_ITER)
    if st == K.NOT_CONVERGED:
        raise StepperError(f"implicit stage solve failed at step {n}")
    if st == K.DOMAIN_EXIT:
        raise DomainExitError(f"left the tabulated region at step {n}")
    if st == K.NONPOSITIVE:
        raise PositivityError(f"conformal factor <= 0 at step {n}")
    chart_names = (NORTH, SOUTH)
    pstates = [PhaseState(chart_names[c], *row) for row, c in zip(states, charts)]
    samp = {"H": samples[:, 0].copy(), "p_x": samples[:, 2].copy()}
    dev = {"H": maxdev[0], "p_x": maxdev[2]}
    if track:
        samp["F"] = samples[:, 1].copy()
        dev["F"] = maxdev[1]
    meta = {"method": method, "dt": float(dt), "T": float(T), "nsteps": nsteps,
            "switches": int(switches), "system": label}
    return Trajectory(times=steps * float(dt), states=pstates, samples=samp,
                      stepper_meta=meta, max_dev=dev)


def integrate_geodesic(metric: ConformalMetric, s0: PhaseState, T: float, dt: float,
                       quartic: Optional[QuarticIntegral] = None,
                       method: str = GAUSS4, stride: int = 10,
                       y_switch: float = Y_SWITCH) -> Trajectory:
    """Flow of H = |p|^2/(2 Lambda), tracking H, p_x and (optionally) F."""
    mp, psi = _flow_params(metric)
    return _run(psi, mp, s0, T, dt, quartic, method, stride, y_switch, metric.kind)


def integrate_natural(sys: NaturalSystem, s0: PhaseState, T: float, dt: float,
                      F_E: Optional[QuarticIntegral] = None,
                      method: str = GAUSS4, stride: int = 10,
                      y_switch: float = Y_SWITCH) -> Trajectory:
    """Flow of H = |p|^2/(2 K) + V, tracking H and (optionally) F_E.

    F_E should be the quartic integral of the Jacobi metric at the energy of
    s0; it is conserved on that energy level only.
    """
    if F_E is not None:
        E = F_E.metric.info.get("E")
        x, y, px, py = s0.north()
        H0 = sys.hamiltonian(x, y, px, py)
        if E is not None and abs(E - H0) > 1e-9 * max(1.0, abs(H0)):
            raise ValueError(f"F_E built at E={E} but the state has H={H0}")
    mp = sys.flow_params
    return _run(sys.psi, mp, s0, T, dt, F_E, method, stride, y_switch, sys.variant)


def sample_energy_surface(sys: NaturalSystem, E: float, seed: int = 42,
                          y_half: float = 3.0, max_draws: int = 100000) -> PhaseState:
    """A point with H = E: (x, y) uniform among V < E, direction uniform."""
    xs = np.linspace(0, 2 * math.pi, 65)
    ys = np.linspace(-y_half, y_half, 65)
    vmin = min(sys.jets(b)[1][0] * math.cos(a) for a in xs for b in ys)
    if E <= vmin:
        raise NoRoomError(f"E={E} <= min V={vmin} on the sampling grid")
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        x = rng.uniform(0.0, 2 * math.pi)
        y = rng.uniform(-y_half, y_half)
        alpha = rng.uniform(0.0, 2 * math.pi)
        k, v = sys.jets(y)
        V = v[0] * math.cos(x)
        if V < E:
            p = math.sqrt(2.0 * k[0] * (E - V))
            return PhaseState(NORTH, x, y, p * math.cos(alpha), p * math.sin(alpha))
    raise NoRoomError("no admissible point found")


def natural_energy(sys: NaturalSystem, s: PhaseState) -> float:
    """H of a natural system written in the chart of s.

    In the south chart the kinetic coefficient is the same even function of
    y and the potential changes sign (v is odd in y), so no conversion back
    to the north chart is involved.
    """
    k, v = sys.jets(abs(s.y))
    V = v[0] * math.cos(s.x)
    if (s.chart == SOUTH) != (s.y < 0):
        V = -V
    return (s.px * s.px + s.py * s.py) / (2.0 * k[0]) + V
