"""Command-line front end: ``qfl {ode,verify,metric,integral,flow,report}``.

Configuration comes from an optional flat ``key = value`` file (``#`` starts a
comment) overridden by command-line flags. Every output file starts with a
provenance header; JSON floats are written with 17 significant digits so that
identical configurations give byte-identical reports.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import acceptance, flow_sim as fs, metric_family as mf, psi_core as pc
from . import quartic_integral as qi
from .errors import ConfigError, QFLError

SCHEMA_VERSION = 1
COMMANDS = ("ode", "verify", "metric", "integral", "flow", "report")
SYSTEMS = ("FAM1", "FAM2", "S1", "S2")
FORMATS = ("csv", "json")
DEFAULT_OUT = "qfl_out"


@dataclass(frozen=True)
class RunConfig:
    command: str = "report"
    y_max: float = 8.0
    tol: float = 1e-10
    c: float = 1.0
    d1: float = 0.0
    # None means p0 + 1
    p: Optional[float] = None
    E: float = 1.0
    T: float = 100.0
    dt: float = 1e-3
    seed: int = 42
    system: str = "S1"
    output_dir: str = ""
    format: str = "csv"


_FLOAT_KEYS = {"y_max", "tol", "c", "d1", "p", "E", "T", "dt"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _FLOAT_KEYS:
            if key == "p" and raw.lower() in ("", "none", "auto"):
                return None
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError
            return val
        if key == "seed":
            return int(raw)
    except ValueError:
        raise ConfigError(key, f"malformed value {raw!r}") from None
    return raw


def _validate(cfg: RunConfig) -> RunConfig:
    checks = [
        ("command", cfg.command in COMMANDS, f"must be one of {COMMANDS}"),
        ("y_max", 1.0 <= cfg.y_max <= 12.0, "must lie in [1, 12]"),
        ("tol", 1e-14 < cfg.tol < 1e-4, "must lie in (1e-14, 1e-4)"),
        ("T", cfg.T > 0, "must be positive"),
        ("dt", 0 < cfg.dt <= 1e-2, "must lie in (0, 1e-2]"),
        ("seed", cfg.seed >= 0, "must be non-negative"),
        ("system", cfg.system in SYSTEMS, f"must be one of {SYSTEMS}"),
        ("format", cfg.format in FORMATS, f"must be one of {FORMATS}"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(key, f"{getattr(cfg, key)!r} {msg}")
    return cfg


def parse_config(source: str = "", overrides: Optional[dict] = None) -> RunConfig:
    """RunConfig from ``key = value`` text, then ``overrides`` (already typed or str)."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(source.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(key, "unknown key")
        values[key] = _convert(key, raw)
    for key, val in (overrides or {}).items():
        if key not in known:
            raise ConfigError(key, "unknown key")
        values[key] = _convert(key, val) if isinstance(val, str) else val
    return _validate(RunConfig(**values))


# --------------------------------------------------------------------------
# output


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognisable as floats
    return s if any(ch in s for ch in ".en") else s + ".0"


def to_json(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON with floats at 17 significant digits and sorted keys."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return {None: "null", True: "true", False: "false"}[None if obj is None else bool(obj)]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return to_json({"re": obj.real, "im": obj.imag}, indent, _level)
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent, _level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _provenance(cfg: RunConfig) -> dict:
    conf = asdict(cfg)
    conf.pop("output_dir")
    return {"tool": "qfl", "version": __version__, "config": conf}


class Writer:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    def json(self, name: str, payload: dict) -> Path:
        doc = {"schema_version": SCHEMA_VERSION, "provenance": _provenance(self.cfg), **payload}
        path = self.out / name
        path.write_text(to_json(doc) + "\n")
        self.written.append(str(path))
        return path

    def table(self, stem: str, header: list[str], rows) -> Path:
        """CSV (with '#' provenance lines) or JSON, per the configured format."""
        rows = [list(r) for r in rows]
        if self.cfg.format == "json":
            return self.json(stem + ".json", {"columns": header, "rows": rows})
        path = self.out / (stem + ".csv")
        prov = _provenance(self.cfg)
        conf = " ".join(f"{k}={v}" for k, v in prov["config"].items())
        lines = [f"# qfl {__version__}", f"# config: {conf}", ",".join(header)]
        for r in rows:
            lines.append(",".join(v if isinstance(v, str) else _fmt(float(v)) for v in r))
        path.write_text("\n".join(lines) + "\n")
        self.written.append(str(path))
        return path


# --------------------------------------------------------------------------
# commands


def _p_value(cfg: RunConfig, psi) -> float:
    return cfg.p if cfg.p is not None else pc.compute_p0(psi).p0 + 1.0


def cmd_ode(cfg: RunConfig, w: Writer) -> int:
    sol = pc.solve_psi(cfg.y_max, cfg.tol)
    rows = [(y, v[0], v[1], v[2]) for y, v in zip(sol.nodes, sol.values)]
    w.table("psi_table", ["y", "psi", "dpsi", "d2psi"], rows)
    grid = np.linspace(-cfg.y_max, cfg.y_max, 4001)
    y1 = pc.closed_form_y(sol.psi(1.0))
    nu0, _ = pc.nu_mu(sol, 0.0)
    w.json("ode_report.json", {
        "nodes": len(sol.nodes),
        "psi_at_1": sol.psi(1.0),
        "closed_form_y_of_psi_at_1": y1,
        "first_integral_max_residual": float(np.max(np.abs(sol.first_integral_residual(grid)))),
        "orbit_max_residual": float(np.max(np.abs(sol.orbit_residual(grid)))),
        "nu0": nu0,
        "nu0_from_inverse_function": pc.nu0_cross_check(),
    })
    return 0


def cmd_verify(cfg: RunConfig, w: Writer) -> int:
    sol = pc.solve_psi(cfg.y_max, cfg.tol)
    ph = pc.verify_phase_analysis(sol)
    roots = pc.potential_root_scan(sol)
    top = sol.psi(cfg.y_max - 1.0)
    hd = pc.inverse_formula_check(sol, np.geomspace(0.02, top, 50))
    asym = pc.compute_p0(sol)
    w.json("verify_report.json", {
        "phase": {"eigenvalues": [int(e) for e in ph.eigenvalues],
                  "eigenvalues_exact": ph.eigenvalues_exact,
                  "linearization": np.asarray(ph.linearization, float).tolist(),
                  "g_residual_max": ph.g_residual_max,
                  "g_residual_symbolic_zero": ph.g_residual_symbolic_zero,
                  "orbit_residual_max": ph.orbit_residual_max,
                  "second_order_residual_max": ph.second_order_residual_max,
                  "second_order_constant": ph.second_order_constant,
                  "first_integral_max": ph.first_integral_max},
        "root_scan": roots,
        "inverse_formula": {"max_derivative_error": hd.max_derivative_error,
                            "additive_offset": hd.offset, "offset_spread": hd.offset_spread,
                            "monotone": hd.monotone},
        "asymptotics": {"nu0": asym.nu0, "M1": asym.M1, "M2": asym.M2, "p0": asym.p0},
    })
    return 0


def _family_metrics(cfg: RunConfig, sol):
    p = _p_value(cfg, sol)
    return {"FAM1": mf.build_family1(sol, cfg.c, cfg.d1),
            "FAM2": mf.build_family2(sol, cfg.c, cfg.d1, p)}


def cmd_metric(cfg: RunConfig, w: Writer) -> int:
    sol = pc.solve_psi(cfg.y_max, cfg.tol)
    xs = np.linspace(0, 2 * math.pi, 33)
    ys = np.linspace(-3.0, 3.0, 33)
    summary = {}
    for name, metric in _family_metrics(cfg, sol).items():
        rows = []
        for y in ys:
            for x in xs:
                lam = metric(x, y)
                curv = mf.gauss_curvature(metric, x, y) if lam > 0 else float("nan")
                rows.append((x, y, lam, curv))
        w.table(f"lambda_{name.lower()}", ["x", "y", "Lambda", "curvature"], rows)
        summary[name] = {"descriptor": metric.descriptor(), "positive": metric.positive,
                         "min_lambda": metric.min_lambda,
                         "witness": mf.nontriviality_witness(metric)}
    w.json("metric_report.json", {"metrics": summary})
    return 0


def cmd_integral(cfg: RunConfig, w: Writer) -> int:
    sol = pc.solve_psi(cfg.y_max, cfg.tol)
    summary = {}
    for name, metric in _family_metrics(cfg, sol).items():
        xs, ys, res = qi.residual_grid(metric.ansatz)
        w.table(f"pde_residual_{name.lower()}", ["x", "y", "residual"],
                zip(xs.ravel(), ys.ravel(), res.ravel()))
        entry = {"descriptor": metric.descriptor(),
                 "max_pde_residual": float(np.max(np.abs(res)))}
        try:
            F = qi.build_quartic(metric)
        except QFLError as exc:
            entry["error"] = {"code": exc.code, "message": str(exc)}
            summary[name] = entry
            continue
        scan = qi.bracket_scan(F, 100, cfg.seed)
        entry["loop_residuals"] = [qi.loop_residual(F, c)
                                   for c in ((0.0, 0.0), (2.0, -1.5), (4.5, 0.5))]
        entry["max_bracket"] = max(abs(r["bracket_value"]) for r in scan)
        entry["bracket_scan"] = scan
        summary[name] = entry
    w.json("integral_report.json", {"integrals": summary})
    return 0


def cmd_flow(cfg: RunConfig, w: Writer) -> int:
    sol = pc.solve_psi(cfg.y_max, cfg.tol)
    flags = []
    meta = {"system": cfg.system}
    if cfg.system in ("FAM1", "FAM2"):
        metric = _family_metrics(cfg, sol)[cfg.system]
        s0 = qi.random_states(1, cfg.seed)[0]
        F = qi.build_quartic(metric)
        tr = fs.integrate_geodesic(metric, s0, cfg.T, cfg.dt, F)
    else:
        p = _p_value(cfg, sol) if cfg.system == "S2" else None
        sys_ = mf.build_natural(sol, cfg.system, p)
        s0 = fs.sample_energy_surface(sys_, cfg.E, cfg.seed)
        vmax = mf.max_potential(sys_)[0]
        meta["max_potential"] = vmax
        J = mf.jacobi_metric(sys_, cfg.E)
        F = None
        if cfg.E <= vmax or not J.positive:
            flags.append("jacobi_metric_degenerate")
        else:
            F = qi.build_quartic(J)
        tr = fs.integrate_natural(sys_, s0, cfg.T, cfg.dt, F)
    rows = []
    Fs = tr.samples.get("F")
    for i, s in enumerate(tr.states):
        rows.append((tr.times[i], s.chart, s.x, s.y, s.px, s.py, tr.samples["H"][i],
                     Fs[i] if Fs is not None else float("nan")))
    w.table("trajectory", fs.CSV_HEADER, rows)
    w.json("drift_summary.json", {"initial_state": s0.as_dict(), "flags": flags,
                                  "meta": meta, "drift": tr.drift_summary()})
    return 0


def cmd_report(cfg: RunConfig, w: Writer) -> int:
    ctx = acceptance.Context(cfg.y_max, cfg.tol, cfg.seed)
    results = acceptance.run_all(ctx)
    for r in results:
        print(r.line())
    w.json("acceptance_report.json", {
        "all_passed": all(r.passed for r in results),
        "criteria": [{"id": r.cid, "title": r.title, "passed": r.passed, "values": r.values}
                     for r in results],
    })
    return 0 if all(r.passed for r in results) else 1


_DISPATCH = {"ode": cmd_ode, "verify": cmd_verify, "metric": cmd_metric,
             "integral": cmd_integral, "flow": cmd_flow, "report": cmd_report}


def run(cfg: RunConfig) -> int:
    w = Writer(cfg)
    try:
        return _DISPATCH[cfg.command](cfg, w)
    except QFLError as exc:
        w.json("error.json", {"error": {"code": exc.code, "message": str(exc)}})
        print(f"qfl: {exc.code}: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfl", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat key = value file")
    for key in ("y_max", "tol", "c", "d1", "p", "E", "T", "dt", "seed", "system"):
        ap.add_argument(f"--{key}", dest=key, default=None)
    ap.add_argument("--out", dest="output_dir", default=None)
    ap.add_argument("--format", choices=FORMATS, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else ""
        overrides = {k: v for k, v in vars(args).items()
                     if v is not None and k not in ("config",)}
        cfg = parse_config(text, overrides)
    except ConfigError as exc:
        print(to_json({"schema_version": SCHEMA_VERSION,
                       "error": {"code": exc.code, "key": str(exc.key), "message": str(exc)}},
                      indent=0).replace("\n", ""), file=sys.stderr)
        return 2
    except OSError as exc:
        print(to_json({"schema_version": SCHEMA_VERSION,
                       "error": {"code": "io", "message": str(exc)}}, indent=0).replace("\n", ""),
              file=sys.stderr)
        return 2
    if not cfg.output_dir:
        cfg = replace(cfg, output_dir=os.environ.get("QFL_OUT_DIR", DEFAULT_OUT))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
