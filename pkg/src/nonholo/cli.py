"""Command line front end.

Subcommands:

    simulate  integrate a trajectory, write CSV + diagnostics JSON
    field     print the admissible field at one chart point
    check-hj  residual report for a one-form section (and optional map)
    reduce    reduced field samples and relatedness report for a chart
    analyze   structure report: bracket generation, regularity, ...
    examples  list bundled configs

Exit codes: 0 success, 1 usage, 2 config/parse error, 3 numerical
failure.  Errors are emitted as a JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import constraint_geometry as geo
from . import dynamics as dyn
from . import expressions as ex
from . import hamilton_jacobi as hj
from . import mechanics as mech
from . import reduction as red
from .autodiff import SmoothMap, bracket_generating, value_of
from .errors import ConfigError, NonholoError, NumericalError
from .mechanics import PhasePoint


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nonholo",
                     description="constrained mechanics engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_point_args(p):
        p.add_argument("--q", required=True,
                       help="comma separated chart coordinates")
        p.add_argument("--u", required=True,
                       help="comma separated frame coefficients")

    p_sim = sub.add_parser("simulate", description="integrate a trajectory")
    p_sim.add_argument("config")
    add_point_args(p_sim)
    p_sim.add_argument("--t", type=float, default=None, dest="t_final")
    p_sim.add_argument("--dt", type=float, default=None)
    p_sim.add_argument("--method", choices=("rk4", "midpoint"), default=None)
    p_sim.add_argument("--action", default=None,
                       help="record momentum components of this action")
    p_sim.add_argument("--out", default=None, help="trajectory CSV path")
    p_sim.add_argument("--diag", default=None, help="diagnostics JSON path")

    p_field = sub.add_parser("field", description="admissible field at a "
                                                  "point")
    p_field.add_argument("config")
    add_point_args(p_field)

    p_hj = sub.add_parser("check-hj", description="residual report for a "
                                                  "one-form section")
    p_hj.add_argument("config")
    p_hj.add_argument("--gamma", required=True,
                      help="comma separated momentum coefficient expressions")
    p_hj.add_argument("--eps", default=None,
                      help="comma separated phase map expressions (2n)")
    p_hj.add_argument("--points", type=int, default=25)
    p_hj.add_argument("--box", type=float, default=2.0)
    p_hj.add_argument("--seed", type=int, default=0)

    p_red = sub.add_parser("reduce", description="reduced system report")
    p_red.add_argument("config")
    p_red.add_argument("--chart", required=True)
    p_red.add_argument("--points", type=int, default=25)
    p_red.add_argument("--seed", type=int, default=0)

    p_an = sub.add_parser("analyze", description="structure report at a "
                                                 "point")
    p_an.add_argument("config")
    p_an.add_argument("--q", required=True)
    p_an.add_argument("--u", default=None)
    p_an.add_argument("--depth", type=int, default=3)

    sub.add_parser("examples", description="list bundled configs")
    return parser


def _vector(text, length, label):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"--{label} must be comma separated numbers") from exc
    if len(values) != length:
        raise UsageError(f"--{label} needs {length} entries, got "
                         f"{len(values)}")
    return np.array(values)


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, default=_jsonable)
    sys.stdout.write("\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"not JSON serialisable: {type(x)}")


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _write_csv(path, sys_, traj, action_names):
    n, m = sys_.n, sys_.m
    header = (["t"] + [f"q{i + 1}" for i in range(n)]
              + [f"u{i + 1}" for i in range(m)]
              + [f"p{i + 1}" for i in range(n)]
              + ["H", "constraint_residual"]
              + [f"J{i + 1}" for i in range(len(action_names))])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i, state in enumerate(traj.states):
            row = ([traj.times[i]] + list(state.q) + list(state.u)
                   + list(traj.momenta[i])
                   + [traj.energy[i], traj.constraint_series[i]])
            if traj.momentum_series is not None:
                row += list(traj.momentum_series[:, i])
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _cmd_simulate(args):
    bundle = cfgmod.load_system(args.config)
    sys_ = bundle.system
    q = _vector(args.q, sys_.n, "q")
    u = _vector(args.u, sys_.m, "u")
    sim = dict(bundle.simulation or {})
    t_final = args.t_final if args.t_final is not None else sim.get("t_final",
                                                                    1.0)
    dt = args.dt if args.dt is not None else sim.get("dt", 1e-3)
    method = args.method if args.method is not None else sim.get("method",
                                                                 "rk4")
    action = None
    action_names = ()
    if args.action is not None:
        if args.action not in bundle.actions:
            raise ConfigError(f"unknown action {args.action!r}; config "
                              f"declares {sorted(bundle.actions)}")
        action = bundle.actions[args.action]
        action_names = action.names
    start = geo.ConstrainedChartPoint(q, u)
    traj = dyn.integrate(sys_, start, t_final, dt, method=method,
                         action=action)
    report = dyn.diagnostics(traj)

    stem = Path(args.config).stem
    csv_path = args.out or f"{stem}_trajectory.csv"
    diag_path = args.diag or f"{stem}_diagnostics.json"
    _write_csv(csv_path, sys_, traj, action_names)
    diag = {
        "system": sys_.name,
        "method": method,
        "t_final": t_final,
        "dt": dt,
        "steps": len(traj.times) - 1,
        "energy_initial": traj.energy[0],
        "energy_drift": report.energy_drift,
        "constraint_residual_max": report.constraint_max,
        "momentum_drift": report.momentum_drift,
        "failure": traj.failure,
        "trajectory_csv": csv_path,
    }
    with open(diag_path, "w") as fh:
        json.dump(diag, fh, indent=2, default=_jsonable)
        fh.write("\n")
    _emit(diag)
    if traj.failure:
        raise NumericalError(traj.failure)
    return 0


def _cmd_field(args):
    bundle = cfgmod.load_system(args.config)
    sys_ = bundle.system
    q = _vector(args.q, sys_.n, "q")
    u = _vector(args.u, sys_.m, "u")
    point = geo.ConstrainedChartPoint(q, u)
    value = dyn.nonholonomic_field(sys_, point)
    phase = geo.embed(sys_, point)
    _emit({
        "system": sys_.name,
        "q": q, "u": u, "p": phase.p,
        "chart": {"q_dot": value.chart[:sys_.n],
                  "u_dot": value.chart[sys_.n:]},
        "ambient": {"q_dot": value.ambient[:sys_.n],
                    "p_dot": value.ambient[sys_.n:]},
        "energy": mech.hamiltonian(sys_, phase),
    })
    return 0


def _sample_base_points(sys_, rng, count, box):
    return [rng.uniform(-box, box, sys_.n) for _ in range(count)]


def _cmd_check_hj(args):
    bundle = cfgmod.load_system(args.config)
    sys_ = bundle.system
    n = sys_.n
    coords = list(sys_.coordinates)
    params = dict(bundle.params)
    gamma_texts = [t.strip() for t in args.gamma.split(",")]
    if len(gamma_texts) != n:
        raise ConfigError(f"--gamma needs {n} expressions")
    gamma_asts = [ex.parse_expression(t, coords + list(params))
                  for t in gamma_texts]
    gamma_fn = ex.compile_vector(gamma_asts, coords, params)
    section = hj.OneFormSection(SmoothMap(n, n, gamma_fn, name="gamma"))

    phase_map = None
    if args.eps is not None:
        eps_texts = [t.strip() for t in args.eps.split(",")]
        if len(eps_texts) != 2 * n:
            raise ConfigError(f"--eps needs {2 * n} expressions")
        phase_names = coords + [f"p{i + 1}" for i in range(n)]
        eps_asts = [ex.parse_expression(t, phase_names + list(params))
                    for t in eps_texts]
        eps_fn = ex.compile_vector(eps_asts, phase_names, params)
        phase_map = hj.PhaseMap(SmoothMap(2 * n, 2 * n, eps_fn, name="eps"))

    rng = np.random.default_rng(args.seed)
    points = _sample_base_points(sys_, rng, args.points, args.box)
    checks = {
        "closedness": {"tolerance": 1e-10, "max_residual": 0.0},
        "membership": {"tolerance": 1e-12, "max_residual": 0.0},
        "type1": {"tolerance": 1e-8, "max_residual": 0.0},
        "lemma_i": {"tolerance": 1e-9, "max_residual": 0.0},
        "lemma_ii": {"tolerance": 1e-9, "max_residual": 0.0},
        "lemma_iii": {"tolerance": 1e-10, "max_residual": 0.0},
        "classical": {"tolerance": 1e-8, "max_residual": 0.0},
    }
    if phase_map is not None:
        checks["symplecticity"] = {"tolerance": hj.SYMPLECTIC_TOL,
                                   "max_residual": 0.0}
        checks["type2"] = {"tolerance": 1e-8, "max_residual": 0.0}
        checks["type2_equivalence"] = {"tolerance": 1e-8,
                                       "max_residual": 0.0}

    def record(name, value):
        checks[name]["max_residual"] = max(checks[name]["max_residual"],
                                           float(value))

    errors = []
    for q in points:
        record("closedness", hj.closedness_on_d(sys_, section, q))
        res = hj.gamma_into_m(sys_, section, q)
        record("membership", np.max(np.abs(res)) if res.size else 0.0)
        v = rng.standard_normal(2 * n)
        w = rng.standard_normal(2 * n)
        phase = PhasePoint(q, section.momenta(q))
        try:
            r1, r2, r3 = hj.lemma_residuals(sys_, section, phase, v, w)
            record("lemma_i", r1)
            record("lemma_ii", r2)
            record("lemma_iii", r3)
            record("type1", hj.type1_residual(sys_, section, q))
            record("classical", hj.classical_hj_residual(sys_, section, q))
            if phase_map is not None:
                record("symplecticity",
                       hj.symplecticity_residual(phase_map, phase))
                gap1, gap2 = hj.type2_equivalence_residual(
                    sys_, section, phase_map, phase)
                record("type2", gap2)
                record("type2_equivalence", gap1)
        except NumericalError as exc:
            errors.append(str(exc))
            break

    for name, entry in checks.items():
        entry["check"] = name
        entry["pass"] = (not errors
                         and entry["max_residual"] <= entry["tolerance"])
        entry["samples"] = len(points)
    core = [c for c in checks if c != "classical"]
    report = {
        "system": sys_.name,
        "gamma": gamma_texts,
        "eps": None if args.eps is None else args.eps,
        "checks": list(checks.values()),
        "errors": errors,
        "overall": "PASS" if (not errors
                              and all(checks[c]["pass"] for c in core))
                   else "FAIL",
    }
    _emit(report)
    return 0


def _cmd_reduce(args):
    bundle = cfgmod.load_system(args.config)
    sys_ = bundle.system
    if args.chart not in bundle.charts:
        raise ConfigError(f"unknown chart {args.chart!r}; config declares "
                          f"{sorted(bundle.charts)}")
    chart = red.reduce(sys_, bundle.charts[args.chart])
    rng = np.random.default_rng(args.seed)
    samples = []
    worst = 0.0
    points = []
    for _ in range(args.points):
        q = rng.uniform(-2, 2, sys_.n)
        u = rng.uniform(-2, 2, sys_.m)
        point = geo.ConstrainedChartPoint(q, u)
        points.append(point)
        residual = red.pi_relatedness_residual(sys_, chart, point)
        worst = max(worst, residual)
        x = np.concatenate([q, u])
        xbar = chart.project_values(x)
        samples.append({
            "reduced_point": xbar,
            "reduced_field": [value_of(t)
                              for t in chart.reduced_field(list(xbar))],
            "pi_relatedness": residual,
        })
    report = {
        "system": sys_.name,
        "chart": chart.name,
        "reduced_names": list(chart.reduced_names),
        "pi_relatedness_max": worst,
        "samples": samples[:5],
        "points": args.points,
    }
    if chart.reference_field is not None:
        comparison = red.reference_comparison(sys_, chart, points)
        report["reference_comparison"] = {
            "max_gap": comparison.max_gap,
            "component_gaps": comparison.component_gaps,
            "conflicts": list(comparison.conflicts),
            "note": comparison.note,
        }
    _emit(report)
    return 0


def _cmd_analyze(args):
    bundle = cfgmod.load_system(args.config)
    sys_ = bundle.system
    q = _vector(args.q, sys_.n, "q")
    u = (_vector(args.u, sys_.m, "u") if args.u is not None
         else np.ones(sys_.m))
    point = geo.ConstrainedChartPoint(q, u)
    fields = hj.d_frame_fields(sys_)
    generating, rank = bracket_generating(fields, q, max_depth=args.depth,
                                          tol=1e-8)
    report_cond = geo.conditions_check(sys_, point)
    _emit({
        "system": sys_.name,
        "q": q,
        "bracket_generating": {"generating": generating, "rank": rank,
                               "chart_dim": sys_.n, "max_depth": args.depth},
        "d_regular": mech.d_regularity(sys_, q),
        "admissible": report_cond.admissible,
        "compatible": report_cond.compatible,
        "omega_condition": report_cond.omega_condition,
        "constraint_rank": report_cond.constraint_rank,
    })
    return 0


def _cmd_examples(args):
    _emit({"bundled_configs": cfgmod.bundled_config_names()})
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "field": _cmd_field,
    "check-hj": _cmd_check_hj,
    "reduce": _cmd_reduce,
    "analyze": _cmd_analyze,
    "examples": _cmd_examples,
}


_VALUE_FLAGS = ("--q", "--u", "--gamma", "--eps")


def _merge_negative_values(argv):
    """Join '--q -1,0' into '--q=-1,0' so leading minus signs survive
    argparse."""
    merged = []
    skip = False
    for i, token in enumerate(argv):
        if skip:
            skip = False
            continue
        if token in _VALUE_FLAGS and i + 1 < len(argv) \
                and argv[i + 1].startswith("-"):
            merged.append(f"{token}={argv[i + 1]}")
            skip = True
        else:
            merged.append(token)
    return merged


def run(argv) -> int:
    """Entry point used by tests; returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(_merge_negative_values(list(argv)))
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        json.dump({"error": "usage", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except ConfigError as exc:
        payload = {"error": "config", "message": str(exc)}
        if getattr(exc, "position", None) is not None:
            payload["position"] = exc.position
        json.dump(payload, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except NumericalError as exc:
        json.dump({"error": "numerical", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    except NonholoError as exc:
        json.dump({"error": "internal", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
