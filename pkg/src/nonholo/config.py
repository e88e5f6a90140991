"""System definition files.

A config is a line-oriented section format.  Sections:

    [system]        name, coordinates (comma separated), q_ref (optional)
    [params]        numeric constants usable in every expression
    [metric]        n rows of comma separated expressions
    [potential]     one expression (optional, defaults to 0)
    [constraints]   k rows of comma separated expressions (optional)
    [action:NAME]   one generator per line, n expressions each
    [chart:NAME]    group, reduced, project, section, fiber entries
    [simulation]    t_final, dt, method

Expressions see the coordinate names and the declared params; chart
projections additionally see the frame coefficients u1..um, sections see
the reduced names, and fiber motions see the group parameter names.
Comments start with '#'.
"""
from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from . import expressions as ex
from .autodiff import SmoothMap, value_of
from .errors import ConfigError, ParseError
from .mechanics import MechanicalSystem
from .reduction import CotangentLiftedAction, QuotientChart
from .systems import SystemBundle


@dataclass
class ChartConfig:
    name: str
    group_params: list
    reduced_names: list
    project: list       # expression ASTs over coords + u names
    section: list       # expression ASTs over reduced names
    fiber: list         # expression ASTs over coords + u names + group
    reference: list     # optional reduced-equation ASTs over reduced names


@dataclass
class SystemConfig:
    name: str
    coordinates: list
    q_ref: list
    params: dict
    metric: list        # n x n expression ASTs
    potential: object   # expression AST
    constraints: list   # k x n expression ASTs
    actions: dict = field(default_factory=dict)
    charts: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)


def _split_values(line: str) -> list:
    return [part.strip() for part in line.split(",")]


def _section_lines(text: str):
    """Yield (section, key_or_None, value, line_number)."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            yield section, None, None, lineno
            continue
        if section is None:
            raise ConfigError(f"line {lineno}: content before any section")
        if "=" in line:
            key, value = line.split("=", 1)
            yield section, key.strip(), value.strip(), lineno
        else:
            yield section, None, line, lineno


def parse_config(text: str) -> SystemConfig:
    sections: dict = {}
    order: list = []
    for section, key, value, lineno in _section_lines(text):
        if value is None:
            if section in sections:
                raise ConfigError(f"line {lineno}: duplicate section "
                                  f"[{section}]")
            sections[section] = []
            order.append(section)
            continue
        sections[section].append((key, value, lineno))

    if "system" not in sections:
        raise ConfigError("missing [system] section")
    sysmap = {k: v for k, v, _ in sections["system"] if k}
    if "coordinates" not in sysmap:
        raise ConfigError("[system] must declare coordinates")
    coordinates = _split_values(sysmap["coordinates"])
    n = len(coordinates)
    name = sysmap.get("name", "system")
    if "q_ref" in sysmap:
        try:
            q_ref = [float(v) for v in _split_values(sysmap["q_ref"])]
        except ValueError as exc:
            raise ConfigError("q_ref entries must be numbers") from exc
        if len(q_ref) != n:
            raise ConfigError("q_ref length must match the coordinates")
    else:
        q_ref = [0.0] * n

    params = {}
    for key, value, lineno in sections.get("params", []):
        if key is None:
            raise ConfigError(f"line {lineno}: params need name = value")
        try:
            params[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: parameter {key} is not a "
                              f"number") from exc

    known = list(coordinates) + list(params)

    def parse_cell(text_, lineno, names):
        try:
            return ex.parse_expression(text_, names)
        except ParseError as exc:
            raise ParseError(f"line {lineno}: {exc}", exc.position) from exc

    if "metric" not in sections:
        raise ConfigError("missing [metric] section")
    metric_rows = []
    for key, value, lineno in sections["metric"]:
        cells = _split_values(value if key is None else f"{key}={value}")
        metric_rows.append([parse_cell(c, lineno, known) for c in cells])
    if len(metric_rows) != n or any(len(r) != n for r in metric_rows):
        raise ConfigError(f"metric must be {n}x{n}")
    for i in range(n):
        for j in range(i + 1, n):
            if metric_rows[i][j] != metric_rows[j][i]:
                raise ConfigError(f"metric entries ({i + 1},{j + 1}) and "
                                  f"({j + 1},{i + 1}) are not symmetric as "
                                  f"written")

    potential = ex.Num(0.0)
    pot_lines = sections.get("potential", [])
    if len(pot_lines) > 1:
        raise ConfigError("[potential] must hold a single expression")
    if pot_lines:
        _, value, lineno = pot_lines[0]
        potential = parse_cell(value, lineno, known)

    constraint_rows = []
    for key, value, lineno in sections.get("constraints", []):
        cells = _split_values(value)
        if len(cells) != n:
            raise ConfigError(f"line {lineno}: constraint rows need {n} "
                              f"entries")
        constraint_rows.append([parse_cell(c, lineno, known) for c in cells])
    if len(constraint_rows) >= n:
        raise ConfigError(f"need fewer constraint rows ({len(constraint_rows)}) "
                          f"than coordinates ({n})")

    m = n - len(constraint_rows)
    u_names = [f"u{i + 1}" for i in range(m)]

    actions = {}
    charts = {}
    for section in order:
        if section.startswith("action:"):
            aname = section.split(":", 1)[1].strip()
            gens = []
            for key, value, lineno in sections[section]:
                cells = _split_values(value)
                if len(cells) != n:
                    raise ConfigError(f"line {lineno}: generators need {n} "
                                      f"components")
                gens.append([parse_cell(c, lineno, known) for c in cells])
            if not gens:
                raise ConfigError(f"action {aname!r} declares no generators")
            actions[aname] = gens
        elif section.startswith("chart:"):
            cname = section.split(":", 1)[1].strip()
            entries = {k: (v, lineno)
                       for k, v, lineno in sections[section] if k}
            for required in ("reduced", "project", "section", "fiber"):
                if required not in entries:
                    raise ConfigError(f"chart {cname!r} is missing "
                                      f"{required!r}")
            group = (_split_values(entries["group"][0])
                     if "group" in entries else [])
            reduced_names = _split_values(entries["reduced"][0])
            chart_names = known + u_names
            project = [parse_cell(c, entries["project"][1], chart_names)
                       for c in _split_values(entries["project"][0])]
            if len(project) != len(reduced_names):
                raise ConfigError(f"chart {cname!r}: project needs "
                                  f"{len(reduced_names)} expressions")
            section_names = reduced_names + list(params)
            section_exprs = [parse_cell(c, entries["section"][1],
                                        section_names)
                             for c in _split_values(entries["section"][0])]
            if len(section_exprs) != n + m:
                raise ConfigError(f"chart {cname!r}: section needs {n + m} "
                                  f"expressions")
            fiber_names = chart_names + group
            fiber = [parse_cell(c, entries["fiber"][1], fiber_names)
                     for c in _split_values(entries["fiber"][0])]
            if len(fiber) != n + m:
                raise ConfigError(f"chart {cname!r}: fiber needs {n + m} "
                                  f"expressions")
            reference = []
            if "reference" in entries:
                reference = [parse_cell(c, entries["reference"][1],
                                        section_names)
                             for c in _split_values(entries["reference"][0])]
                if len(reference) != len(reduced_names):
                    raise ConfigError(f"chart {cname!r}: reference needs "
                                      f"{len(reduced_names)} expressions")
            charts[cname] = ChartConfig(cname, group, reduced_names,
                                        project, section_exprs, fiber,
                                        reference)

    simulation = {}
    for key, value, lineno in sections.get("simulation", []):
        if key == "method":
            if value not in ("rk4", "midpoint"):
                raise ConfigError(f"line {lineno}: unknown method {value!r}")
            simulation[key] = value
        elif key in ("t_final", "dt"):
            try:
                simulation[key] = float(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key} must be a "
                                  f"number") from exc
        else:
            raise ConfigError(f"line {lineno}: unknown simulation key "
                              f"{key!r}")

    return SystemConfig(name, coordinates, q_ref, params, metric_rows,
                        potential, constraint_rows, actions, charts,
                        simulation)


def build_system(cfg: SystemConfig) -> SystemBundle:
    """Compile a parsed config into a system bundle.

    Validates the invariants that need numbers: SPD metric and full-rank
    constraints at the reference point.
    """
    n = len(cfg.coordinates)
    k = len(cfg.constraints)
    m = n - k
    coords = list(cfg.coordinates)
    params = dict(cfg.params)

    metric_fn_rows = [ex.compile_vector(row, coords, params)
                      for row in cfg.metric]

    def metric(qs):
        return [fn(qs) for fn in metric_fn_rows]

    potential_fn = ex.compile_vector([cfg.potential], coords, params)

    def potential(qs):
        return potential_fn(qs)[0]

    constraints = None
    if k:
        constraint_fn_rows = [ex.compile_vector(row, coords, params)
                              for row in cfg.constraints]

        def constraints(qs):
            return [fn(qs) for fn in constraint_fn_rows]

    system = MechanicalSystem(n=n, metric=metric, potential=potential,
                              constraints=constraints, k=k,
                              q_ref=tuple(cfg.q_ref), name=cfg.name,
                              coordinates=tuple(coords))

    g_ref = np.array([[value_of(x) for x in row]
                      for row in metric(list(cfg.q_ref))])
    try:
        np.linalg.cholesky(g_ref)
    except np.linalg.LinAlgError as exc:
        raise ConfigError("metric is not positive definite at the "
                          "reference point") from exc
    system._pivots  # freezes the elimination pattern, validates rank

    actions = {}
    for aname, gens in cfg.actions.items():
        maps = []
        for gen in gens:
            fn = ex.compile_vector(gen, coords, params)
            maps.append(SmoothMap(n, n, fn, name=f"{aname}-gen"))
        actions[aname] = CotangentLiftedAction(tuple(maps))

    u_names = [f"u{i + 1}" for i in range(m)]
    charts = {}
    for cname, cc in cfg.charts.items():
        project_fn = ex.compile_vector(cc.project, coords + u_names, params)
        section_fn = ex.compile_vector(cc.section, cc.reduced_names, params)
        fiber_fn = ex.compile_vector(cc.fiber,
                                     coords + u_names + cc.group_params,
                                     params)
        r = len(cc.reduced_names)

        def make_fiber(fn=fiber_fn, gdim=len(cc.group_params)):
            def fiber(x, g):
                return np.array([value_of(t)
                                 for t in fn(list(x) + list(g))])
            return fiber

        reference = None
        if cc.reference:
            reference_fn = ex.compile_vector(cc.reference, cc.reduced_names,
                                             params)
            reference = SmoothMap(r, r, reference_fn,
                                  name=f"{cname}-reference")

        charts[cname] = QuotientChart(
            name=cname, reduced_dim=r,
            project=SmoothMap(n + m, r, project_fn, name=f"{cname}-project"),
            section=SmoothMap(r, n + m, section_fn, name=f"{cname}-section"),
            fiber_motion=make_fiber(),
            group_dim=len(cc.group_params),
            reduced_names=tuple(cc.reduced_names),
            reference_field=reference)

    return SystemBundle(system, charts, actions,
                        simulation=dict(cfg.simulation) or None,
                        params=dict(params))


def bundled_config_names() -> list:
    root = importlib.resources.files("nonholo") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def read_config_text(path) -> str:
    """Read a config from a filesystem path or a bundled config name."""
    p = Path(path)
    if p.exists():
        return p.read_text()
    candidate = importlib.resources.files("nonholo") / "configs" / str(path)
    if candidate.is_file():
        return candidate.read_text()
    raise ConfigError(f"config not found: {path}")


def load_system(path) -> SystemBundle:
    """Parse and compile a config file into a runnable system bundle."""
    return build_system(parse_config(read_config_text(path)))
