"""Built-in example systems: a constrained particle in three dimensions
and the vertical rolling disk, each with its symmetry actions and
quotient charts.

These are the numerical workhorses of the test suite.  The same systems
can be loaded from the bundled config files; the constructors here are
plain Python closures, which keeps the hot integration paths fast.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import SmoothMap
from .mechanics import MechanicalSystem
from .reduction import CotangentLiftedAction, QuotientChart


@dataclass(frozen=True)
class SystemBundle:
    system: MechanicalSystem
    charts: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)
    simulation: Optional[dict] = None
    params: dict = field(default_factory=dict)


def _sigma_derivative(sigma, y: float) -> float:
    _, row = ad.gradient_generic(lambda ys: sigma(ys[0]), [float(y)])
    return ad.value_of(row[0])


def particle_system(sigma: Callable = None) -> SystemBundle:
    """Free particle in R^3 with the velocity constraint
    v_z = sigma(y) v_x (default sigma(y) = y)."""
    sigma = (lambda y: y) if sigma is None else sigma

    def metric(qs):
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]

    def constraints(qs):
        return [[-sigma(qs[1]), 0.0, 1.0]]

    sys = MechanicalSystem(n=3, metric=metric, potential=lambda qs: 0.0,
                           constraints=constraints, k=1,
                           q_ref=(0.0, 0.0, 0.0), name="particle",
                           coordinates=("x", "y", "z"))

    actions = {
        "translate-xz": CotangentLiftedAction(
            generators=(SmoothMap(3, 3, lambda qs: [1.0, 0.0, 0.0], "dx"),
                        SmoothMap(3, 3, lambda qs: [0.0, 0.0, 1.0], "dz")),
            names=("Jx", "Jz")),
    }

    def reference_ev(xbar):
        y, px, _ = (ad.value_of(t) for t in xbar)
        s = ad.value_of(sigma(y))
        ds = _sigma_derivative(sigma, y)
        return [0.0, 0.0, -s * ds * px * px]

    charts = {
        "particle-R2": QuotientChart(
            name="particle-R2", reduced_dim=3,
            project=SmoothMap(5, 3, lambda xs: [xs[1], xs[3], xs[4]],
                              "particle-R2-project"),
            section=SmoothMap(3, 5,
                              lambda rs: [0.0, rs[0], 0.0, rs[1], rs[2]],
                              "particle-R2-section"),
            fiber_motion=lambda x, g: np.array(
                [x[0] + g[0], x[1], x[2] + g[1], x[3], x[4]]),
            group_dim=2,
            reduced_names=("y", "px", "py"),
            reference_field=SmoothMap(3, 3, reference_ev,
                                      "particle-R2-reference")),
    }
    return SystemBundle(sys, charts, actions)


def disk_system(mass: float = 1.0, spin_inertia: float = 2.0,
                steer_inertia: float = 1.0,
                radius: float = 1.0) -> SystemBundle:
    """Vertical disk rolling without slipping on the plane.

    Coordinates (x, y, theta, phi): contact point, rolling angle, heading.
    Rolling ties the contact velocity to the rolling rate:
    dx/dt = R cos(phi) dtheta/dt, dy/dt = R sin(phi) dtheta/dt.
    """
    m, big_i, big_j, r = mass, spin_inertia, steer_inertia, radius

    def metric(qs):
        return [[m, 0.0, 0.0, 0.0], [0.0, m, 0.0, 0.0],
                [0.0, 0.0, big_i, 0.0], [0.0, 0.0, 0.0, big_j]]

    def constraints(qs):
        phi = qs[3]
        return [[1.0, 0.0, -r * ad.cos(phi), 0.0],
                [0.0, 1.0, -r * ad.sin(phi), 0.0]]

    sys = MechanicalSystem(n=4, metric=metric, potential=lambda qs: 0.0,
                           constraints=constraints, k=2,
                           q_ref=(0.0, 0.0, 0.0, 0.0), name="disk",
                           coordinates=("x", "y", "theta", "phi"))

    actions = {
        "translate-xy": CotangentLiftedAction(
            generators=(SmoothMap(4, 4, lambda qs: [1.0, 0.0, 0.0, 0.0],
                                  "dx"),
                        SmoothMap(4, 4, lambda qs: [0.0, 1.0, 0.0, 0.0],
                                  "dy")),
            names=("Jx", "Jy")),
        "se2": CotangentLiftedAction(
            generators=(SmoothMap(4, 4, lambda qs: [1.0, 0.0, 0.0, 0.0],
                                  "dx"),
                        SmoothMap(4, 4, lambda qs: [0.0, 1.0, 0.0, 0.0],
                                  "dy"),
                        SmoothMap(4, 4,
                                  lambda qs: [-qs[1], qs[0], 0.0, 1.0],
                                  "rot")),
            names=("Jx", "Jy", "Jrot")),
    }

    def se2_fiber(x, g):
        alpha, dr, ds = g
        ca, sa = np.cos(alpha), np.sin(alpha)
        return np.array([x[0] * ca - x[1] * sa + dr,
                         x[0] * sa + x[1] * ca + ds,
                         x[2], x[3] + alpha, x[4], x[5]])

    charts = {
        "disk-R2": QuotientChart(
            name="disk-R2", reduced_dim=4,
            project=SmoothMap(
                6, 4, lambda xs: [xs[2], xs[3], big_i * xs[4],
                                  big_j * xs[5]], "disk-R2-project"),
            section=SmoothMap(
                4, 6, lambda rs: [0.0, 0.0, rs[0], rs[1], rs[2] / big_i,
                                  rs[3] / big_j], "disk-R2-section"),
            fiber_motion=lambda x, g: np.array(
                [x[0] + g[0], x[1] + g[1], x[2], x[3], x[4], x[5]]),
            group_dim=2,
            reduced_names=("theta", "phi", "ptheta", "pphi"),
            reference_field=SmoothMap(
                4, 4, lambda rs: [rs[2] / big_i, rs[3] / big_j, 0.0, 0.0],
                "disk-R2-reference")),
        "disk-SE2": QuotientChart(
            name="disk-SE2", reduced_dim=3,
            project=SmoothMap(6, 3, lambda xs: [xs[2], big_i * xs[4],
                                                big_j * xs[5]],
                              "disk-SE2-project"),
            section=SmoothMap(
                3, 6, lambda rs: [0.0, 0.0, rs[0], 0.0, rs[1] / big_i,
                                  rs[2] / big_j],
                "disk-SE2-section"),
            fiber_motion=se2_fiber,
            group_dim=3,
            reduced_names=("theta", "ptheta", "pphi"),
            reference_field=SmoothMap(
                3, 3, lambda rs: [rs[1] / big_i, 0.0, 0.0],
                "disk-SE2-reference")),
    }
    return SystemBundle(sys, charts, actions)
