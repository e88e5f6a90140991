#!/usr/bin/env python3
"""Roll the disk, then push the dynamics down both quotient charts."""
import numpy as np

from nonholo import ConstrainedChartPoint, diagnostics, integrate
from nonholo.reduction import pi_relatedness_residual, reduce, \
    reference_comparison
from nonholo.systems import disk_system

bundle = disk_system()
sys_ = bundle.system

start = ConstrainedChartPoint(np.zeros(4), [1.0, 0.5])
traj = integrate(sys_, start, 5.0, 1e-3)
report = diagnostics(traj)
final = traj.states[-1]
print(f"t = 5 state: x={final.q[0]:+.4f} y={final.q[1]:+.4f} "
      f"theta={final.q[2]:+.4f} phi={final.q[3]:+.4f}")
print(f"energy drift {report.energy_drift:.3e}, "
      f"constraint residual {report.constraint_max:.3e}")

rng = np.random.default_rng(3)
for name in ("disk-R2", "disk-SE2"):
    chart = reduce(sys_, bundle.charts[name])
    points = [ConstrainedChartPoint(rng.uniform(-2, 2, 4),
                                    rng.uniform(-2, 2, 2))
              for _ in range(50)]
    worst = max(pi_relatedness_residual(sys_, chart, p) for p in points)
    comparison = reference_comparison(sys_, chart, points)
    print(f"{name}: relatedness max {worst:.2e}, reference gap "
          f"{comparison.max_gap:.2e}, conflicts "
          f"{list(comparison.conflicts) or 'none'}")
