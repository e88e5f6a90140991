#!/usr/bin/env python3
"""Sweep two one-form sections across the particle chart and print their
closedness and first-type residuals.

The constant-coefficient family c1 dx + c2 dy + c1 s(y) dz sits inside
the constrained momentum image but its differential does not vanish on
the admissible pairs away from y = 0, and the first-type identity fails
with it.  Rescaling the x-component by 1/sqrt(1 + s^2) repairs
closedness, and the identity then holds to round-off everywhere.
"""
import numpy as np

from nonholo.autodiff import SmoothMap, sqrt
from nonholo.hamilton_jacobi import OneFormSection, closedness_on_d, \
    type1_residual
from nonholo.systems import particle_system

bundle = particle_system()
sys_ = bundle.system

constant = OneFormSection(SmoothMap(
    3, 3, lambda qs: [2.0, 3.0, 2.0 * qs[1]], name="constant"))
closed = OneFormSection(SmoothMap(
    3, 3, lambda qs: [2.0 / sqrt(1.0 + qs[1] ** 2), 3.0,
                      2.0 * qs[1] / sqrt(1.0 + qs[1] ** 2)], name="closed"))

print(f"{'y':>5} | {'closedness':>22} | {'first-type residual':>24}")
print(f"{'':>5} | {'const':>10} {'rescaled':>11} | {'const':>11} "
      f"{'rescaled':>12}")
for y in np.linspace(-2, 2, 9):
    q = [0.3, y, -0.1]
    row = (closedness_on_d(sys_, constant, q),
           closedness_on_d(sys_, closed, q),
           type1_residual(sys_, constant, q),
           type1_residual(sys_, closed, q))
    print(f"{y:5.2f} | {row[0]:10.3e} {row[1]:11.3e} | {row[2]:11.3e} "
          f"{row[3]:12.3e}")
