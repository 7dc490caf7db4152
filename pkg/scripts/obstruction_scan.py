"""Scan the primary obstruction over the two-parameter family
a sin(2 pi y1) dq1 + b sin(2 pi y2) dq2 on the flat torus.

The class norm should scale like |a b|, vanishing on the axes.
"""
import numpy as np

from shla.chart import builtin_flat_torus
from shla.deformation import _l2_norm, kuranishi
from shla.expr import parse
from shla.forms import one_form

ft = builtin_flat_torus()
print("    a     b   |obs|_L2   |obs|/(2 pi^2 |ab|)")
for a in (0.0, 0.5, 1.0, 2.0):
    for b in (0.0, 1.0, -1.5):
        g = one_form(2, parse(f"{a}*sin(2*pi*y1)"), parse(f"{b}*sin(2*pi*y2)"))
        kr = kuranishi(ft, g, N=4)
        n = 0.0 if kr.obstruction.is_zero else _l2_norm(ft, kr.profile)
        ratio = n / (2 * np.pi ** 2 * abs(a * b)) if a * b else float("nan")
        print(f"{a:5.1f} {b:5.1f}  {n:9.4f}  {ratio:8.4f}")
