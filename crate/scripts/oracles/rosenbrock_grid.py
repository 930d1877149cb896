#!/usr/bin/env python3
"""Grid maxima of the Rosenbrock gradient norm over [-2,2]^2.

Reference values for the gradient-bound and estimator tests. The grid is
inclusive of both endpoints (numpy.linspace semantics, spacing (hi-lo)/(N-1)).
Also prints the Gershgorin Hessian row-sum bound used to pad a grid maximum
into a certified upper bound: for cell half-diagonal r and Hessian operator
norm bound H over the box, sup ||grad|| <= grid_max + H * r.
"""

import numpy as np


def grad_norms(x, y):
    # f(x,y) = (1-x)^2 + 100*(y-x^2)^2
    gx = -400.0 * x * (y - x * x) - 2.0 * (1.0 - x)
    gy = 200.0 * (y - x * x)
    return np.sqrt(gx * gx + gy * gy)


def grid_max(n, lo=-2.0, hi=2.0):
    xs = np.linspace(lo, hi, n)
    x, y = np.meshgrid(xs, xs, indexing="ij")
    return float(grad_norms(x, y).max())


def gershgorin_bound(lo=-2.0, hi=2.0):
    m = max(abs(lo), abs(hi))
    # |H_jj| <= 1200 m^2 + 400 m + 2 + 200, |H_(j,j+-1)| <= 400 m
    return 1200.0 * m * m + 400.0 * m + 202.0 + 2.0 * 400.0 * m


if __name__ == "__main__":
    for n in (400, 1000):
        gm = grid_max(n)
        h = 4.0 / (n - 1)
        r = h * np.sqrt(2.0) / 2.0
        hb = gershgorin_bound()
        cert = gm + hb * r
        print(f"n={n:4d}  grid_max = {gm:.17g}")
        print(f"        half-diag = {r:.17g}  hessian_bound = {hb:.17g}")
        print(f"        certified = {cert:.17g}  (pad = {100*(cert-gm)/gm:.3f}%)")
