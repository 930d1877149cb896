#!/usr/bin/env python3
"""Straight-line reference for the optimizer update rule.

Independent of the Rust implementation: the recursion is written out directly
so expected values can be frozen into tests. Python floats are IEEE f64, the
same arithmetic the library uses.

Update rule per coordinate (no bias correction, rho added after the sqrt):
    m <- b1*m + (1-b1)*g
    v <- b2*v + (1-b2)*g*g
    w <- w - a * m / (sqrt(v) + rho)
"""

import math


def adam_step(w, m, v, g, a, b1, b2, rho):
    m = [b1 * mi + (1.0 - b1) * gi for mi, gi in zip(m, g)]
    v = [b2 * vi + (1.0 - b2) * gi * gi for vi, gi in zip(v, g)]
    w = [wi - a * mi / (math.sqrt(vi) + rho) for wi, mi, vi in zip(w, m, v)]
    return w, m, v


def norm(x):
    return math.sqrt(sum(xi * xi for xi in x))


def part_a():
    print("== single scalar step: w=1 g=1 m=v=0 b1=0.9 b2=0.999 rho=1e-8 a=0.1")
    w, m, v = adam_step([1.0], [0.0], [0.0], [1.0], 0.1, 0.9, 0.999, 1e-8)
    print(f"m1 = {m[0]:.17g}")
    print(f"v1 = {v[0]:.17g}")
    print(f"w1 = {w[0]:.17g}")


def part_b():
    print("== 2-d quadratic f(w)=0.5*||w||^2, w0=[10,10], a=0.1 const, 200 steps")
    w = [10.0, 10.0]
    m = [0.0, 0.0]
    v = [0.0, 0.0]
    for t in range(1, 201):
        g = list(w)  # grad of 0.5*||w||^2
        w, m, v = adam_step(w, m, v, g, 0.1, 0.9, 0.999, 1e-8)
        if t in (50, 100, 150, 200):
            print(f"t={t:3d}  ||grad|| = {norm(w):.17g}")
    assert norm(w) < 1e-3, "expected convergence below 1e-3"
    print("final ||grad|| < 1e-3: ok")


def part_c():
    print("== 1-d quadratic f(w)=0.5*w^2, w0=2, rho=1, a=0.1, T=100")
    # step size from the constant-step formula:
    #   a = sqrt(2*(L0 - Lmin) / (K * d2 * T)),  K=1, d2=(gamma/rho)^2=4,
    #   L0=2, Lmin=0, T=100  ->  a = sqrt(4/400) = 0.1
    a = math.sqrt(2.0 * 2.0 / (1.0 * 4.0 * 100.0))
    print(f"alpha = {a:.17g}  (exactly 0.1: {a == 0.1})")
    w, m, v = [2.0], [0.0], [0.0]
    grads = [abs(w[0])]  # |grad| at w_0
    lo, hi = w[0], w[0]
    snaps = {}
    for t in range(1, 101):
        g = list(w)
        w, m, v = adam_step(w, m, v, g, a, 0.9, 0.999, 1.0)
        lo, hi = min(lo, w[0]), max(hi, w[0])
        if t < 100:
            grads.append(abs(w[0]))  # |grad| at w_t for t in [0, T-1]
        if t in (1, 2, 10, 50, 99, 100):
            snaps[t] = w[0]
    for t in sorted(snaps):
        print(f"w_{t} = {snaps[t]:.17g}")
    lhs = min(grads)
    rhs = (2.0 * 1.0 * 4.0 * 2.0 / 100.0) ** 0.25
    print(f"iterate range = [{lo:.17g}, {hi:.17g}]  (inside [-2,2]: {(-2<=lo and hi<=2)})")
    print(f"min |grad| over t in [0,99] = {lhs:.17g}")
    print(f"bound rhs (2*K*d2*dL/T)^(1/4) = {rhs:.17g}")
    assert lhs <= rhs


if __name__ == "__main__":
    part_a()
    part_b()
    part_c()
