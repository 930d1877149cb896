#!/usr/bin/env python3
"""Reference evaluation of the descent inner-product inequality.

For an instance (psi: k x d, beta2, rho, l: d) with every column of psi
single-signed and l_j >= rho:

    lhs = sum_j mean_r(psi_rj) * mean_r( psi_rj / sqrt((1-b2)*psi_rj^2 + l_j) )
    rhs = theta_min * sum_j mean_r(psi_rj)^2
    theta_min = 1 / (rho + gamma),   gamma = max_r ||psi_r.||_2

Instances generated from a genuine second-moment history with rho >= 1
satisfy lhs >= rhs; values below are frozen into tests.
"""

import math


def check(psi, beta2, rho, l):
    k = len(psi)
    d = len(psi[0])
    gamma = max(math.sqrt(sum(x * x for x in row)) for row in psi)
    theta_min = 1.0 / (rho + gamma)
    lhs = 0.0
    rhs = 0.0
    for j in range(d):
        col = [psi[r][j] for r in range(k)]
        mean = sum(col) / k
        weighted = sum(c / math.sqrt((1.0 - beta2) * c * c + l[j]) for c in col) / k
        lhs += mean * weighted
        rhs += theta_min * mean * mean
    return lhs, rhs, gamma, theta_min


def show(name, psi, beta2, rho, l):
    lhs, rhs, gamma, tmin = check(psi, beta2, rho, l)
    print(f"== {name}: beta2={beta2} rho={rho} l={l}")
    print(f"gamma     = {gamma:.17g}")
    print(f"theta_min = {tmin:.17g}")
    print(f"lhs       = {lhs:.17g}")
    print(f"rhs       = {rhs:.17g}")
    print(f"holds     = {lhs >= rhs - 1e-12}")


if __name__ == "__main__":
    show("I1 k=1 d=1 no history", [[0.5]], 0.999, 1.0, [1.0])

    # I2: t=3 history picks rows (0.4,1.2) then (0.25,1.5):
    # l_j = (1-b2)*(b2^2*h1_j^2 + b2*h2_j^2) + rho
    b2 = 0.9
    h1 = (0.4, 1.2)
    h2 = (0.25, 1.5)
    l = [(1.0 - b2) * (b2**2 * h1[j] ** 2 + b2 * h2[j] ** 2) + 1.0 for j in range(2)]
    show("I2 k=3 d=2", [[0.4, 1.2], [0.1, 0.9], [0.25, 1.5]], b2, 1.0, l)

    # I3: all rows equal (d=1, c=0.8): lhs = c^2/sqrt((1-b2)c^2+l), rhs = c^2/(rho+c)
    c = 0.8
    show("I3 k=4 d=1 equal rows", [[c], [c], [c], [c]], 0.999, 1.0, [1.0])
    closed = c * c / math.sqrt((1.0 - 0.999) * c * c + 1.0)
    print(f"I3 closed-form lhs = {closed:.17g}")

    # negative-space probe: tiny rho breaks the inequality even for valid
    # histories (theta_min blows up); documents why generated instances pin
    # rho >= 1.
    show("P1 k=1 d=1 rho=0.01", [[0.01]], 0.999, 0.01, [0.01])
