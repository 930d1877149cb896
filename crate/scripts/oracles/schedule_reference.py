#!/usr/bin/env python3
"""Reference values for the learning-rate schedules.

Each schedule is restated directly from its closed form (or printed
recurrence) so spot values can be frozen into tests. a0=1e-2, T=100 unless
stated. Schedules are queried at the step index t, with t=0 mapping to the
initial rate.
"""

import math

A0 = 1e-2
T = 100


def linear(t, sf=0.1, ef=1.0):
    # recurrence with constant ratio: a_t = a_{t-1} * (1 + (ef-sf)/(sf + ef*(T-1)))
    a = A0
    r = 1.0 + (ef - sf) / (sf + ef * (T - 1))
    for _ in range(t):
        a *= r
    return a


def step_lr(t):
    if t < 40:
        return A0
    if t <= 80:
        return A0 / 10.0
    return A0 / 100.0


def one_cycle(t, pct_up=0.3, div=25.0, final_div=1e4):
    # two-phase cosine anneal: up from a0/div to a0 over round(pct_up*T) steps,
    # down from a0 to a0/(div*final_div) over the rest.
    up = round(pct_up * T)
    initial = A0 / div
    floor = initial / final_div
    if t <= up:
        p = t / up
        return A0 + (initial - A0) / 2.0 * (1.0 + math.cos(math.pi * p))
    p = (t - up) / (T - up)
    return floor + (A0 - floor) / 2.0 * (1.0 + math.cos(math.pi * p))


def sqrt_decay(t):
    return A0 / math.sqrt(max(t, 1))


def inverse_time(t):
    return A0 / (1.0 + A0 * t)


def cosine(t, amin=1e-3):
    return amin + 0.5 * (A0 - amin) * (1.0 + math.cos(math.pi * t / T))


def exponential(t, k=1e-3):
    return A0 * math.exp(-k * t)


if __name__ == "__main__":
    print("== f64 identities")
    print(f"0.01/10  == 1e-3: {0.01 / 10.0 == 1e-3}")
    print(f"0.01/100 == 1e-4: {0.01 / 100.0 == 1e-4}")
    print(f"sqrt(0.01) == 0.1: {math.sqrt(0.01) == 0.1}")
    print("== linear recurrence (sf=0.1, ef=1)")
    for t in (0, 1, 50, 100):
        print(f"t={t:3d}  {linear(t):.17g}")
    print("== step_lr")
    for t in (0, 1, 39, 40, 80, 81, 100):
        print(f"t={t:3d}  {step_lr(t):.17g}")
    print("== one_cycle (pct_up=0.3, div=25, final_div=1e4)")
    for t in (0, 1, 15, 30, 31, 65, 100):
        print(f"t={t:3d}  {one_cycle(t):.17g}")
    print("== sqrt_decay")
    for t in (0, 1, 4, 100):
        print(f"t={t:3d}  {sqrt_decay(t):.17g}")
    print("== inverse_time")
    for t in (0, 1, 100):
        print(f"t={t:3d}  {inverse_time(t):.17g}")
    print("== cosine (amin=1e-3)")
    for t in (0, 25, 50, 100):
        print(f"t={t:3d}  {cosine(t):.17g}")
    print("== exponential (k=1e-3)")
    for t in (0, 1, 100):
        print(f"t={t:3d}  {exponential(t):.17g}")
    print("== const_over_sqrt_t (alpha=1e-2, T=100)")
    print(f"value = {A0 / math.sqrt(T):.17g}")
