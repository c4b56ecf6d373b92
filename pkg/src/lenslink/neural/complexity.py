"""Closed-form operation counts for the three network blocks.

Multiplications and summations per inference, block by block, excluding
activation functions, pooling, and flattening.  The forms are evaluated
exactly as printed in the complexity analysis, including the bias terms
that are tallied as multiplications in the recurrent block.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .blocks import NetSpec


class ComplexityCounts(NamedTuple):
    mul1: int
    sum1: int
    mul2: int
    sum2: int
    mul3: int
    sum3: int


def _as_count(v: float):
    return int(v) if float(v).is_integer() else v


def complexity_counts(spec: NetSpec, n_r: int) -> ComplexityCounts:
    """(mul, sum) pairs for blocks 1..3 at a given photodiode count."""
    side = math.isqrt(n_r)
    if side * side != n_r:
        raise ValueError("N_r must be a perfect square")
    s = spec
    e1 = side - s.N_k1 + 1

    mul1 = (s.N_1 * s.N_k1 ** 2 * e1 ** 2
            + s.N_1 * s.N_2 * s.N_k2 ** 2 * (e1 / s.N_m1 - s.N_k2 + 1) ** 2
            + s.N_f1 * s.N_1 * s.N_2
            * (e1 / (s.N_m1 * s.N_m2) - s.N_k2 + 1) ** 2
            + s.N_f1 * s.N_f2 + 5 * s.N_f2)
    sum1 = (s.N_1 * e1 ** 2 + s.N_f1 + s.N_f2 + 5
            + s.N_1 * s.N_2 * (e1 / s.N_m1 - s.N_k2 + 1) ** 2)

    gates1 = 4 * (6 * s.N_l1 + s.N_l1 ** 2)
    bi = 8 * s.N_r1 * (s.N_l1 * (s.N_l1 + s.N_l2) + s.N_l2 ** 2)
    mul2 = gates1 + bi + 5 * s.N_l2
    sum2 = gates1 + bi + 5

    mul3 = 5 * s.N_D1 + s.N_D1 * s.N_D2 + s.N_D2 * s.N_D3 + 3 * s.N_D3
    sum3 = s.N_D1 + s.N_D2 + s.N_D3 + 3

    return ComplexityCounts(*(_as_count(v) for v in
                              (mul1, sum1, mul2, sum2, mul3, sum3)))
