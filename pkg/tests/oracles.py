"""Slow, obviously-correct reference computations used only by the tests."""

from __future__ import annotations

import itertools
import math


def brute_var(losses, alpha):
    """Enumerate sample values, return the smallest whose mass reaches alpha."""
    T = len(losses)
    ok = [s for s in losses if sum(1 for x in losses if x <= s) / T >= alpha]
    return min(ok)


def brute_es(losses, alpha):
    """Evaluate the RU objective directly at every sample value."""
    T = len(losses)
    best = math.inf
    for c in losses:
        g = c + sum(max(x - c, 0.0) for x in losses) / ((1 - alpha) * T)
        best = min(best, g)
    return best


def tail_mean(losses, k):
    """Mean of the k largest losses (independent sort + exactly rounded sum)."""
    top = sorted(losses, reverse=True)[:k]
    return math.fsum(top) / k


def brute_weighted_es_grid(losses_by_scenario, mu, alpha):
    """Minimise c + sum_i mu_i mean((L_i - c - b_i)_+)/(1-a) with sum mu b = 0.

    Scans the product of per-scenario candidate grids z_i = c + b_i taken
    from the sample values, with c = sum mu_i z_i and b_i = z_i - c.
    """
    best = math.inf
    grids = [sorted(set(L)) for L in losses_by_scenario]
    for z in itertools.product(*grids):
        c = sum(m * zi for m, zi in zip(mu, z))
        b = [zi - c for zi in z]
        val = c
        for m, L, bi in zip(mu, losses_by_scenario, b):
            val += m * sum(max(x - c - bi, 0.0) for x in L) / ((1 - alpha) * len(L))
        best = min(best, val)
    return best
