"""Compiled inner loops (renewal equation, BGM, BGM chain)."""

import numpy as np
from numba import njit
from scipy import signal


@njit(cache=True)
def _stieltjes_block(F, G, acc, m, dm, lo, hi):
    # forward substitution on [lo, hi); acc already holds the sum over
    # increments before lo
    g0 = G[0]
    for i in range(max(lo, 1), hi):
        s = acc[i]
        for j in range(max(lo, 1), i):
            s += dm[j] * G[i - j]
        m[i] = (F[i] - m[i - 1] * g0 + s) / (1.0 - g0)
        dm[i] = m[i] - m[i - 1]


_BLOCK = 512


def _solve(F, G):
    n = len(F)
    m = np.zeros(n)
    dm = np.zeros(n)
    acc = np.zeros(n)

    def rec(lo, hi):
        if hi - lo <= _BLOCK:
            _stieltjes_block(F, G, acc, m, dm, lo, hi)
            return
        mid = (lo + hi) // 2
        rec(lo, mid)
        # contribution of the increments in [lo, mid) to every i in [mid, hi)
        c = signal.fftconvolve(dm[lo:mid], G[:hi - lo])
        acc[mid:hi] += c[mid - lo:hi - lo]
        rec(mid, hi)

    rec(0, n)
    return m


def solve_renewal_stieltjes(F):
    """Renewal function from CDF samples ``F[k] = F(k h)``, ``F[0] = 0``.

    Each cell's increment ``m_j - m_{j-1}`` is weighted by the average of
    ``F`` at the cell's two ends (trapezoidal Riemann-Stieltjes rule).
    The convolution sums are split recursively: short blocks are solved by
    direct forward substitution and the coupling between halves is added by
    FFT, for ``O(n log^2 n)`` work in total.
    """
    F = np.ascontiguousarray(F, dtype=np.float64)
    G = 0.5 * (F[:-1] + F[1:])
    return _solve(F, G)


@njit(cache=True)
def bgm_kernel(s, t, delta, pairs_s, pairs_t):
    """Bounded Greedy Match over two sorted epoch arrays.

    Fills ``pairs_s``/``pairs_t`` and returns
    ``(n_pairs, chaff_s, chaff_t, undetermined_t)``.
    """
    j = 0
    nt = len(t)
    npairs = 0
    chaff_s = 0
    chaff_t = 0
    for i in range(len(s)):
        p = s[i]
        while j < nt and t[j] < p:
            chaff_t += 1
            j += 1
        if j < nt and t[j] - p <= delta:
            pairs_s[npairs] = i
            pairs_t[npairs] = j
            npairs += 1
            j += 1
        else:
            chaff_s += 1
    return npairs, chaff_s, chaff_t, nt - j


@njit(cache=True)
def chain_kernel(z, x, y, delta, skip, max_steps):
    """Run the BGM chain over pre-drawn interarrivals.

    ``x`` feeds the first process, ``y`` the second; each step consumes at
    most one of each. The walk stops after ``max_steps`` counted steps or
    when the draw needed next is missing. The first ``skip`` steps are run
    but not counted. Returns ``(z, skip, steps, inside, ix, iy)``.
    """
    ix = 0
    iy = 0
    nx = len(x)
    ny = len(y)
    steps = 0
    inside = 0
    while steps < max_steps:
        if z > delta:
            if ix >= nx:
                break
        elif z >= 0.0:
            if ix >= nx or iy >= ny:
                break
        elif iy >= ny:
            break
        if skip > 0:
            skip -= 1
        else:
            steps += 1
            if 0.0 <= z <= delta:
                inside += 1
        if z > delta:
            z -= x[ix]
            ix += 1
        elif z >= 0.0:
            z += y[iy] - x[ix]
            ix += 1
            iy += 1
        else:
            z += y[iy]
            iy += 1
    return z, skip, steps, inside, ix, iy
