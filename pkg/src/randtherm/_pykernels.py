"""Pure-Python (numpy) implementations of the hot kernels.

These are the reference versions.  The compiled module ``_ckernels`` must
return identical results (up to floating-point reduction order for the
seminorm, which is a max and therefore order independent).
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "holder_local",
    "theta_bounds",
    "hyperbolic_times",
    "greedy_separated",
]


def holder_local(values: np.ndarray, alpha: float, max_offset: int) -> float:
    """Largest Hölder quotient over circular node pairs at offsets ``1..max_offset``.

    Parameters
    ----------
    values : ndarray of float64, shape (n,)
        Samples on the uniform grid ``i/n``.
    alpha : float
        Hölder exponent.
    max_offset : int
        Largest node offset considered; must satisfy ``max_offset <= n // 2``.

    Returns
    -------
    float
        ``max |v[i] - v[i+o]| / (o/n)**alpha``.
    """
    v = np.ascontiguousarray(values, dtype=np.float64)
    n = v.shape[0]
    best = 0.0
    for o in range(1, max_offset + 1):
        diff = np.abs(v - np.roll(v, -o)).max()
        q = diff / (o / n) ** alpha
        if q > best:
            best = q
    return float(best)


def _chain_search(cd, cn, pd, pn, maximize):
    """Vectorised binary search for the extremal slope from points P to a chain.

    The chain vertices ``(cd, cn)`` are sorted by increasing ``cd`` and all
    query points lie strictly to the left of the chain, so the slope from a
    query point to successive vertices is unimodal.
    """
    h = cd.shape[0]
    lo = np.zeros(pd.shape[0], dtype=np.int64)
    hi = np.full(pd.shape[0], h - 1, dtype=np.int64)
    while True:
        active = lo < hi
        if not active.any():
            break
        mid = (lo + hi) // 2
        nxt = np.minimum(mid + 1, h - 1)
        ax = cd[mid] - pd
        ay = cn[mid] - pn
        bx = cd[nxt] - pd
        by = cn[nxt] - pn
        cross = ax * by - ay * bx  # > 0: slope to nxt exceeds slope to mid
        go_right = cross > 0 if maximize else cross < 0
        lo = np.where(active & go_right, mid + 1, lo)
        hi = np.where(active & ~go_right, mid, hi)
    return (cn[lo] - pn) / (cd[lo] - pd)


def theta_bounds(
    phi: np.ndarray,
    psi: np.ndarray,
    alpha: float,
    k: float,
    max_offset: int,
    upper_d: np.ndarray,
    upper_n: np.ndarray,
    lower_d: np.ndarray,
    lower_n: np.ndarray,
) -> tuple[float, float, float]:
    """Extremal cone coefficients over all oriented pairs within ``max_offset``.

    For an oriented pair ``(x, y)`` with ``a = k d(x,y)**alpha`` the quotient
    ``(a psi(z) - (psi(x)-psi(y))) / (a phi(z) - (phi(x)-phi(y)))`` is the slope
    from ``P = ((phi(x)-phi(y))/a, (psi(x)-psi(y))/a)`` to ``(phi(z), psi(z))``.
    Its extrema over ``z`` are attained on the convex hull: the maximum on the
    upper chain and the minimum on the lower chain.

    Returns
    -------
    (lo, hi, min_gap)
        Infimum and supremum of the quotient, and the smallest value of
        ``min_z phi(z) - P_D`` (non-positive means a denominator vanished).
    """
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    psi = np.ascontiguousarray(psi, dtype=np.float64)
    n = phi.shape[0]
    dmin = float(upper_d[0])
    lo_all = np.inf
    hi_all = -np.inf
    gap = np.inf
    for o in range(1, max_offset + 1):
        a = k * (o / n) ** alpha
        d_phi = (phi - np.roll(phi, -o)) / a
        d_psi = (psi - np.roll(psi, -o)) / a
        # both orientations of the pair
        pd = np.concatenate([d_phi, -d_phi])
        pn = np.concatenate([d_psi, -d_psi])
        g = dmin - pd.max()
        if g < gap:
            gap = g
        if g <= 0.0:
            continue
        hi = _chain_search(upper_d, upper_n, pd, pn, True).max()
        lo = _chain_search(lower_d, lower_n, pd, pn, False).min()
        hi_all = max(hi_all, float(hi))
        lo_all = min(lo_all, float(lo))
    return float(lo_all), float(hi_all), float(gap)


def hyperbolic_times(s: np.ndarray, c: float) -> np.ndarray:
    """Indices ``n`` (1-based) at which every suffix of ``s[:n]`` averages at least ``c``.

    Running-maximum scan on prefix sums ``T_n = sum_{i<n} (s_i - c)``: ``n``
    qualifies exactly when ``T_n >= max(T_0, ..., T_{n-1})``, because the
    suffix of length ``k`` equals ``T_n - T_{n-k}``.
    """
    s = np.asarray(s, dtype=np.float64)
    out = []
    t = 0.0
    best = 0.0
    for n in range(1, s.shape[0] + 1):
        t += s[n - 1] - c
        if t >= best:
            out.append(n)
        if t > best:
            best = t
    return np.asarray(out, dtype=np.int64)


def _circ(a, b):
    d = abs(a - b)
    d = d - np.floor(d)
    return np.minimum(d, 1.0 - d)


def greedy_separated(orbits: np.ndarray, eps: float) -> np.ndarray:
    """Greedy scan for a separated set among grid nodes.

    Parameters
    ----------
    orbits : ndarray, shape (n_steps, m)
        Circle positions (in ``[0,1)``) of the ``m`` scanned nodes at each step.
        Nodes must be ordered along the circle and the maps monotone, which is
        what makes comparison with the last and the first kept node sufficient.
    eps : float
        Separation threshold.

    Returns
    -------
    ndarray of int64
        Indices of kept nodes.
    """
    v = np.ascontiguousarray(orbits, dtype=np.float64)
    m = v.shape[1]
    kept = [0]
    first = v[:, :1]
    last = first
    i = 1
    chunk = 64
    while i < m:
        stop = min(m, i + chunk)
        block = v[:, i:stop]
        ok = (_circ(block, last).max(axis=0) > eps) & (_circ(block, first).max(axis=0) > eps)
        hit = np.flatnonzero(ok)
        if hit.size == 0:
            i = stop
            chunk *= 2
            continue
        j = i + int(hit[0])
        kept.append(j)
        last = v[:, j : j + 1]
        i = j + 1
        chunk = max(64, 2 * int(hit[0]) + 2)
    return np.asarray(kept, dtype=np.int64)
