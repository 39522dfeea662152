"""Quadrature rules, Richardson extrapolation and order-fixed reductions."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import roots_gegenbauer

# Gauss-Kronrod 7/15 nodes on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
_WG_FULL = np.concatenate([_WG[:-1], _WG[::-1]])


def sphere_volume(k: int) -> float:
    """Volume of the unit k-sphere S^k in R^{k+1}."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def stable_sum(values, axis: int = 0):
    """Compensated, order-fixed sum along ``axis`` (math.fsum per component)."""
    a = np.asarray(values)
    if a.ndim == 0:
        return a
    a = np.moveaxis(a, axis, 0)
    if np.iscomplexobj(a):
        return stable_sum(a.real) + 1j * stable_sum(a.imag)
    flat = a.reshape(a.shape[0], -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(a.shape[1:]) if a.ndim > 1 else out[0]


def worker_count(default: int | None = None) -> int:
    env = os.environ.get("SPINLAB_THREADS")
    if env:
        return max(1, int(env))
    return default or os.cpu_count() or 1


def ordered_map(func, items, workers: int | None = None) -> list:
    """map() over a thread pool; results always come back in input order."""
    items = list(items)
    workers = worker_count(workers)
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def gk15(f, a: float, b: float):
    """One Gauss-Kronrod 7/15 panel. Returns (kronrod, |kronrod - gauss|)."""
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    fx = np.asarray(f(c + h * _NODES), dtype=float)
    k = h * float(fx @ _WK)
    g = h * float(fx[_GAUSS_IDX] @ _WG_FULL)
    return k, abs(k - g)


def adaptive_gk(f, a: float, b: float, tol: float = 1e-13, max_depth: int = 40):
    """Adaptive bisection with GK15 panels; returns (value, error estimate).

    Panel results are reduced with fsum in left-to-right order so the
    result does not depend on evaluation order.
    """
    done = []
    stack = [(a, b, 0)]
    while stack:
        lo, hi, depth = stack.pop()
        val, err = gk15(f, lo, hi)
        if err <= tol * max(abs(val), 1e-300) or err < 1e-300 or depth >= max_depth or (hi - lo) < 1e-14 * max(1.0, abs(hi)):
            done.append((lo, val, err))
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
    done.sort()
    return math.fsum(v for _, v, _ in done), math.fsum(e for _, _, e in done)


def radial_integral(g, n: int, decay: float, tol: float = 1e-12, r0: float = 1.0, r_max: float = 1e8):
    """Integrate a radial function over R^n: sphere_volume(n-1) * int_0^inf g(r) r^{n-1} dr.

    The integration range is doubled ([0, r0], [r0, 2r0], ...) until the
    analytic tail bound for ``|g(r)| r^{n-1} <= A r^{-decay}`` (decay > 1),
    with A fitted at the current right end, falls below ``tol`` times the
    running value. Returns (value, error estimate including the tail bound).
    """
    if decay <= 1:
        raise ValueError("tail bound needs decay > 1")

    def h(r):
        r = np.asarray(r, dtype=float)
        return g(r) * r ** (n - 1)

    pieces, errs = [], []
    lo, hi = 0.0, r0
    while True:
        v, e = adaptive_gk(h, lo, hi, tol=tol)
        pieces.append(v)
        errs.append(e)
        total = math.fsum(pieces)
        amp = abs(float(h(np.array([hi]))[0])) * hi ** decay
        tail = amp * hi ** (1 - decay) / (decay - 1)
        if tail <= tol * abs(total) or hi >= r_max:
            break
        lo, hi = hi, 2 * hi
    w = sphere_volume(n - 1)
    return w * total, w * (math.fsum(errs) + tail)


def sphere_rule(n: int, order: int):
    """Product rule on S^{n-1}: returns (unit vectors (m, n), weights summing to |S^{n-1}|).

    Built recursively: S^{k} = {(t, sqrt(1-t^2) u)} with Gauss-Gegenbauer
    nodes in t and a trapezoid rule on the circle at the bottom. Exact for
    polynomials of degree < ``order`` in each variable.
    """
    if n < 1:
        raise ValueError("n >= 1 required")
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        m = 2 * order
        phi = (np.arange(m) + 0.5) * (2 * math.pi / m)
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(m, 2 * math.pi / m)
    pts_low, w_low = sphere_rule(n - 1, order)
    # weight (1 - t^2)^{(n-3)/2} on [-1, 1]  <->  alpha = (n - 2) / 2
    t, wt = roots_gegenbauer(order, (n - 2) / 2)
    s = np.sqrt(1.0 - t ** 2)
    pts = np.concatenate([np.column_stack([np.full(len(w_low), ti), si * pts_low]) for ti, si in zip(t, s)])
    w = np.concatenate([wi * w_low for wi in wt])
    return pts, w


def gauss_legendre_panels(edges, order: int):
    """Gauss-Legendre nodes/weights on consecutive panels [edges[i], edges[i+1]]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes, weights


def graded_edges(r_lo: float, r_hi: float, scale: float, ratio: float = 2.0):
    """Panel edges on [r_lo, r_hi]: uniform of width ``scale`` near 0, then geometric."""
    edges = [r_lo]
    step = scale
    while edges[-1] + step < r_hi * (1 - 1e-12):
        edges.append(edges[-1] + step)
        if edges[-1] >= 4 * scale:
            step *= ratio
    edges.append(r_hi)
    return np.array(edges)


def richardson(values, hs, powers):
    """Polynomial extrapolation of values(h) to h -> 0.

    Fits values = c0 + sum_j c_j h^{powers[j]} exactly through len(powers) + 1
    samples (the last ones given). Works for scalars or arrays. Returns
    (c0, residual) where residual compares with the fit one order lower.
    """
    values = np.asarray(values)
    hs = np.asarray(hs, dtype=float)
    k = len(powers) + 1
    if len(hs) < k:
        raise ValueError("not enough samples for the requested order")

    def fit(vals, h, pw):
        A = np.column_stack([np.ones_like(h)] + [h ** p for p in pw])
        flat = vals.reshape(len(h), -1)
        coef = np.linalg.solve(A, flat) if A.shape[0] == A.shape[1] else np.linalg.lstsq(A, flat, rcond=None)[0]
        return coef[0].reshape(vals.shape[1:])

    best = fit(values[-k:], hs[-k:], powers)
    if k > 1:
        lower = fit(values[-(k - 1):], hs[-(k - 1):], powers[:-1])
        resid = float(np.max(np.abs(best - lower)))
    else:
        resid = float("inf")
    return best, resid


def fit_power_law(xs, ys):
    """Least-squares slope/intercept of log|y| against log x: returns (exponent, prefactor)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.abs(np.asarray(ys, dtype=float)))
    slope, icpt = np.polyfit(lx, ly, 1)
    return float(slope), float(np.exp(icpt))
