"""Round sphere and RP^{4k+3} Green functions through stereographic charts.

Chart conventions: a chart is stereographic projection from ``pole``; it
sends the antipode of the pole to 0. The round metric is F(u)^2 |du|^2
with F(u) = 2 / (|u|^2 + 1). Three spinor trivializations appear:

* ``flat``: unitary frames of the flat chart metric |du|^2,
* ``unitary``: unitary frames of the round metric,
* ``conformal``: the chart-transport identification, in which the sphere
  Green function is F(w)^{1-n} G_eucl(u, w).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clifford import CliffordRep, build_rep
from .errors import CoincidentPoints, PoleInChart
from .euclidean import green_euclidean
from .mass_endo import GreenEvaluator, MassExtraction, conformal_rescale_mass, extract_mass
from .quadrature import sphere_volume


def stereo_factor(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return 2.0 / (np.sum(u * u, axis=-1) + 1.0)


def _rotation_to_north(pole: np.ndarray) -> np.ndarray:
    """Proper rotation R with R pole = e_{n+1}."""
    m = len(pole)
    e = np.zeros(m)
    e[-1] = 1.0
    p = pole / np.linalg.norm(pole)
    if np.allclose(p, e):
        return np.eye(m)
    if np.allclose(p, -e):
        R = np.eye(m)
        R[-1, -1] = R[0, 0] = -1.0
        return R
    # rotation in the plane spanned by p and e
    c = float(p @ e)
    v = p - c * e
    v /= np.linalg.norm(v)
    s = math.sqrt(max(0.0, 1 - c * c))
    R = np.eye(m) + (c - 1) * (np.outer(v, v) + np.outer(e, e)) + s * (np.outer(e, v) - np.outer(v, e))
    return R


@dataclass(frozen=True)
class StereoChart:
    """Stereographic projection of S^n from ``pole`` (a unit vector in R^{n+1})."""

    pole: tuple

    @classmethod
    def north(cls, n: int) -> "StereoChart":
        return cls(tuple([0.0] * n + [1.0]))

    @property
    def n(self) -> int:
        return len(self.pole) - 1

    @property
    def rotation(self) -> np.ndarray:
        return _rotation_to_north(np.asarray(self.pole, dtype=float))

    def to_chart(self, x) -> np.ndarray:
        X = np.asarray(x, dtype=float) @ self.rotation.T
        den = 1.0 - X[..., -1]
        if np.any(den < 1e-14):
            raise PoleInChart("point coincides with the chart pole")
        return X[..., :-1] / den[..., None]

    def to_sphere(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        q = np.sum(u * u, axis=-1)[..., None]
        X = np.concatenate([2 * u, q - 1], axis=-1) / (q + 1)
        return X @ self.rotation

    def factor(self, u) -> np.ndarray:
        return stereo_factor(u)

    def inverse_jacobian(self, u) -> np.ndarray:
        """d(to_sphere)/du as an (n+1) x n matrix."""
        u = np.asarray(u, dtype=float)
        n = len(u)
        q = float(u @ u) + 1.0
        top = 2.0 / q * np.eye(n) - 4.0 / q ** 2 * np.outer(u, u)
        bottom = 4.0 / q ** 2 * u[None, :]
        return self.rotation.T @ np.vstack([top, bottom])

    def jacobian(self, x) -> np.ndarray:
        """d(to_chart)/dx restricted to R^{n+1}, an n x (n+1) matrix."""
        X = self.rotation @ np.asarray(x, dtype=float)
        d = 1.0 - X[-1]
        n = self.n
        J = np.hstack([np.eye(n) / d, (X[:-1] / d ** 2)[:, None]])
        return J @ self.rotation


def metric_defect(chart: StereoChart, u, h: float = 1e-5) -> float:
    """max |(pullback of round metric) - F(u)^2 Id| using central differences."""
    u = np.asarray(u, dtype=float)
    n = len(u)
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        cols.append((chart.to_sphere(u + e) - chart.to_sphere(u - e)) / (2 * h))
    Jm = np.array(cols).T
    g = Jm.T @ Jm
    return float(np.max(np.abs(g - stereo_factor(u) ** 2 * np.eye(n))))


# --- sphere Green function ------------------------------------------------


def green_sphere_chart(rep: CliffordRep, u, w, trivialization: str = "conformal") -> np.ndarray:
    """Sphere Green function at chart points u, w (broadcasting)."""
    n = rep.n
    Ge = green_euclidean(rep, u, w)
    Fu, Fw = stereo_factor(u), stereo_factor(w)
    if trivialization == "conformal":
        s = Fw ** (1 - n)
    elif trivialization == "unitary":
        s = (Fu * Fw) ** (-(n - 1) / 2)
    elif trivialization == "flat":
        s = np.ones_like(Fw)
    else:
        raise ValueError(f"unknown trivialization {trivialization!r}")
    return np.asarray(s)[..., None, None] * Ge


def green_sphere(rep: CliffordRep, x, y, chart: StereoChart | None = None,
                 trivialization: str = "conformal") -> np.ndarray:
    """Green function of D on the round S^n at x, y in R^{n+1}, in a stereographic chart."""
    chart = chart or StereoChart.north(rep.n)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.linalg.norm(x - y, axis=-1) < 1e-14):
        raise CoincidentPoints("x = y on the sphere")
    return green_sphere_chart(rep, chart.to_chart(x), chart.to_chart(y), trivialization)


def spin_lift(rep: CliffordRep, R: np.ndarray) -> np.ndarray:
    """Unitary S with S gamma(v) S^{-1} = gamma(R v), R in SO(n); defined up to a phase."""
    N = rep.N
    eye = np.eye(N)
    rows = []
    for k in range(rep.n):
        # S gamma_k - gamma(R e_k) S = 0, vectorised row-major
        rows.append(np.kron(eye, rep.gammas[k].T) - np.kron(rep.gamma(R[:, k]), eye))
    _, s, vh = np.linalg.svd(np.vstack(rows))
    S = vh[-1].conj().reshape(N, N)
    if s[-1] > 1e-8 * s[0]:
        raise ValueError("no spin lift: matrix is not a proper rotation")
    S = S / np.sqrt(np.real(np.trace(S @ S.conj().T)) / N)
    return S


def _align(S, S_prev):
    t = np.trace(S_prev.conj().T @ S)
    return S * (np.conj(t) / abs(t))


@dataclass
class ChartChange:
    """Transition T = chart2 o chart1^{-1} between stereographic charts of S^n."""

    chart1: StereoChart
    chart2: StereoChart
    rep: CliffordRep

    def __call__(self, u) -> np.ndarray:
        return self.chart2.to_chart(self.chart1.to_sphere(u))

    def jacobian(self, u) -> np.ndarray:
        x = self.chart1.to_sphere(u)
        return self.chart2.jacobian(x) @ self.chart1.inverse_jacobian(u)

    def scale_rotation(self, u):
        """J = lambda R with lambda > 0, R in SO(n)."""
        J = self.jacobian(u)
        lam = abs(np.linalg.det(J)) ** (1.0 / J.shape[0])
        return lam, J / lam

    def spin_transport(self, u, w, steps: int = 64):
        """Spin lifts S(u), S(w) with consistent phases (continued along the segment u -> w)."""
        lam, R = self.scale_rotation(u)
        S = spin_lift(self.rep, R)
        Su = S
        for t in np.linspace(0.0, 1.0, steps + 1)[1:]:
            _, Rt = self.scale_rotation((1 - t) * np.asarray(u) + t * np.asarray(w))
            S = _align(spin_lift(self.rep, Rt), S)
        return Su, S

    def transport_green(self, G1, u, w, trivialization: str = "conformal") -> np.ndarray:
        """Green matrix in chart 2 at (T u, T w) from its chart-1 value at (u, w)."""
        n = self.rep.n
        Su, Sw = self.spin_transport(u, w)
        lu, _ = self.scale_rotation(u)
        lw, _ = self.scale_rotation(w)
        fu, fw = 1.0 / lu, 1.0 / lw
        if trivialization == "conformal":
            pref = fu ** ((n - 1) / 2) * fw ** (-(n - 1) / 2)
        elif trivialization == "unitary":
            pref = 1.0
        else:
            raise ValueError("transport defined for conformal and unitary trivializations")
        return pref * Su @ G1 @ np.linalg.inv(Sw)


def antipodal_chart_map(u) -> np.ndarray:
    """x -> -x in a stereographic chart: u -> -u/|u|^2."""
    u = np.asarray(u, dtype=float)
    q = np.sum(u * u, axis=-1, keepdims=True)
    if np.any(q == 0):
        raise PoleInChart("antipode of the chart origin is the pole")
    return -u / q


# --- RP^{4k+3} -------------------------------------------------------------


@dataclass(frozen=True)
class RPGeometry:
    """RP^n = S^n / {+-1} with n = 4k + 3; spin_sign = +1 for sigma_+, -1 for sigma_-."""

    k: int = 0
    spin_sign: int = 1

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k >= 0 required")
        if self.spin_sign not in (1, -1):
            raise ValueError("spin_sign must be +1 or -1")

    @property
    def n(self) -> int:
        return 4 * self.k + 3

    @property
    def label(self) -> str:
        return "plus" if self.spin_sign > 0 else "minus"


def antipodal_term(rep: CliffordRep, u, w, spin_sign: int) -> np.ndarray:
    """s |w|^{1-n} G_eucl(u, -w/|w|^2) gamma(w/|w|), flat chart frames; s/vol(S^{n-1}) at w = 0."""
    n = rep.n
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    rw = np.linalg.norm(w, axis=-1)
    shape = np.broadcast_shapes(u.shape, w.shape)[:-1]
    out = np.empty(shape + (rep.N, rep.N), dtype=complex)
    u_b = np.broadcast_to(u, shape + (n,))
    w_b = np.broadcast_to(w, shape + (n,))
    rw_b = np.broadcast_to(rw, shape)
    zero = rw_b == 0
    if np.any(zero):
        out[zero] = np.eye(rep.N) * (spin_sign / sphere_volume(n - 1))
    nz = ~zero
    if np.any(nz):
        ww, uu, rr = w_b[nz], u_b[nz], rw_b[nz]
        # |w|^{1-n} (u - Aw)/|u - Aw|^n rewritten as (|w|^2 u + w)/| |w|^2 u + w |^n, stable as w -> 0
        d = rr[:, None] ** 2 * uu + ww
        nd = np.linalg.norm(d, axis=1)
        if np.any(nd == 0):
            raise CoincidentPoints("u is the antipode of w")
        Ge = -rep.gamma(d / (rr * nd ** n)[:, None] * rr[:, None] ** n) / sphere_volume(n - 1)
        out[nz] = spin_sign * Ge @ rep.gamma(ww / rr[:, None])
    return out


def green_rp(geom: RPGeometry, u, w, rep: CliffordRep | None = None) -> np.ndarray:
    """Covering-sum Green function of RP^n for the flat chart metric |du|^2.

    Direct term plus spin_sign times the antipodal term; flat chart frames.
    """
    rep = rep or build_rep(geom.n)
    return green_euclidean(rep, u, w) + antipodal_term(rep, u, w, geom.spin_sign)


class FlatRescaledEvaluator:
    """G~(a, b) = c^{1-n} G(a/c, b/c) for the metric c^2 |du|^2, c = F(base point).

    In coordinates a = c u this metric is Euclidean, and it agrees with the
    round metric at the base point.
    """

    def __init__(self, chart_green, rep: CliffordRep, base_point, flat_radius: float):
        self.rep = rep
        self.base = np.asarray(base_point, dtype=float)
        self.c = float(stereo_factor(self.base))
        self._G = chart_green
        self.flat_radius = flat_radius * self.c

    @property
    def base_scaled(self) -> np.ndarray:
        return self.c * self.base

    def __call__(self, a, b):
        c = self.c
        return c ** (1 - self.rep.n) * self._G(np.asarray(a) / c, np.asarray(b) / c)


def rp_evaluator(geom: RPGeometry, point, rep: CliffordRep | None = None) -> FlatRescaledEvaluator:
    rep = rep or build_rep(geom.n)
    # the nearest other singularity of G(., w) is A w at distance |w| + 1/|w| >= 2
    return FlatRescaledEvaluator(lambda u, w: green_rp(geom, u, w, rep), rep, point, flat_radius=1.0)


def sphere_evaluator(rep: CliffordRep, point, chart: StereoChart | None = None) -> FlatRescaledEvaluator:
    """Flat-rescaled evaluator built from green_sphere (conformal trivialization) via the conformal law."""
    chart = chart or StereoChart.north(rep.n)
    n = rep.n

    def chart_green(u, w):
        x, y = chart.to_sphere(u), chart.to_sphere(w)
        Gc = green_sphere(rep, x, y, chart, "conformal")
        # conformal trivialization -> flat chart frames: multiply by F(w)^{n-1}
        return stereo_factor(w)[..., None, None] ** (n - 1) * Gc

    return FlatRescaledEvaluator(chart_green, rep, point, flat_radius=1.0)


@dataclass
class RPMass:
    c: float
    alpha: np.ndarray
    residue: float
    oracle: float
    extraction: MassExtraction

    @property
    def relative_oracle_error(self) -> float:
        return abs(self.c - self.oracle) / abs(self.oracle)

    def tolerance_met(self, tol: float = 1e-4) -> bool:
        return bool(self.residue <= tol * abs(self.c) and self.relative_oracle_error <= tol
                    and abs(np.imag(np.trace(self.alpha))) <= tol * abs(self.c))


def rp_mass_oracle(geom: RPGeometry, point, rep: CliffordRep | None = None) -> float:
    """vol(S^{n-1}) F^{1-n} times the antipodal term on the diagonal, no limit taken."""
    rep = rep or build_rep(geom.n)
    w = np.asarray(point, dtype=float)
    A = sphere_volume(geom.n - 1) * antipodal_term(rep, w, w, geom.spin_sign)
    A = conformal_rescale_mass(A, float(stereo_factor(w)), geom.n)
    return float(np.real(np.trace(A)) / rep.N)


def rp_mass_closed_form(geom: RPGeometry) -> float:
    """s 2^{1-n}: the value of the oracle simplified by hand (point independent)."""
    return geom.spin_sign * 2.0 ** (1 - geom.n)


def mass_endo_rp(geom: RPGeometry, point=None, rep: CliffordRep | None = None, **kw) -> RPMass:
    """Extract alpha at a chart point of RP^n and split it as c Id + residue."""
    rep = rep or build_rep(geom.n)
    point = np.zeros(geom.n) if point is None else np.asarray(point, dtype=float)
    ev = rp_evaluator(geom, point, rep)
    m = extract_mass(ev, ev.base_scaled, **kw)
    c = complex(np.trace(m.alpha) / rep.N)
    residue = float(np.max(np.abs(m.alpha - c * np.eye(rep.N))))
    return RPMass(c=float(c.real), alpha=m.alpha, residue=residue, oracle=rp_mass_oracle(geom, point, rep),
                  extraction=m)


def mass_endo_rp_chart(geom: RPGeometry, point, rep: CliffordRep | None = None, **kw) -> np.ndarray:
    """Second route: extract in the (unnormalized) flat chart metric, then rescale by F^{1-n}."""
    rep = rep or build_rep(geom.n)
    point = np.asarray(point, dtype=float)
    ev = GreenEvaluator(lambda a, b: green_rp(geom, a, b, rep), rep, flat_radius=1.0)
    m = extract_mass(ev, point, **kw)
    return conformal_rescale_mass(m.alpha, float(stereo_factor(point)), geom.n)


def sphere_mass(rep: CliffordRep | None = None, x=None, chart: StereoChart | None = None, **kw) -> MassExtraction:
    """Mass endomorphism of the round sphere at x (unit vector in R^{n+1})."""
    rep = rep or build_rep(3)
    chart = chart or StereoChart.north(rep.n)
    if x is None:
        x = np.zeros(rep.n + 1)
        x[-1] = -1.0
    u = chart.to_chart(np.asarray(x, dtype=float))
    ev = sphere_evaluator(rep, u, chart)
    return extract_mass(ev, ev.base_scaled, **kw)
