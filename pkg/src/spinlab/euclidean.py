"""Flat-space spinor calculus on R^n.

Points are arrays of shape (n,) or (m, n); spinors are length-N complex
vectors; spinor fields map (m, n) point stacks to (m, N) value stacks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordRep
from .errors import CoincidentPoints, DenominatorVanishes, StencilOutOfDomain
from .quadrature import (
    gauss_legendre_panels,
    graded_edges,
    radial_integral,
    richardson,
    sphere_rule,
    sphere_volume,
    stable_sum,
)


def conformal_factor(r):
    """f(r) = 1 / (1 + r^2)."""
    return 1.0 / (1.0 + np.asarray(r, dtype=float) ** 2)


def sphere_target(n: int) -> float:
    """Value of the functional on the round sphere, (n/2) * vol(S^n)^{1/n}."""
    return 0.5 * n * sphere_volume(n) ** (1.0 / n)


@dataclass(frozen=True)
class ModelConstants:
    n: int
    omega_nm1: float
    omega_n: float
    I: float
    C0: float
    C0_quadrature: float

    def as_row(self) -> list:
        return [self.n, self.omega_nm1, self.omega_n, self.I, self.C0]


def model_constants(n: int) -> ModelConstants:
    """Unit sphere volumes and the two integrals of f used by the test spinor.

    I = int f^n = vol(S^n) / 2^n (stereographic pullback of the round
    volume). C0 = int f^{n/2+1} = vol(S^{n-1}) / n, cross-checked here by
    radial quadrature.
    """
    if not 1 <= n <= 12:
        raise ValueError("1 <= n <= 12 required")
    om_nm1, om_n = sphere_volume(n - 1), sphere_volume(n)
    C0 = om_nm1 / n
    C0_q, _ = radial_integral(lambda r: conformal_factor(r) ** (n / 2 + 1), n, decay=3.0, tol=1e-13)
    if abs(C0_q - C0) > 1e-10 * C0:
        raise ArithmeticError(f"C0 quadrature disagrees: {C0_q} vs {C0}")
    return ModelConstants(n=n, omega_nm1=om_nm1, omega_n=om_n, I=om_n / 2 ** n, C0=C0, C0_quadrature=C0_q)


def _points(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"points must have trailing dimension {n}, got {x.shape}")
    return x


def green_euclidean(rep: CliffordRep, x, y) -> np.ndarray:
    """-(1/vol(S^{n-1})) gamma(x - y) / |x - y|^n; broadcasts over leading axes."""
    d = _points(x, rep.n) - _points(y, rep.n)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise CoincidentPoints("green_euclidean evaluated on the diagonal")
    scale = -1.0 / (sphere_volume(rep.n - 1) * r ** rep.n)
    return rep.gamma(d * scale[..., None])


# --- spinor fields -------------------------------------------------------


class SpinorField:
    """A spinor field on (a subset of) R^n.

    Subclasses implement ``values(pts)``; those with a closed-form Dirac
    derivative override ``dirac(pts)``. ``radial`` marks fields whose
    integrands |D psi| and Re<D psi, psi> depend on |x| only.
    """

    kind = "generic"
    radial = False

    def __init__(self, rep: CliffordRep):
        self.rep = rep
        self.n = rep.n
        self.N = rep.N

    def __call__(self, pts):
        pts = _points(pts, self.n)
        flat = pts.reshape(-1, self.n)
        return self.values(flat).reshape(pts.shape[:-1] + (self.N,))

    def values(self, pts):  # pragma: no cover - abstract
        raise NotImplementedError

    def contains(self, pts) -> np.ndarray:
        return np.ones(np.asarray(pts).shape[:-1], dtype=bool)

    def dirac(self, pts):
        """Closed-form D psi, or None if only finite differences are available."""
        return None


class PlaneWave(SpinorField):
    kind = "PlaneWave"

    def __init__(self, rep, xi, psi):
        super().__init__(rep)
        self.xi = np.asarray(xi, dtype=float)
        self.psi = np.asarray(psi, dtype=complex)

    def values(self, pts):
        return np.exp(2j * math.pi * pts @ self.xi)[:, None] * self.psi[None, :]

    def dirac(self, pts):
        Dpsi = 2j * math.pi * self.rep.gamma(self.xi) @ self.psi
        return np.exp(2j * math.pi * pts @ self.xi)[:, None] * Dpsi[None, :]


class ConstantField(SpinorField):
    kind = "Constant"

    def __init__(self, rep, psi):
        super().__init__(rep)
        self.psi = np.asarray(psi, dtype=complex)

    def values(self, pts):
        return np.broadcast_to(self.psi, (len(pts), self.N)).copy()

    def dirac(self, pts):
        return np.zeros((len(pts), self.N), dtype=complex)


class GreenColumn(SpinorField):
    """x -> G_eucl(x, y) psi0, defined away from the pole y."""

    kind = "GreenColumn"

    def __init__(self, rep, y, psi0):
        super().__init__(rep)
        self.y = np.asarray(y, dtype=float)
        self.psi0 = np.asarray(psi0, dtype=complex)

    def values(self, pts):
        return green_euclidean(self.rep, pts, self.y) @ self.psi0

    def contains(self, pts):
        return np.linalg.norm(np.asarray(pts) - self.y, axis=-1) > 0

    def dirac(self, pts):
        return np.zeros((len(pts), self.N), dtype=complex)


class KillingSpinor(SpinorField):
    """phi^{+-}(x) = f(|x|)^{n/2} (Phi -+ gamma(x) Phi).

    Pulls back a Killing spinor of the round sphere; D phi^{+-} = +-n f phi^{+-}.
    """

    radial = True

    def __init__(self, rep, sign: int, Phi):
        super().__init__(rep)
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.sign = sign
        self.Phi = np.asarray(Phi, dtype=complex)
        if not np.any(self.Phi):
            raise ValueError("Phi must be nonzero")
        self.kind = "KillingPlus" if sign > 0 else "KillingMinus"

    def values(self, pts):
        f = conformal_factor(np.linalg.norm(pts, axis=1))
        gx = self.rep.gamma(pts) @ self.Phi
        return f[:, None] ** (self.n / 2) * (self.Phi[None, :] - self.sign * gx)

    def dirac(self, pts):
        f = conformal_factor(np.linalg.norm(pts, axis=1))
        return self.sign * self.n * f[:, None] * self.values(pts)


def killing_spinor(rep: CliffordRep, sign: int, Phi, x) -> np.ndarray:
    return KillingSpinor(rep, sign, Phi)(x)


class GridSampled(SpinorField):
    """Values on a periodic grid with spacing h; evaluable only at grid points."""

    kind = "GridSampled"

    def __init__(self, rep, grid_values, h: float, origin=None):
        super().__init__(rep)
        self.grid = np.asarray(grid_values, dtype=complex)
        self.h = float(h)
        self.origin = np.zeros(self.n) if origin is None else np.asarray(origin, dtype=float)

    def _index(self, pts):
        k = (pts - self.origin) / self.h
        idx = np.rint(k).astype(int)
        if np.max(np.abs(k - idx), initial=0.0) > 1e-8:
            raise StencilOutOfDomain("GridSampled field evaluated off-grid")
        shape = np.array(self.grid.shape[: self.n])
        return tuple((idx % shape).T)

    def contains(self, pts):
        k = (np.asarray(pts) - self.origin) / self.h
        return np.all(np.abs(k - np.rint(k)) <= 1e-8, axis=-1)

    def values(self, pts):
        return self.grid[self._index(pts)]


# --- Dirac operator by finite differences ----------------------------------


def dirac_fd(field: SpinorField, x, h: float) -> np.ndarray:
    """Central-difference sum_k gamma_k d_k field at x (error O(h^2))."""
    if h <= 0:
        raise ValueError("step must be positive")
    x = _points(x, field.n)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    out = np.zeros((len(pts), field.N), dtype=complex)
    for k in range(field.n):
        e = np.zeros(field.n)
        e[k] = h
        plus, minus = pts + e, pts - e
        if not (np.all(field.contains(plus)) and np.all(field.contains(minus))):
            raise StencilOutOfDomain(f"stencil at step {h} leaves the field's domain")
        diff = (field(plus) - field(minus)) / (2 * h)
        out += diff @ field.rep.gammas[k].T
    return out[0] if single else out


def dirac_fd_extrapolated(field: SpinorField, x, h: float, levels: int = 3):
    """Richardson-extrapolated dirac_fd over steps h, h/2, ...; returns (value, residual)."""
    hs = [h / 2 ** k for k in range(levels)]
    vals = [dirac_fd(field, x, hk) for hk in hs]
    powers = [2 * (j + 1) for j in range(levels - 1)]
    return richardson(vals, hs, powers)


# --- the conformal functional ---------------------------------------------


@dataclass
class Quadrature:
    """Nodes/weights in R^n; ``cells`` orders the compensated reduction."""

    points: np.ndarray
    weights: np.ndarray
    cells: np.ndarray = None

    def integrate(self, values) -> float | complex:
        values = np.asarray(values)
        cells = self.cells if self.cells is not None else np.zeros(len(self.weights), dtype=int)
        # partial sums per cell, then fsum over cells in sorted cell order
        order = np.argsort(cells, kind="stable")
        c_sorted = cells[order]
        contrib = (values * self.weights)[order]
        bounds = np.flatnonzero(np.diff(c_sorted)) + 1
        partial = [p.sum() for p in np.split(contrib, bounds)]
        return stable_sum(np.array(partial))


def ball_quadrature(n: int, edges, radial_order: int = 20, angular_order: int = 12, center=None) -> Quadrature:
    """Spherical-shell product rule on the ball/annulus spanned by radial panel ``edges``."""
    dirs, wdir = sphere_rule(n, angular_order)
    rn, rw = gauss_legendre_panels(edges, radial_order)
    npan = rn.shape[0]
    r = rn.ravel()
    wr = (rw * rn ** (n - 1)).ravel()
    pts = r[:, None, None] * dirs[None, :, :]
    w = wr[:, None] * wdir[None, :]
    cells = np.repeat(np.arange(npan), radial_order * len(wdir))
    pts = pts.reshape(-1, n)
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return Quadrature(points=pts, weights=w.ravel(), cells=cells)


def euclidean_quadrature(n: int, scale: float = 1.0, r_max: float = 1e6, **kw) -> Quadrature:
    """Product rule on R^n truncated at r_max (for fields decaying like |x|^{1-n})."""
    return ball_quadrature(n, graded_edges(0.0, r_max, scale / 4), **kw)


@dataclass
class FunctionalReport:
    n: int
    numerator: float
    denominator: float
    J: float
    target: float
    sign: int = 1
    prediction: object = None
    extra: dict = field(default_factory=dict)

    @property
    def strict_below(self) -> bool:
        """+J < target for the + family, -J < target for the - family."""
        return self.sign * self.J < self.target

    def as_dict(self) -> dict:
        d = {
            "n": self.n,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "J": self.J,
            "target": self.target,
            "sign": self.sign,
            "strict_below": self.strict_below,
        }
        d.update(self.extra)
        return d


def _integrands(field: SpinorField, pts, h_fd: float | None):
    vals = field(pts)
    Dv = field.dirac(pts)
    if Dv is None:
        Dv, _ = dirac_fd_extrapolated(field, pts, h_fd or 1e-3)
    p = 2 * field.n / (field.n + 1)
    norm_p = np.linalg.norm(Dv, axis=1) ** p
    re_inner = np.real(np.einsum("ij,ij->i", np.conj(Dv), vals))
    return norm_p, re_inner


def functional_J(field: SpinorField, quadrature="radial", sign: int = 1, tol: float = 1e-12,
                 den_tol: float = 1e-14, h_fd: float | None = None) -> FunctionalReport:
    """J(psi) = (int |D psi|^{2n/(n+1)})^{(n+1)/n} / int Re<D psi, psi>.

    ``quadrature`` is either "radial" (valid for ``field.radial``; integrands
    are sampled along a ray and integrated by adaptive radial quadrature) or
    a :class:`Quadrature` instance.
    """
    n = field.n
    if isinstance(quadrature, str):
        if quadrature != "radial" or not field.radial:
            raise ValueError("radial quadrature needs a radially symmetric field")
        ray = np.zeros(n)
        ray[0] = 1.0

        def on_ray(k):
            def g(r):
                a, b = _integrands(field, np.outer(np.atleast_1d(r), ray), h_fd)
                return (a, b)[k]
            return g

        num_int, _ = radial_integral(on_ray(0), n, decay=n + 1.0, tol=tol)
        den, _ = radial_integral(on_ray(1), n, decay=n + 1.0, tol=tol)
    else:
        a, b = _integrands(field, quadrature.points, h_fd)
        num_int = float(np.real(quadrature.integrate(a)))
        den = float(np.real(quadrature.integrate(b)))
    numerator = num_int ** ((n + 1) / n)
    if abs(den) <= den_tol * max(numerator, 1e-300):
        raise DenominatorVanishes(f"int Re<D psi, psi> = {den:.3e} is numerically zero")
    return FunctionalReport(n=n, numerator=numerator, denominator=den, J=numerator / den,
                            target=sphere_target(n), sign=sign)
