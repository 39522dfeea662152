"""Piecewise test spinors glued from a rescaled Killing spinor and a Green column.

Around a point p (chart coordinates x centred at p, r = |x|), with
xi = eps^q and eps0 = xi^n f(xi/eps)^{n/2} / eps, the field is

    r <= xi:          f(r/eps)^{n/2} (psi0 -+ x psi0 / eps) -+ eps0 psi1
    xi <= r <= 2 xi:  -+ eps0 (psi - eta theta) + eta f(xi/eps)^{n/2} psi0
    r >= 2 xi:        -+ eps0 psi

where psi = x psi0 / r^n + psi1 + theta is harmonic off p and eta is a C^1
cut-off falling from 1 to 0 across the middle annulus. The upper sign is
the "+" family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordRep, build_rep
from .errors import (ContinuityViolation, DenominatorWrongSign, ExpansionDataMissing,
                     ZeroMassEndomorphism)
from .euclidean import FunctionalReport, SpinorField, ball_quadrature, conformal_factor, model_constants, sphere_target
from .mass_endo import extract_mass, mass_spectrum
from .quadrature import graded_edges, ordered_map, sphere_volume


# --- cut-off ---------------------------------------------------------------


def cutoff(r, xi):
    """eta(r): 1 for r <= xi, 0 for r >= 2 xi, smoothstep in between (|eta'| <= 1.5/xi)."""
    t = np.clip((np.asarray(r, dtype=float) - xi) / xi, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def cutoff_slope(r, xi):
    t = np.clip((np.asarray(r, dtype=float) - xi) / xi, 0.0, 1.0)
    return -6.0 * t * (1.0 - t) / xi


# --- harmonic sources ------------------------------------------------------


class HarmonicSource:
    """psi = x psi0 / r^n + psi1 + theta near p, harmonic off p."""

    def __init__(self, rep: CliffordRep, psi0, psi1):
        self.rep = rep
        self.psi0 = np.asarray(psi0, dtype=complex)
        self.psi1 = np.asarray(psi1, dtype=complex)

    def singular(self, x):
        r = np.linalg.norm(x, axis=1)
        return np.einsum("mij,j->mi", self.rep.gamma(x / (r ** self.rep.n)[:, None]), self.psi0)

    def psi(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def theta(self, x):
        return self.psi(x) - self.singular(x) - self.psi1[None, :]


class SyntheticSource(HarmonicSource):
    """Flat model with prescribed psi1 and a linear harmonic remainder theta = (x1 - x2 g1 g2) chi."""

    def __init__(self, rep, psi0, psi1, chi=None):
        super().__init__(rep, psi0, psi1)
        self.chi = None if chi is None else np.asarray(chi, dtype=complex)
        if self.chi is not None and rep.n < 2:
            raise ValueError("linear remainder needs n >= 2")

    def theta(self, x):
        if self.chi is None:
            return np.zeros((len(x), self.rep.N), dtype=complex)
        g12 = self.rep.gammas[0] @ self.rep.gammas[1]
        return x[:, :1] * self.chi[None, :] - x[:, 1:2] * (g12 @ self.chi)[None, :]

    def psi(self, x):
        return self.singular(x) + self.psi1[None, :] + self.theta(x)


class GreenSource(HarmonicSource):
    """psi(x) = -vol(S^{n-1}) G(p + x, p) psi0 from a flat-rescaled Green evaluator."""

    def __init__(self, evaluator, p, psi0, psi1):
        super().__init__(evaluator.rep, psi0, psi1)
        self.evaluator = evaluator
        self.p = np.asarray(p, dtype=float)

    def psi(self, x):
        G = self.evaluator(self.p[None, :] + x, self.p[None, :])
        return -sphere_volume(self.rep.n - 1) * np.einsum("mij,j->mi", G, self.psi0)


# --- parameters ------------------------------------------------------------


@dataclass
class TestSpinorParams:
    __test__ = False  # not a pytest class

    epsilon: float
    source: HarmonicSource
    q: float | None = None
    flat_radius: float = math.inf

    def __post_init__(self):
        if self.source is None:
            raise ExpansionDataMissing("a harmonic source with psi0, psi1 is required")
        n = self.n
        if self.q is None:
            self.q = 1.0 / (n + 1)
        lo, hi = (n - 1) / (n * (n + 1)), 1.0 / n
        if not lo < self.q < hi:
            raise ValueError(f"q = {self.q} outside ({lo:.4f}, {hi:.4f})")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if abs(np.linalg.norm(self.psi0) - 1.0) > 1e-12:
            raise ValueError("|psi0| must be 1")
        if 2 * self.xi > self.flat_radius:
            raise ValueError(f"2 xi = {2 * self.xi:.3g} leaves the flat chart ball (radius {self.flat_radius:.3g})")
        ratio = self.eps0 / self.epsilon ** (n - 1)
        if not 0.5 <= ratio <= 2.0:
            raise ValueError(f"eps0 / eps^(n-1) = {ratio:.3g}: epsilon too large")

    @property
    def rep(self) -> CliffordRep:
        return self.source.rep

    @property
    def n(self) -> int:
        return self.source.rep.n

    @property
    def psi0(self):
        return self.source.psi0

    @property
    def psi1(self):
        return self.source.psi1

    @property
    def xi(self) -> float:
        return self.epsilon ** self.q

    @property
    def eps0(self) -> float:
        n = self.n
        return self.xi ** n / self.epsilon * conformal_factor(self.xi / self.epsilon) ** (n / 2)

    @property
    def nu_pair(self) -> complex:
        return complex(np.vdot(self.psi0, self.psi1))


@dataclass
class ExpansionPrediction:
    """Leading terms: numerator ~ eps^{n-1} n^2 I^{1+1/n}, denominator ~ +-n eps^{n-1} (I -+ C0 Re nu eps^{n-1})."""

    n: int
    epsilon: float
    sign: int
    nu_pair: complex
    I: float
    C0: float

    @property
    def numerator(self) -> float:
        return self.epsilon ** (self.n - 1) * self.n ** 2 * self.I ** (1 + 1 / self.n)

    @property
    def denominator(self) -> float:
        e = self.epsilon ** (self.n - 1)
        return self.sign * self.n * e * (self.I - self.sign * self.C0 * self.nu_pair.real * e)

    @property
    def J(self) -> float:
        return self.numerator / self.denominator

    def as_dict(self) -> dict:
        return {"numerator": self.numerator, "denominator": self.denominator, "J": self.J}


def expansion_prediction(params: TestSpinorParams, sign: int) -> ExpansionPrediction:
    mc = model_constants(params.n)
    return ExpansionPrediction(n=params.n, epsilon=params.epsilon, sign=sign, nu_pair=params.nu_pair,
                               I=mc.I, C0=mc.C0)


# --- the field -------------------------------------------------------------


class TestSpinor(SpinorField):
    """psi_eps^{+-}; points are chart coordinates relative to p."""

    kind = "TestSpinor"
    __test__ = False

    def __init__(self, params: TestSpinorParams, sign: int):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        super().__init__(params.rep)
        self.p = params
        self.sign = sign
        self.psi0 = params.psi0
        self.psi1 = params.psi1

    # pieces, each valid on its own region (used for continuity checks too)
    def inner(self, x):
        eps, s = self.p.epsilon, self.sign
        r = np.linalg.norm(x, axis=1)
        f = conformal_factor(r / eps) ** (self.n / 2)
        gx = np.einsum("mij,j->mi", self.rep.gamma(x), self.psi0)
        return f[:, None] * (self.psi0[None, :] - s * gx / eps) - s * self.p.eps0 * self.psi1[None, :]

    def middle(self, x):
        s, xi = self.sign, self.p.xi
        r = np.linalg.norm(x, axis=1)
        eta = cutoff(r, xi)[:, None]
        src = self.p.source
        fx = conformal_factor(xi / self.p.epsilon) ** (self.n / 2)
        return -s * self.p.eps0 * (src.psi(x) - eta * src.theta(x)) + eta * fx * self.psi0[None, :]

    def outer(self, x):
        return -self.sign * self.p.eps0 * self.p.source.psi(x)

    def _regions(self, x):
        r = np.linalg.norm(x, axis=1)
        xi = self.p.xi
        return r <= xi, (r > xi) & (r < 2 * xi), r >= 2 * xi

    def values(self, pts):
        out = np.empty((len(pts), self.N), dtype=complex)
        for mask, piece in zip(self._regions(pts), (self.inner, self.middle, self.outer)):
            if np.any(mask):
                out[mask] = piece(pts[mask])
        return out

    def dirac(self, pts):
        n, eps, s, xi = self.n, self.p.epsilon, self.sign, self.p.xi
        out = np.zeros((len(pts), self.N), dtype=complex)
        inn, mid, _ = self._regions(pts)
        if np.any(inn):
            x = pts[inn]
            r = np.linalg.norm(x, axis=1)
            f = conformal_factor(r / eps)
            gx = np.einsum("mij,j->mi", self.rep.gamma(x), self.psi0)
            out[inn] = (s * n / eps * f ** (n / 2 + 1))[:, None] * (self.psi0[None, :] - s * gx / eps)
        if np.any(mid):
            x = pts[mid]
            r = np.linalg.norm(x, axis=1)
            grad = (cutoff_slope(r, xi) / r)[:, None] * x
            fx = conformal_factor(xi / eps) ** (n / 2)
            v = s * self.p.eps0 * self.p.source.theta(x) + fx * self.psi0[None, :]
            out[mid] = np.einsum("mij,mj->mi", self.rep.gamma(grad), v)
        return out

    def continuity_defect(self, directions: int = 20, seed: int = 0) -> float:
        """Largest relative jump across r = xi and r = 2 xi along random directions."""
        rng = np.random.default_rng(seed)
        d = rng.normal(size=(directions, self.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        xi = self.p.xi
        a, b = xi * d, 2 * xi * d
        j1 = np.linalg.norm(self.inner(a) - self.middle(a), axis=1)
        j2 = np.linalg.norm(self.middle(b) - self.outer(b), axis=1)
        s1 = np.linalg.norm(self.inner(a), axis=1)
        s2 = np.linalg.norm(self.outer(b), axis=1)
        return float(max(np.max(j1 / s1), np.max(j2 / s2)))


def build_test_spinor(params: TestSpinorParams, sign: int, continuity_tol: float = 1e-10) -> TestSpinor:
    field_ = TestSpinor(params, sign)
    defect = field_.continuity_defect()
    if defect > continuity_tol:
        raise ContinuityViolation(f"interface jump {defect:.3e} (psi1 inconsistent with the source?)")
    return field_


# --- the functional --------------------------------------------------------


@dataclass
class TestQuadrature:
    __test__ = False

    radial_order: int = 24
    angular_order: int = 12
    inner_scale: float = 0.5  # panel width near p, in units of eps
    middle_panels: int = 8


def _region_quadratures(params: TestSpinorParams, qc: TestQuadrature):
    n, eps, xi = params.n, params.epsilon, params.xi
    inner = ball_quadrature(n, graded_edges(0.0, xi, qc.inner_scale * eps), qc.radial_order, qc.angular_order)
    mid_edges = np.linspace(xi, 2 * xi, qc.middle_panels + 1)
    middle = ball_quadrature(n, mid_edges, qc.radial_order, qc.angular_order)
    return inner, middle


def evaluate_test_functional(params: TestSpinorParams, sign: int, quadrature: TestQuadrature | None = None,
                             check_sign: bool = True) -> FunctionalReport:
    """J(psi_eps^{+-}) with the outer region contributing nothing (D psi = 0 there)."""
    qc = quadrature or TestQuadrature()
    fld = build_test_spinor(params, sign)
    n = params.n
    p = 2 * n / (n + 1)
    parts = {}
    for name, quad in zip(("inner", "middle"), _region_quadratures(params, qc)):
        vals = fld(quad.points)
        Dv = fld.dirac(quad.points)
        num = quad.integrate(np.linalg.norm(Dv, axis=1) ** p)
        den = quad.integrate(np.real(np.einsum("ij,ij->i", np.conj(Dv), vals)))
        parts[name] = (float(np.real(num)), float(np.real(den)))
    num_int = math.fsum(v[0] for v in parts.values())
    den = math.fsum(v[1] for v in parts.values())
    if check_sign and sign * den <= 0:
        raise DenominatorWrongSign(f"sign {sign:+d} family has int Re<D psi, psi> = {den:.3e}")
    numerator = num_int ** ((n + 1) / n)
    pred = expansion_prediction(params, sign)
    extra = {
        "epsilon": params.epsilon,
        "numerator_inner": parts["inner"][0],
        "numerator_middle": parts["middle"][0],
        "denominator_inner": parts["inner"][1],
        "denominator_middle": parts["middle"][1],
        "nu_pair_re": params.nu_pair.real,
        "relative_gap": (sign * numerator / den - sphere_target(n)) / sphere_target(n),
    }
    return FunctionalReport(n=n, numerator=numerator, denominator=den, J=numerator / den, target=sphere_target(n),
                            sign=sign, prediction=pred, extra=extra)


def synthetic_params(n: int, epsilon: float, nu_pair: float = 0.0, q: float | None = None, chi=None,
                     rep: CliffordRep | None = None) -> TestSpinorParams:
    """Flat harness: psi0 = first basis spinor, psi1 = nu_pair psi0 (so <psi0, psi1> = nu_pair)."""
    rep = rep or build_rep(n)
    psi0 = np.zeros(rep.N, dtype=complex)
    psi0[0] = 1.0
    src = SyntheticSource(rep, psi0, nu_pair * psi0, chi)
    return TestSpinorParams(epsilon=epsilon, source=src, q=q)


# --- verdicts --------------------------------------------------------------


@dataclass
class VerdictRow:
    epsilon: float
    plus: FunctionalReport
    minus: FunctionalReport

    @property
    def plus_below(self) -> bool:
        return self.plus.strict_below

    @property
    def minus_below(self) -> bool:
        return self.minus.strict_below

    @property
    def exactly_one(self) -> bool:
        return self.plus_below != self.minus_below

    @property
    def achieving_sign(self) -> int | None:
        if not self.exactly_one:
            return None
        return 1 if self.plus_below else -1


@dataclass
class YamabeVerdict:
    geometry: str
    spin: str
    eigenvalue: float
    predicted_sign: int | None
    rows: list = field(default_factory=list)

    @property
    def final(self) -> VerdictRow:
        return min(self.rows, key=lambda r: r.epsilon)

    @property
    def verdict(self) -> str:
        if self.predicted_sign is None:
            return "inconclusive"
        row = self.final
        return "strict" if row.exactly_one and row.achieving_sign == self.predicted_sign else "not-established"


def _rp_source(spin_sign: int, point, psi0=None):
    from .sphere_rp import RPGeometry, rp_evaluator

    geom = RPGeometry(k=0, spin_sign=spin_sign)
    rep = build_rep(geom.n)
    ev = rp_evaluator(geom, np.zeros(geom.n) if point is None else point, rep)
    m = extract_mass(ev, ev.base_scaled)
    modes = mass_spectrum(m.alpha)
    return ev, m, modes, rep


def yamabe_verdict(geometry: str, spin, eps_list, p=None, q: float | None = None, zero_tol: float = 1e-8,
                   quadrature: TestQuadrature | None = None) -> YamabeVerdict:
    """Evaluate both signed functionals on a Green-function test spinor at each epsilon.

    psi0 is a unit eigenvector of the mass endomorphism at p for an eigenvalue
    of largest modulus; psi1 = -alpha psi0 is the constant term of
    -vol(S^{n-1}) G(., p) psi0. A positive eigenvalue predicts the "+" family.
    """
    if geometry == "torus":
        from .torus import TorusGreen

        geom, spin_structure = spin
        G = TorusGreen(geom, spin_structure)
        y = np.zeros(geom.n) if p is None else np.asarray(p, dtype=float)
        alpha = extract_mass(G, y).alpha
        ev = mass_spectrum(alpha).eigenvalues
        if np.max(np.abs(ev)) <= zero_tol:
            raise ZeroMassEndomorphism(f"mass endomorphism vanishes (max |eig| = {np.max(np.abs(ev)):.2e})")
        raise NotImplementedError("test spinors on tori with nonzero mass are not supported")  # pragma: no cover
    if geometry != "rp3":
        raise ValueError(f"unknown geometry {geometry!r}")
    spin_sign = {"plus": 1, "minus": -1, 1: 1, -1: -1}[spin]
    ev, m, modes, rep = _rp_source(spin_sign, p)
    H = 0.5 * (m.alpha + m.alpha.conj().T)
    w, V = np.linalg.eigh(H)
    k = int(np.argmax(np.abs(w)))
    lam = float(w[k])
    if abs(lam) <= zero_tol:
        raise ZeroMassEndomorphism("mass endomorphism vanishes")
    psi0 = V[:, k]
    psi1 = -H @ psi0
    src = GreenSource(ev, ev.base_scaled, psi0, psi1)
    predicted = 1 if lam > 0 else -1

    def one(eps):
        params = TestSpinorParams(epsilon=eps, source=src, q=q, flat_radius=ev.flat_radius)
        return VerdictRow(epsilon=eps, plus=evaluate_test_functional(params, 1, quadrature),
                          minus=evaluate_test_functional(params, -1, quadrature))

    rows = ordered_map(one, list(eps_list))
    return YamabeVerdict(geometry="rp3", spin="plus" if spin_sign > 0 else "minus", eigenvalue=lam,
                         predicted_sign=predicted, rows=rows)
