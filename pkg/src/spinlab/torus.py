"""Flat tori R^n / Gamma with their 2^n spin structures.

A spin structure is a shift delta in {0, 1/2}^n (dual-basis coordinates):
Dirac eigenspinors are e^{2 pi i xi.x} psi with xi in Gamma* + delta, and
sections pick up the phase e^{2 pi i delta_j} along the j-th generator.
delta = 0 is the trivial structure (parallel spinors, D not invertible).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import gammaincc

from .clifford import CliffordRep, build_rep
from .errors import CoincidentPoints, SingularSystem, TrivialSpinStructure
from .quadrature import richardson, sphere_volume

# exp(-LOG_TOL) ~ 2e-16: cutoff for Gaussian tails
LOG_TOL = 36.0


@dataclass(frozen=True)
class TorusGeometry:
    """Lattice Gamma generated by the columns of ``basis``."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if B.shape[0] != B.shape[1]:
            raise ValueError("basis must be square")
        if abs(np.linalg.det(B)) < 1e-12:
            raise ValueError("basis must be invertible")
        object.__setattr__(self, "basis", B)

    @classmethod
    def cubic(cls, n: int, side: float = 1.0) -> "TorusGeometry":
        return cls(side * np.eye(n))

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def dual_basis(self) -> np.ndarray:
        return np.linalg.inv(self.basis).T

    @property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.basis)))

    @property
    def shortest_vector(self) -> float:
        pts = lattice_points(self.basis, 2.0 * np.max(np.linalg.norm(self.basis, axis=0)))
        lens = np.linalg.norm(pts, axis=1)
        return float(np.min(lens[lens > 0]))

    @property
    def is_rectangular(self) -> bool:
        B = self.basis
        return bool(np.allclose(B, np.diag(np.diag(B))))


@dataclass(frozen=True)
class SpinStructure:
    delta: tuple

    def __post_init__(self):
        d = tuple(float(v) for v in self.delta)
        if any(v not in (0.0, 0.5) for v in d):
            raise ValueError(f"spin structure entries must be 0 or 1/2, got {self.delta}")
        object.__setattr__(self, "delta", d)

    @classmethod
    def from_bits(cls, bits) -> "SpinStructure":
        return cls(tuple(0.5 * int(b) for b in bits))

    @property
    def trivial(self) -> bool:
        return not any(self.delta)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.delta)

    @staticmethod
    def all(n: int) -> list:
        return [SpinStructure.from_bits(b) for b in itertools.product((0, 1), repeat=n)]


@dataclass
class ModeSumConfig:
    """Damped mode-sum settings.

    ``method="ewald"`` splits G into a Gaussian-damped mode sum plus an
    absolutely convergent real-space correction (exact for any fixed
    ``ewald_s``). ``method="damped"`` evaluates the damped mode sum alone
    along ``schedule`` and extrapolates the damping to zero.
    """

    method: str = "ewald"
    ewald_s: float | None = None
    schedule: tuple | None = None
    order: int = 4
    shell_cutoff: float | None = None

    def __post_init__(self):
        if self.method not in ("ewald", "damped"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.schedule is not None:
            s = np.asarray(self.schedule, dtype=float)
            if np.any(s <= 0) or np.any(np.diff(s) >= 0):
                raise ValueError("schedule must be positive and strictly decreasing")


def default_schedule(geom: TorusGeometry, levels: int = 5) -> tuple:
    """s_k = s0 4^{-k} with s0 = (2 pi |xi_typ|)^{-2}, |xi_typ| = vol^{-1/n}."""
    xi_typ = geom.volume ** (-1.0 / geom.n)
    s0 = (2 * math.pi * xi_typ) ** -2
    return tuple(s0 * 4.0 ** -k for k in range(levels))


def lattice_points(basis, radius: float, shift=None) -> np.ndarray:
    """All B (m + shift), m in Z^n, of norm <= radius, sorted by norm then index."""
    B = np.asarray(basis, dtype=float)
    n = B.shape[0]
    shift = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
    # |(m + shift)_j| <= radius * |row j of B^{-1}|
    Binv = np.linalg.inv(B)
    bounds = radius * np.linalg.norm(Binv, axis=1)
    ranges = [np.arange(math.floor(-b - s), math.ceil(b - s) + 1) for b, s in zip(bounds, shift)]
    grid = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(n, -1).T
    pts = (grid + shift) @ B.T
    norms = np.linalg.norm(pts, axis=1)
    keep = norms <= radius * (1 + 1e-12)
    pts, norms, grid = pts[keep], norms[keep], grid[keep]
    order = np.lexsort(tuple(grid.T[::-1]) + (np.round(norms, 12),))
    return pts[order]


def dual_frequencies(geom: TorusGeometry, spin: SpinStructure, radius: float) -> np.ndarray:
    return lattice_points(geom.dual_basis, radius, spin.array)


# --- spectrum ----------------------------------------------------------------


def torus_spectrum(geom: TorusGeometry, spin: SpinStructure, count: int, rep: CliffordRep | None = None) -> list:
    """First ``count`` distinct Dirac eigenvalues as (eigenvalue, multiplicity).

    Eigenvalues are +-2 pi |xi|, xi in Gamma* + delta, ordered by absolute
    value (positive first within a shell). Multiplicities count every xi on
    the shell times N/2 per sign; the trivial structure contributes the
    kernel (0, N).
    """
    if count < 1:
        raise ValueError("count >= 1 required")
    rep = rep or build_rep(geom.n)
    radius = 1.0 / geom.volume ** (1.0 / geom.n)
    while True:
        xis = dual_frequencies(geom, spin, radius)
        eigs = []
        for xi in xis:
            eigs.extend(np.linalg.eigvalsh(2j * math.pi * rep.gamma(xi)))
        eigs = np.sort(np.array(eigs))
        # group equal values
        out = []
        for v in eigs:
            if out and abs(v - out[-1][0]) <= 1e-9 * max(1.0, abs(v)):
                out[-1][1] += 1
            else:
                out.append([float(v), 1])
        out.sort(key=lambda t: (round(abs(t[0]), 9), -t[0]))
        # every xi with |xi| <= radius is included, so values below 2 pi radius are complete
        complete = [t for t in out if abs(t[0]) <= 2 * math.pi * radius * (1 - 1e-12)]
        if len(complete) >= count:
            return [(v, m) for v, m in complete[:count]]
        radius *= 1.5


def kernel_dimension(geom: TorusGeometry, spin: SpinStructure, rep: CliffordRep | None = None) -> int:
    modes = torus_spectrum(geom, spin, 1, rep)
    return modes[0][1] if abs(modes[0][0]) < 1e-12 else 0


# --- Green function ------------------------------------------------------


def _reduce(geom: TorusGeometry, spin: SpinStructure, r: np.ndarray):
    """Write r = r_red + B k with r_red near the origin; G(r) = phase(k) G(r_red)."""
    k = np.rint(r @ np.linalg.inv(geom.basis).T)
    r_red = r - k @ geom.basis.T
    phase = np.cos(2 * math.pi * (k @ spin.array))  # +-1 because delta in {0, 1/2}
    return r_red, phase


class TorusGreen:
    """Green function of D on a flat torus, G(x, y) = gamma(V(x - y)).

    ``V`` is a real vector field; the Euclidean singularity sits in V like
    -(x - y) / (vol(S^{n-1}) |x - y|^n).
    """

    def __init__(self, geom: TorusGeometry, spin: SpinStructure, rep: CliffordRep | None = None,
                 cfg: ModeSumConfig | None = None):
        if spin.trivial:
            raise TrivialSpinStructure("D is not invertible for the trivial spin structure")
        if len(spin.delta) != geom.n:
            raise ValueError("spin structure and lattice dimensions differ")
        self.geom, self.spin = geom, spin
        self.rep = rep or build_rep(geom.n)
        self.cfg = cfg or ModeSumConfig()
        self.n = geom.n
        self.omega = sphere_volume(self.n - 1)
        self.flat_radius = 0.5 * geom.shortest_vector
        a = geom.volume ** (1.0 / self.n)
        self.s = self.cfg.ewald_s or math.pi * a * a
        if self.cfg.method == "ewald":
            kmax = self.cfg.shell_cutoff or math.sqrt(LOG_TOL / self.s)
            self._xis = dual_frequencies(geom, spin, kmax)
            self.shell_cutoff = kmax
            rmax = math.sqrt(LOG_TOL * self.s) / math.pi + np.max(np.linalg.norm(geom.basis, axis=0))
            pts = lattice_points(geom.basis, rmax)
            self._images = pts
            coords = pts @ np.linalg.inv(geom.basis).T
            self._image_sign = np.cos(2 * math.pi * (np.rint(coords) @ spin.array))
        self.last_error = 0.0

    # -- pieces
    def _long_range(self, r, s, xis):
        """(1/vol) sum_xi e^{-s|xi|^2} e^{2 pi i xi.r} i xi / (2 pi |xi|^2), real part."""
        k2 = np.einsum("ij,ij->i", xis, xis)
        w = np.exp(-s * k2) / (2 * math.pi * k2 * self.geom.volume)
        phase = r @ xis.T * (2 * math.pi)
        # i e^{i t} + conj partner  ->  -sin(t) per xi (set is symmetric under xi -> -xi);
        # explicit pairwise sum over the |xi|-sorted shells keeps the result BLAS-independent
        return -((np.sin(phase) * w[None, :])[:, :, None] * xis[None, :, :]).sum(axis=1)

    def _short_range(self, r):
        n = self.n
        out = np.zeros_like(r)
        for g, c in zip(self._images, self._image_sign):
            d = r + g
            rr = np.linalg.norm(d, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                q = gammaincc(n / 2, (math.pi * rr) ** 2 / self.s) / (self.omega * rr ** n)
            q[rr == 0] = 0.0
            out -= c * q[:, None] * d
        return out

    def vector(self, r) -> np.ndarray:
        """V(r) for displacements r = x - y, shape (m, n) -> (m, n)."""
        r = np.atleast_2d(np.asarray(r, dtype=float))
        r_red, phase = _reduce(self.geom, self.spin, r)
        if np.any(np.linalg.norm(r_red, axis=1) == 0):
            raise CoincidentPoints("x = y mod Gamma")
        if self.cfg.method == "ewald":
            V = self._long_range(r_red, self.s, self._xis) + self._short_range(r_red)
        else:
            V = self._damped(r_red)
        return phase[:, None] * V

    def _damped(self, r):
        sched = self.cfg.schedule or default_schedule(self.geom)
        vals = []
        for s in sched:
            kmax = self.cfg.shell_cutoff or math.sqrt(LOG_TOL / s)
            vals.append(self._long_range(r, s, dual_frequencies(self.geom, self.spin, kmax)))
        order = min(self.cfg.order, len(sched) - 1)
        V, resid = richardson(vals, sched, list(range(1, order + 1)))
        self.last_error = resid
        return V

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = np.broadcast_to(x - y, np.broadcast_shapes(x.shape, y.shape))
        V = self.vector(d.reshape(-1, self.n)).reshape(d.shape)
        return self.rep.gamma(V)

    def apply(self, x, y, psi0) -> np.ndarray:
        return self(x, y) @ np.asarray(psi0)


@dataclass
class GreenResult:
    matrix: np.ndarray
    error: float


def torus_green(geom: TorusGeometry, spin: SpinStructure, x, y, cfg: ModeSumConfig | None = None,
                rep: CliffordRep | None = None) -> GreenResult:
    """G(x, y) with an error estimate.

    For the Ewald split the estimate is the difference to a second evaluation
    with the splitting parameter doubled (the exact result does not depend
    on it); for the damped sum it is the extrapolation residual.
    """
    G = TorusGreen(geom, spin, rep, cfg)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    M = G(x, y)
    if G.cfg.method == "ewald":
        alt = TorusGreen(geom, spin, G.rep, ModeSumConfig(method="ewald", ewald_s=2 * G.s))
        err = float(np.max(np.abs(alt(x, y) - M)))
    else:
        err = float(G.last_error)
    return GreenResult(matrix=M, error=err)


def mass_endomorphism_closed_form(green: TorusGreen) -> np.ndarray:
    """omega_{n-1} times the regular part of V at 0, from the Ewald split directly.

    The singular self-term of the real-space sum minus the Euclidean kernel is
    odd and smooth, so it vanishes at r = 0; what is left is the long-range sum
    at 0 and the images g != 0.
    """
    n = green.n
    r0 = np.zeros((1, n))
    V = green._long_range(r0, green.s, green._xis)
    for g, c in zip(green._images, green._image_sign):
        rr = np.linalg.norm(g)
        if rr == 0:
            continue
        V -= c * gammaincc(n / 2, (math.pi * rr) ** 2 / green.s) / (green.omega * rr ** n) * g[None, :]
    return green.omega * green.rep.gamma(V[0])


# --- finite-difference oracles ---------------------------------------------


def _check_fd(geom: TorusGeometry, resolution: int):
    if geom.n > 3:
        raise ValueError("finite-difference oracles support n <= 3")
    if resolution > 64:
        raise ValueError("resolution <= 64 per axis")
    if not geom.is_rectangular:
        raise ValueError("finite-difference oracles need a rectangular lattice")


def _diff_1d(M: int, h: float, phase: complex, kind: str) -> sp.csr_matrix:
    """Twisted periodic 1-D stencil: 'central' first derivative or 'laplace' second."""
    eye = np.arange(M)
    fwd_phase = np.ones(M, dtype=complex)
    fwd_phase[-1] = phase  # value at index M equals phase * value at 0
    nxt = (eye + 1) % M
    A = sp.coo_matrix((fwd_phase, (eye, nxt)), shape=(M, M)).tocsr()
    if kind == "central":
        return (A - A.conj().T) / (2 * h)
    return (A + A.conj().T - 2 * sp.eye(M)) / h ** 2


def _axis_ops(geom, spin, resolution, kind):
    n = geom.n
    sides = np.diag(geom.basis)
    ops = []
    for j in range(n):
        phase = np.exp(2j * math.pi * spin.delta[j])
        op = _diff_1d(resolution, sides[j] / resolution, phase, kind)
        factors = [sp.eye(resolution)] * n
        factors[j] = op
        full = factors[0]
        for f in factors[1:]:
            full = sp.kron(full, f)
        ops.append(full.tocsr())
    return ops


def fd_dirac_matrix(geom: TorusGeometry, spin: SpinStructure, resolution: int, rep=None) -> sp.csr_matrix:
    """Naive central-difference sum_k gamma_k (x) d_k with twisted wrap; Hermitian."""
    _check_fd(geom, resolution)
    rep = rep or build_rep(geom.n)
    ops = _axis_ops(geom, spin, resolution, "central")
    return sum(sp.kron(op, sp.csr_matrix(g)) for op, g in zip(ops, rep.gammas)).tocsr()


def fd_laplacian(geom: TorusGeometry, spin: SpinStructure, resolution: int) -> sp.csr_matrix:
    _check_fd(geom, resolution)
    return sum(_axis_ops(geom, spin, resolution, "laplace")).tocsr()


def _start_vector(A) -> np.ndarray:
    # fixed ARPACK start so repeated runs are bit-identical
    v = np.random.default_rng(0).normal(size=A.shape[0])
    return v.astype(A.dtype)


def fd_smallest_positive(geom: TorusGeometry, spin: SpinStructure, resolution: int, rep=None) -> float:
    A = fd_dirac_matrix(geom, spin, resolution, rep)
    k = min(12, A.shape[0] - 2)
    vals = spla.eigsh(A, k=k, sigma=1e-3, which="LM", v0=_start_vector(A), return_eigenvectors=False)
    pos = vals[vals > 1e-8]
    return float(np.min(pos))


def fd_kernel_dimension(geom: TorusGeometry, spin: SpinStructure, resolution: int, rep=None) -> int:
    """dim ker of the spinor Laplacian D^2 = -Delta (no fermion doublers, unlike central D)."""
    rep = rep or build_rep(geom.n)
    L = -fd_laplacian(geom, spin, resolution)
    vals = spla.eigsh(L, k=4, sigma=-1.0, which="LM", v0=_start_vector(L), return_eigenvectors=False)
    return int(np.sum(np.abs(vals) < 1e-8)) * rep.N


def fd_spectrum_extrapolated(geom, spin, resolutions=(16, 32, 64), rep=None):
    """Smallest positive FD eigenvalue extrapolated in h^2; returns (value, residual)."""
    vals = [fd_smallest_positive(geom, spin, M, rep) for M in resolutions]
    hs = [1.0 / M for M in resolutions]
    if len(vals) == 1:
        return vals[0], float("inf")
    est, resid = richardson(vals, hs, [2 * (j + 1) for j in range(len(vals) - 1)])
    return float(est), float(resid)


class FDGreen:
    """Grid Green function: solve -Delta_h E = delta_h, then G_h = central D_h E.

    D^2 = -Delta, so D (-Delta)^{-1} inverts D; the 5-point Laplacian has no
    doubler modes, hence G_h converges pointwise at O(h^2) off the pole.
    """

    def __init__(self, geom, spin, resolution: int, rep=None):
        _check_fd(geom, resolution)
        if spin.trivial:
            raise SingularSystem("twisted Laplacian is singular for the trivial spin structure")
        self.geom, self.spin, self.M = geom, spin, resolution
        self.rep = rep or build_rep(geom.n)
        self.h = np.diag(geom.basis) / resolution
        L = -fd_laplacian(geom, spin, resolution).tocsc()
        rhs = np.zeros(L.shape[0], dtype=complex)
        rhs[0] = 1.0 / np.prod(self.h)
        if geom.n >= 3:
            # 3-d fill-in makes the direct solve slow; L is Hermitian positive definite here
            E, info = spla.cg(L, rhs, rtol=1e-14, atol=0.0, maxiter=20 * L.shape[0])
            if info != 0:  # pragma: no cover
                raise SingularSystem("CG did not converge on the FD Laplacian")
        else:
            E = spla.spsolve(L, rhs)
        if not np.all(np.isfinite(E)):  # pragma: no cover
            raise SingularSystem("FD Laplacian solve failed")
        self.E = E
        grads = [op @ E for op in _axis_ops(geom, spin, resolution, "central")]
        self.V = np.stack(grads, axis=-1).reshape((resolution,) * geom.n + (geom.n,))

    def vector(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        k = r / self.h
        idx = np.rint(k).astype(int)
        if np.max(np.abs(k - idx)) > 1e-8:
            raise ValueError("displacement is not on the FD grid")
        # wrap with the twist phase
        wraps = np.floor_divide(idx, self.M)
        phase = np.cos(2 * math.pi * (wraps @ self.spin.array))
        return np.real(phase * self.V[tuple(idx % self.M)])

    def __call__(self, x, y) -> np.ndarray:
        return self.rep.gamma(self.vector(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))


def torus_green_fd_oracle(geom, spin, resolution: int, rep=None) -> FDGreen:
    return FDGreen(geom, spin, resolution, rep)


def fd_green_extrapolated(geom, spin, r, resolutions=(20, 30, 40, 50, 60), rep=None):
    """Richardson in h^2 over FD resolutions at a grid-aligned displacement r.

    Returns (V, residual) with V the extrapolated Green vector.
    """
    vals = [FDGreen(geom, spin, M, rep).vector(r) for M in resolutions]
    hs = [1.0 / M for M in resolutions]
    return richardson(vals, hs, [2 * (j + 1) for j in range(len(vals) - 1)])


def eigenspinor(geom: TorusGeometry, spin: SpinStructure, rep: CliffordRep | None = None, index: int = 0):
    """A closed-form eigenspinor e^{2 pi i xi.x} psi of the lowest positive shell.

    Returns (xi, psi, lam) with 2 pi i gamma(xi) psi = lam psi, lam > 0.
    """
    rep = rep or build_rep(geom.n)
    lam_abs = abs(torus_spectrum(geom, spin, 2, rep)[-1][0])
    xis = dual_frequencies(geom, spin, lam_abs / (2 * math.pi) * (1 + 1e-9))
    xis = xis[np.linalg.norm(xis, axis=1) > 0]
    xi = xis[index % len(xis)]
    w, v = np.linalg.eigh(2j * math.pi * rep.gamma(xi))
    return xi, v[:, -1], float(w[-1])


def apply_green_integral(green: TorusGreen, x, xi, psi, order: int = 48) -> np.ndarray:
    """int_{T} G(x, y) e^{2 pi i xi.y} psi dy by polar quadrature centred at x.

    Rectangular 2-tori only: the cell x + [-a, a] x [-b, b] is cut into four
    triangles meeting at x, each integrated in polar form so the Jacobian
    cancels the 1/r pole.
    """
    geom = green.geom
    if geom.n != 2 or not geom.is_rectangular:
        raise ValueError("polar cell quadrature implemented for rectangular 2-tori")
    a, b = np.diag(geom.basis) / 2
    corners = [np.arctan2(b, a), np.pi - np.arctan2(b, a), np.pi + np.arctan2(b, a), 2 * np.pi - np.arctan2(b, a)]
    edges = [corners[3] - 2 * np.pi] + corners
    t, wt = np.polynomial.legendre.leggauss(order)
    total = np.zeros(len(psi), dtype=complex)
    x = np.asarray(x, dtype=float)
    for k in range(4):
        lo, hi = edges[k], edges[k + 1]
        th = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
        wth = 0.5 * (hi - lo) * wt
        c, s = np.cos(th), np.sin(th)
        # distance to the cell boundary along direction theta
        rho = a / np.abs(c) if k in (0, 2) else b / np.abs(s)
        R = 0.5 * rho[:, None] * (t[None, :] + 1)
        W = wth[:, None] * 0.5 * rho[:, None] * wt[None, :] * R
        d = np.stack([R * c[:, None], R * s[:, None]], axis=-1).reshape(-1, 2)
        V = green.vector(-d)  # G(x, x + d) = gamma(V(-d))
        y = x + d
        ph = np.exp(2j * math.pi * (y @ xi))
        col = np.einsum("mij,j->mi", green.rep.gamma(V), psi)
        total += np.einsum("m,mi->i", (W.ravel() * ph), col)
    return total
