"""Regular part of a Dirac Green function at the diagonal.

An evaluator is any object with ``rep``, ``flat_radius`` and a broadcasting
``__call__(x, y)`` returning N x N matrices, expressed in a chart whose
metric is flat on the ball of radius ``flat_radius`` around every base point
and equal to the true metric at the base point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordRep, SymmetryAutomorphism
from .errors import ChartNotFlat, HermitianDefectTooLarge, NonConvergent
from .quadrature import richardson, sphere_volume


@dataclass
class GreenEvaluator:
    """Wrap a plain function G(x, y) as an evaluator."""

    func: object
    rep: CliffordRep
    flat_radius: float

    def __call__(self, x, y):
        return self.func(x, y)


@dataclass
class MassExtraction:
    alpha: np.ndarray
    residual: float
    radii: tuple
    directions: np.ndarray
    levels: list = field(default_factory=list, repr=False)

    @property
    def hermitian_defect(self) -> float:
        return float(np.linalg.norm(self.alpha - self.alpha.conj().T))


def default_directions(n: int) -> np.ndarray:
    """+-e_k and +-(e_i +- e_j)/sqrt 2: closed under v -> -v, listed in antipodal pairs."""
    half = [np.eye(n)[k] for k in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for s in (1.0, -1.0):
                v = np.zeros(n)
                v[i], v[j] = 1.0, s
                half.append(v / math.sqrt(2))
    half = np.array(half)
    return np.concatenate([half, -half])


def default_radii(flat_radius: float, levels: int = 6) -> tuple:
    r0 = flat_radius / 3.0
    return tuple(r0 * 2.0 ** -k for k in range(levels))


def _pair_directions(directions: np.ndarray) -> np.ndarray:
    d = np.asarray(directions, dtype=float)
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    used = np.zeros(len(d), dtype=bool)
    pos = []
    for i in range(len(d)):
        if used[i]:
            continue
        j = np.flatnonzero(~used & np.all(np.abs(d + d[i]) < 1e-12, axis=1))
        if len(j) == 0:
            raise ValueError("direction set must be closed under v -> -v")
        used[i] = used[j[0]] = True
        pos.append(d[i])
    return np.array(pos)


def _bracket(evaluator, y, disp, psi0=None):
    """omega_{n-1} G(y + d, y) + gamma(d)/|d|^n, per displacement d."""
    rep = evaluator.rep
    n = rep.n
    r = np.linalg.norm(disp, axis=1)
    G = np.asarray(evaluator(y[None, :] + disp, y[None, :]))
    sing = rep.gamma(disp / (r ** n)[:, None])
    B = sphere_volume(n - 1) * G + sing
    if psi0 is not None:
        B = B @ np.asarray(psi0)
    return B


def extract_mass(evaluator, y, radii=None, directions=None, order: int = 3, tol: float = 1e-6,
                 psi0=None) -> MassExtraction:
    """alpha_y = lim_{x -> y} omega_{n-1} G(x, y) + gamma(x - y)/|x - y|^n.

    For each radius the bracket is averaged over antipodal direction pairs,
    which removes the odd Taylor terms; the averages are then extrapolated
    in r^2 with ``order`` correction terms. With ``psi0`` only the column
    alpha_y psi0 is extracted.
    """
    rep = evaluator.rep
    n = rep.n
    y = np.asarray(y, dtype=float)
    radii = tuple(default_radii(evaluator.flat_radius) if radii is None else radii)
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    if radii[0] > evaluator.flat_radius * (1 + 1e-12):
        raise ChartNotFlat(f"radius {radii[0]:.3g} exceeds the flat radius {evaluator.flat_radius:.3g}")
    dirs = default_directions(n) if directions is None else np.asarray(directions, dtype=float)
    pos = _pair_directions(dirs)
    both = np.concatenate([pos, -pos])
    levels = []
    for r in radii:
        B = _bracket(evaluator, y, r * both, psi0)
        levels.append(B.mean(axis=0))
    order = min(order, len(radii) - 1)
    alpha, resid = richardson(levels, np.array(radii), [2 * (k + 1) for k in range(order)])
    scale = max(1.0, float(np.max(np.abs(alpha))))
    if not resid <= tol * scale:
        raise NonConvergent(f"extrapolation residual {resid:.3e} above tolerance {tol:.1e}")
    return MassExtraction(alpha=np.asarray(alpha), residual=float(resid), radii=radii, directions=both,
                          levels=levels)


def conformal_rescale_mass(alpha, f_at_y: float, n: int | None = None) -> np.ndarray:
    """Mass endomorphism for the metric f^2 g from the one for g: f^{1-n} alpha."""
    if not f_at_y > 0:
        raise ValueError("conformal factor must be positive")
    alpha = np.asarray(alpha)
    if n is None:
        raise ValueError("dimension n is required")
    return f_at_y ** (1 - n) * alpha


@dataclass
class MassSpectrum:
    eigenvalues: np.ndarray
    hermitian_defect: float
    nu_anticommutator: float | None = None
    symmetric: bool | None = None
    quaternionic_commutator: float | None = None

    def as_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "hermitian_defect": self.hermitian_defect,
            "nu_anticommutator": self.nu_anticommutator,
            "symmetric": self.symmetric,
            "quaternionic_commutator": self.quaternionic_commutator,
        }


def mass_spectrum(alpha, nu: SymmetryAutomorphism | None = None, Q: SymmetryAutomorphism | None = None,
                  tol: float = 1e-6) -> MassSpectrum:
    """Sorted real spectrum of the Hermitized alpha plus symmetry diagnostics."""
    alpha = np.asarray(alpha, dtype=complex)
    defect = float(np.linalg.norm(alpha - alpha.conj().T))
    scale = max(1.0, float(np.linalg.norm(alpha)))
    if defect > tol * scale:
        raise HermitianDefectTooLarge(f"||alpha - alpha*|| = {defect:.3e}")
    H = 0.5 * (alpha + alpha.conj().T)
    ev = np.linalg.eigvalsh(H)
    out = MassSpectrum(eigenvalues=ev, hermitian_defect=defect)
    if nu is not None:
        out.nu_anticommutator = nu.anticommutator_norm(H)
        out.symmetric = bool(np.allclose(np.sort(ev), np.sort(-ev), atol=tol * scale))
    if Q is not None:
        out.quaternionic_commutator = Q.commutator_norm(H)
    return out
