"""Irreducible complex Clifford representations and their symmetry maps.

Convention: e_i e_j + e_j e_i = -2 delta_ij, so the gamma matrices are
anti-Hermitian and D = sum_k gamma_k d_k is formally self-adjoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionError, NUnavailable, QUnavailable

MAX_DIM = 12

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _kron(*mats):
    return reduce(np.kron, mats, np.eye(1, dtype=complex))


@dataclass(frozen=True)
class CliffordRep:
    n: int
    gammas: tuple
    omega_sign: int = 1  # only meaningful for odd n

    @property
    def N(self) -> int:
        return self.gammas[0].shape[0]

    def gamma(self, v) -> np.ndarray:
        """Clifford multiplication by the vector ``v``.

        ``v`` may be a single vector of shape (n,) or a stack (..., n); the
        result has shape (..., N, N).
        """
        v = np.asarray(v)
        if not np.iscomplexobj(v):
            v = v.astype(float)
        return np.tensordot(v, self._stack, axes=([-1], [0]))

    @property
    def _stack(self) -> np.ndarray:
        st = self.__dict__.get("_stack_cache")
        if st is None:
            st = np.array(self.gammas)
            object.__setattr__(self, "_stack_cache", st)
        return st


@dataclass(frozen=True)
class VolumeElement:
    omega: np.ndarray
    n: int

    @property
    def square_sign(self) -> int:
        return (-1) ** (self.n * (self.n + 1) // 2)


@dataclass(frozen=True)
class SymmetryAutomorphism:
    """Real-linear fiber map v -> B v (linear) or v -> B conj(v) (conjugate-linear)."""

    matrix: np.ndarray
    conjugate: bool

    @property
    def kind(self) -> str:
        return "conjugate-linear" if self.conjugate else "linear"

    def apply(self, v):
        v = np.asarray(v)
        return self.matrix @ (np.conj(v) if self.conjugate else v)

    def anticommutator_norm(self, A) -> float:
        """|| nu o A + A o nu || as a real-linear map (exact for either kind)."""
        A = np.asarray(A)
        B = self.matrix
        inner = np.conj(A) if self.conjugate else A
        return float(np.linalg.norm(B @ inner + A @ B))

    def commutator_norm(self, A) -> float:
        A = np.asarray(A)
        B = self.matrix
        inner = np.conj(A) if self.conjugate else A
        return float(np.linalg.norm(B @ inner - A @ B))

    def square(self) -> np.ndarray:
        B = self.matrix
        return B @ np.conj(B) if self.conjugate else B @ B


# kept as a distinct name for readability at call sites
QuaternionicStructure = SymmetryAutomorphism


def build_rep(n: int, omega_sign: int = 1) -> CliffordRep:
    """Build gamma_1..gamma_n by the Jordan-Wigner tensor recursion.

    For odd ``n`` the two inequivalent representations are selected by
    ``omega_sign``: omega = omega_sign * i * Id for n = 1 mod 4 and
    omega = omega_sign * Id for n = 3 mod 4.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_DIM:
        raise DimensionError(f"dimension must be an integer in [1, {MAX_DIM}], got {n!r}")
    if omega_sign not in (1, -1):
        raise ValueError("omega_sign must be +1 or -1")
    m = n // 2
    herm = []
    for j in range(m):
        left = [_Z] * j
        right = [_I2] * (m - j - 1)
        herm.append(_kron(*left, _X, *right))
        herm.append(_kron(*left, _Y, *right))
    if n % 2:
        herm.append(_kron(*([_Z] * m)))
    gammas = [1j * e for e in herm]
    if n % 2:
        om = _product(gammas)
        target = (1j if n % 4 == 1 else 1.0) * omega_sign
        if not np.isclose(om[0, 0], target):
            gammas[-1] = -gammas[-1]
    for g in gammas:
        g.setflags(write=False)
    return CliffordRep(n=int(n), gammas=tuple(gammas), omega_sign=omega_sign if n % 2 else 1)


def _product(mats):
    return reduce(np.matmul, mats)


def clifford_defects(rep: CliffordRep) -> dict:
    """Max-norm defects of the Clifford relations and anti-Hermiticity."""
    N = rep.N
    eye = np.eye(N)
    rel = 0.0
    for i, gi in enumerate(rep.gammas):
        for j, gj in enumerate(rep.gammas):
            target = -2.0 * eye if i == j else 0.0 * eye
            rel = max(rel, float(np.max(np.abs(gi @ gj + gj @ gi - target))))
    herm = max(float(np.max(np.abs(g.conj().T + g))) for g in rep.gammas)
    return {"relations": rel, "anti_hermitian": herm}


def volume_element(rep: CliffordRep) -> VolumeElement:
    return VolumeElement(omega=_product(rep.gammas), n=rep.n)


def _nullspace(M: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    _, s, vh = np.linalg.svd(M)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > rtol * scale))
    return vh[rank:].conj().T


def solve_intertwiner(rep: CliffordRep, conjugate: bool, sign: int) -> np.ndarray | None:
    """Find B != 0 with B op(gamma_k) = sign * gamma_k B for all k by a nullspace solve.

    op is complex conjugation when ``conjugate``; the system is complex-linear
    in B. Dense in N^2 unknowns, so only practical for N <= 8.
    """
    N = rep.N
    eye = np.eye(N)
    blocks = []
    for g in rep.gammas:
        gl = np.conj(g) if conjugate else g
        # vec(B X) = (I kron X^T) vec(B);  vec(Y B) = (Y kron I) vec(B)
        blocks.append(np.kron(eye, gl.T) - sign * np.kron(g, eye))
    ns = _nullspace(np.vstack(blocks))
    if ns.shape[1] == 0:
        return None
    return _normalize(ns[:, 0].reshape(N, N))


def _normalize(B: np.ndarray) -> np.ndarray:
    # Schur: B B^* is a positive multiple of Id, so this makes B unitary
    c = np.real(np.trace(B @ B.conj().T)) / B.shape[0]
    B = B / np.sqrt(c)
    k = np.argmax(np.abs(B))
    B = B * np.conj(B.flat[k]) / np.abs(B.flat[k])
    B[np.abs(B) < 1e-14] = 0.0
    return B


def _monomial_intertwiner(rep: CliffordRep, sign: int) -> np.ndarray | None:
    """B with B conj(gamma_k) = sign * gamma_k B, searched among Clifford monomials.

    In the Jordan-Wigner basis every gamma is purely real or purely imaginary,
    so the products of all real (resp. imaginary) gammas, possibly times omega,
    exhaust the candidates.
    """
    N = rep.N
    real = [g for g in rep.gammas if not np.any(np.imag(g))]
    imag = [g for g in rep.gammas if np.any(np.imag(g))]
    omega = _product(rep.gammas)
    for group in (real, imag):
        base = _product(group) if group else np.eye(N, dtype=complex)
        for B in (base, omega @ base):
            if all(np.array_equal(B @ np.conj(g), sign * (g @ B)) for g in rep.gammas):
                return _normalize(B.astype(complex))
    return None


def build_nu(rep: CliffordRep) -> SymmetryAutomorphism:
    """Real automorphism anticommuting with Clifford multiplication by vectors.

    Complex-linear (nu = omega up to scale) for even n, conjugate-linear for
    n = 1 mod 4; it does not exist for n = 3 mod 4.
    """
    n = rep.n
    if n % 4 == 3:
        raise NUnavailable(f"n = {n} = 3 mod 4: no automorphism anticommutes with Clifford multiplication")
    if n % 2 == 0:
        om = volume_element(rep).omega
        return SymmetryAutomorphism(matrix=om.copy(), conjugate=False)
    B = _monomial_intertwiner(rep, sign=-1)
    if B is None:  # pragma: no cover - excluded by representation theory
        raise NUnavailable(f"anticommutation system has no solution for n = {n}")
    return SymmetryAutomorphism(matrix=B, conjugate=True)


def find_commuting_conjugation(rep: CliffordRep) -> SymmetryAutomorphism | None:
    """Conjugate-linear unitary map commuting with every gamma, if any."""
    B = _monomial_intertwiner(rep, sign=+1)
    if B is None:
        return None
    return SymmetryAutomorphism(matrix=B, conjugate=True)


def build_quaternionic(rep: CliffordRep) -> QuaternionicStructure:
    """Parallel conjugate-linear Q with Q^2 = -Id commuting with Clifford multiplication."""
    if rep.n % 8 not in (2, 3, 4):
        raise QUnavailable(f"n = {rep.n}: quaternionic structure needs n = 2, 3, 4 mod 8")
    Q = find_commuting_conjugation(rep)
    if Q is None or not np.allclose(Q.square(), -np.eye(rep.N), atol=1e-10):  # pragma: no cover
        raise QUnavailable(f"no conjugate-linear Q with Q^2 = -Id for n = {rep.n}")
    return Q


def check_report(n: int) -> dict:
    """Summary used by ``spinlab clifford check``."""
    rep = build_rep(n)
    d = clifford_defects(rep)
    om = volume_element(rep)
    sq = om.omega @ om.omega
    omega_ok = bool(np.array_equal(sq, om.square_sign * np.eye(rep.N)))
    try:
        nu = build_nu(rep)
        nu_exists, nu_kind = True, nu.kind
        nu_defect = max(nu.anticommutator_norm(g) for g in rep.gammas)
    except NUnavailable:
        nu_exists, nu_kind, nu_defect = False, None, None
    try:
        build_quaternionic(rep)
        q_exists = True
    except QUnavailable:
        q_exists = False
    return {
        "n": n,
        "N": rep.N,
        "relations_ok": d["relations"] == 0.0 and d["anti_hermitian"] == 0.0 and omega_ok,
        "omega_sign": om.square_sign,
        "nu_exists": nu_exists,
        "nu_kind": nu_kind,
        "nu_defect": nu_defect,
        "q_exists": q_exists,
    }
