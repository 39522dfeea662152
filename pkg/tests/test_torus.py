import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinlab.clifford import build_rep
from spinlab.errors import CoincidentPoints, SingularSystem, TrivialSpinStructure
from spinlab.euclidean import green_euclidean
from spinlab.torus import (FDGreen, ModeSumConfig, SpinStructure, TorusGeometry, TorusGreen, apply_green_integral,
                           default_schedule, dual_frequencies, eigenspinor, fd_green_extrapolated,
                           fd_kernel_dimension, fd_spectrum_extrapolated, kernel_dimension, lattice_points,
                           mass_endomorphism_closed_form, torus_green, torus_green_fd_oracle, torus_spectrum)

SQ = TorusGeometry.cubic(2)
HH = SpinStructure((0.5, 0.5))


def test_geometry_invariants():
    g = TorusGeometry(np.array([[1.0, 0.3], [0.0, 1.4]]))
    assert np.allclose(g.basis @ g.dual_basis.T, np.eye(2), atol=1e-12)
    assert g.volume == pytest.approx(1.4)
    with pytest.raises(ValueError):
        TorusGeometry(np.array([[1.0, 2.0], [0.5, 1.0]]))


def test_spin_structures():
    assert len(SpinStructure.all(3)) == 8
    assert SpinStructure((0, 0)).trivial and not HH.trivial
    with pytest.raises(ValueError):
        SpinStructure((0.25, 0.0))


def test_lattice_points_sorted():
    pts = lattice_points(np.eye(2), 3.0, (0.5, 0.5))
    norms = np.linalg.norm(pts, axis=1)
    assert np.all(np.diff(norms) >= -1e-12)
    brute = [(i + 0.5, j + 0.5) for i in range(-5, 5) for j in range(-5, 5) if math.hypot(i + 0.5, j + 0.5) <= 3]
    assert len(pts) == len(brute)


def test_spectrum_examples():
    assert torus_spectrum(SQ, HH, 1)[0][0] == pytest.approx(math.pi * math.sqrt(2), abs=1e-12)
    assert torus_spectrum(SQ, SpinStructure((0.5, 0)), 1)[0][0] == pytest.approx(math.pi, abs=1e-12)
    assert kernel_dimension(SQ, SpinStructure((0, 0))) == 2
    assert kernel_dimension(SQ, HH) == 0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_kernel_dimension_trivial(n):
    g = TorusGeometry.cubic(n)
    assert kernel_dimension(g, SpinStructure((0,) * n)) == 2 ** (n // 2)
    for s in SpinStructure.all(n)[1:]:
        assert kernel_dimension(g, s) == 0


@given(st.lists(st.integers(0, 1), min_size=2, max_size=3),
       st.lists(st.floats(0.6, 1.6), min_size=3, max_size=3))
@settings(max_examples=20, deadline=None)
def test_spectrum_symmetric_with_multiplicities(bits, sides):
    n = len(bits)
    g = TorusGeometry(np.diag(sides[:n]))
    modes = torus_spectrum(g, SpinStructure.from_bits(bits), 8)
    vals = {round(v, 9): m for v, m in modes}
    N = 2 ** (n // 2)
    for v, m in modes[:-1]:
        if v != 0:
            assert vals.get(round(-v, 9)) == m
            assert m % max(1, N // 2) == 0


def test_multiplicity_counts_shell():
    # Z^2, delta=(1/2,1/2): four xi of norm sqrt(2)/2, each with one eigenvalue per sign
    modes = torus_spectrum(SQ, HH, 2)
    assert [m for _, m in modes] == [4, 4]


@pytest.mark.slow
@pytest.mark.parametrize("delta,lam", [((0.5, 0.5), math.pi * math.sqrt(2)), ((0.5, 0.0), math.pi), ((0.0, 0.5), math.pi)])
def test_fd_spectrum_oracle(delta, lam):
    v, resid = fd_spectrum_extrapolated(SQ, SpinStructure(delta))
    assert abs(v - lam) <= 1e-3 and resid <= 1e-3


def test_fd_kernel_dimension():
    assert fd_kernel_dimension(SQ, SpinStructure((0, 0)), 16) == 2
    assert fd_kernel_dimension(SQ, HH, 16) == 0


def test_green_trivial_and_coincident():
    with pytest.raises(TrivialSpinStructure):
        TorusGreen(SQ, SpinStructure((0, 0)))
    G = TorusGreen(SQ, HH)
    with pytest.raises(CoincidentPoints):
        G(np.array([0.2, 0.3]), np.array([1.2, -0.7]))


def test_green_identities(rng):
    G = TorusGreen(SQ, HH)
    x, y, t = rng.uniform(0, 1, (30, 2)), rng.uniform(0, 1, (30, 2)), rng.uniform(-4, 4, (30, 2))
    Gxy = G(x, y)
    assert np.abs(G(x + t, y + t) - Gxy).max() <= 1e-6
    assert np.abs(Gxy + G(y, x)).max() <= 1e-6
    assert np.abs(np.conj(np.swapaxes(Gxy, -1, -2)) - G(y, x)).max() <= 1e-6


def test_green_twisted_periodicity():
    G = TorusGreen(SQ, SpinStructure((0.5, 0.0)))
    x, y = np.array([0.3, 0.4]), np.array([0.1, 0.0])
    assert np.allclose(G(x + [1, 0], y), -G(x, y), atol=1e-13)
    assert np.allclose(G(x + [0, 1], y), G(x, y), atol=1e-13)


def test_ewald_split_independent_of_parameter(rng):
    r = rng.uniform(-0.5, 0.5, (10, 2))
    base = TorusGreen(SQ, HH).vector(r)
    for s in (0.3, 1.0, 6.0):
        assert np.abs(TorusGreen(SQ, HH, cfg=ModeSumConfig(ewald_s=s)).vector(r) - base).max() < 1e-12


def test_cutoff_doubling():
    r = np.array([[0.3, 0.1]])
    g = TorusGreen(SQ, HH)
    big = TorusGreen(SQ, HH, cfg=ModeSumConfig(shell_cutoff=2 * g.shell_cutoff))
    assert np.abs(big.vector(r) - g.vector(r)).max() < 1e-13


def test_damped_schedule_method():
    cfg = ModeSumConfig(method="damped")
    r = np.array([[0.3, 0.1], [-0.2, 0.35]])
    d = TorusGreen(SQ, HH, cfg=cfg)
    assert np.abs(d.vector(r) - TorusGreen(SQ, HH).vector(r)).max() < 1e-8
    sched = default_schedule(SQ)
    assert len(sched) == 5 and all(a > b for a, b in zip(sched, sched[1:]))
    with pytest.raises(ValueError):
        ModeSumConfig(schedule=(0.1, 0.2))


def test_torus_green_reports_error():
    res = torus_green(SQ, HH, [0.3, 0.1], [0.0, 0.0])
    assert res.matrix.shape == (2, 2) and res.error < 1e-10


def test_fd_oracle_agreement():
    r = np.array([0.3, 0.1])
    V, resid = fd_green_extrapolated(SQ, HH, r)
    G = TorusGreen(SQ, HH)
    assert np.abs(G.vector(r)[0] - V).max() <= 1e-5 and resid <= 1e-5


@pytest.mark.parametrize("delta", [(0.5, 0.0), (0.0, 0.5)])
def test_fd_oracle_other_structures(delta):
    sp = SpinStructure(delta)
    r = np.array([0.2, -0.3])
    V, _ = fd_green_extrapolated(SQ, sp, r)
    assert np.abs(TorusGreen(SQ, sp).vector(r)[0] - V).max() <= 1e-5


def test_fd_oracle_3d():
    g = TorusGeometry.cubic(3)
    sp = SpinStructure((0.5, 0.5, 0.0))
    r = np.array([0.2, 0.1, -0.3])
    V, _ = fd_green_extrapolated(g, sp, r, resolutions=(20, 30, 40))
    assert np.abs(TorusGreen(g, sp).vector(r)[0] - V).max() <= 1e-4


def test_fd_oracle_errors():
    with pytest.raises(SingularSystem):
        torus_green_fd_oracle(SQ, SpinStructure((0, 0)), 16)
    with pytest.raises(ValueError):
        FDGreen(SQ, HH, 128)
    with pytest.raises(ValueError):
        FDGreen(TorusGeometry.cubic(4), SpinStructure((0.5,) * 4), 8)


def test_near_diagonal_bounded():
    G = TorusGreen(SQ, HH)
    rep = build_rep(2)
    d = np.array([0.6, 0.8])
    diffs = [np.abs(G(t * d, np.zeros(2)) - green_euclidean(rep, t * d, np.zeros(2))).max() for t in 10.0 ** -np.arange(1, 7)]
    assert max(diffs) < 1.0 and abs(diffs[-1] - diffs[-2]) < 1e-4


def test_eigenspinor_reproduction():
    G = TorusGreen(SQ, HH)
    for idx in range(4):
        xi, psi, lam = eigenspinor(SQ, HH, index=idx)
        assert lam == pytest.approx(math.pi * math.sqrt(2))
        x = np.array([0.2, 0.7])
        out = apply_green_integral(G, x, xi, psi)
        assert np.abs(out - np.exp(2j * math.pi * x @ xi) * psi / lam).max() <= 1e-8


def test_closed_form_mass_vanishes():
    for g in (SQ, TorusGeometry(np.array([[1.0, 0.4], [0.0, 0.8]]))):
        for s in SpinStructure.all(2)[1:]:
            assert np.abs(mass_endomorphism_closed_form(TorusGreen(g, s))).max() < 1e-12


def test_dual_frequencies_shift():
    xi = dual_frequencies(SQ, HH, 1.0)
    assert np.allclose(np.abs(xi) % 1.0, 0.5)
