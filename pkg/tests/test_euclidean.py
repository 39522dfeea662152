import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from spinlab.clifford import build_rep
from spinlab.errors import CoincidentPoints, DenominatorVanishes, StencilOutOfDomain
from spinlab.euclidean import (ConstantField, GreenColumn, GridSampled, KillingSpinor, PlaneWave, SpinorField,
                               ball_quadrature, conformal_factor, dirac_fd, dirac_fd_extrapolated,
                               euclidean_quadrature, functional_J, green_euclidean, killing_spinor,
                               model_constants, sphere_target)
from spinlab.quadrature import graded_edges, sphere_volume


def test_green_examples():
    r2 = build_rep(2)
    assert np.allclose(green_euclidean(r2, [1.0, 0.0], [0.0, 0.0]), -r2.gammas[0] / (2 * math.pi))
    r3 = build_rep(3)
    assert np.allclose(green_euclidean(r3, [0.0, 0.0, 2.0], np.zeros(3)), -r3.gammas[2] / (16 * math.pi))


def test_green_antisymmetry(rng):
    rep = build_rep(3)
    x, y = rng.normal(size=(100, 3)), rng.normal(size=(100, 3))
    assert np.allclose(green_euclidean(rep, x, y), -green_euclidean(rep, y, x), atol=1e-14)


def test_green_coincident():
    with pytest.raises(CoincidentPoints):
        green_euclidean(build_rep(2), [1.0, 1.0], [1.0, 1.0])


def test_killing_values(rng):
    for n in (2, 3, 4):
        rep = build_rep(n)
        Phi = rng.normal(size=rep.N) + 1j * rng.normal(size=rep.N)
        for s in (1, -1):
            assert np.allclose(killing_spinor(rep, s, Phi, np.zeros(n)), Phi)
            x = rng.normal(size=(100, n))
            v = killing_spinor(rep, s, Phi, x)
            r = np.linalg.norm(x, axis=1)
            assert np.allclose(np.sum(np.abs(v) ** 2, axis=1), conformal_factor(r) ** (n - 1) * np.vdot(Phi, Phi).real)


@pytest.mark.parametrize("n", [2, 3])
def test_killing_dirac_fd(n, rng):
    rep = build_rep(n)
    Phi = rng.normal(size=rep.N) + 1j * rng.normal(size=rep.N)
    x = rng.uniform(-2, 2, size=(100, n))
    for s in (1, -1):
        fld = KillingSpinor(rep, s, Phi)
        D, _ = dirac_fd_extrapolated(fld, x, 1e-2)
        exact = s * n * conformal_factor(np.linalg.norm(x, axis=1))[:, None] * fld(x)
        rel = np.linalg.norm(D - exact, axis=1) / np.linalg.norm(exact, axis=1)
        assert rel.max() <= 1e-6


def test_plane_wave_fd(rng):
    rep = build_rep(3)
    fld = PlaneWave(rep, np.array([0.3, -0.2, 0.5]), rng.normal(size=2) + 0j)
    x = rng.normal(size=(10, 3))
    errs = [np.abs(dirac_fd(fld, x, h) - fld.dirac(x)).max() for h in (1e-2, 5e-3)]
    assert errs[0] < 1e-3 and 3.5 < errs[0] / errs[1] < 4.5


def test_fd_order_of_convergence(rng):
    rep = build_rep(2)
    fld = KillingSpinor(rep, 1, np.array([1.0, 0.5j]))
    x = rng.normal(size=(5, 2))
    hs = [0.04, 0.02, 0.01, 0.005]
    errs = [np.abs(dirac_fd(fld, x, h) - fld.dirac(x)).max() for h in hs]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders >= 1.8) & (orders <= 2.2))


def test_green_column_harmonic(rng):
    rep = build_rep(3)
    fld = GreenColumn(rep, np.zeros(3), np.array([1.0, 1j]))
    x = np.array([[0.5, 0.4, -0.3]])
    e1 = np.abs(dirac_fd(fld, x, 1e-2)).max()
    e2 = np.abs(dirac_fd(fld, x, 5e-3)).max()
    assert e1 < 1e-2 and 3.5 < e1 / e2 < 4.5


def test_constant_field_exact_zero():
    rep = build_rep(2)
    fld = ConstantField(rep, np.array([1.0, 2.0]))
    assert np.array_equal(dirac_fd(fld, np.ones((4, 2)), 0.1), np.zeros((4, 2)))


def test_stencil_out_of_domain():
    rep = build_rep(2)
    fld = GreenColumn(rep, np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(StencilOutOfDomain):
        dirac_fd(fld, np.array([0.05, 0.0]), 0.05)
    grid = GridSampled(rep, np.zeros((8, 8, 2)), 0.125)
    with pytest.raises(StencilOutOfDomain):
        dirac_fd(grid, np.array([0.125, 0.125]), 0.1)
    assert np.array_equal(dirac_fd(grid, np.array([0.125, 0.25]), 0.125), np.zeros(2))


def test_grid_sampled_plane_wave():
    rep = build_rep(2)
    M, h = 32, 1 / 32
    xs = np.arange(M) * h
    X = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1)
    psi = np.array([1.0, 0.0])
    pw = PlaneWave(rep, np.array([1.0, 0.0]), psi)
    grid = GridSampled(rep, pw(X), h)
    x = np.array([[0.25, 0.5]])
    got = dirac_fd(grid, x, h)
    # central difference of e^{2 pi i x}: multiplier sin(2 pi h)/h instead of 2 pi
    expect = pw.dirac(x) * (math.sin(2 * math.pi * h) / h) / (2 * math.pi)
    assert np.allclose(got, expect, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_functional_J_killing(n):
    rep = build_rep(n)
    Phi = np.zeros(rep.N, dtype=complex)
    Phi[0] = 1
    target = sphere_target(n)
    mc = model_constants(n)
    for s in (1, -1):
        r = functional_J(KillingSpinor(rep, s, Phi), "radial", sign=s)
        assert abs(r.J - s * target) <= 1e-6 * target
        assert abs(r.numerator - n ** 2 * mc.I ** ((n + 1) / n)) <= 1e-8 * r.numerator
        assert abs(r.denominator - s * n * mc.I) <= 1e-8 * n * mc.I


def test_functional_J_target_n2():
    # closed form 2 sqrt(pi) evaluated independently
    assert abs(sphere_target(2) - 2 * math.sqrt(math.pi)) < 1e-15
    assert abs(sphere_target(2) - 3.544908) < 1e-6


def test_numerator_radial_oracle():
    # n^{2n/(n+1)} int f^n by scipy quad, then the (n+1)/n power
    for n in (2, 3):
        val, _ = quad(lambda r: r ** (n - 1) * (1 + r * r) ** (-n), 0, np.inf, epsabs=0, epsrel=1e-13)
        oracle = (n ** (2 * n / (n + 1)) * sphere_volume(n - 1) * val) ** ((n + 1) / n)
        rep = build_rep(n)
        r = functional_J(KillingSpinor(rep, 1, np.eye(rep.N)[0]), "radial")
        assert abs(r.numerator - oracle) <= 1e-8 * oracle


def test_functional_J_product_rule_route():
    # same functional on a 3-D product quadrature (no radial reduction)
    rep = build_rep(3)
    Q = euclidean_quadrature(3, scale=1.0, r_max=1e5, radial_order=24, angular_order=6)
    r = functional_J(KillingSpinor(rep, -1, np.array([0.6, 0.8j])), Q, sign=-1)
    assert abs(r.J + sphere_target(3)) <= 1e-6 * sphere_target(3)


def test_functional_J_fd_route():
    rep = build_rep(2)

    class NoDirac(KillingSpinor):
        def dirac(self, pts):
            return None

    Q = euclidean_quadrature(2, scale=1.0, r_max=1e5, radial_order=20, angular_order=8)
    r = functional_J(NoDirac(rep, 1, np.array([1.0, 0.0])), Q, h_fd=1e-3)
    assert abs(r.J - sphere_target(2)) <= 1e-5 * sphere_target(2)


def test_denominator_vanishes():
    rep = build_rep(2)
    Q = ball_quadrature(2, graded_edges(0.0, 50.0, 0.5), 16, 8)
    with pytest.raises(DenominatorVanishes):
        functional_J(PlaneWave(rep, np.array([0.0, 0.0]), np.array([1.0, 0.0])), Q)


def test_radial_needs_radial_field():
    rep = build_rep(2)
    with pytest.raises(ValueError):
        functional_J(ConstantField(rep, np.array([1.0, 0.0])), "radial")


@pytest.mark.parametrize("n,I,C0", [(2, math.pi, math.pi), (3, math.pi ** 2 / 4, 4 * math.pi / 3)])
def test_model_constants(n, I, C0):
    mc = model_constants(n)
    assert abs(mc.I - I) < 1e-13 and abs(mc.C0 - C0) < 1e-12
    assert abs(2 ** n * mc.I - mc.omega_n) < 1e-12
    assert abs(mc.C0_quadrature - mc.C0) <= 1e-10 * mc.C0


@given(st.integers(min_value=1, max_value=12))
@settings(max_examples=12, deadline=None)
def test_model_constants_all_dims(n):
    mc = model_constants(n)
    assert abs(mc.omega_n - 2 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)) < 1e-12 * mc.omega_n


def test_delta_normalization(rng):
    """int <G(x, y) psi0, D phi(x)> dx = <psi0, phi(y)> for a Gaussian-localised phi."""
    rep = build_rep(3)
    y = np.array([0.1, -0.2, 0.15])
    c = np.array([0.3, 0.1, -0.1])
    chi = rng.normal(size=2) + 1j * rng.normal(size=2)
    psi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
    sig = 0.5

    def phi(x):
        g = np.exp(-np.sum((x - c) ** 2, axis=1) / sig ** 2)
        return g[:, None] * chi[None, :]

    def Dphi(x):
        g = np.exp(-np.sum((x - c) ** 2, axis=1) / sig ** 2)
        grad = (-2 / sig ** 2) * g[:, None] * (x - c)
        return np.einsum("mij,j->mi", rep.gamma(grad), chi)

    Q = ball_quadrature(3, np.linspace(0, 6, 61), 16, 16, center=y)
    G = green_euclidean(rep, Q.points, y)
    vals = np.einsum("mi,mi->m", np.conj(G @ psi0), Dphi(Q.points))
    lhs = Q.integrate(vals)
    rhs = np.vdot(psi0, phi(y[None, :])[0])
    assert abs(lhs - rhs) <= 1e-8 * abs(rhs)


def test_field_shapes():
    rep = build_rep(2)
    fld = KillingSpinor(rep, 1, np.array([1.0, 0.0]))
    assert fld(np.zeros(2)).shape == (2,)
    assert fld(np.zeros((3, 4, 2))).shape == (3, 4, 2)
    assert isinstance(fld, SpinorField) and fld.kind == "KillingPlus"
    with pytest.raises(ValueError):
        fld(np.zeros(3))
