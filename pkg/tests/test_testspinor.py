import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinlab.clifford import build_rep
from spinlab.errors import ContinuityViolation, DenominatorWrongSign, ExpansionDataMissing, ZeroMassEndomorphism
from spinlab.euclidean import ball_quadrature, conformal_factor, dirac_fd_extrapolated, model_constants
from spinlab.sphere_rp import RPGeometry, rp_evaluator
from spinlab.testspinor import (GreenSource, SyntheticSource, TestQuadrature, TestSpinorParams, build_test_spinor,
                                cutoff, cutoff_slope, evaluate_test_functional, synthetic_params, yamabe_verdict)
from spinlab.torus import SpinStructure, TorusGeometry


def unit_dirs(rng, k, n):
    d = rng.normal(size=(k, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def test_cutoff_profile():
    xi = 0.3
    r = np.linspace(0, 1, 2001)
    eta = cutoff(r, xi)
    assert np.all(eta[r <= xi] == 1) and np.all(eta[r >= 2 * xi] == 0)
    assert np.all(np.diff(eta) <= 0)
    assert np.max(np.abs(cutoff_slope(r, xi))) <= 2 / xi
    mid = (r > xi) & (r < 2 * xi)
    fd = np.gradient(eta, r)
    assert np.allclose(fd[mid][5:-5], cutoff_slope(r, xi)[mid][5:-5], atol=1e-3 / xi)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("sign", [1, -1])
def test_continuity(n, sign, rng):
    chi = rng.normal(size=build_rep(n).N) + 0j
    f = build_test_spinor(synthetic_params(n, 0.05, -0.7, chi=chi), sign)
    assert f.continuity_defect() <= 1e-10


def test_continuity_violation_for_inconsistent_source():
    rep = build_rep(3)

    class Broken(SyntheticSource):
        def theta(self, x):
            return np.ones((len(x), self.rep.N), dtype=complex)

        def psi(self, x):
            return self.singular(x) + self.psi1[None, :]

    src = Broken(rep, np.array([1.0, 0.0]), np.zeros(2))
    with pytest.raises(ContinuityViolation):
        build_test_spinor(TestSpinorParams(epsilon=0.05, source=src), 1)


@pytest.mark.parametrize("sign", [1, -1])
def test_inner_dirac_fd(sign, rng):
    params = synthetic_params(3, 0.1, -0.5)
    f = build_test_spinor(params, sign)
    x = unit_dirs(rng, 6, 3) * params.xi * rng.uniform(0.1, 0.8, (6, 1))
    analytic = f.dirac(x)
    for xk, ak in zip(x, analytic):
        v, _ = dirac_fd_extrapolated(f, xk, 1e-3)
        assert np.abs(v - ak).max() <= 1e-6 * max(1.0, np.abs(ak).max())


def test_middle_dirac_fd(rng):
    chi = np.array([0.3 + 0.1j, -0.2])
    params = synthetic_params(3, 0.1, -0.5, chi=chi)
    f = build_test_spinor(params, 1)
    x = unit_dirs(rng, 4, 3) * params.xi * rng.uniform(1.1, 1.9, (4, 1))
    for xk, ak in zip(x, f.dirac(x)):
        v, _ = dirac_fd_extrapolated(f, xk, 1e-3)
        assert np.abs(v - ak).max() <= 1e-6 * max(1.0, np.abs(ak).max())


def test_outer_dirac_vanishes(rng):
    chi = np.array([0.3, 0.4j])
    params = synthetic_params(3, 0.1, -0.5, chi=chi)
    f = build_test_spinor(params, -1)
    x = unit_dirs(rng, 4, 3) * params.xi * rng.uniform(2.2, 3.0, (4, 1))
    assert np.abs(f.dirac(x)).max() == 0
    for xk in x:
        v, _ = dirac_fd_extrapolated(f, xk, 1e-3)
        assert np.abs(v).max() <= 1e-6


@pytest.mark.parametrize("n", [2, 3, 4])
def test_inner_norm_identity(n):
    params = synthetic_params(n, 0.05, 0.3)
    f = build_test_spinor(params, 1)
    Q = ball_quadrature(n, np.linspace(0, params.xi, 5), 8, 8)
    eps, p = params.epsilon, 2 * n / (n + 1)
    lhs = np.linalg.norm(f.dirac(Q.points), axis=1) ** p
    r = np.linalg.norm(Q.points, axis=1)
    rhs = n ** p * eps ** -p * conformal_factor(r / eps) ** n
    assert np.abs(lhs / rhs - 1).max() <= 1e-10


def test_odd_term_integrates_to_zero():
    rep = build_rep(3)
    psi0, psi1 = np.array([1.0, 0.0]), np.array([0.2, -0.7j])
    Q = ball_quadrature(3, np.linspace(0, 0.5, 9), 12, 12)
    vals = np.einsum("i,mi->m", np.conj(psi1), np.einsum("mij,j->mi", rep.gamma(Q.points / 0.05), psi0))
    assert abs(Q.integrate(vals)) <= 1e-12


def test_eps0_ratio_monotone():
    ratios = [synthetic_params(3, e).eps0 / e ** 2 for e in 0.1 * 2.0 ** -np.arange(6)]
    assert all(abs(b - 1) < abs(a - 1) for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] - 1) < 0.02


def test_params_validation():
    with pytest.raises(ValueError):
        synthetic_params(3, 0.05, q=0.5)
    with pytest.raises(ValueError):
        synthetic_params(3, 0.05, q=0.1)
    with pytest.raises(ValueError):
        synthetic_params(3, 0.9)
    with pytest.raises(ExpansionDataMissing):
        TestSpinorParams(epsilon=0.1, source=None)
    src = SyntheticSource(build_rep(3), np.array([2.0, 0.0]), np.zeros(2))
    with pytest.raises(ValueError):
        TestSpinorParams(epsilon=0.05, source=src)
    with pytest.raises(ValueError):
        TestSpinorParams(epsilon=0.05, source=synthetic_params(3, 0.05).source, flat_radius=0.1)


@given(st.floats(0.005, 0.08), st.floats(-2.0, 2.0))
@settings(max_examples=15, deadline=None)
def test_denominator_sign_per_family(eps, nu):
    params = synthetic_params(3, eps, nu)
    for s in (1, -1):
        r = evaluate_test_functional(params, s, TestQuadrature(radial_order=12, angular_order=8))
        assert s * r.denominator > 0


def test_wrong_sign_denominator_rejected(monkeypatch):
    params = synthetic_params(3, 0.05)
    import spinlab.testspinor as ts
    orig = ts.TestSpinor.dirac
    monkeypatch.setattr(ts.TestSpinor, "dirac", lambda self, pts: -orig(self, pts))
    with pytest.raises(DenominatorWrongSign):
        evaluate_test_functional(params, 1)
    r = evaluate_test_functional(params, 1, check_sign=False)
    assert r.denominator < 0


def test_leading_terms_small_eps():
    n, mc = 3, model_constants(3)
    r = evaluate_test_functional(synthetic_params(n, 0.0125), 1)
    assert r.numerator / 0.0125 ** 2 == pytest.approx(n ** 2 * mc.I ** (4 / 3), rel=0.02)
    assert r.denominator / 0.0125 ** 2 == pytest.approx(n * mc.I, rel=0.02)
    assert r.prediction.J == pytest.approx(r.J, rel=0.05)


def test_quadrature_refinement_stable():
    params = synthetic_params(3, 0.05, -1.0)
    a = evaluate_test_functional(params, 1)
    b = evaluate_test_functional(params, 1, TestQuadrature(radial_order=48, angular_order=20))
    assert abs(a.numerator / b.numerator - 1) <= 1e-6
    assert abs(a.denominator / b.denominator - 1) <= 1e-6


def test_nu_pair_shifts_denominator():
    e = 0.025
    d0 = evaluate_test_functional(synthetic_params(3, e, 0.0), 1).denominator
    dm = evaluate_test_functional(synthetic_params(3, e, -1.0), 1).denominator
    dp = evaluate_test_functional(synthetic_params(3, e, 1.0), 1).denominator
    assert dm > d0 > dp


def test_green_source_theta_is_small():
    ev = rp_evaluator(RPGeometry(spin_sign=1), np.zeros(3))
    alpha = 0.25 * np.eye(2)
    psi0 = np.array([1.0, 0.0])
    good = GreenSource(ev, ev.base_scaled, psi0, -alpha @ psi0)
    bad = GreenSource(ev, ev.base_scaled, psi0, alpha @ psi0)
    x = np.array([[1e-3, 0.0, 0.0], [0.0, -1e-3, 0.0]])
    assert np.abs(good.theta(x)).max() <= 1e-2
    assert np.abs(bad.theta(x)).max() >= 0.4


def test_torus_zero_mass():
    with pytest.raises(ZeroMassEndomorphism):
        yamabe_verdict("torus", (TorusGeometry.cubic(2), SpinStructure((0.5, 0.5))), [0.05])
    with pytest.raises(ValueError):
        yamabe_verdict("klein", "plus", [0.05])


@pytest.mark.parametrize("spin,sign", [("plus", 1), ("minus", -1)])
def test_rp3_verdict(spin, sign):
    v = yamabe_verdict("rp3", spin, [0.1, 0.0125])
    assert v.predicted_sign == sign
    assert v.rows[0].achieving_sign is None
    assert v.final.exactly_one and v.final.achieving_sign == sign
    assert v.verdict == "strict"


@pytest.mark.parametrize("q", [0.17, 0.3])
def test_rp3_verdict_never_opposite_across_q(q):
    for spin, sign in (("plus", 1), ("minus", -1)):
        v = yamabe_verdict("rp3", spin, [0.05, 0.0125], q=q)
        assert all(r.achieving_sign in (None, sign) for r in v.rows)


def test_synthetic_zero_nu_is_inconclusive():
    params = synthetic_params(3, 0.0125, 0.0)
    plus = evaluate_test_functional(params, 1)
    minus = evaluate_test_functional(params, -1)
    assert plus.J == pytest.approx(-minus.J, rel=1e-10)
    assert math.isclose(plus.prediction.denominator, -minus.prediction.denominator)
