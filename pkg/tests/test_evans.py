import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from rgwaves.errors import ContourThroughZero, LambdaZero, SplittingFailure
from rgwaves.evans import Contour, count_unstable, evans, winding_number
from rgwaves.model import PhysParams
from rgwaves.presets import GENTLE, STEEP
from rgwaves.profiles import (ProfileSpec, bump, connect_endstates, constant_profile,
                              construct_from_delta, construct_single_jump, make_grid)
from rgwaves.spectral import dispersion_roots, spatial_eigenvalues

P2 = PhysParams(**GENTLE)
P4 = PhysParams(**STEEP)
P5 = PhysParams(**{**GENTLE, "c_t": 0.8})


def fig5_profile():
    x = make_grid(-10.0, 30.0, 0.005)
    spec = ProfileSpec(h0=1.0, c=math.sqrt(P5.g_parallel), kappa=P5.g_perp / 2 + 4.0, x=x,
                       delta=lambda z: bump(z, 3.0, 1.0, 0.02))
    return construct_from_delta(spec, P5)


def _oracle(prof, lam, x_lo=-2.0, x_hi=8.0):
    """Unscaled shooting in (U, U') with K U'' + (K' - c_f c^2) U' = (lam^2 h + 2 lam c_f c) U.

    Initial data are the exact endstate modes exp(gamma x) at the truncation
    points; the Wronskian in (w1, w2) at x = 0 is divided by the same
    constant as the library's normalization.
    """
    p = prof.params
    cfc, cfc2 = p.c_f * prof.c, p.c_f * prof.c ** 2
    K = prof.h ** 2 * (p.g_perp + 3 * prof.h * prof.phi)
    Ks = CubicSpline(prof.x, K)
    hs = CubicSpline(prof.x, prof.h)
    dK = Ks.derivative()

    def rhs(x, y):
        U, V = y
        return [V, ((lam * lam * hs(x) + 2 * lam * cfc) * U - (dK(x) - cfc2) * V) / Ks(x)]

    def mode(phi_end, x0, which):
        g = spatial_eigenvalues(lam, phi_end, prof.h0, p)[which]
        return np.array([1.0, g]) * np.exp(g * x0)

    ym = solve_ivp(rhs, (x_lo, 0.0), mode(prof.phi_minus, x_lo, 0).astype(complex),
                   method="DOP853", rtol=1e-12, atol=1e-30).y[:, -1]
    yp = solve_ivp(rhs, (x_hi, 0.0), mode(prof.phi_plus, x_hi, 1).astype(complex),
                   method="DOP853", rtol=1e-12, atol=1e-30).y[:, -1]
    K0 = float(Ks(0.0))
    w = lambda y: (y[0], K0 * y[1] - cfc2 * y[0])
    (a1, a2), (b1, b2) = w(ym), w(yp)
    g1m, g2m = spatial_eigenvalues(lam, prof.phi_minus, prof.h0, p)
    Km = prof.h0 ** 2 * (p.g_perp + 3 * prof.h0 * prof.phi_minus)
    return (a1 * b2 - a2 * b1) / (Km * (g2m - g1m))


def test_evans_matches_unscaled_oracle():
    prof = fig5_profile()
    for lam in (0.5, 0.2 + 1.0j, 1.5 - 0.7j, 3.0 + 4.0j):
        assert evans(prof, lam) == pytest.approx(_oracle(prof, lam), rel=1e-7)


def test_constant_profile_evans_is_one():
    prof = constant_profile(1.0, 0.3, P2)
    lam = np.array([0.1, 1 + 1j, 4 - 2j])
    assert evans(prof, lam) == pytest.approx(np.ones(3), abs=1e-10)


def test_evans_independent_of_match_point():
    prof = fig5_profile()
    lam = 0.8 + 0.3j
    ref = evans(prof, lam)
    for xm in (0.0, 2.5, 3.0, 6.0):
        assert evans(prof, lam, match_point=xm) == pytest.approx(ref, rel=1e-8)


def test_conjugate_symmetry():
    prof = fig5_profile()
    rng = np.random.default_rng(3)
    lam = rng.uniform(0.01, 5, 10) + 1j * rng.uniform(-10, 10, 10)
    D = evans(prof, lam)
    Dc = evans(prof, np.conj(lam))
    assert np.max(np.abs(Dc - np.conj(D)) / np.abs(D)) < 1e-8


def test_evans_continuous_through_jump():
    # the discontinuous profile needs no interface algebra; D is still real on the axis
    c = float(P2.equilibrium_velocity(1.0))
    prof = construct_single_jump(1.0, c, 0.2, 0.5, 0.0, P2, domain=(-60.0, 10.0))
    D = evans(prof, np.array([0.3, 1.0, 2.0]))
    assert np.max(np.abs(D.imag)) < 1e-10 * np.max(np.abs(D))
    assert np.all(D.real > 0)


def test_lambda_zero_rejected():
    with pytest.raises(LambdaZero):
        evans(fig5_profile(), 0.0)


def test_splitting_failure_on_unstable_endstate():
    prof = connect_endstates(1.0, 0.3, 0.1, P4)
    xi = np.linspace(0.01, 5, 500)
    a, b = dispersion_roots(xi, 1.0, 0.3, P4)
    lam = a[np.argmax(a.real)]
    assert lam.real > 0
    with pytest.raises(SplittingFailure):
        evans(prof, lam)


def test_unstable_constant_state_is_counted():
    prof = constant_profile(1.0, 0.3, P4)
    xi = np.linspace(-100, 100, 4001)
    a, b = dispersion_roots(xi, 1.0, 0.3, P4)
    top = a[np.argmax(a.real)]
    contour = Contour(r0=1e-3, R=2 * top.real + 1, M=abs(top.imag) + 1)
    assert count_unstable(prof, contour) >= 1


def test_count_invariant_under_refinement():
    prof = fig5_profile()
    contour = Contour(1e-3, 5.0, 10.0)
    coarse = winding_number(prof, contour, n_initial=32)
    fine = winding_number(prof, contour, n_initial=128)
    assert coarse.count == fine.count == 0


def test_contour_guard_raises():
    prof = fig5_profile()
    contour = Contour(0.5, 1.0, 1.0)
    with pytest.raises(ContourThroughZero):
        winding_number(prof, contour, n_initial=8, min_modulus=10.0)
