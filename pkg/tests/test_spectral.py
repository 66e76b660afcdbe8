import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from rgwaves.errors import BranchCut, LambdaZero, NotAsymptoticallyConstant, ReductionViolation
from rgwaves.evans import shoot
from rgwaves.model import PhysParams, conserved_from_primitive, flux_array, froude_endstate
from rgwaves.presets import GENTLE, STEEP
from rgwaves.profiles import (ProfileSpec, WaveProfile, bump, connect_endstates,
                              constant_profile, construct_from_delta, construct_periodic,
                              construct_single_jump, kappa_for, make_grid, mollify, sine)
from rgwaves.spectral import (LinearizedSystem, check_reduction, dispersion_roots,
                              essential_range, f1_endstate, hydro_stable, kernel_mode_residual,
                              kernel_modes, linearized_matrices, linearized_residual,
                              liouville_transform, reconstruct_eigenfunction,
                              reduced_coefficients, spatial_eigenvalues, stability_verdict,
                              ueq_residual, weq_residual)

P2 = PhysParams(**GENTLE)
P4 = PhysParams(**STEEP)
P5 = PhysParams(**{**GENTLE, "c_t": 0.8})


def fig5_profile():
    x = make_grid(-10.0, 30.0, 0.005)
    spec = ProfileSpec(h0=1.0, c=math.sqrt(P5.g_parallel), kappa=P5.g_perp / 2 + 4.0, x=x,
                       delta=lambda z: bump(z, 3.0, 1.0, 0.02))
    return construct_from_delta(spec, P5)


def fig3_profile(x_jump=0.0):
    c = float(P2.equilibrium_velocity(1.0))
    return construct_single_jump(1.0, c, 0.2, 0.5, x_jump, P2, domain=(-60.0, 10.0))


# -- linearization -----------------------------------------------------------

def test_constant_state_matrix_by_hand():
    h, phi, g = 1.0, 0.2, P2.g_perp
    c = float(P2.equilibrium_velocity(h))
    _, _, _, A = linearized_matrices(h, phi, c, P2)
    G = g + 3 * phi
    expected = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [G, c, 1.0, 1.0],
        [c * G, 0.5 * c * c + 1.5 * phi + g, c, c],
        [0.0, phi, 0.0, 0.0]])
    assert A[0] == pytest.approx(expected, abs=1e-12)


@settings(max_examples=25)
@given(st.floats(0.2, 3.0), st.floats(0.05, 3.0))
def test_matrices_are_jacobians_of_the_conservation_law(h, phi):
    # A0 = dq/dW and A1 = dF/dW at (h, c, 0, phi), by central differences
    c = float(P2.equilibrium_velocity(h))
    W0 = np.array([h, c, 0.0, phi])
    A0, A1, _, _ = linearized_matrices(h, phi, c, P2)
    J0 = np.empty((4, 4))
    J1 = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = 1e-6
        qp, qm = conserved_from_primitive(W0 + e, P2), conserved_from_primitive(W0 - e, P2)
        J0[:, j] = (qp - qm) / 2e-6
        J1[:, j] = (flux_array(qp, P2) - flux_array(qm, P2)) / 2e-6
    assert A0[0] == pytest.approx(J0, rel=1e-7, abs=1e-7)
    assert A1[0] == pytest.approx(J1, rel=1e-7, abs=1e-7)


def test_reduction_checks_pass_on_constructed_profiles():
    for prof, p in ((fig5_profile(), P5), (fig3_profile(), P2), (constant_profile(1, .3, P4), P4)):
        diag = check_reduction(prof, p)
        assert diag.kernel_residual < 1e-10
        assert diag.relation_residual < 1e-8


def test_left_kernel_and_rank():
    sys_ = LinearizedSystem.from_profile(fig5_profile(), P5)
    assert np.max(np.abs(np.einsum("ni,nij->nj", sys_.l1, sys_.A))) < 1e-10
    assert np.max(np.abs(np.einsum("ni,nij->nj", sys_.l2, sys_.A))) < 1e-10
    assert set(np.linalg.matrix_rank(sys_.A, tol=1e-9)) == {2}


def test_reduction_flags_corrupted_profile():
    good = fig5_profile()
    h = good.h + 1e-4 * bump(good.x, 10.0, 1.0)
    bad = WaveProfile(good.x, h, good.phi, good.c, good.h0, P5, good.phi_minus,
                      good.phi_plus, good.kappa)
    with pytest.raises(ReductionViolation) as info:
        check_reduction(bad, P5)
    assert 9.0 < info.value.location < 11.0


# -- reduced coefficients ----------------------------------------------------

def test_constant_profile_coefficients():
    prof = constant_profile(1.0, 0.3, P4)
    co = reduced_coefficients(prof, P4)
    f1 = -P4.g_parallel / (P4.g_perp + 0.9)
    assert co.f1 == pytest.approx(np.full_like(co.f1, f1), rel=1e-12)
    # second-derivative stencils amplify rounding by about 1/dx^2 = 100
    assert np.max(np.abs(co.f4)) < 1e-11
    assert co.f1_minus == co.f1_plus == pytest.approx(f1)


def test_f4_vanishes_on_smooth_profile():
    co = reduced_coefficients(fig5_profile(), P5)
    assert np.max(np.abs(co.f4)) < 1e-6


def test_f1_endstates_negative():
    prof = fig5_profile()
    co = reduced_coefficients(prof, P5)
    assert co.f1_minus < 0 and co.f1_plus < 0
    assert co.f1[0] == pytest.approx(co.f1_minus, rel=1e-9)
    assert co.f1[-1] == pytest.approx(co.f1_plus, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0), st.floats(0.3, 3.0))
def test_f2_f3_negative(phi_minus, phi_plus, h0):
    prof = connect_endstates(h0, phi_minus, phi_plus, P2, dx=0.02)
    co = reduced_coefficients(prof, P2, stencil_tol=None)
    assert np.all(co.f2 < 0) and np.all(co.f3 < 0)


# -- constant states ---------------------------------------------------------

def test_dispersion_at_zero_wavenumber():
    c = float(P2.equilibrium_velocity(1.0))
    a, b = dispersion_roots(0.0, 1.0, 0.2, P2)
    assert a == 0
    assert b == pytest.approx(-2 * P2.c_f * c, rel=1e-14)


def test_dispersion_sweeps_for_figure_endstates():
    xi = np.linspace(-50, 50, 20001)
    for phi in (0.2, 0.5):
        a, b = dispersion_roots(xi, 1.0, phi, P2)
        assert max(a.real.max(), b.real.max()) <= 0
    a, b = dispersion_roots(xi, 1.0, 0.3, P4)
    assert max(a.real.max(), b.real.max()) > 0


@given(st.floats(-100, 100), st.floats(0.1, 3.0), st.floats(0.0, 3.0))
def test_dispersion_roots_solve_the_quadratic(xi, h0, phi0):
    c = float(P4.equilibrium_velocity(h0))
    G = P4.g_perp + 3 * h0 * phi0
    for lam in dispersion_roots(xi, h0, phi0, P4):
        res = lam ** 2 + 2 * P4.c_f * c * lam / h0 + 1j * xi * P4.g_parallel + xi * xi * h0 * G
        assert abs(res) <= 1e-11 * max(1.0, abs(lam) ** 2, xi * xi * h0 * G)


def test_hydro_stable_boundary_is_unstable():
    p = PhysParams(1.0, 4.0, 1.0, 0.5)     # c^2 = 4 = 4 h0 g'
    assert not hydro_stable(1.0, 0.0, p)
    assert froude_endstate(1.0, 0.0, p) == 2.0


def test_spatial_eigenvalues_at_zero():
    g1, g2 = spatial_eigenvalues(0.0, 0.2, 1.0, P2)
    assert g1 == pytest.approx(P2.g_parallel / (P2.g_perp + 0.6), rel=1e-14)
    assert g2 == 0


@given(st.complex_numbers(max_magnitude=50), st.floats(0.0, 3.0), st.floats(0.1, 3.0))
def test_spatial_eigenvalue_vieta(lam, phi0, h0):
    c = float(P2.equilibrium_velocity(h0))
    G = P2.g_perp + 3 * h0 * phi0
    g1, g2 = spatial_eigenvalues(lam, phi0, h0, P2, continuation=True)
    scale = max(1.0, abs(g1), abs(g2)) ** 2
    assert abs(g1 + g2 - P2.g_parallel / (h0 * G)) <= 1e-12 * scale
    prod = -(2 * P2.c_f * c * lam + h0 * lam * lam) / (h0 * h0 * G)
    assert abs(g1 * g2 - prod) <= 1e-12 * scale


def test_consistent_splitting_for_large_real_lambda():
    g1, g2 = spatial_eigenvalues(100.0 + 3.0j, 0.2, 1.0, P2)
    assert g1.real > 0 > g2.real


def test_branch_cut_detected():
    c = float(P2.equilibrium_velocity(1.0))
    lam = -P2.c_f * c       # radicand g_par (g_par - 4 G c_f) < 0
    with pytest.raises(BranchCut):
        spatial_eigenvalues(lam, 0.2, 1.0, P2)
    g1, g2 = spatial_eigenvalues(lam, 0.2, 1.0, P2, continuation=True)
    assert g1 == pytest.approx(np.conj(g2))


def test_dispersion_and_spatial_eigenvalues_are_inverse():
    for p, h0, phi0 in ((P2, 1.0, 0.2), (P4, 1.0, 0.3), (P4, 0.4, 2.0)):
        for xi in np.linspace(-20, 20, 81):
            if xi == 0:
                continue
            for lam in dispersion_roots(xi, h0, phi0, p):
                g = spatial_eigenvalues(lam, phi0, h0, p, continuation=True)
                assert min(abs(gi - 1j * xi) for gi in g) <= 1e-10 * max(1.0, abs(xi))


def test_only_constants_are_bounded_at_lambda_zero():
    # U'' + f1 U' = 0: U = a + b int_0^x exp(-f1 y) dy and f1 < 0
    f1 = f1_endstate(1.0, 0.2, P2)
    grow = [quad(lambda y: math.exp(-f1 * y), 0, x)[0] for x in (10.0, 50.0, 100.0)]
    assert grow[0] == pytest.approx(math.expm1(-f1 * 10.0) / -f1, rel=1e-10)
    assert grow[2] > 1e3 * grow[1] > 1e6 * grow[0]


# -- verdicts ----------------------------------------------------------------

def test_fig2_profile_strongly_stable():
    prof = mollify(fig3_profile(), 0.5)
    for mode in ("standard", "convective", "extended_convective"):
        rep = stability_verdict(prof, P2, mode)
        assert rep.verdict == "strongly_stable"
    rep = stability_verdict(prof, P2)
    assert rep.froude_minus == pytest.approx(0.5528, abs=1e-4)
    assert rep.theta_minus == rep.theta_plus == 0.0


def test_fig4_profile_verdicts():
    prof = connect_endstates(1.0, 0.3, 0.1, P4)
    rep = stability_verdict(prof, P4, "standard")
    assert rep.froude_minus == pytest.approx(3.23, abs=5e-3)
    assert (rep.standard_stable, rep.standard_strongly_stable) == (False, False)
    assert (rep.convective_stable, rep.convective_strongly_stable) == (False, False)
    assert rep.extended_convective_strongly_stable is True
    assert stability_verdict(prof, P4, "extended_convective").verdict == "strongly_stable"
    rep = stability_verdict(prof, P4, "convective")
    assert rep.theta_minus == pytest.approx(0.5 * rep.f1_minus) and rep.theta_plus == 0.0


def test_turbulent_friction_excess_is_unstable_in_every_mode():
    p = PhysParams(**{**GENTLE, "c_t": 1.5})
    prof = connect_endstates(1.0, 0.2, 0.5, p)
    for mode in ("standard", "convective", "extended_convective"):
        assert stability_verdict(prof, p, mode).verdict == "unstable"


def test_discontinuous_profile_withholds_strong_flags():
    rep = stability_verdict(fig3_profile(), P2)
    assert rep.discontinuous and rep.standard_stable
    assert rep.standard_strongly_stable is None
    assert rep.verdict == "stable"
    d = json.loads(rep.to_json())
    assert d["verdict"] == "stable" and d["standard_strongly_stable"] is None


def test_periodic_profile_has_no_verdict():
    x = np.linspace(0, 2, 201)
    c = float(P2.equilibrium_velocity(1.0))
    prof = construct_periodic(ProfileSpec(1.0, c, kappa_for(1.0, 1.0, P2), x,
                                          lambda z: sine(z, 0.05, 2.0), period=2.0), P2)
    with pytest.raises(NotAsymptoticallyConstant):
        stability_verdict(prof, P2)


def test_essential_range_endpoints():
    prof = constant_profile(1.0, 0.5, P2)
    c = prof.c
    v = -2 * (P2.c_f - P2.c_t) * c ** 3 / 0.5
    assert essential_range(prof, P2) == pytest.approx((v, v))


# -- eigenfunctions, kernel modes, Liouville ----------------------------------

def test_eigenfunction_of_zero_solution_is_zero():
    prof = fig5_profile()
    ef = reconstruct_eigenfunction(prof, 1.0, np.zeros_like(prof.x))
    assert np.all(ef.as_array() == 0)
    with pytest.raises(LambdaZero):
        reconstruct_eigenfunction(prof, 0.0, np.ones_like(prof.x))


def _smooth_solution(prof, lam):
    sol = shoot(prof, lam, match_point=prof.x[-1])
    assert np.array_equal(sol.x_minus, np.unique(prof.x))
    return sol.w_minus[0]


def test_reconstructed_eigenfunction_solves_linearized_system():
    prof = mollify(fig3_profile(), 1.0)
    lam = 0.7 + 0.4j
    U = _smooth_solution(prof, lam)
    ef = reconstruct_eigenfunction(prof, lam, U)
    res = linearized_residual(prof, P2, ef)
    scale = np.max(np.abs(ef.as_array()))
    assert np.max(np.abs(res)) < 1e-5 * scale
    assert np.all(ef.Phi == 0)


def test_ueq_and_weq_residuals():
    prof = fig5_profile()
    co = reduced_coefficients(prof, P5)
    lam = 0.3 + 1.1j
    U = _smooth_solution(prof, lam)
    core = (prof.x > -5) & (prof.x < 10)
    scale = np.max(np.abs(U[core]))
    assert np.max(np.abs(ueq_residual(co, lam, U, prof.pieces)[core])) < 1e-6 * scale
    w = liouville_transform(co, U)
    res = weq_residual(co, lam, w, prof.pieces)
    assert np.max(np.abs(res[core])) < 1e-6 * np.max(np.abs(w[core]))


def test_kernel_modes():
    prof = constant_profile(1.0, 0.4, P2, -20, 20, 0.01)
    zero = kernel_modes(prof, P2, np.zeros_like(prof.x))
    assert np.all(zero.as_array() == 0)
    m1 = kernel_modes(prof, P2, lambda x: bump(x, -2.0, 1.5, 0.1))
    m2 = kernel_modes(prof, P2, lambda x: bump(x, 3.0, 1.0, 0.1))
    for m in (m1, m2):
        res = kernel_mode_residual(prof, P2, m)
        assert np.max(np.abs(res)) < 1e-6
    v1, v2 = m1.as_array().ravel(), m2.as_array().ravel()
    gram = np.array([[v1 @ v1, v1 @ v2], [v2 @ v1, v2 @ v2]])
    assert np.linalg.det(gram) > 1e-6 * gram[0, 0] * gram[1, 1]


def test_kernel_mode_on_nonconstant_profile():
    prof = fig5_profile()
    m = kernel_modes(prof, P5, lambda x: bump(x, 6.0, 1.0, 0.01))
    assert np.max(np.abs(kernel_mode_residual(prof, P5, m))) < 1e-6
