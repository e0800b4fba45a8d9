"""Branch tracing: tangent fields, continuation phases, folds, classification."""

import math

import numpy as np
import pytest

from mfbranch.continuation import (
    EIGHT_PI,
    ContinuationControls,
    DomainKind,
    FoldFlag,
    Termination,
    continue_natural,
    detect_concentration,
    sign_agreement_violations,
    tangent,
    tangent_cross_identity_error,
    trace_branch,
)
from mfbranch.mesh import Mesh, Rectangle, UnitDisk
from mfbranch.meanfield import make_solution, newton_solve
from mfbranch.spectral import nonpositive_count

from reference_values import (
    DISK_DE_DLAMBDA_AT_0,
    DISK_FAMILY_LAMBDA,
    DISK_MASS_R025_AT_79,
    DISK_MASS_R035_AT_79,
    DISK_MAX_U_AT_79,
)


def family_state(mesh, t):
    lam = 8.0 * math.pi * t / (1.0 + t)
    u = 2.0 * np.log((1.0 + t) / (1.0 + t * mesh.r**2))
    return lam, u / lam


@pytest.fixture(scope="module")
def disk16():
    return Mesh(UnitDisk(), 16)


class TestTangent:
    def test_energy_slope_at_zero_matches_quadrature_oracle(self):
        mesh = Mesh(UnitDisk(), 64)
        sol = newton_solve(mesh, 0.0, np.zeros(mesh.n_nodes))
        tf = tangent(sol)
        rel = abs(tf.dE_dlambda - DISK_DE_DLAMBDA_AT_0) / DISK_DE_DLAMBDA_AT_0
        assert rel <= 1e-3

    def test_cross_identity_is_discrete_exact(self, disk16):
        sol = newton_solve(disk16, 2.0, np.zeros(disk16.n_nodes))
        tf = tangent(sol)
        assert tangent_cross_identity_error(sol, tf) <= 1e-10

    def test_matches_centered_finite_difference(self, disk16):
        lam, delta = 2.0, 1e-3
        sol = newton_solve(disk16, lam, np.zeros(disk16.n_nodes))
        tf = tangent(sol)
        above = newton_solve(disk16, lam + delta, sol.psi)
        below = newton_solve(disk16, lam - delta, sol.psi)
        fd = (above.energy - below.energy) / (2.0 * delta)
        assert abs(tf.dE_dlambda - fd) / abs(fd) <= 1e-4

    def test_mean_equals_energy_slope(self, disk16):
        sol = newton_solve(disk16, 5.0, np.zeros(disk16.n_nodes))
        tf = tangent(sol)
        assert tf.mean_v == tf.dE_dlambda


class TestNaturalPhase:
    def test_starts_at_zero_multiplier_state(self, disk_branch_coarse):
        first = disk_branch_coarse.points[0]
        assert first.lam == 0.0
        assert first.s == 0.0
        assert first.sigma1 > 0
        assert first.dlambda_ds > 0
        mesh = first.solution.mesh
        rel = abs(first.energy - mesh.mean_green_energy()) / mesh.mean_green_energy()
        assert rel <= 1e-12

    def test_energy_and_arclength_strictly_increase(self, disk_branch_coarse):
        pts = disk_branch_coarse.points
        assert all(b.energy > a.energy for a, b in zip(pts, pts[1:]))
        assert all(b.s > a.s for a, b in zip(pts, pts[1:]))

    def test_energy_slope_positive_along_branch(self, disk_branch_coarse):
        slopes = [
            p.tangent.dE_dlambda
            for p in disk_branch_coarse.points
            if p.tangent is not None
        ]
        assert len(slopes) >= 10
        assert all(s > 0 for s in slopes)

    def test_lambda_cap_landing_is_exact(self, disk16):
        branch = continue_natural(
            disk16, 0.0, 2.0, 0.5, ContinuationControls()
        )
        assert branch.termination is Termination.LAMBDA_CAP
        assert branch.points[-1].lam == pytest.approx(2.0, abs=1e-12)
        assert all(p.lam <= 2.0 + 1e-12 for p in branch.points)

    def test_step_underflow_is_recorded_not_raised(self):
        # natural continuation cannot pass a fold: pushing the aspect-4
        # rectangle past its critical multiplier with hand-off disabled must
        # end in a recorded step-failure termination
        mesh = Mesh(Rectangle(4.0, 1.0), 8)
        controls = ContinuationControls(sigma_switch=0.0)
        branch = continue_natural(mesh, 0.0, 12.0 * math.pi, 0.3, controls)
        assert branch.termination is Termination.STEP_FAILURE
        assert any("underflow" in note for note in branch.notes)
        assert branch.points[-1].lam < 12.0 * math.pi

    def test_rejects_bad_interval(self, disk16):
        with pytest.raises(ValueError):
            continue_natural(disk16, 2.0, 1.0, 0.1)
        with pytest.raises(ValueError):
            continue_natural(disk16, -0.5, 1.0, 0.1)


class TestDiskBranch:
    def test_terminates_by_concentration(self, disk_branch_coarse):
        assert disk_branch_coarse.termination is Termination.CONCENTRATION

    def test_classified_first_kind(self, disk_branch_coarse):
        assert disk_branch_coarse.kind is DomainKind.FIRST_KIND

    def test_no_critical_points(self, disk_branch_coarse):
        assert disk_branch_coarse.critical_points == []
        assert all(
            p.fold_flag is FoldFlag.NONE for p in disk_branch_coarse.points
        )

    def test_first_eigenvalue_positive_below_eight_pi(self, disk_branch_coarse):
        for p in disk_branch_coarse.points:
            if p.lam <= 0.99 * EIGHT_PI:
                assert p.sigma1 > 0

    def test_peak_log_density_grows_toward_eight_pi(self, disk_branch_coarse):
        us = [p.solution.max_u for p in disk_branch_coarse.points]
        assert us[-1] > 8.0
        assert us[-1] == max(us)

    def test_multiplier_stays_below_eight_pi(self, disk_branch_coarse):
        assert max(p.lam for p in disk_branch_coarse.points) < EIGHT_PI


class TestRectangleBranch:
    def test_second_kind_with_fold_above_eight_pi(self, rect_branch_coarse):
        branch = rect_branch_coarse
        assert branch.kind is DomainKind.SECOND_KIND
        assert branch.critical_points, "no critical point found"
        first = branch.critical_points[0]
        assert first["kind"] is FoldFlag.FOLD
        assert first["lambda_star"] > EIGHT_PI
        assert branch.landmarks["lambda_star"] == first["lambda_star"]

    def test_crosses_eight_pi_with_bounded_peak(self, rect_branch_coarse):
        crossed = [
            p for p in rect_branch_coarse.points if p.lam >= 1.02 * EIGHT_PI
        ]
        assert crossed
        assert min(p.solution.max_u for p in crossed) < 8.0

    def test_sigma1_changes_sign_at_fold(self, rect_branch_coarse):
        idx = rect_branch_coarse.critical_points[0]["index"]
        sig = [p.sigma1 for p in rect_branch_coarse.points]
        assert sig[idx - 1] * sig[idx + 1] < 0

    def test_fold_coefficient_positive_at_fold(self, rect_branch_coarse):
        idx = rect_branch_coarse.critical_points[0]["index"]
        point = rect_branch_coarse.points[idx]
        assert point.a_star is not None
        assert point.a_star > 0

    def test_sign_agreement_away_from_fold(self, rect_branch_coarse):
        assert sign_agreement_violations(rect_branch_coarse.points) == []

    def test_energy_increases_through_fold(self, rect_branch_coarse):
        pts = rect_branch_coarse.points
        assert all(b.energy > a.energy for a, b in zip(pts, pts[1:]))

    def test_multiplier_decreases_past_fold(self, rect_branch_coarse):
        idx = rect_branch_coarse.critical_points[0]["index"]
        tail = rect_branch_coarse.points[idx + 2 :]
        assert len(tail) >= 5
        assert all(b.lam < a.lam for a, b in zip(tail, tail[1:]))

    def test_one_nonpositive_eigenvalue_past_fold(self, rect_branch_coarse):
        idx = rect_branch_coarse.critical_points[0]["index"]
        post = rect_branch_coarse.points[idx + 1 : idx + 4]
        assert post
        for p in post:
            assert nonpositive_count(p.spectrum) == 1

    def test_landmark_energies_ordered(self, rect_branch_coarse):
        lm = rect_branch_coarse.landmarks
        assert lm["E0"] < lm["E_8pi"] <= lm["E_star"]

    def test_arclength_slope_consistent_with_traversal(self, rect_branch_coarse):
        idx = rect_branch_coarse.critical_points[0]["index"]
        before = rect_branch_coarse.points[max(1, idx - 3)]
        after = rect_branch_coarse.points[
            min(len(rect_branch_coarse.points) - 1, idx + 3)
        ]
        assert before.dlambda_ds > 0
        assert after.dlambda_ds < 0


class TestConcentration:
    def test_uniform_state_spreads_mass(self, disk16):
        sol = newton_solve(disk16, 0.0, np.zeros(disk16.n_nodes))
        report = detect_concentration(sol, 0.35)
        # peak sits near the disk center, so the window holds ~radius^2 mass
        assert report.mass_in_window == pytest.approx(0.35**2, abs=0.02)
        assert not report.concentrated
        assert report.max_u == 0.0

    def test_peaked_state_matches_frozen_oracle(self):
        # evaluate the detector on the closed-form state itself: frozen
        # values pin the quadrature, independent of branch-position shifts
        mesh = Mesh(UnitDisk(), 64)
        lam, psi = family_state(mesh, 79.0)
        assert lam == pytest.approx(7.9 * math.pi, rel=1e-15)
        sol = make_solution(mesh, lam, psi)
        report = detect_concentration(sol, 0.35)
        assert report.concentrated
        assert report.max_u == pytest.approx(DISK_MAX_U_AT_79, rel=2e-3)
        assert report.mass_in_window == pytest.approx(DISK_MASS_R035_AT_79, rel=1e-2)
        narrow = detect_concentration(sol, 0.25)
        assert narrow.mass_in_window == pytest.approx(DISK_MASS_R025_AT_79, rel=1e-2)
        assert not narrow.concentrated

    def test_newton_state_near_eight_pi_is_concentrated(self):
        mesh = Mesh(UnitDisk(), 64)
        lam, psi = family_state(mesh, 79.0)
        sol = newton_solve(mesh, lam, psi)
        assert detect_concentration(sol, 0.35).concentrated

    def test_mass_monotone_in_window_radius(self):
        mesh = Mesh(UnitDisk(), 32)
        lam, psi = family_state(mesh, 9.0)
        sol = newton_solve(mesh, lam, psi)
        masses = [
            detect_concentration(sol, r).mass_in_window
            for r in (0.2, 0.35, 0.5, 0.8)
        ]
        assert all(b > a for a, b in zip(masses, masses[1:]))


class TestClassification:
    def test_family_parametrization_sanity(self):
        assert DISK_FAMILY_LAMBDA[1.0] == pytest.approx(4.0 * math.pi, rel=1e-15)

    def test_truncated_branch_is_undetermined(self, disk16):
        controls = ContinuationControls()
        branch = trace_branch(disk16, controls, lambda_max=4.0)
        assert branch.termination is Termination.LAMBDA_CAP
        assert branch.kind is DomainKind.UNDETERMINED
