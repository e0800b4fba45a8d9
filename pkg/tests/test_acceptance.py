"""Acceptance suite: one test (and one pass/fail line) per primary criterion.

Each criterion prints ``PASS``/``FAIL`` with the measured quantity and its
tolerance, then asserts. Run with ``pytest -v`` to get the per-criterion
lines; printed details surface for any failing criterion.
"""

import json
import math

import numpy as np
import pytest

from mfbranch.cli import main
from mfbranch.continuation import (
    EIGHT_PI,
    ContinuationControls,
    DomainKind,
    FoldFlag,
    Termination,
    sign_agreement_violations,
    tangent,
    trace_branch,
)
from mfbranch.meanfield import newton_solve
from mfbranch.mesh import Mesh, Rectangle, UnitDisk
from mfbranch.spectral import (
    constrained_spectrum,
    dense_constrained_spectrum,
    nonpositive_count,
    proportionality_check,
    quadratic_form,
)
from mfbranch.thermo import energy_parametrize, verify_entropy_identities

from reference_values import DISK_DE_DLAMBDA_AT_0, DISK_E0


def report(criterion: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
    print(line)
    assert ok, line


def spread_indices(pool: list[int], count: int) -> list[int]:
    if len(pool) <= count:
        return pool
    picks = np.linspace(0, len(pool) - 1, count).round().astype(int)
    return [pool[i] for i in sorted(set(int(i) for i in picks))]


def family_exact(mesh: Mesh, t: float) -> tuple[float, np.ndarray]:
    lam = 8.0 * math.pi * t / (1.0 + t)
    u = 2.0 * np.log((1.0 + t) / (1.0 + t * mesh.r**2))
    return lam, u


@pytest.fixture(scope="module")
def disk_meshes():
    return {rings: Mesh(UnitDisk(), rings) for rings in (32, 64, 128)}


@pytest.fixture(scope="module")
def square_branch():
    return trace_branch(Mesh(Rectangle(1.0, 1.0), 24), ContinuationControls())


@pytest.fixture(scope="module")
def disk_curve(disk_branch_coarse):
    return energy_parametrize(disk_branch_coarse)


@pytest.fixture(scope="module")
def rect_curve(rect_branch_coarse):
    return energy_parametrize(rect_branch_coarse)


def test_criterion_01_disk_analytic_family(disk_meshes):
    """Closed-form radial states are reproduced with second-order accuracy."""
    rings_list = (32, 64, 128)
    worst_fine = 0.0
    worst_order = np.inf
    for t in (0.5, 1.0, 3.0):
        errors = []
        for rings in rings_list:
            mesh = disk_meshes[rings]
            lam, u_exact = family_exact(mesh, t)
            # warm start on the exact state; 1e-9 stays below the roundoff
            # floor of the strong residual on the finest grid
            sol = newton_solve(mesh, lam, u_exact / lam, tol=1e-9)
            errors.append(float(np.max(np.abs(lam * np.asarray(sol.psi) - u_exact))))
        worst_fine = max(worst_fine, errors[-1])
        slope, _ = np.polyfit(
            np.log([1.0 / r for r in rings_list]), np.log(errors), 1
        )
        worst_order = min(worst_order, float(slope))
    report(
        "criterion 01 disk analytic family",
        worst_fine <= 5e-3 and worst_order >= 1.8,
        f"sup err {worst_fine:.3e} at 128 rings (tol 5e-3), "
        f"min convergence order {worst_order:.2f} (need >= 1.8)",
    )


def test_criterion_02_energy_constants(disk_meshes):
    """Uniform-state energy and the zero-multiplier energy slope on the disk."""
    mesh = disk_meshes[128]
    e0 = mesh.mean_green_energy()
    e0_err = abs(e0 - DISK_E0) / DISK_E0
    sol = newton_solve(mesh, 0.0, np.zeros(mesh.n_nodes))
    slope = tangent(sol).dE_dlambda
    slope_err = abs(slope - DISK_DE_DLAMBDA_AT_0) / DISK_DE_DLAMBDA_AT_0
    report(
        "criterion 02 energy constants",
        e0_err <= 1e-4 and slope_err <= 1e-3,
        f"E0 rel err {e0_err:.3e} (tol 1e-4), "
        f"dE/dlambda(0) rel err {slope_err:.3e} (tol 1e-3)",
    )


def test_criterion_03_stability_window(disk_branch_coarse, square_branch):
    """First constrained eigenvalue stays positive below 0.99 * 8*pi."""
    cutoff = 0.99 * EIGHT_PI
    mins = {}
    for name, branch in (("disk", disk_branch_coarse), ("square", square_branch)):
        window = [p.sigma1 for p in branch.points if p.lam <= cutoff]
        assert window, f"{name} branch has no points below the cutoff"
        mins[name] = min(window)
    ok = all(v > 0 for v in mins.values())
    report(
        "criterion 03 stability window",
        ok,
        "min sigma1 below 0.99*8pi: "
        f"disk {mins['disk']:.4f}, square {mins['square']:.4f} (need > 0)",
    )


def test_criterion_04_tangent_identity(disk_branch_coarse):
    """Finite-difference energy slope matches the linearized-response mean."""
    points = disk_branch_coarse.points
    pool = [i for i, p in enumerate(points) if p.sigma1 > 0.5]
    sample = spread_indices(pool, 10)
    assert len(sample) == 10
    worst = 0.0
    for i in sample:
        p = points[i]
        sol = p.solution
        tf = p.tangent or tangent(sol)
        # shrink the probe as criticality approaches: the energy-vs-multiplier
        # curve steepens like the reciprocal of the first eigenvalue, and a
        # fixed-width stencil there measures truncation error, not the slope
        delta = 1e-3 * max(sol.lam, 1.0) * min(1.0, p.sigma1 / 20.0)
        hi = newton_solve(sol.mesh, sol.lam + delta, np.asarray(sol.psi))
        lo = newton_solve(sol.mesh, sol.lam - delta, np.asarray(sol.psi))
        fd = (hi.energy - lo.energy) / (2.0 * delta)
        worst = max(worst, abs(fd - tf.dE_dlambda) / abs(tf.dE_dlambda))
    report(
        "criterion 04 tangent identity",
        worst <= 1e-4,
        f"max rel err {worst:.3e} over 10 branch points (tol 1e-4)",
    )


def test_criterion_05_proportionality(disk_branch_coarse):
    """Mean/energy coefficient identity for the leading four eigenpairs."""
    points = disk_branch_coarse.points
    pool = [i for i, p in enumerate(points) if p.lam > 0]
    sample = spread_indices(pool, 10)
    assert len(sample) == 10
    worst = 0.0
    for i in sample:
        errs = proportionality_check(points[i].solution, points[i].spectrum)
        worst = max(worst, float(np.max(errs[:4])))
    report(
        "criterion 05 proportionality identity",
        worst <= 1e-6,
        f"max rel err {worst:.3e} over 10 points x 4 modes (tol 1e-6)",
    )


def test_criterion_06_eigenfunction_form_identity(disk_branch_coarse):
    """Stability form evaluates to -(sigma/tau) on unit-norm eigenfields."""
    points = disk_branch_coarse.points
    pool = [i for i, p in enumerate(points) if p.lam > 0]
    sample = spread_indices(pool, 5)
    worst = 0.0
    for i in sample:
        sol = points[i].solution
        spectrum = constrained_spectrum(sol, k=4)
        geo = sol.geometry
        for j in range(spectrum.k_computed):
            centered = geo.center(spectrum.phis[j])
            value = quadratic_form(sol, centered)
            expected = -(spectrum.sigmas[j] / spectrum.taus[j]) * geo.inner(
                centered, centered
            )
            worst = max(worst, abs(value - expected) / max(abs(expected), 1e-10))
    report(
        "criterion 06 eigenfunction form identity",
        worst <= 1e-6,
        f"max rel err {worst:.3e} over 5 points x 4 modes (tol 1e-6)",
    )


def test_criterion_07_dense_oracle_equivalence():
    """Iterative spectra match dense decompositions on small grids."""
    worst = 0.0
    nodes = {}
    for name, spec, resolutions in (
        ("disk", UnitDisk(), range(8, 2, -1)),
        ("square", Rectangle(1.0, 1.0), range(14, 2, -1)),
    ):
        mesh = None
        for resolution in resolutions:
            candidate = Mesh(spec, resolution)
            if candidate.n_nodes <= 200:
                mesh = candidate
                break
        assert mesh is not None
        nodes[name] = mesh.n_nodes
        sol = newton_solve(mesh, 4.0, np.zeros(mesh.n_nodes))
        spectrum = constrained_spectrum(sol, k=4)
        dense = dense_constrained_spectrum(sol, 4)
        worst = max(
            worst, float(np.max(np.abs(spectrum.sigmas[:4] - dense[:4])))
        )
    report(
        "criterion 07 dense-oracle equivalence",
        worst <= 1e-8,
        f"max abs gap {worst:.3e} on disk({nodes['disk']} nodes) and "
        f"square({nodes['square']} nodes) grids (tol 1e-8)",
    )


def test_criterion_08_entropy_identity(disk_curve):
    """Finite-differenced entropy slope equals the negated multiplier."""
    result = verify_entropy_identities(disk_curve)
    report(
        "criterion 08 entropy identity",
        result.max_rel_error <= 1e-3,
        f"max rel err {result.max_rel_error:.3e} across "
        f"{result.rows_checked} rows (tol 1e-3)",
    )


def test_criterion_09_second_kind_scenario(rect_branch_coarse, rect_curve):
    """Aspect-4 rectangle: bounded crossing, fold, and entropy inflection."""
    branch = rect_branch_coarse
    points = branch.points
    checks: list[tuple[str, bool]] = []

    checks.append(("classified second kind", branch.kind is DomainKind.SECOND_KIND))
    crossing = [p for p in points if p.lam >= EIGHT_PI]
    checks.append(
        (
            "crosses 8*pi with bounded peak amplitude",
            bool(crossing) and min(p.solution.max_u for p in crossing) < 8.0,
        )
    )
    folds = [r for r in branch.critical_points if r["kind"] is FoldFlag.FOLD]
    checks.append(("fold detected", len(folds) >= 1))
    lam_star = folds[0]["lambda_star"] if folds else math.nan
    checks.append(("fold multiplier beyond 8*pi", lam_star > EIGHT_PI))

    idx = folds[0]["index"] if folds else 0
    sig_before = points[idx - 1].sigma1
    sig_after = points[min(len(points) - 1, idx + 1)].sigma1
    checks.append(("first eigenvalue changes sign", sig_before * sig_after < 0))

    checks.append(
        ("eigenvalue/slope signs agree", sign_agreement_violations(points) == [])
    )
    a_star = points[idx].a_star if folds else None
    checks.append(("fold coefficient positive", a_star is not None and a_star > 0))

    energies = [p.energy for p in points]
    checks.append(
        ("energy strictly increases", all(b > a for a, b in zip(energies, energies[1:])))
    )
    past = points[idx + 1 : idx + 4]
    checks.append(
        (
            "one nonpositive mode past the fold",
            bool(past)
            and all(nonpositive_count(p.spectrum) == 1 for p in past),
        )
    )

    flip = verify_entropy_identities(rect_curve).d2S_sign_flip_energy
    e_star = folds[0]["E_star"] if folds else math.nan
    spacing = float(np.max(np.diff([row["E"] for row in rect_curve.rows()])))
    checks.append(
        (
            "entropy concavity flips at the fold energy",
            flip is not None and abs(flip - e_star) <= 5.0 * spacing,
        )
    )

    failed = [name for name, ok in checks if not ok]
    detail = (
        f"lambda* = {lam_star:.4f} (= {lam_star / math.pi:.4f} pi), "
        f"a* = {a_star if a_star is None else format(a_star, '.4g')}, "
        f"flip at E = {flip if flip is None else format(flip, '.6g')} "
        f"vs E* = {e_star:.6g}; "
        + (f"failed sub-checks: {failed}" if failed else "all 10 sub-checks hold")
    )
    report("criterion 09 second-kind scenario", not failed, detail)


def test_criterion_10_determinism(tmp_path):
    """Two identical configured runs produce byte-identical artifacts."""
    config = {
        "domain": {"type": "rectangle", "width": 4.0, "height": 1.0},
        "resolution": 10,
        "controls": {"energy_cap": 0.025},
    }
    cfg_path = tmp_path / "rerun.json"
    cfg_path.write_text(json.dumps(config))
    outs = []
    for label in ("first", "second"):
        out = tmp_path / label
        rc = main(["run", "--config", str(cfg_path), "--out", str(out), "--quiet"])
        assert rc == 0
        outs.append(out)
    same = (outs[0] / "branch.csv").read_bytes() == (outs[1] / "branch.csv").read_bytes()
    n_rows = len((outs[0] / "branch.csv").read_text().strip().split("\n")) - 1
    report(
        "criterion 10 determinism",
        same,
        f"branch.csv byte-identical across two runs ({n_rows} rows, "
        "fold-crossing rectangle trace)",
    )
