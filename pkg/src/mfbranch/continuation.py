"""Global branch tracing: tangents, natural and pseudo-arclength continuation.

The solution branch starts at multiplier zero and is traced in two phases:

  1. *natural* continuation — the multiplier is the parameter; a tangent-based
     predictor feeds a damped Newton corrector; adaptive steps grow after easy
     solves and halve on failures. This runs while the first constrained
     eigenvalue stays safely positive.

  2. *pseudo-arclength* continuation — once the first eigenvalue drops below a
     hand-off threshold the parametrization switches to arclength: the state
     and the multiplier become joint unknowns of a bordered Newton system with
     a secant predictor, which steps through folds where the multiplier
     reverses direction.

Along the way each accepted point records its constrained spectrum, the local
slope dlambda/ds, and (in the arclength phase) the fold coefficient — the
weighted projection of the centered stream function onto the first eigenfield
oriented along the traversal. Critical points (zeros of the first eigenvalue)
are located by sign change, classified as Fold (slope reverses) or Flex
(slope touches zero and keeps its sign), and interpolated for the landmark
table. Termination is always explicit: multiplier cap, energy cap, detected
concentration of the density, or step underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import (
    DegenerateFoldError,
    NearFoldError,
    NewtonNonConvergence,
    NumericalError,
)
from .mesh import Field, Mesh
from .meanfield import (
    Solution,
    density,
    make_solution,
    newton_solve,
    solve_linearized,
)
from .spectral import Spectrum, constrained_spectrum

EIGHT_PI = 8.0 * math.pi


class FoldFlag(str, Enum):
    NONE = "none"
    FOLD = "fold"
    FLEX = "flex"


class DomainKind(str, Enum):
    FIRST_KIND = "FirstKind"
    SECOND_KIND = "SecondKind"
    UNDETERMINED = "Undetermined"


class Termination(str, Enum):
    LAMBDA_CAP = "LambdaCap"
    ENERGY_CAP = "EnergyCap"
    CONCENTRATION = "Concentration"
    STEP_FAILURE = "StepFailure"


@dataclass(frozen=True)
class ContinuationControls:
    """Tunable knobs of the tracer; defaults give desk-scale runs."""

    step0: float = 0.1  # initial natural step in the multiplier
    max_step: float = 0.45  # natural step ceiling
    step_rel: float = 0.12  # relative step cap: dl <= step_rel * max(lam, 1)
    min_step: float = 1e-8  # underflow threshold (both phases)
    growth: float = 1.3  # step growth after easy correctors
    easy_iters: int = 4  # corrector iterations counted as "easy"
    sigma_switch: float = 0.5  # hand-off threshold on the first eigenvalue
    theta: float = 0.5  # arclength metric weight on the state part
    ds0: float | None = None  # initial arclength step (None: from hand-off)
    max_ds: float = 0.5
    lambda_cap: float = 16.0 * math.pi
    energy_cap_factor: float = 20.0  # cap = factor * uniform-state energy
    energy_cap: float | None = None  # explicit override
    max_points: int = 1500
    max_critical_points: int = 8
    energy_step_frac: float = 0.03  # cap per-step energy gain at this * E0
    k_eigen: int = 6
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    window_radius: float = 0.35
    mass_threshold: float = 0.9
    max_u_threshold: float = 5.0
    max_u_divergence: float = 8.0  # unbounded-growth classification threshold
    slope_dead_band: float = 1e-6
    spectra_window: int = 8  # trailing points that keep full eigenfields


@dataclass(frozen=True, eq=False)
class TangentField:
    """Multiplier-derivative of the state along the branch."""

    v: Field
    mean_v: float
    dE_dlambda: float


@dataclass(frozen=True, eq=False)
class BranchPoint:
    solution: Solution
    s: float
    spectrum: Spectrum
    tangent: TangentField | None
    dlambda_ds: float
    fold_flag: FoldFlag = FoldFlag.NONE
    a_star: float | None = None

    @property
    def lam(self) -> float:
        return self.solution.lam

    @property
    def energy(self) -> float:
        return self.solution.energy

    @property
    def sigma1(self) -> float:
        return float(self.spectrum.sigmas[0])


@dataclass
class Branch:
    points: list
    landmarks: dict = field(default_factory=dict)
    kind: DomainKind = DomainKind.UNDETERMINED
    termination: Termination | None = None
    notes: list = field(default_factory=list)
    critical_points: list = field(default_factory=list)
    stopped_for_handoff: bool = False


@dataclass(frozen=True)
class ConcentrationReport:
    max_u: float
    mass_in_window: float
    concentrated: bool


# ----------------------------------------------------------------------
# tangent field
# ----------------------------------------------------------------------


def tangent(sol: Solution) -> TangentField:
    """Solve the branch-tangent equation at a converged state.

    The derivative v of the state with respect to the multiplier satisfies
    the linearized equation with the centered state as source; its weighted
    mean is the energy derivative dE/dlambda. Raises a fold-proximity error
    when the linearized operator is singular.
    """
    mesh = sol.mesh
    rhs = mesh.weights * sol.rho * sol.geometry.center(sol.psi)
    v, _ = solve_linearized(mesh, sol.lam, sol.rho, rhs)
    mean_v = sol.geometry.mean(v)
    return TangentField(v=v, mean_v=mean_v, dE_dlambda=mean_v)


def tangent_cross_identity_error(sol: Solution, tf: TangentField) -> float:
    """Relative defect of dE/dlambda against its integration-by-parts form."""
    geo = sol.geometry
    centered_psi = geo.center(sol.psi)
    centered_v = geo.center(tf.v)
    other = geo.inner(centered_psi, centered_psi) + sol.lam * geo.inner(
        centered_psi, centered_v
    )
    return abs(tf.dE_dlambda - other) / max(abs(tf.dE_dlambda), abs(other), 1e-300)


# ----------------------------------------------------------------------
# concentration diagnostics
# ----------------------------------------------------------------------


def detect_concentration(
    sol: Solution,
    window_radius: float,
    mass_threshold: float = 0.9,
    max_u_threshold: float = 5.0,
) -> ConcentrationReport:
    """Mass fraction of the density near its peak, and the peak log-density."""
    mesh = sol.mesh
    u = sol.lam * sol.psi
    peak = int(np.argmax(u))
    dist2 = (mesh.x - mesh.x[peak]) ** 2 + (mesh.y - mesh.y[peak]) ** 2
    inside = dist2 <= window_radius**2
    mass = float(np.sum(mesh.weights[inside] * sol.rho[inside]))
    max_u = float(u[peak])
    return ConcentrationReport(
        max_u=max_u,
        mass_in_window=mass,
        concentrated=bool(mass > mass_threshold and max_u > max_u_threshold),
    )


# ----------------------------------------------------------------------
# helpers shared by both phases
# ----------------------------------------------------------------------


def _metric(mesh: Mesh, theta: float, dpsi: Field, dlam: float) -> float:
    return math.sqrt(
        theta * float(mesh.weights @ (dpsi * dpsi)) + (1.0 - theta) * dlam * dlam
    )


def _energy_cap(mesh: Mesh, controls: ContinuationControls) -> float:
    if controls.energy_cap is not None:
        return controls.energy_cap
    return controls.energy_cap_factor * mesh.mean_green_energy()


def _energy_step_cap(mesh: Mesh, controls: ContinuationControls) -> float:
    """Largest admissible per-step energy gain; keeps the energy grid dense
    enough for the downstream finite-difference identities."""
    return controls.energy_step_frac * mesh.mean_green_energy()


def _slim_spectra(points: list, window: int) -> None:
    """Drop stored eigenfields on points older than the trailing window."""
    for i in range(max(0, len(points) - window)):
        pt = points[i]
        if pt.spectrum.phis:
            points[i] = replace(pt, spectrum=replace(pt.spectrum, phis=()))


def _fold_coefficient(prev: Solution, sol: Solution, spectrum: Spectrum) -> float:
    """Projection of the centered state on the first eigenfield, oriented
    along the traversal direction (positive at a nondegenerate fold)."""
    geo = sol.geometry
    centered_psi = geo.center(sol.psi)
    centered_phi = geo.center(spectrum.phis[0])
    orientation = geo.inner(centered_phi, sol.psi - prev.psi)
    sign = 1.0 if orientation >= 0 else -1.0
    return sign * geo.inner(centered_psi, centered_phi)


def _checked_caps(
    point: BranchPoint,
    controls: ContinuationControls,
    e_cap: float,
) -> Termination | None:
    if point.lam >= controls.lambda_cap - 1e-12:
        return Termination.LAMBDA_CAP
    if point.energy >= e_cap:
        return Termination.ENERGY_CAP
    report = detect_concentration(
        point.solution,
        controls.window_radius,
        controls.mass_threshold,
        controls.max_u_threshold,
    )
    if report.concentrated:
        return Termination.CONCENTRATION
    return None


# ----------------------------------------------------------------------
# natural-parameter phase
# ----------------------------------------------------------------------


def continue_natural(
    mesh: Mesh,
    lambda_start: float,
    lambda_max: float,
    step: float,
    controls: ContinuationControls = ContinuationControls(),
    start_guess: Field | None = None,
) -> Branch:
    """Trace the branch with the multiplier as parameter.

    Stops on hand-off (first constrained eigenvalue at or below the switch
    threshold), on reaching ``lambda_max`` (multiplier-cap termination), on
    the energy cap, on detected concentration, or on step underflow.
    """
    if lambda_start < 0:
        raise ValueError(f"lambda_start must be nonnegative, got {lambda_start}")
    if not (lambda_max > lambda_start):
        raise ValueError("lambda_max must exceed lambda_start")
    branch = Branch(points=[])
    e_cap = _energy_cap(mesh, controls)
    de_cap = _energy_step_cap(mesh, controls)
    guess = (
        np.zeros(mesh.n_nodes) if start_guess is None else mesh.check_field(start_guess)
    )
    sol = newton_solve(
        mesh, lambda_start, guess, controls.newton_tol, controls.newton_max_iter
    )
    spec = constrained_spectrum(sol, controls.k_eigen)
    tf = tangent(sol) if spec.sigmas[0] > controls.sigma_switch else None
    dl_ds = (
        1.0
        / _metric(mesh, controls.theta, tf.v, 1.0)
        if tf is not None
        else 0.0
    )
    branch.points.append(
        BranchPoint(
            solution=sol, s=0.0, spectrum=spec, tangent=tf, dlambda_ds=dl_ds
        )
    )

    step_size = step
    while True:
        head = branch.points[-1]
        if head.sigma1 <= controls.sigma_switch:
            branch.stopped_for_handoff = True
            return branch
        cap = _checked_caps(head, controls, e_cap)
        if cap is not None:
            branch.termination = cap
            return branch
        if head.lam >= lambda_max - 1e-12:
            branch.termination = Termination.LAMBDA_CAP
            return branch
        if len(branch.points) >= controls.max_points:
            branch.termination = Termination.STEP_FAILURE
            branch.notes.append("maximum point count reached in natural phase")
            return branch

        dl = min(
            step_size,
            lambda_max - head.lam,
            controls.step_rel * max(head.lam, 1.0),
        )
        if head.tangent is not None and head.tangent.dE_dlambda > 0:
            dl = min(dl, 0.8 * de_cap / head.tangent.dE_dlambda)
        new_sol = None
        while dl >= controls.min_step:
            predictor = (
                head.solution.psi + dl * head.tangent.v
                if head.tangent is not None
                else head.solution.psi
            )
            try:
                new_sol = newton_solve(
                    mesh,
                    head.lam + dl,
                    predictor,
                    controls.newton_tol,
                    controls.newton_max_iter,
                )
                break
            except (NewtonNonConvergence, NearFoldError):
                dl *= 0.5
        if new_sol is None:
            branch.termination = Termination.STEP_FAILURE
            branch.notes.append(
                f"natural step underflow below {controls.min_step} at "
                f"multiplier {head.lam:.6g}"
            )
            return branch

        if new_sol.energy <= head.energy:
            branch.termination = Termination.STEP_FAILURE
            branch.notes.append(
                f"energy failed to increase at multiplier {new_sol.lam:.6g}; "
                "branch parametrization premise violated"
            )
            return branch

        spec = constrained_spectrum(new_sol, controls.k_eigen)
        tf = None
        if spec.sigmas[0] > controls.sigma_switch:
            try:
                tf = tangent(new_sol)
            except NearFoldError:
                tf = None
        ds = _metric(
            mesh, controls.theta, new_sol.psi - head.solution.psi, dl
        )
        dl_ds = (
            1.0 / _metric(mesh, controls.theta, tf.v, 1.0)
            if tf is not None
            else dl / ds
        )
        branch.points.append(
            BranchPoint(
                solution=new_sol,
                s=head.s + ds,
                spectrum=spec,
                tangent=tf,
                dlambda_ds=dl_ds,
            )
        )
        _slim_spectra(branch.points, controls.spectra_window)
        if new_sol.newton_iterations <= controls.easy_iters:
            step_size = min(step_size * controls.growth, controls.max_step)


# ----------------------------------------------------------------------
# pseudo-arclength phase
# ----------------------------------------------------------------------


def _arclength_correct(
    mesh: Mesh,
    psi: Field,
    lam: float,
    psi_dot: Field,
    lam_dot: float,
    theta: float,
    tol: float,
    max_iter: int,
) -> tuple[Field, float, int]:
    """Bordered Newton corrector for one arclength step.

    Unknowns are the state update, the auxiliary scalar absorbing the
    rank-one density term, and the multiplier update; the last row is the
    arclength normalization built from the incoming tangent direction.
    """
    w = mesh.weights
    psi_pred, lam_pred = psi.copy(), lam

    def norms(p: Field, l: float):
        rho = density(mesh, l, p)
        weak = mesh.laplacian @ p - w * rho
        arc = theta * float((w * psi_dot) @ (p - psi_pred)) + (
            1.0 - theta
        ) * lam_dot * (l - lam_pred)
        strong = weak / w
        return rho, weak, arc, math.sqrt(mesh.integrate(strong * strong) + arc * arc)

    rho, weak, arc, norm = norms(psi, lam)
    for iteration in range(1, max_iter + 1):
        if norm <= tol:
            return psi, lam, iteration - 1
        p_vec = w * rho
        A = mesh.laplacian - lam * sps.diags(p_vec)
        c = -(w * rho * (psi - float(p_vec @ psi)))
        row_psi = theta * (w * psi_dot)
        bordered = sps.bmat(
            [
                [A, lam * p_vec.reshape(-1, 1), c.reshape(-1, 1)],
                [p_vec.reshape(1, -1), -np.ones((1, 1)), np.zeros((1, 1))],
                [
                    sps.csr_matrix(row_psi.reshape(1, -1)),
                    np.zeros((1, 1)),
                    np.full((1, 1), (1.0 - theta) * lam_dot),
                ],
            ],
            format="csc",
        )
        rhs = np.concatenate([-weak, [0.0], [-arc]])
        try:
            update = spla.splu(bordered).solve(rhs)
        except RuntimeError as exc:
            raise NearFoldError(f"bordered arclength solve failed: {exc}") from exc
        if not np.all(np.isfinite(update)):
            raise NearFoldError("bordered arclength solve returned non-finite values")
        dpsi, dlam = update[: mesh.n_nodes], float(update[-1])
        scale = 1.0
        accepted = False
        for _ in range(11):
            cand_psi = psi + scale * dpsi
            cand_lam = lam + scale * dlam
            try:
                cand = norms(cand_psi, cand_lam)
            except NumericalError:
                scale *= 0.5
                continue
            if cand[3] < norm:
                psi, lam = cand_psi, cand_lam
                rho, weak, arc, norm = cand
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            raise NewtonNonConvergence(
                "arclength corrector stalled", last_residual=norm, iterations=iteration
            )
    if norm <= tol:
        return psi, lam, max_iter
    raise NewtonNonConvergence(
        "arclength corrector exhausted iterations",
        last_residual=norm,
        iterations=max_iter,
    )


def continue_fold(
    head: BranchPoint,
    controls: ContinuationControls = ContinuationControls(),
    prev: BranchPoint | None = None,
) -> Branch:
    """Extend the branch by pseudo-arclength steps through critical points.

    Uses a secant predictor (or the stored tangent when no predecessor is
    given) and a bordered Newton corrector with the joint state-multiplier
    unknown. Records the slope dlambda/ds and the oriented fold coefficient
    at every accepted point, counts first-eigenvalue zero crossings, and
    terminates on the standard caps, concentration, step underflow, or the
    critical-point guard. A vanishing fold coefficient at a crossing raises
    a degenerate-fold error.
    """
    mesh = head.solution.mesh
    e_cap = _energy_cap(mesh, controls)
    de_cap = _energy_step_cap(mesh, controls)
    theta = controls.theta
    branch = Branch(points=[head])

    if prev is not None:
        dpsi = head.solution.psi - prev.solution.psi
        dlam = head.lam - prev.lam
    elif head.tangent is not None:
        dlam = 1.0
        dpsi = head.tangent.v.copy()
    else:
        raise ValueError("continue_fold needs a predecessor point or a tangent")
    ds_prev = _metric(mesh, theta, dpsi, dlam)
    if ds_prev == 0.0:
        raise ValueError("degenerate initial direction for arclength phase")
    psi_dot, lam_dot = dpsi / ds_prev, dlam / ds_prev

    ds = controls.ds0 if controls.ds0 is not None else min(ds_prev, controls.max_ds)
    crossings = 0
    while True:
        current = branch.points[-1]
        cap = _checked_caps(current, controls, e_cap)
        if cap is not None:
            branch.termination = cap
            return branch
        if len(branch.points) >= controls.max_points:
            branch.termination = Termination.STEP_FAILURE
            branch.notes.append("maximum point count reached in arclength phase")
            return branch

        accepted = None
        while ds >= controls.min_step:
            pred_psi = current.solution.psi + ds * psi_dot
            pred_lam = current.lam + ds * lam_dot
            try:
                psi_new, lam_new, iters = _arclength_correct(
                    mesh,
                    pred_psi,
                    pred_lam,
                    psi_dot,
                    lam_dot,
                    theta,
                    controls.newton_tol,
                    controls.newton_max_iter,
                )
                if lam_new <= 0:
                    raise NewtonNonConvergence(
                        "multiplier left the positive axis",
                        last_residual=0.0,
                        iterations=iters,
                    )
                accepted = (psi_new, lam_new, iters)
                break
            except (NewtonNonConvergence, NearFoldError):
                ds *= 0.5
        if accepted is None:
            branch.termination = Termination.STEP_FAILURE
            branch.notes.append(
                f"arclength step underflow below {controls.min_step} at "
                f"multiplier {current.lam:.6g}"
            )
            return branch

        psi_new, lam_new, iters = accepted
        sol = make_solution(mesh, lam_new, psi_new, newton_iterations=iters)
        if sol.energy <= current.energy:
            branch.termination = Termination.STEP_FAILURE
            branch.notes.append(
                f"energy failed to increase at multiplier {sol.lam:.6g}; "
                "branch parametrization premise violated"
            )
            return branch
        spec = constrained_spectrum(sol, controls.k_eigen)
        dpsi = sol.psi - current.solution.psi
        dlam = sol.lam - current.lam
        step_len = _metric(mesh, theta, dpsi, dlam)
        a_star = _fold_coefficient(current.solution, sol, spec)
        point = BranchPoint(
            solution=sol,
            s=current.s + step_len,
            spectrum=spec,
            tangent=None,
            dlambda_ds=dlam / step_len,
            a_star=a_star,
        )
        branch.points.append(point)
        _slim_spectra(branch.points, controls.spectra_window)

        sig_prev, sig_new = current.sigma1, point.sigma1
        if sig_prev * sig_new < 0:
            crossings += 1
            near = point if abs(sig_new) <= abs(sig_prev) else current
            margin = 1e-8 * near.solution.psi0_norm
            near_a = near.a_star if near.a_star is not None else a_star
            if near_a is None or near_a <= margin:
                raise DegenerateFoldError(
                    f"fold coefficient {near_a!r} at multiplier "
                    f"{near.lam:.6g} is not positive beyond margin {margin:.3g}"
                )
            if crossings >= controls.max_critical_points:
                branch.termination = Termination.STEP_FAILURE
                branch.notes.append(
                    f"critical-point guard reached ({crossings} crossings)"
                )
                return branch

        psi_dot, lam_dot = dpsi / step_len, dlam / step_len
        energy_gain = sol.energy - current.energy
        if energy_gain > de_cap:
            ds = max(0.5 * ds, controls.min_step)
        elif iters <= controls.easy_iters and energy_gain < 0.5 * de_cap:
            ds = min(ds * controls.growth, controls.max_ds)


# ----------------------------------------------------------------------
# critical-point classification and branch assembly
# ----------------------------------------------------------------------


def classify_critical_points(
    points: list, dead_band: float = 1e-6
) -> list:
    """Locate and classify zeros of the first eigenvalue along the points.

    Returns records {index, kind, lambda_star, E_star}; marks the nearest
    point's fold_flag in place. A sign reversal of dlambda/ds across the
    crossing (judged over up to three steps on each side) is a Fold; a slope
    that touches the dead band but keeps its sign is a Flex.
    """
    records = []
    sig = [p.sigma1 for p in points]
    for i in range(len(points) - 1):
        if sig[i] == 0.0 or sig[i] * sig[i + 1] >= 0:
            continue
        w = sig[i] / (sig[i] - sig[i + 1])
        lam_star = points[i].lam + w * (points[i + 1].lam - points[i].lam)
        e_star = points[i].energy + w * (points[i + 1].energy - points[i].energy)
        before = [
            points[j].dlambda_ds
            for j in range(max(0, i - 2), i + 1)
            if abs(points[j].dlambda_ds) > dead_band
        ]
        after = [
            points[j].dlambda_ds
            for j in range(i + 1, min(len(points), i + 4))
            if abs(points[j].dlambda_ds) > dead_band
        ]
        if before and after and any(before[-1] * a < 0 for a in after):
            kind = FoldFlag.FOLD
        elif before and after:
            kind = FoldFlag.FLEX
        else:
            kind = FoldFlag.FOLD  # slope pinned inside dead band: treat as fold
        mark = i if abs(sig[i]) <= abs(sig[i + 1]) else i + 1
        points[mark] = replace(points[mark], fold_flag=kind)
        records.append(
            {
                "index": mark,
                "kind": kind,
                "lambda_star": lam_star,
                "E_star": e_star,
            }
        )
    return records


def sign_agreement_violations(
    points: list, sigma_tol: float = 0.05, slope_tol: float = 1e-6
) -> list:
    """Indices where sign(sigma_1) disagrees with sign(dlambda/ds).

    Points too close to criticality (either quantity inside its tolerance)
    are exempt, matching the away-from-criticality statement being checked.
    """
    bad = []
    for idx, p in enumerate(points):
        if abs(p.sigma1) <= sigma_tol or abs(p.dlambda_ds) <= slope_tol:
            continue
        if math.copysign(1.0, p.sigma1) != math.copysign(1.0, p.dlambda_ds):
            bad.append(idx)
    return bad


def classify_domain_kind(
    branch: Branch,
    lambda_probe: float = EIGHT_PI,
    max_u_divergence: float = 8.0,
) -> DomainKind:
    """Empirical domain classification from the traced branch.

    Second kind: the branch crosses safely above the probe multiplier with a
    bounded peak log-density (a solution exists past the probe). First kind:
    the peak log-density exceeds the divergence threshold while the
    multiplier never climbs meaningfully above the probe. Anything else is
    undetermined at this resolution.
    """
    if not branch.points:
        return DomainKind.UNDETERMINED
    margin = 1.02 * lambda_probe
    for p in branch.points:
        if p.lam >= margin and p.solution.max_u < max_u_divergence:
            return DomainKind.SECOND_KIND
    max_lam = max(p.lam for p in branch.points)
    max_u = max(p.solution.max_u for p in branch.points)
    if max_u >= max_u_divergence and max_lam <= margin:
        return DomainKind.FIRST_KIND
    return DomainKind.UNDETERMINED


def _interpolate_energy_at_lambda(points: list, lam_target: float) -> float | None:
    """Energy at the first upward crossing of a multiplier value."""
    for i in range(len(points) - 1):
        a, b = points[i].lam, points[i + 1].lam
        if a < lam_target <= b:
            w = (lam_target - a) / (b - a)
            return points[i].energy + w * (points[i + 1].energy - points[i].energy)
    return None


def _assemble_landmarks(branch: Branch, mesh: Mesh) -> dict:
    points = branch.points
    landmarks: dict = {
        "E0": mesh.mean_green_energy(),
        "E_8pi": None,
        "lambda_star": None,
        "E_star": None,
        "E_m": None,
        "E_d": None,
    }
    if branch.kind is DomainKind.SECOND_KIND:
        landmarks["E_8pi"] = _interpolate_energy_at_lambda(points, EIGHT_PI)
    folds = [r for r in branch.critical_points if r["kind"] is FoldFlag.FOLD]
    if folds:
        landmarks["lambda_star"] = folds[0]["lambda_star"]
        landmarks["E_star"] = folds[0]["E_star"]
    if points:
        peak = int(np.argmax([p.lam for p in points]))
        if 0 < peak < len(points) - 1:
            landmarks["E_m"] = points[peak].energy
    return landmarks


def trace_branch(
    mesh: Mesh,
    controls: ContinuationControls = ContinuationControls(),
    lambda_start: float = 0.0,
    lambda_max: float | None = None,
) -> Branch:
    """Trace the full branch: natural phase, hand-off, arclength phase.

    Returns a finalized Branch with critical points classified, kind
    determined, landmarks assembled, and an explicit termination cause.
    """
    lambda_max = controls.lambda_cap if lambda_max is None else lambda_max
    branch = continue_natural(
        mesh, lambda_start, lambda_max, controls.step0, controls
    )
    if branch.stopped_for_handoff and len(branch.points) >= 1:
        head = branch.points[-1]
        prev = branch.points[-2] if len(branch.points) >= 2 else None
        if prev is None and head.tangent is None:
            branch.termination = Termination.STEP_FAILURE
            branch.notes.append(
                "hand-off reached with no usable continuation direction"
            )
            branch.stopped_for_handoff = False
            branch.critical_points = []
            branch.kind = classify_domain_kind(branch)
            branch.landmarks = _assemble_landmarks(branch, mesh)
            return branch
        try:
            extension = continue_fold(head, controls, prev=prev)
            branch.points.extend(extension.points[1:])
            branch.notes.extend(extension.notes)
            branch.termination = extension.termination
        except DegenerateFoldError as exc:
            branch.termination = Termination.STEP_FAILURE
            branch.notes.append(f"degenerate fold: {exc}")
        branch.stopped_for_handoff = False

    branch.critical_points = classify_critical_points(
        branch.points, controls.slope_dead_band
    )
    violations = sign_agreement_violations(branch.points)
    if violations:
        branch.notes.append(
            f"sign agreement between first eigenvalue and slope violated at "
            f"indices {violations}"
        )
    branch.kind = classify_domain_kind(
        branch, max_u_divergence=controls.max_u_divergence
    )
    branch.landmarks = _assemble_landmarks(branch, mesh)
    if branch.termination is None:
        branch.termination = Termination.STEP_FAILURE
        branch.notes.append("tracer ended without explicit termination")
    return branch
