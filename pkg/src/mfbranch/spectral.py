"""Constrained linearized spectrum and stability-form diagnostics.

The linearization of the stationary problem around a converged state leads to
the weighted eigenproblem

    -lap(phi_k) = tau_k * rho * [phi_k]_0,      tau_k = lam + sigma_k,

posed on fields with zero density-weighted mean ([.]_0 denotes centering).
With m = sqrt(w * rho) (unit vector, since the density has unit mass) the
similarity transform y = diag(m) phi turns this into a symmetric problem for
the positive semidefinite operator

    P S P,   S = diag(m) L^{-1} diag(m),   P = I - m m^T,

whose largest eigenvalues are 1/tau_k. One code path therefore serves every
multiplier value, including zero. Eigenfields are recovered through a Green
solve, which reproduces the defining equation exactly in the discrete setting
and makes the mean/energy coefficient identity hold to solver tolerance.

Also provided: the standard (uncentered-denominator) first eigenvalue via a
Sherman-Morrison-corrected pencil; the stability quadratic form

    Q(phi) = lam * int(rho phi G[rho phi]) - int(rho phi^2)

restricted to the codimension-2 subspace orthogonal (in the weighted inner
product) to the constants and to the stream function; and checkers for the
spectral-gap hypotheses used by the fold classification.

The extremal Rayleigh value reported for Q is the *least upper bound* over
the constrained subspace (the tightest stability constant): the literal
infimum of Q/norm^2 is -1 + lam * (smallest eigenvalue of the compact part)
and degenerates to -1 under refinement, carrying no stability information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import DegenerateGeometryError, NumericalError
from .mesh import Field, Mesh
from .meanfield import Solution

DEFAULT_K = 6
CLUSTER_REL_TOL = 1e-7
NONPOSITIVE_TOL = 1e-10


# ----------------------------------------------------------------------
# spectrum record
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Leading constrained eigenvalues and eigenfields at one branch point.

    Eigenfields are normalized so the centered part has unit weighted norm;
    ``sigmas`` ascend; ``taus = lam + sigmas`` are all positive. ``clusters``
    groups indices of eigenvalues equal to relative tolerance 1e-7 (used for
    multiplicity-aware simplicity checks).
    """

    lam: float
    k_computed: int
    sigmas: np.ndarray
    taus: np.ndarray
    phis: tuple
    alpha0s: np.ndarray
    alphaEs: np.ndarray
    psi_fourier: np.ndarray
    sigma_hat_1: float
    clusters: tuple


@dataclass(frozen=True, eq=False)
class QuadraticFormReport:
    """Extremal behavior of the stability form on the constrained subspace."""

    lam: float
    mu_min: float
    minimizer: Field
    nondegenerate: bool
    mu0_required: float
    h1_holds: bool
    h2_holds: bool
    gamma_sq: float
    sufficient_stability_holds: bool


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------


def _deterministic_start(n: int, deflate: list[Field]) -> Field:
    """Reproducible eigensolver start vector, orthogonal to given directions."""
    v = np.sin(1.0 + np.arange(n))
    for d in deflate:
        v = v - d * (d @ v)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        v = np.cos(1.0 + np.arange(n))
        for d in deflate:
            v = v - d * (d @ v)
        norm = np.linalg.norm(v)
    return v / norm


def _compact_matvec(mesh: Mesh, m: Field, deflate: list[Field]):
    """Matvec for P S P with S = diag(m) L^{-1} diag(m), P deflating vectors."""
    solve = mesh._poisson_solve

    def apply(v: Field) -> Field:
        v = np.asarray(v, dtype=float)
        for d in deflate:
            v = v - d * (d @ v)
        v = m * solve(m * v)
        for d in deflate:
            v = v - d * (d @ v)
        return v

    return apply


def _eigsh_largest(mesh: Mesh, m: Field, deflate: list[Field], k: int):
    """Largest eigenpairs of the deflated compact operator."""
    n = mesh.n_nodes
    op = spla.LinearOperator((n, n), matvec=_compact_matvec(mesh, m, deflate))
    v0 = _deterministic_start(n, deflate)
    try:
        theta, vecs = spla.eigsh(op, k=k, which="LA", v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(theta)[::-1]
    return theta[order], vecs[:, order]


# ----------------------------------------------------------------------
# constrained spectrum
# ----------------------------------------------------------------------


def constrained_spectrum(sol: Solution, k: int = DEFAULT_K) -> Spectrum:
    """Leading eigenvalues of the mean-projected linearization.

    Returns the ``k`` smallest constrained eigenvalues (ascending), their
    shifted values ``tau``, unit-normalized eigenfields, their coefficients
    along the two distinguished directions, the weighted Fourier coefficients
    of the stream function, and the standard first eigenvalue.
    """
    mesh = sol.mesh
    n = mesh.n_nodes
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > n - 2:
        raise ValueError(f"k={k} too large for a mesh with {n} nodes")
    m = np.sqrt(mesh.weights * sol.rho)
    theta, vecs = _eigsh_largest(mesh, m, [m], k)
    if np.any(theta <= 0):
        raise NumericalError("compact operator returned a nonpositive eigenvalue")
    taus = 1.0 / theta  # ascending
    sigmas = taus - sol.lam

    geo = sol.geometry
    phis = []
    for j in range(k):
        phi_raw = vecs[:, j] / m
        # Green-solve recovery: reproduces the eigen-equation exactly and
        # fixes the additive constant so phi matches the Dirichlet lift.
        centered = phi_raw - geo.mean(phi_raw)
        phi = taus[j] * mesh.green_apply(sol.rho * centered)
        norm = geo.norm(geo.center(phi))
        if norm == 0.0:
            raise NumericalError("eigenfield with vanishing centered part")
        phi = phi / norm
        # deterministic orientation: largest-magnitude entry positive
        pivot = int(np.argmax(np.abs(phi)))
        if phi[pivot] < 0:
            phi = -phi
        phi.setflags(write=False)
        phis.append(phi)

    alpha0s = np.array([geo.alpha0(phi) for phi in phis])
    alphaEs = np.array([geo.alphaE(phi) for phi in phis])
    psi_fourier = np.array([geo.inner(sol.psi, geo.center(phi)) for phi in phis])
    return Spectrum(
        lam=sol.lam,
        k_computed=k,
        sigmas=sigmas,
        taus=taus,
        phis=tuple(phis),
        alpha0s=alpha0s,
        alphaEs=alphaEs,
        psi_fourier=psi_fourier,
        sigma_hat_1=standard_first_eigenvalue(sol),
        clusters=detect_clusters(sigmas),
    )


def dense_constrained_spectrum(sol: Solution, k: int) -> np.ndarray:
    """Brute-force cross-check of the constrained eigenvalues.

    Solves the generalized problem (diag(w rho) - p p^T) x = nu L x densely
    (p the weighted density) and converts the largest nu to the smallest
    shifted eigenvalues. Intended for small meshes only.
    """
    mesh = sol.mesh
    p = mesh.weights * sol.rho
    B = np.diag(p) - np.outer(p, p)
    L = mesh.laplacian.toarray()
    nus = scipy.linalg.eigh(B, L, eigvals_only=True)
    nus = nus[::-1][:k]
    if np.any(nus <= 0):
        raise NumericalError("dense pencil returned a nonpositive eigenvalue")
    return 1.0 / nus - sol.lam


def spectral_residuals(sol: Solution, spectrum: Spectrum) -> np.ndarray:
    """Strong-form defect norms of each returned eigenpair."""
    mesh = sol.mesh
    geo = sol.geometry
    out = []
    for tau, phi in zip(spectrum.taus, spectrum.phis):
        defect = (mesh.laplacian @ phi) / mesh.weights - tau * sol.rho * geo.center(phi)
        out.append(float(np.sqrt(mesh.integrate(defect * defect))))
    return np.array(out)


def standard_first_eigenvalue(sol: Solution) -> float:
    """First eigenvalue of the linearization with uncentered denominator.

    Smallest value of (Dirichlet form - lam * centered weighted square) over
    (weighted square), computed from the equivalent positive-definite pencil
    (L + lam p p^T, diag(w rho)) with a Sherman-Morrison-corrected inverse.
    """
    mesh = sol.mesh
    n = mesh.n_nodes
    lam = sol.lam
    p = mesh.weights * sol.rho
    m = np.sqrt(p)
    solve = mesh._poisson_solve
    Linv_p = solve(p)
    denom = 1.0 + lam * float(p @ Linv_p)

    def apply(v: Field) -> Field:
        rhs = m * np.asarray(v, dtype=float)
        y = solve(rhs)
        y = y - (lam * float(p @ y) / denom) * Linv_p
        return m * y

    op = spla.LinearOperator((n, n), matvec=apply)
    v0 = _deterministic_start(n, [])
    try:
        nu = spla.eigsh(op, k=1, which="LA", v0=v0, return_eigenvectors=False)[0]
    except spla.ArpackNoConvergence as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    if nu <= 0:
        raise NumericalError("standard pencil returned a nonpositive eigenvalue")
    return float(1.0 / nu - lam)


# ----------------------------------------------------------------------
# identities and counts
# ----------------------------------------------------------------------


def proportionality_check(sol: Solution, spectrum: Spectrum) -> np.ndarray:
    """Relative errors of the mean/energy coefficient identity per eigenpair.

    For each eigenfield, the weighted mean equals (centered-stream-function
    norm) * tau_k * (energy-direction coefficient); the identity is a discrete
    integration-by-parts consequence and holds to solver tolerance. Returns an
    empty array at multiplier zero, where both sides degenerate.
    """
    if sol.lam == 0.0:
        return np.array([])
    errors = []
    for j in range(spectrum.k_computed):
        lhs = spectrum.alpha0s[j]
        rhs = sol.psi0_norm * spectrum.taus[j] * spectrum.alphaEs[j]
        floor = 1e-8 * (1.0 + sol.psi0_norm * spectrum.taus[j])
        errors.append(abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor))
    return np.array(errors)


def nonpositive_count(spectrum: Spectrum) -> int:
    """Number of computed eigenvalues at or below zero (tolerance 1e-10)."""
    return int(np.sum(spectrum.sigmas <= NONPOSITIVE_TOL))


def detect_clusters(sigmas: np.ndarray, rel_tol: float = CLUSTER_REL_TOL) -> tuple:
    """Group indices of eigenvalues equal to within relative tolerance."""
    clusters = []
    current = [0]
    for j in range(1, len(sigmas)):
        scale = max(abs(sigmas[j]), abs(sigmas[j - 1]), 1.0)
        if abs(sigmas[j] - sigmas[j - 1]) <= rel_tol * scale:
            current.append(j)
        else:
            clusters.append(tuple(current))
            current = [j]
    clusters.append(tuple(current))
    return tuple(clusters)


# ----------------------------------------------------------------------
# stability quadratic form
# ----------------------------------------------------------------------


def quadratic_form(sol: Solution, phi: Field) -> float:
    """Stability form: lam * int(rho phi G[rho phi]) - int(rho phi^2)."""
    mesh = sol.mesh
    phi = mesh.check_field(phi)
    weighted = sol.rho * phi
    interaction = mesh.integrate(weighted * mesh.green_apply(weighted))
    return sol.lam * interaction - mesh.integrate(weighted * phi)


def _constraint_directions(sol: Solution) -> tuple[Field, Field]:
    """Orthonormal (Euclidean) constraint vectors in transformed coordinates."""
    mesh = sol.mesh
    m = np.sqrt(mesh.weights * sol.rho)
    if sol.psi0_norm <= 1e-14 * (1.0 + float(np.abs(sol.psi).max())):
        raise DegenerateGeometryError(
            "constraint directions collapse: centered stream function vanishes"
        )
    c2 = m * sol.geometry.center(sol.psi) / sol.psi0_norm
    return m, c2


def nondegeneracy_check(
    sol: Solution, spectrum: Spectrum, margin: float | None = None
) -> QuadraticFormReport:
    """Extremize the stability form on the codimension-2 subspace.

    ``mu_min`` is the least upper bound of Q(phi)/norm(phi)^2 over fields
    orthogonal (weighted) to the constants and to the stream function — the
    tightest stability constant. The reported extremizer satisfies both
    orthogonality constraints to 1e-10. ``nondegenerate`` asks for strict
    negativity with a resolution-independent margin (default 1e-8 * lam).

    Also evaluated: the spectral-gap threshold -lam/(lam + sigma_2) and the
    two gap hypotheses used by the fold classification, plus the sufficient
    stability criterion built from the stream function's first Fourier
    weight.
    """
    mesh = sol.mesh
    n = mesh.n_nodes
    lam = sol.lam
    if margin is None:
        margin = 1e-8 * lam
    m, c2 = _constraint_directions(sol)
    deflate = [m, c2]

    if lam == 0.0:
        # the form is exactly -norm^2 on the whole subspace
        y = _deterministic_start(n, deflate)
        mu_min = -1.0
    else:
        theta, vecs = _eigsh_largest(mesh, m, deflate, 1)
        mu_min = float(lam * theta[0] - 1.0)
        y = vecs[:, 0]

    minimizer = y / m
    norm = sol.geometry.norm(minimizer)
    minimizer = minimizer / norm
    minimizer.setflags(write=False)

    sigma1 = float(spectrum.sigmas[0])
    sigma2 = float(spectrum.sigmas[1]) if spectrum.k_computed >= 2 else np.inf
    mu0_required = -lam / (lam + sigma2)
    h1_holds = bool(mu_min <= mu0_required)
    if sigma1 < 0:
        h2_holds = bool(sigma2 >= 0.25 * lam * abs(sigma1) / (lam + sigma1))
    else:
        h2_holds = True
    gamma_sq = float((spectrum.psi_fourier[0] / sol.psi0_norm) ** 2)
    head = lam * gamma_sq + sigma1
    sufficient = bool(
        head > 0 and sigma2 >= lam * (lam + gamma_sq * sigma1) / head
    )
    return QuadraticFormReport(
        lam=lam,
        mu_min=mu_min,
        minimizer=minimizer,
        nondegenerate=bool(mu_min <= -margin),
        mu0_required=mu0_required,
        h1_holds=h1_holds,
        h2_holds=h2_holds,
        gamma_sq=gamma_sq,
        sufficient_stability_holds=sufficient,
    )


def dense_quadratic_extremum(sol: Solution) -> float:
    """Dense cross-check of the constrained extremal Rayleigh value."""
    mesh = sol.mesh
    lam = sol.lam
    m, c2 = _constraint_directions(sol)
    L = mesh.laplacian.toarray()
    S = (m[:, None] * scipy.linalg.solve(L, np.diag(m))).astype(float)
    S = 0.5 * (S + S.T)
    P = np.eye(mesh.n_nodes) - np.outer(m, m) - np.outer(c2, c2)
    vals = np.linalg.eigvalsh(P @ (lam * S) @ P)
    return float(vals[-1] - 1.0)
