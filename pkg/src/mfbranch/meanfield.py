"""Nonlinear state layer: density map, functionals, weighted geometry, Newton.

The stationary problem couples a Poisson solve to a normalized exponential
density: a stream function ``psi`` with homogeneous Dirichlet data satisfies

    -lap(psi) = exp(lam * psi) / integral(exp(lam * psi))

Discretely this is ``L psi = W rho(lam, psi)`` with ``L`` the flux-form
stiffness matrix and ``W`` the diagonal quadrature. This module provides:

  - the overflow-safe density map and its log-normalizer;
  - energy (quadratic Green form) and entropy functionals;
  - residual and damped Newton solver whose Jacobian includes the nonlocal
    rank-one term coming from the density normalization (handled by a
    bordered direct solve for robustness near folds);
  - the density-weighted geometry: means, zero-mean projections, and the
    two distinguished unit directions (constants, centered stream function).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import (
    DegenerateGeometryError,
    NearFoldError,
    NewtonNonConvergence,
    NumericalError,
)
from .mesh import Field, Mesh

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 25
MAX_HALVINGS = 10


# ----------------------------------------------------------------------
# density map and functionals
# ----------------------------------------------------------------------


def _exponentials(mesh: Mesh, lam: float, psi: Field) -> tuple[Field, float]:
    """Return (unnormalized shifted weights e^(lam psi - m), shift m)."""
    psi = mesh.check_field(psi)
    if not np.all(np.isfinite(psi)):
        raise NumericalError("stream function contains non-finite values")
    exponent = lam * psi
    shift = float(exponent.max())
    e = np.exp(exponent - shift)
    if not np.all(np.isfinite(e)):
        raise NumericalError("density exponentials overflowed despite shifting")
    return e, shift


def density(mesh: Mesh, lam: float, psi: Field) -> Field:
    """Normalized exponential density: positive, unit total mass."""
    e, _ = _exponentials(mesh, lam, psi)
    total = float(mesh.weights @ e)
    if not (total > 0 and np.isfinite(total)):
        raise NumericalError("density normalizer is not positive and finite")
    return e / total


def log_partition(mesh: Mesh, lam: float, psi: Field) -> float:
    """log of the density normalizer, integral(exp(lam psi))."""
    e, shift = _exponentials(mesh, lam, psi)
    return shift + float(np.log(mesh.weights @ e))


def energy(mesh: Mesh, rho: Field) -> float:
    """Quadratic interaction energy (1/2) integral(rho * G[rho])."""
    rho = mesh.check_field(rho)
    return 0.5 * mesh.integrate(rho * mesh.green_apply(rho))


def entropy(mesh: Mesh, rho: Field) -> float:
    """Mixing entropy -integral(rho log rho); maximal for the uniform density."""
    rho = mesh.check_field(rho)
    if np.any(rho <= 0):
        raise NumericalError("entropy requires a strictly positive density")
    return -mesh.integrate(rho * np.log(rho))


def residual(mesh: Mesh, lam: float, psi: Field) -> Field:
    """Strong-form defect at the nodes: -lap(psi) - rho(lam, psi)."""
    psi = mesh.check_field(psi)
    return (mesh.laplacian @ psi) / mesh.weights - density(mesh, lam, psi)


def residual_norm(mesh: Mesh, r: Field) -> float:
    """L2 norm of a nodal defect field."""
    return float(np.sqrt(mesh.integrate(r * r)))


# ----------------------------------------------------------------------
# solution record
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Solution:
    """Converged state of the stationary problem at one multiplier value.

    All derived scalars are evaluated once at construction; instances are
    immutable value objects safe to share across threads.
    """

    mesh: Mesh
    lam: float
    psi: Field
    rho: Field
    energy: float
    entropy: float
    mean_psi: float
    psi0_norm: float
    residual_norm: float
    newton_iterations: int = 0
    residual_history: tuple = field(default=(), repr=False)

    @cached_property
    def geometry(self) -> "WeightedGeometry":
        return WeightedGeometry(self)

    @property
    def max_u(self) -> float:
        """Maximum of the unnormalized log-density u = lam * psi."""
        return float(np.max(self.lam * self.psi))


def make_solution(
    mesh: Mesh,
    lam: float,
    psi: Field,
    newton_iterations: int = 0,
    residual_history: tuple = (),
) -> Solution:
    """Assemble the immutable record, evaluating all derived quantities."""
    psi = mesh.check_field(psi).copy()
    psi.setflags(write=False)
    rho = density(mesh, lam, psi)
    rho.setflags(write=False)
    mean_psi = mesh.integrate(rho * psi)
    centered = psi - mean_psi
    psi0_norm = float(np.sqrt(mesh.integrate(rho * centered * centered)))
    r = (mesh.laplacian @ psi) / mesh.weights - rho
    return Solution(
        mesh=mesh,
        lam=float(lam),
        psi=psi,
        rho=rho,
        energy=0.5 * mean_psi,
        entropy=entropy(mesh, rho),
        mean_psi=mean_psi,
        psi0_norm=psi0_norm,
        residual_norm=residual_norm(mesh, r),
        newton_iterations=newton_iterations,
        residual_history=residual_history,
    )


# ----------------------------------------------------------------------
# weighted geometry
# ----------------------------------------------------------------------


class WeightedGeometry:
    """Density-weighted inner-product geometry attached to one Solution.

    Provides the weighted mean / centering, the inner product, and the two
    distinguished unit directions: the constants and the normalized centered
    stream function.
    """

    def __init__(self, sol: Solution):
        self.sol = sol
        self.mesh = sol.mesh
        self._wrho = sol.mesh.weights * sol.rho

    def mean(self, f: Field) -> float:
        """Density-weighted mean of a field."""
        return float(self._wrho @ self.mesh.check_field(f))

    def center(self, f: Field) -> Field:
        """Subtract the weighted mean; result has mean zero."""
        f = self.mesh.check_field(f)
        return f - self.mean(f)

    def inner(self, f: Field, g: Field) -> float:
        """Density-weighted inner product."""
        return float(self._wrho @ (self.mesh.check_field(f) * self.mesh.check_field(g)))

    def norm(self, f: Field) -> float:
        return float(np.sqrt(max(self.inner(f, f), 0.0)))

    @property
    def e0(self) -> Field:
        """Unit direction of constants (weighted norm one by unit mass)."""
        return np.ones(self.mesh.n_nodes)

    @cached_property
    def energy_direction(self) -> Field:
        """Centered stream function, normalized in the weighted norm."""
        if self.sol.psi0_norm <= 1e-14 * (1.0 + float(np.abs(self.sol.psi).max())):
            raise DegenerateGeometryError(
                "centered stream function vanishes; energy direction undefined"
            )
        return self.center(self.sol.psi) / self.sol.psi0_norm

    def alpha0(self, f: Field) -> float:
        """Coefficient along the constants."""
        return self.mean(f)

    def alphaE(self, f: Field) -> float:
        """Coefficient along the normalized centered stream function."""
        return self.inner(f, self.energy_direction)


def weighted_inner(sol: Solution, f: Field, g: Field) -> float:
    return sol.geometry.inner(f, g)


def project_zero_mean(sol: Solution, f: Field) -> Field:
    return sol.geometry.center(f)


def alpha0(sol: Solution, f: Field) -> float:
    return sol.geometry.alpha0(f)


def alphaE(sol: Solution, f: Field) -> float:
    return sol.geometry.alphaE(f)


# ----------------------------------------------------------------------
# Newton solver
# ----------------------------------------------------------------------


def _weak_residual(mesh: Mesh, lam: float, psi: Field, rho: Field) -> Field:
    """Quadrature-weighted residual L psi - W rho."""
    return mesh.laplacian @ psi - mesh.weights * rho


def jacobian_apply(mesh: Mesh, lam: float, rho: Field, eta: Field) -> Field:
    """Apply the linearized operator: L eta - lam W rho [eta]_0 (weak form).

    The zero-mean projection uses the density-weighted mean, which makes the
    operator a rank-one update of the local part.
    """
    wrho = mesh.weights * rho
    mean_eta = float(wrho @ eta)
    return mesh.laplacian @ eta - lam * wrho * (eta - mean_eta)


def solve_linearized(
    mesh: Mesh, lam: float, rho: Field, rhs: Field
) -> tuple[Field, float]:
    """Solve the bordered system for the rank-one-corrected Jacobian.

    Augmenting with the scalar s = p.delta (p the weighted density) turns the
    rank-one update into a sparse (n+1) x (n+1) direct solve:

        [A        lam*p] [delta]   [rhs]
        [p^T        -1 ] [  s  ] = [ 0 ]

    with A = L - lam * diag(w rho). Returns (delta, s).
    """
    n = mesh.n_nodes
    p = mesh.weights * rho
    A = mesh.laplacian - lam * sps.diags(p)
    bordered = sps.bmat(
        [[A, lam * p.reshape(-1, 1)], [p.reshape(1, -1), -np.ones((1, 1))]],
        format="csc",
    )
    try:
        lu = spla.splu(bordered)
    except RuntimeError as exc:
        raise NearFoldError(f"linearized operator is singular: {exc}") from exc
    b = np.concatenate([rhs, [0.0]])
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise NearFoldError("linearized solve produced non-finite values")
    return x[:n], float(x[n])


def newton_solve(
    mesh: Mesh,
    lam: float,
    psi_init: Field,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> Solution:
    """Damped Newton iteration for the stationary problem at fixed multiplier.

    The Jacobian includes the nonlocal rank-one term exactly; each step is a
    bordered sparse direct solve. Steps are halved (up to ten times) whenever
    the residual norm fails to decrease.
    """
    if not (tol > 0):
        raise ValueError(f"tol must be positive, got {tol}")
    psi = mesh.check_field(psi_init).astype(float).copy()

    def norm_at(candidate: Field) -> tuple[float, Field, Field]:
        rho_c = density(mesh, lam, candidate)
        weak = _weak_residual(mesh, lam, candidate, rho_c)
        strong = weak / mesh.weights
        return residual_norm(mesh, strong), rho_c, weak

    norm, rho, weak = norm_at(psi)
    history = [norm]
    for iteration in range(1, max_iter + 1):
        if norm <= tol:
            return make_solution(
                mesh,
                lam,
                psi,
                newton_iterations=iteration - 1,
                residual_history=tuple(history),
            )
        delta, _ = solve_linearized(mesh, lam, rho, -weak)
        step = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = psi + step * delta
            try:
                cand_norm, cand_rho, cand_weak = norm_at(candidate)
            except NumericalError:
                step *= 0.5
                continue
            if cand_norm < norm:
                psi, norm, rho, weak = candidate, cand_norm, cand_rho, cand_weak
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise NewtonNonConvergence(
                "Newton step produced no residual decrease",
                last_residual=norm,
                iterations=iteration,
            )
        history.append(norm)
    if norm <= tol:
        return make_solution(
            mesh,
            lam,
            psi,
            newton_iterations=max_iter,
            residual_history=tuple(history),
        )
    raise NewtonNonConvergence(
        f"no convergence after {max_iter} iterations",
        last_residual=norm,
        iterations=max_iter,
    )
