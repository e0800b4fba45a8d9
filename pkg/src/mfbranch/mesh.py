"""Structured finite-volume meshes and the Dirichlet Green operator.

Two domain shapes are supported: a disk (cell-centered polar rings, no node at
the coordinate center) and an axis-aligned rectangle (cell-centered uniform
grid). Both discretizations share the same structure:

  - every node is an interior cell center; the homogeneous Dirichlet boundary
    enters through half-cell flux closures, so fields are plain arrays over
    interior nodes only;
  - the stiffness matrix ``L`` is the symmetric positive-definite flux form,
    i.e. ``u @ L @ u`` approximates the Dirichlet energy of ``u``;
  - quadrature is the diagonal of exact cell areas, so all weighted inner
    products used elsewhere stay diagonal.

The Poisson solve ``L u = W f`` (``W`` the diagonal quadrature) is cached as a
sparse LU factorization per mesh: the Green operator is applied thousands of
times per continuation run.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, NumericalError

Field = np.ndarray

MIN_RESOLUTION = 4


@dataclass(frozen=True)
class UnitDisk:
    """Disk of given radius centered at the origin."""

    radius: float = 1.0

    def __post_init__(self) -> None:
        if not (self.radius > 0):
            raise ConfigurationError(f"disk radius must be positive, got {self.radius}")

    @property
    def area(self) -> float:
        return float(np.pi * self.radius**2)


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle (0, width) x (0, height)."""

    width: float
    height: float

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ConfigurationError(
                f"rectangle sides must be positive, got {self.width} x {self.height}"
            )

    @property
    def area(self) -> float:
        return float(self.width * self.height)

    @property
    def aspect_ratio(self) -> float:
        return float(max(self.width, self.height) / min(self.width, self.height))


DomainSpec = Union[UnitDisk, Rectangle]


class Mesh:
    """Immutable discretization of a domain.

    Attributes
    ----------
    spec : DomainSpec
    resolution : int
        Radial ring count for disks; cells per unit length for rectangles.
    x, y : arrays of node coordinates.
    weights : array of exact cell areas (diagonal quadrature).
    laplacian : sparse SPD flux-form stiffness matrix.
    h : float
        Nominal grid spacing (largest cell extent), for convergence studies.
    """

    def __init__(self, spec: DomainSpec, resolution: int, n_theta: int | None = None):
        if resolution < MIN_RESOLUTION:
            raise ConfigurationError(
                f"resolution must be at least {MIN_RESOLUTION}, got {resolution}"
            )
        self.spec = spec
        self.resolution = int(resolution)
        if isinstance(spec, UnitDisk):
            self._build_disk(spec, self.resolution, n_theta)
        elif isinstance(spec, Rectangle):
            if n_theta is not None:
                raise ConfigurationError("n_theta only applies to disk meshes")
            self._build_rectangle(spec, self.resolution)
        else:
            raise ConfigurationError(f"unsupported domain spec: {spec!r}")
        self.area = float(self.weights.sum())
        self.n_nodes = self.weights.size

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def _build_disk(self, spec: UnitDisk, n_rings: int, n_theta: int | None) -> None:
        radius = spec.radius
        if n_theta is None:
            # arc spacing comparable to ring spacing at mid-radius
            n_theta = 4 * max(4, int(round(np.pi * n_rings / 4.0)))
        if n_theta < 8:
            raise ConfigurationError(f"n_theta must be at least 8, got {n_theta}")
        h = radius / n_rings
        dtheta = 2.0 * np.pi / n_theta
        ring_r = (np.arange(n_rings) + 0.5) * h
        theta = np.arange(n_theta) * dtheta

        self.kind = "disk"
        self.n_rings = n_rings
        self.n_theta = n_theta
        self.ring_r = ring_r
        self.h = h
        rr, tt = np.meshgrid(ring_r, theta, indexing="ij")
        self.r = rr.ravel()
        self.x = (rr * np.cos(tt)).ravel()
        self.y = (rr * np.sin(tt)).ravel()
        self.weights = (rr * h * dtheta).ravel()

        def node(i: int | np.ndarray, j: int | np.ndarray):
            return i * n_theta + j

        rows, cols, vals = [], [], []

        def add_edge(a, b, c) -> None:
            rows.extend([a, b, a, b])
            cols.extend([a, b, b, a])
            vals.extend([c, c, -c, -c])

        def add_diag(a, c) -> None:
            rows.append(a)
            cols.append(a)
            vals.append(c)

        js = np.arange(n_theta)
        for i in range(n_rings):
            # angular edges within ring i (periodic)
            c_theta = h / (ring_r[i] * dtheta)
            a = node(i, js)
            b = node(i, (js + 1) % n_theta)
            for aa, bb in zip(a, b):
                add_edge(aa, bb, c_theta)
            # radial edge to ring i+1, or boundary closure for the last ring
            if i + 1 < n_rings:
                r_face = (i + 1) * h
                c_r = r_face * dtheta / h
                for aa, bb in zip(node(i, js), node(i + 1, js)):
                    add_edge(aa, bb, c_r)
            else:
                c_b = radius * dtheta / (h / 2.0)
                for aa in node(i, js):
                    add_diag(aa, c_b)

        n = n_rings * n_theta
        self.laplacian = sps.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()

    def _build_rectangle(self, spec: Rectangle, resolution: int) -> None:
        nx = max(MIN_RESOLUTION, int(round(spec.width * resolution)))
        ny = max(MIN_RESOLUTION, int(round(spec.height * resolution)))
        hx = spec.width / nx
        hy = spec.height / ny

        self.kind = "rectangle"
        self.nx, self.ny = nx, ny
        self.hx, self.hy = hx, hy
        self.h = max(hx, hy)
        xs = (np.arange(nx) + 0.5) * hx
        ys = (np.arange(ny) + 0.5) * hy
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        self.x = xx.ravel()
        self.y = yy.ravel()
        self.weights = np.full(nx * ny, hx * hy)

        def node(i, j):
            return i * ny + j

        rows, cols, vals = [], [], []

        def add_edge(a, b, c) -> None:
            rows.extend([a, b, a, b])
            cols.extend([a, b, b, a])
            vals.extend([c, c, -c, -c])

        def add_diag(a, c) -> None:
            rows.append(a)
            cols.append(a)
            vals.append(c)

        cx = hy / hx
        cy = hx / hy
        for i in range(nx):
            for j in range(ny):
                a = node(i, j)
                if i + 1 < nx:
                    add_edge(a, node(i + 1, j), cx)
                if j + 1 < ny:
                    add_edge(a, node(i, j + 1), cy)
                if i == 0:
                    add_diag(a, 2.0 * cx)
                if i == nx - 1:
                    add_diag(a, 2.0 * cx)
                if j == 0:
                    add_diag(a, 2.0 * cy)
                if j == ny - 1:
                    add_diag(a, 2.0 * cy)

        n = nx * ny
        self.laplacian = sps.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()

    # ------------------------------------------------------------------
    # operations
    # ------------------------------------------------------------------

    @cached_property
    def _poisson_solve(self):
        return spla.factorized(self.laplacian)

    def check_field(self, f: Field) -> Field:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n_nodes,):
            raise ValueError(
                f"field of length {f.shape} does not belong to this mesh "
                f"({self.n_nodes} nodes)"
            )
        return f

    def integrate(self, f: Field) -> float:
        return float(self.weights @ self.check_field(f))

    def green_apply(self, f: Field) -> Field:
        """Solve the Dirichlet Poisson problem: returns u with -lap(u) = f."""
        u = self._poisson_solve(self.weights * self.check_field(f))
        if not np.all(np.isfinite(u)):
            raise NumericalError("Poisson solve returned non-finite values")
        return u

    def dirichlet_energy(self, u: Field) -> float:
        """Quadratic flux form: approximates the integral of |grad u|^2."""
        u = self.check_field(u)
        return float(u @ (self.laplacian @ u))

    def mean_green_energy(self) -> float:
        """Energy of the uniform unit-mass density: (1/2) int rho0 G[rho0]."""
        rho0 = np.full(self.n_nodes, 1.0 / self.area)
        return 0.5 * self.integrate(rho0 * self.green_apply(rho0))


def build_mesh(spec: DomainSpec, resolution: int, n_theta: int | None = None) -> Mesh:
    """Construct a mesh for the given domain at the given resolution.

    ``resolution`` counts radial rings on a disk and cells per unit length on
    a rectangle; both must be at least 4.
    """
    return Mesh(spec, resolution, n_theta)


def green_apply(mesh: Mesh, f: Field) -> Field:
    return mesh.green_apply(f)


def mean_green_energy(mesh: Mesh) -> float:
    return mesh.mean_green_energy()
