"""Energy reparametrization and microcanonical thermodynamics of a branch.

A traced branch with strictly increasing energy admits energy as the curve
parameter. This module reindexes branch points by energy, computes the
entropy curve S(E) and inverse-temperature curve beta(E) = -lambda(E),
differentiates them with three-point central stencils on the nonuniform
energy grid, classifies concavity (the sign of d2S/dE2 = -dlambda/dE with a
dead band), and extracts the landmark energies: the uniform-state energy,
the 8-pi crossing, the first zero of the constrained eigenvalue, the
multiplier maximum, and the end of the first post-fold convex stretch.

The defining identity dS/dE = -lambda holds by construction through the
beta column; the verification routine re-derives dS/dE by finite
differences of S and reports the worst relative mismatch, which measures
step density rather than correctness of any single solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .continuation import Branch, DomainKind, EIGHT_PI
from .errors import ParametrizationError

DEAD_BAND = 1e-6  # |dlambda/dE| below this counts as flat for concavity


@dataclass(frozen=True, eq=False)
class ThermoCurve:
    """Branch data keyed by energy, with derived thermodynamic columns."""

    E: np.ndarray
    lam: np.ndarray
    S: np.ndarray
    beta: np.ndarray
    d2S_dE2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    landmarks: dict
    landmark_reasons: dict
    concavity_intervals: tuple

    @property
    def n_rows(self) -> int:
        return self.E.size

    def rows(self):
        for i in range(self.E.size):
            yield {
                "E": float(self.E[i]),
                "lambda": float(self.lam[i]),
                "S": float(self.S[i]),
                "beta": float(self.beta[i]),
                "d2S_dE2": float(self.d2S_dE2[i]),
                "sigma1": float(self.sigma1[i]),
                "sigma2": float(self.sigma2[i]),
            }


@dataclass(frozen=True)
class EntropyReport:
    """Outcome of the finite-difference check of dS/dE against -lambda."""

    rows_checked: int
    max_rel_error: float
    worst_row: int
    endpoint_abs_error: float
    d2S_sign_flip_energy: float | None


def _central_derivative(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """First derivative on a nonuniform grid: 3-point central inside,
    3-point one-sided at the ends (secants when only 2 rows exist)."""
    n = x.size
    d = np.empty(n)
    if n < 2:
        d.fill(0.0)
        return d
    if n == 2:
        d[:] = (f[1] - f[0]) / (x[1] - x[0])
        return d
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    d[1:-1] = (
        hm * hm * f[2:] - hp * hp * f[:-2] + (hp * hp - hm * hm) * f[1:-1]
    ) / (hm * hp * (hm + hp))
    h1, h2 = x[1] - x[0], x[2] - x[1]
    d[0] = (
        -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0]
        + (h1 + h2) / (h1 * h2) * f[1]
        - h1 / (h2 * (h1 + h2)) * f[2]
    )
    g1, g2 = x[-1] - x[-2], x[-2] - x[-3]
    d[-1] = (
        (2 * g1 + g2) / (g1 * (g1 + g2)) * f[-1]
        - (g1 + g2) / (g1 * g2) * f[-2]
        + g1 / (g2 * (g1 + g2)) * f[-3]
    )
    return d


def energy_parametrize(branch: Branch) -> ThermoCurve:
    """Reindex a traced branch by energy and derive the thermodynamic columns.

    Requires strictly increasing energy along the branch points; violations
    raise a parametrization error naming the offending indices.
    """
    points = branch.points
    if not points:
        raise ParametrizationError("branch has no points", indices=())
    E = np.array([p.energy for p in points])
    bad = tuple(int(i) for i in np.nonzero(np.diff(E) <= 0)[0])
    if bad:
        raise ParametrizationError(
            f"branch energy is not strictly increasing at indices {bad}",
            indices=bad,
        )
    lam = np.array([p.lam for p in points])
    S = np.array([p.solution.entropy for p in points])
    sigma1 = np.array([float(p.spectrum.sigmas[0]) for p in points])
    sigma2 = np.array(
        [
            float(p.spectrum.sigmas[1]) if p.spectrum.sigmas.size > 1 else math.nan
            for p in points
        ]
    )
    beta = -lam
    d2S = -_central_derivative(E, lam)
    intervals = _concavity_intervals(E, d2S)
    landmarks, reasons = _landmarks_from_columns(
        E, lam, S, sigma1, d2S, branch.kind
    )
    for a in (E, lam, S, beta, d2S, sigma1, sigma2):
        a.setflags(write=False)
    return ThermoCurve(
        E=E,
        lam=lam,
        S=S,
        beta=beta,
        d2S_dE2=d2S,
        sigma1=sigma1,
        sigma2=sigma2,
        landmarks=landmarks,
        landmark_reasons=reasons,
        concavity_intervals=intervals,
    )


def verify_entropy_identities(curve: ThermoCurve) -> EntropyReport:
    """Check dS/dE = -lambda by differencing S, and locate the first
    concave-to-convex transition of S(E). Report-only; raises only when the
    curve is too short to difference."""
    if curve.n_rows < 5:
        raise ValueError("entropy verification needs at least five rows")
    dS = _central_derivative(curve.E, curve.S)
    interior = slice(1, curve.n_rows - 1)
    target = -curve.lam
    err = np.abs(dS[interior] - target[interior])
    # mixed measure: relative above unit multiplier, absolute below, so the
    # near-zero start of the branch does not divide by a vanishing target
    denom = np.maximum(np.abs(target[interior]), 1.0)
    rel = err / denom
    worst = int(np.argmax(rel))
    flip = None
    d2 = curve.d2S_dE2
    for i in range(curve.n_rows - 1):
        if d2[i] < -DEAD_BAND and d2[i + 1] > DEAD_BAND:
            flip = float(
                curve.E[i]
                + (0.0 - d2[i]) / (d2[i + 1] - d2[i]) * (curve.E[i + 1] - curve.E[i])
            )
            break
    return EntropyReport(
        rows_checked=int(rel.size),
        max_rel_error=float(np.max(rel)),
        worst_row=worst + 1,
        endpoint_abs_error=float(abs(dS[0] - target[0])),
        d2S_sign_flip_energy=flip,
    )


def _concavity_intervals(E: np.ndarray, d2S: np.ndarray) -> tuple:
    """Merge consecutive rows with the same concavity sign into intervals.

    Sign is +1 where S is convex (d2S above the dead band), -1 where
    concave, 0 inside the dead band.
    """
    if E.size == 0:
        return ()
    signs = np.where(d2S > DEAD_BAND, 1, np.where(d2S < -DEAD_BAND, -1, 0))
    out = []
    start = 0
    for i in range(1, E.size + 1):
        if i == E.size or signs[i] != signs[start]:
            out.append((float(E[start]), float(E[i - 1]), int(signs[start])))
            start = i
    return tuple(out)


def _parabola_vertex(x: np.ndarray, f: np.ndarray) -> float:
    """Abscissa of the extremum of the parabola through three points;
    falls back to the middle point when the fit degenerates."""
    x0, x1, x2 = (float(v) for v in x)
    f0, f1, f2 = (float(v) for v in f)
    d1 = (f1 - f0) / (x1 - x0)
    d2 = (f2 - f1) / (x2 - x1)
    curv = (d2 - d1) / (x2 - x0)
    if curv == 0.0:
        return x1
    vertex = 0.5 * (x0 + x1) - d1 / (2.0 * curv)
    lo, hi = min(x0, x2), max(x0, x2)
    return min(max(vertex, lo), hi)


def _interp_crossing(
    x: np.ndarray, f: np.ndarray, level: float, upward: bool
) -> float | None:
    """x-value of the first crossing of ``f`` through ``level``."""
    for i in range(x.size - 1):
        a, b = f[i] - level, f[i + 1] - level
        if (a < 0 <= b) if upward else (a > 0 >= b):
            if b == a:
                return float(x[i])
            w = -a / (b - a)
            return float(x[i] + w * (x[i + 1] - x[i]))
    return None


def _landmarks_from_columns(
    E: np.ndarray,
    lam: np.ndarray,
    S: np.ndarray,
    sigma1: np.ndarray,
    d2S: np.ndarray,
    kind: DomainKind,
) -> tuple[dict, dict]:
    values: dict = {}
    reasons: dict = {}
    values["E0"] = float(E[0])

    e8 = _interp_crossing(E, lam, EIGHT_PI, upward=True)
    if e8 is not None:
        values["E_8pi"] = e8
    elif kind is DomainKind.FIRST_KIND:
        values["E_8pi"] = math.inf  # sentinel: crossing exists only in the limit
    else:
        reasons["E_8pi"] = "multiplier never reached 8*pi on the traced branch"

    e_star = _interp_crossing(E, sigma1, 0.0, upward=False)
    if e_star is not None:
        values["E_star"] = e_star
    else:
        reasons["E_star"] = "first constrained eigenvalue never crossed zero"

    peak = int(np.argmax(lam))
    if 0 < peak < E.size - 1:
        e_m = _parabola_vertex(
            E[peak - 1 : peak + 2], lam[peak - 1 : peak + 2]
        )
        if e_star is not None:
            # a nondegenerate fold makes the multiplier maximum and the
            # eigenvalue zero the same point; when the two estimates agree
            # within local grid resolution, report them as one
            spacing = float(
                np.max(np.diff(E[max(0, peak - 2) : peak + 3]))
            )
            if abs(e_m - e_star) <= 3.0 * spacing:
                e_m = e_star
        values["E_m"] = e_m
    else:
        reasons["E_m"] = "multiplier has no interior maximum on the traced branch"

    e_d = None
    if e_star is not None:
        start = int(np.searchsorted(E, e_star))
        in_stretch = False
        for i in range(max(1, start), E.size):
            if d2S[i] > DEAD_BAND:
                in_stretch = True
                e_d = float(E[i])
            elif in_stretch:
                break
    if e_d is not None:
        values["E_d"] = e_d
    elif e_star is None:
        reasons["E_d"] = "no critical point, so no post-fold convex stretch"
    else:
        reasons["E_d"] = "no convex stretch found past the critical energy"
    return values, reasons


def extract_landmarks(curve: ThermoCurve) -> tuple[dict, dict]:
    """Landmark energies of an already-built curve with omission reasons."""
    return curve.landmarks, curve.landmark_reasons


def landmark_ordering_ok(values: dict) -> bool:
    """Check E0 < E_8pi <= E_star <= E_m < E_d over the landmarks present."""
    chain = [
        ("E0", "E_8pi", True),
        ("E_8pi", "E_star", False),
        ("E_star", "E_m", False),
        ("E_m", "E_d", True),
    ]
    for lo, hi, strict in chain:
        if lo in values and hi in values:
            a, b = values[lo], values[hi]
            if math.isinf(b) and not math.isinf(a):
                continue
            if (a >= b) if strict else (a > b):
                return False
    return True
