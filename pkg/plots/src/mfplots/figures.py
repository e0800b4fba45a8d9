"""The three standard diagrams of a traced solution branch.

Each function renders one figure from a validated artifact table (or a path
to one) and writes a vector image:

* :func:`plot_branch` — the branch in the (multiplier, mean stream function)
  plane, with the ``8π`` threshold guide and fold/flex markers.
* :func:`plot_lambda_of_E` — the multiplier as a function of energy, with
  the interior maximum marked when the branch turns.
* :func:`plot_entropy` — the entropy curve S(E), with the concave-to-convex
  transition marked and the high-energy slope trend annotated.

Output is deterministic for byte-identical inputs on a fixed rendering
stack: figures carry no timestamps and SVG element ids are salted with a
fixed string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from mfplots.schema import (
    BranchTable,
    SchemaError,
    ThermoTable,
    read_branch,
    read_thermo,
)

EIGHT_PI = 8.0 * math.pi

#: Supported vector output formats.
FORMATS: tuple[str, ...] = ("svg", "pdf")

#: Rendering parameters applied around every figure: text kept as text in
#: SVG (searchable, compact) and a fixed hash salt so generated element ids
#: do not vary between runs.
_RC = {
    "svg.fonttype": "none",
    "svg.hashsalt": "mfplots",
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_GUIDE_STYLE = {"color": "0.4", "linestyle": "--", "linewidth": 1.0}
_LANDMARK_STYLE = {"color": "0.4", "linestyle": ":", "linewidth": 1.0}


@dataclass(frozen=True)
class PlotJob:
    """One invocation of the figure pipeline.

    Holds the input artifact paths, the output directory and format, and
    the annotation toggles (landmark markers; the ``8π`` guide line).  At
    least one input path must be given; each present input must exist and
    match the artifact schema, which :func:`render_job` enforces by loading
    it through the validating readers.
    """

    branch_csv: Path | None
    thermo_csv: Path | None
    out_dir: Path
    image_format: str = "svg"
    landmark_markers: bool = True
    guide_8pi: bool = True

    def __post_init__(self) -> None:
        if self.branch_csv is None and self.thermo_csv is None:
            raise ValueError("a PlotJob needs at least one input CSV")
        if self.image_format not in FORMATS:
            raise ValueError(
                f"unsupported format {self.image_format!r} (expected one of {FORMATS})"
            )


def _save(fig, out_path: Path, image_format: str) -> Path:
    """Write the figure as a vector image without timestamp metadata."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    # Both backends stamp a creation date by default, which would make
    # reruns on identical inputs differ byte-for-byte.
    metadata = {"Date": None} if image_format == "svg" else {"CreationDate": None}
    fig.savefig(out_path, format=image_format, metadata=metadata)
    plt.close(fig)
    return out_path


def _as_branch(branch: BranchTable | Path | str) -> BranchTable:
    return branch if isinstance(branch, BranchTable) else read_branch(branch)


def _as_thermo(thermo: ThermoTable | Path | str) -> ThermoTable:
    return thermo if isinstance(thermo, ThermoTable) else read_thermo(thermo)


def plot_branch(
    branch: BranchTable | Path | str,
    out_path: Path | str,
    *,
    image_format: str = "svg",
    landmark_markers: bool = True,
    guide_8pi: bool = True,
) -> Path:
    """Draw the solution branch in the (multiplier, mean stream function) plane.

    The mean stream function equals twice the energy, so this is the
    classical bifurcation diagram of the problem.  Fold rows are marked and
    the first one is labeled with its multiplier; flex rows (the spectrum
    touches zero without the branch turning) get a distinct marker.
    """
    table = _as_branch(branch)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(table.lam, table.mean_psi, color="C0", linewidth=1.6)
        if guide_8pi:
            ax.axvline(EIGHT_PI, **_GUIDE_STYLE)
            ax.text(
                EIGHT_PI,
                0.98,
                "8π",
                transform=ax.get_xaxis_transform(),
                ha="left",
                va="top",
                fontsize=10,
                color="0.25",
            )
        if landmark_markers:
            folds = table.fold_indices()
            if folds:
                ax.plot(
                    table.lam[folds], table.mean_psi[folds], "o", color="C3", zorder=5
                )
                i = folds[0]
                ax.annotate(
                    f"λ* = {table.lam[i]:.4g}",
                    xy=(table.lam[i], table.mean_psi[i]),
                    xytext=(8, -2),
                    textcoords="offset points",
                    fontsize=10,
                    color="C3",
                )
            flexes = table.flex_indices()
            if flexes:
                ax.plot(
                    table.lam[flexes], table.mean_psi[flexes], "s", color="C1", zorder=5
                )
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(r"$\langle \psi \rangle$")
        ax.set_title("Solution branch")
        fig.tight_layout()
        return _save(fig, Path(out_path), image_format)


def plot_lambda_of_E(
    thermo: ThermoTable | Path | str,
    out_path: Path | str,
    *,
    image_format: str = "svg",
    landmark_markers: bool = True,
    guide_8pi: bool = True,
) -> Path:
    """Draw the multiplier as a function of energy.

    When the curve has an interior maximum — the energy at which the branch
    turns — the maximum is marked and labeled ``E*``.  On a monotone curve
    no landmark is drawn.
    """
    table = _as_thermo(thermo)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(table.E, table.lam, color="C0", linewidth=1.6)
        if guide_8pi:
            ax.axhline(EIGHT_PI, **_GUIDE_STYLE)
            ax.text(
                0.99,
                EIGHT_PI,
                "8π",
                transform=ax.get_yaxis_transform(),
                ha="right",
                va="bottom",
                fontsize=10,
                color="0.25",
            )
        if landmark_markers:
            i = table.interior_argmax_lambda()
            if i is not None:
                ax.axvline(table.E[i], **_LANDMARK_STYLE)
                ax.plot([table.E[i]], [table.lam[i]], "o", color="C3", zorder=5)
                ax.annotate(
                    f"E* = {table.E[i]:.4g}",
                    xy=(table.E[i], table.lam[i]),
                    xytext=(8, 2),
                    textcoords="offset points",
                    fontsize=10,
                    color="C3",
                )
        ax.set_xlabel(r"$E$")
        ax.set_ylabel(r"$\lambda(E)$")
        ax.set_title("Multiplier along the energy-parametrized branch")
        fig.tight_layout()
        return _save(fig, Path(out_path), image_format)


def plot_entropy(
    thermo: ThermoTable | Path | str,
    out_path: Path | str,
    *,
    image_format: str = "svg",
    landmark_markers: bool = True,
    guide_8pi: bool = True,  # accepted for interface symmetry; no guide here
) -> Path:
    """Draw the entropy curve S(E).

    The first sign change of the stored curvature from negative to positive
    is marked as the concave-to-convex transition.  The slope of the last
    curve segment is annotated together with its high-energy limit, −8π:
    along the branch the slope equals minus the multiplier, which approaches
    8π from above as energy grows without bound.
    """
    table = _as_thermo(thermo)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(table.E, table.S, color="C0", linewidth=1.6)
        if landmark_markers:
            i = table.inflection_index()
            if i is not None:
                ax.axvline(table.E[i], **_LANDMARK_STYLE)
                ax.plot([table.E[i]], [table.S[i]], "o", color="C3", zorder=5)
                ax.annotate(
                    "concave → convex",
                    xy=(table.E[i], table.S[i]),
                    xytext=(8, 4),
                    textcoords="offset points",
                    fontsize=10,
                    color="C3",
                )
        tail_slope = (table.S[-1] - table.S[-2]) / (table.E[-1] - table.E[-2])
        ax.text(
            0.98,
            0.95,
            f"tail slope dS/dE ≈ {tail_slope:.2f}   (→ −8π ≈ {-EIGHT_PI:.2f})",
            transform=ax.transAxes,
            ha="right",
            va="top",
            fontsize=9,
            color="0.25",
        )
        ax.set_xlabel(r"$E$")
        ax.set_ylabel(r"$S(E)$")
        ax.set_title("Entropy along the branch")
        fig.tight_layout()
        return _save(fig, Path(out_path), image_format)


def render_job(job: PlotJob) -> list[Path]:
    """Render every figure the job's inputs support and return their paths.

    A branch input yields ``branch.<fmt>``; a thermodynamic input yields
    ``lambda_of_E.<fmt>`` and ``entropy.<fmt>``.  Every input is validated
    before any figure is written, so a :class:`SchemaError` means no output
    file was produced.
    """
    branch_table = read_branch(job.branch_csv) if job.branch_csv is not None else None
    thermo_table = read_thermo(job.thermo_csv) if job.thermo_csv is not None else None
    written: list[Path] = []
    fmt = job.image_format
    out = Path(job.out_dir)
    toggles = {
        "image_format": fmt,
        "landmark_markers": job.landmark_markers,
        "guide_8pi": job.guide_8pi,
    }
    if branch_table is not None:
        written.append(plot_branch(branch_table, out / f"branch.{fmt}", **toggles))
    if thermo_table is not None:
        written.append(
            plot_lambda_of_E(thermo_table, out / f"lambda_of_E.{fmt}", **toggles)
        )
        written.append(plot_entropy(thermo_table, out / f"entropy.{fmt}", **toggles))
    return written
