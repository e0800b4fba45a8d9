"""Readers for the ``mfbranch`` artifact schema.

Both artifact kinds are plain CSV with a fixed header.  The readers here
validate the header verbatim, require every numeric cell to parse as a
float, and require the columns that the figures actually draw to be finite.
Any violation raises :class:`SchemaError`, which the command-line tool maps
to exit code 2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Column order of a branch artifact, matched verbatim against the header.
BRANCH_COLUMNS: tuple[str, ...] = (
    "s",
    "lambda",
    "E",
    "S",
    "beta",
    "sigma1",
    "sigma2",
    "mean_psi",
    "max_u",
    "dlambda_ds",
    "fold_flag",
)

#: Column order of an energy-parametrized (thermodynamic) artifact.
THERMO_COLUMNS: tuple[str, ...] = (
    "E",
    "lambda",
    "S",
    "beta",
    "d2S_dE2",
    "sigma1",
    "sigma2",
)

#: Admissible values of the ``fold_flag`` column.
FOLD_FLAG_VALUES: frozenset[str] = frozenset({"none", "fold", "flex"})

#: Columns the figures draw, per artifact kind; these must be finite.
_BRANCH_FINITE = ("lambda", "E", "mean_psi")
_THERMO_FINITE = ("E", "lambda", "S", "d2S_dE2")

#: Minimum number of data rows needed to draw a curve.
_MIN_ROWS = 2


class SchemaError(ValueError):
    """An input file is missing, empty, or violates the artifact schema."""

    def __init__(self, path: Path | str, detail: str) -> None:
        self.path = Path(path)
        self.detail = detail
        super().__init__(f"{self.path}: {detail}")


@dataclass(frozen=True)
class BranchTable:
    """A validated branch artifact as parallel column arrays."""

    path: Path
    s: np.ndarray
    lam: np.ndarray
    E: np.ndarray
    S: np.ndarray
    beta: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    mean_psi: np.ndarray
    max_u: np.ndarray
    dlambda_ds: np.ndarray
    fold_flags: tuple[str, ...]

    def __len__(self) -> int:
        return self.lam.size

    def fold_indices(self) -> list[int]:
        """Row indices flagged as folds (the branch turns in the multiplier)."""
        return [i for i, f in enumerate(self.fold_flags) if f == "fold"]

    def flex_indices(self) -> list[int]:
        """Row indices flagged as flexes (spectrum touches zero, no turn)."""
        return [i for i, f in enumerate(self.fold_flags) if f == "flex"]


@dataclass(frozen=True)
class ThermoTable:
    """A validated energy-parametrized artifact as parallel column arrays."""

    path: Path
    E: np.ndarray
    lam: np.ndarray
    S: np.ndarray
    beta: np.ndarray
    d2S_dE2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray

    def __len__(self) -> int:
        return self.E.size

    def interior_argmax_lambda(self) -> int | None:
        """Index of the multiplier maximum, or None if it sits on an endpoint.

        An interior maximum of the multiplier over the energy-parametrized
        curve is where the branch turns; on a monotone (first-kind style)
        curve the maximum is the last row and no landmark is reported.
        """
        i = int(np.argmax(self.lam))
        if 0 < i < len(self) - 1:
            return i
        return None

    def inflection_index(self) -> int | None:
        """First row where the entropy curvature flips negative to positive."""
        sign = np.sign(self.d2S_dE2)
        for i in range(len(self) - 1):
            if sign[i] < 0 and sign[i + 1] > 0:
                return i + 1
        return None


def _read_rows(path: Path | str, columns: tuple[str, ...]) -> list[list[str]]:
    """Read and structurally validate a CSV file against a column tuple."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SchemaError(path, f"cannot read file ({exc})") from exc
    if not rows:
        raise SchemaError(path, "file is empty (no header row)")
    header = rows[0]
    if tuple(header) != columns:
        raise SchemaError(
            path,
            "header mismatch: expected "
            f"{','.join(columns)!r}, found {','.join(header)!r}",
        )
    data = rows[1:]
    if len(data) < _MIN_ROWS:
        raise SchemaError(
            path, f"need at least {_MIN_ROWS} data rows to draw a curve, found {len(data)}"
        )
    for lineno, row in enumerate(data, start=2):
        if len(row) != len(columns):
            raise SchemaError(
                path, f"line {lineno}: expected {len(columns)} cells, found {len(row)}"
            )
    return data


def _parse_column(
    path: Path, data: list[list[str]], columns: tuple[str, ...], name: str, finite: bool
) -> np.ndarray:
    """Parse one named column to floats, optionally requiring finiteness."""
    j = columns.index(name)
    out = np.empty(len(data))
    for i, row in enumerate(data):
        try:
            out[i] = float(row[j])
        except ValueError as exc:
            raise SchemaError(
                path, f"line {i + 2}: column {name!r} is not a number: {row[j]!r}"
            ) from exc
        if finite and not math.isfinite(out[i]):
            raise SchemaError(
                path, f"line {i + 2}: column {name!r} must be finite, found {row[j]!r}"
            )
    return out


def read_branch(path: Path | str) -> BranchTable:
    """Load and validate a branch artifact.

    Raises
    ------
    SchemaError
        If the file is unreadable or empty, the header differs from
        :data:`BRANCH_COLUMNS`, a numeric cell fails to parse, a drawn
        column is non-finite, or a ``fold_flag`` value is unknown.
    """
    path = Path(path)
    data = _read_rows(path, BRANCH_COLUMNS)
    arrays = {
        name: _parse_column(path, data, BRANCH_COLUMNS, name, name in _BRANCH_FINITE)
        for name in BRANCH_COLUMNS[:-1]
    }
    j = BRANCH_COLUMNS.index("fold_flag")
    flags = []
    for i, row in enumerate(data):
        if row[j] not in FOLD_FLAG_VALUES:
            raise SchemaError(
                path,
                f"line {i + 2}: unknown fold_flag {row[j]!r} "
                f"(expected one of {sorted(FOLD_FLAG_VALUES)})",
            )
        flags.append(row[j])
    return BranchTable(
        path=path,
        s=arrays["s"],
        lam=arrays["lambda"],
        E=arrays["E"],
        S=arrays["S"],
        beta=arrays["beta"],
        sigma1=arrays["sigma1"],
        sigma2=arrays["sigma2"],
        mean_psi=arrays["mean_psi"],
        max_u=arrays["max_u"],
        dlambda_ds=arrays["dlambda_ds"],
        fold_flags=tuple(flags),
    )


def read_thermo(path: Path | str) -> ThermoTable:
    """Load and validate an energy-parametrized artifact.

    Raises
    ------
    SchemaError
        Under the same conditions as :func:`read_branch`, against
        :data:`THERMO_COLUMNS`.
    """
    path = Path(path)
    data = _read_rows(path, THERMO_COLUMNS)
    arrays = {
        name: _parse_column(path, data, THERMO_COLUMNS, name, name in _THERMO_FINITE)
        for name in THERMO_COLUMNS
    }
    return ThermoTable(
        path=path,
        E=arrays["E"],
        lam=arrays["lambda"],
        S=arrays["S"],
        beta=arrays["beta"],
        d2S_dE2=arrays["d2S_dE2"],
        sigma1=arrays["sigma1"],
        sigma2=arrays["sigma2"],
    )
