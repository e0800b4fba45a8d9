"""Figure generation for ``mfbranch`` CSV artifacts.

This package is a pure consumer of the artifact schema written by the
``mfbranch`` command-line tool: it reads ``branch.csv`` and ``thermo.csv``
files and renders the three standard diagrams of the solution branch as
vector images.  It never imports the solver package and has no opinion about
how the data was produced beyond the column contract.
"""

from mfplots.schema import (
    BRANCH_COLUMNS,
    THERMO_COLUMNS,
    BranchTable,
    SchemaError,
    ThermoTable,
    read_branch,
    read_thermo,
)
from mfplots.figures import (
    PlotJob,
    plot_branch,
    plot_entropy,
    plot_lambda_of_E,
    render_job,
)

__all__ = [
    "BRANCH_COLUMNS",
    "THERMO_COLUMNS",
    "BranchTable",
    "ThermoTable",
    "SchemaError",
    "read_branch",
    "read_thermo",
    "PlotJob",
    "plot_branch",
    "plot_lambda_of_E",
    "plot_entropy",
    "render_job",
]
