"""Command-line entry point: configured runs, artifact serialization, checks.

Subcommands
-----------
``run``
    Trace the solution branch for a configured domain, reparametrize it by
    energy, and write four artifacts into the output directory:
    ``branch.csv``, ``thermo.csv``, ``landmarks.json``, ``report.txt``.
``verify``
    Execute the identity/property check suite against a fresh trace and
    print one pass/fail line per check.
``landmarks``
    Trace and emit only the landmark summary (``landmarks.json``), echoing
    the JSON to stdout.

Exit codes: 0 on success; 1 on a numerical failure, with whatever artifacts
were completed plus a failure record in ``report.txt``; 2 on an invalid
configuration, with nothing written.

Configuration is a single JSON file (schema documented in the README). The
only environment override honored is ``MFBRANCH_OUT`` for the output
directory; everything else must live in the config file so runs stay
reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .continuation import (
    EIGHT_PI,
    ContinuationControls,
    FoldFlag,
    tangent,
    tangent_cross_identity_error,
    trace_branch,
)
from .errors import ConfigurationError, NumericalError
from .meanfield import density, energy, jacobian_apply, make_solution, newton_solve
from .mesh import Mesh, Rectangle, UnitDisk
from .spectral import (
    constrained_spectrum,
    dense_constrained_spectrum,
    nondegeneracy_check,
    proportionality_check,
)
from .thermo import energy_parametrize, verify_entropy_identities

OUT_ENV_VAR = "MFBRANCH_OUT"
BRANCH_HEADER = "s,lambda,E,S,beta,sigma1,sigma2,mean_psi,max_u,dlambda_ds,fold_flag"
THERMO_HEADER = "E,lambda,S,beta,d2S_dE2,sigma1,sigma2"
LANDMARK_ORDER = ("E0", "E_8pi", "E_star", "E_m", "E_d")

# continuation knobs that must be strictly positive when supplied
_POSITIVE_CONTROLS = frozenset(
    {
        "step0",
        "max_step",
        "step_rel",
        "min_step",
        "sigma_switch",
        "theta",
        "max_ds",
        "lambda_cap",
        "energy_cap_factor",
        "energy_step_frac",
        "newton_tol",
        "window_radius",
        "mass_threshold",
        "max_u_threshold",
        "max_u_divergence",
        "slope_dead_band",
    }
)
# optional knobs that must be strictly positive when not null
_POSITIVE_OR_NULL_CONTROLS = frozenset({"ds0", "energy_cap"})
# integer knobs with their minimum admissible values
_INTEGER_CONTROLS = {
    "easy_iters": 1,
    "max_points": 2,
    "max_critical_points": 1,
    "k_eigen": 1,
    "newton_max_iter": 1,
    "spectra_window": 1,
}

_TOP_LEVEL_KEYS = frozenset(
    {
        "domain",
        "resolution",
        "n_theta",
        "lambda_start",
        "lambda_max",
        "controls",
        "out",
        "quiet",
        "report_samples",
        "debug_break_jacobian",
    }
)


@dataclass(frozen=True)
class RunConfig:
    """Validated run description: domain, mesh size, tracer knobs, outputs."""

    domain: UnitDisk | Rectangle
    resolution: int
    n_theta: int | None
    lambda_start: float
    lambda_max: float | None
    controls: ContinuationControls
    out: str | None
    quiet: bool
    report_samples: int
    debug_break_jacobian: bool

    def build_mesh(self) -> Mesh:
        return Mesh(self.domain, self.resolution, n_theta=self.n_theta)

    def domain_label(self) -> str:
        if isinstance(self.domain, UnitDisk):
            return f"disk (radius {self.domain.radius:g})"
        return f"rectangle {self.domain.width:g} x {self.domain.height:g}"


# ----------------------------------------------------------------------
# configuration loading and validation
# ----------------------------------------------------------------------


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


def _parse_domain(raw: object) -> UnitDisk | Rectangle:
    _require(isinstance(raw, dict), "config: 'domain' must be an object")
    assert isinstance(raw, dict)
    kind = raw.get("type")
    _require(
        kind in {"disk", "rectangle", "square"},
        f"config: domain type must be 'disk', 'rectangle', or 'square', got {kind!r}",
    )
    if kind == "disk":
        extra = set(raw) - {"type", "radius"}
        _require(not extra, f"config: unknown disk keys {sorted(extra)}")
        radius = raw.get("radius", 1.0)
        _require(
            isinstance(radius, (int, float)) and radius > 0,
            "config: disk radius must be a positive number",
        )
        return UnitDisk(float(radius))
    if kind == "square":
        extra = set(raw) - {"type", "side"}
        _require(not extra, f"config: unknown square keys {sorted(extra)}")
        side = raw.get("side", 1.0)
        _require(
            isinstance(side, (int, float)) and side > 0,
            "config: square side must be a positive number",
        )
        return Rectangle(float(side), float(side))
    extra = set(raw) - {"type", "width", "height"}
    _require(not extra, f"config: unknown rectangle keys {sorted(extra)}")
    _require(
        "width" in raw and "height" in raw,
        "config: rectangle needs 'width' and 'height'",
    )
    width, height = raw["width"], raw["height"]
    _require(
        isinstance(width, (int, float)) and isinstance(height, (int, float)),
        "config: rectangle sides must be numbers",
    )
    _require(width > 0 and height > 0, "config: rectangle sides must be positive")
    return Rectangle(float(width), float(height))


def _parse_controls(raw: object) -> ContinuationControls:
    _require(isinstance(raw, dict), "config: 'controls' must be an object")
    assert isinstance(raw, dict)
    valid = {f.name for f in dataclasses.fields(ContinuationControls)}
    unknown = set(raw) - valid
    _require(not unknown, f"config: unknown controls keys {sorted(unknown)}")
    for name, value in raw.items():
        if name in _INTEGER_CONTROLS:
            floor = _INTEGER_CONTROLS[name]
            _require(
                isinstance(value, int) and not isinstance(value, bool)
                and value >= floor,
                f"config: controls.{name} must be an integer >= {floor}",
            )
        elif name in _POSITIVE_OR_NULL_CONTROLS:
            _require(
                value is None or (isinstance(value, (int, float)) and value > 0),
                f"config: controls.{name} must be positive or null",
            )
        elif name in _POSITIVE_CONTROLS:
            _require(
                isinstance(value, (int, float)) and not isinstance(value, bool)
                and value > 0,
                f"config: controls.{name} must be a positive number",
            )
        elif name == "growth":
            _require(
                isinstance(value, (int, float)) and value >= 1.0,
                "config: controls.growth must be >= 1",
            )
    controls = ContinuationControls(**raw)
    _require(
        controls.theta < 1.0, "config: controls.theta must lie strictly inside (0, 1)"
    )
    _require(
        controls.mass_threshold <= 1.0,
        "config: controls.mass_threshold is a mass fraction and cannot exceed 1",
    )
    _require(
        controls.min_step <= controls.step0 <= controls.max_step,
        "config: need min_step <= step0 <= max_step",
    )
    _require(
        controls.lambda_cap > EIGHT_PI,
        "config: controls.lambda_cap must exceed 8*pi, the concentration threshold",
    )
    return controls


def load_config(path: str) -> RunConfig:
    """Read and validate a JSON run configuration; raises ConfigurationError."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    _require(isinstance(raw, dict), "config: top level must be a JSON object")
    unknown = set(raw) - _TOP_LEVEL_KEYS
    _require(not unknown, f"config: unknown top-level keys {sorted(unknown)}")
    _require("domain" in raw, "config: 'domain' is required")
    _require("resolution" in raw, "config: 'resolution' is required")

    domain = _parse_domain(raw["domain"])
    resolution = raw["resolution"]
    _require(
        isinstance(resolution, int) and not isinstance(resolution, bool)
        and resolution >= 2,
        "config: resolution must be an integer >= 2",
    )
    n_theta = raw.get("n_theta")
    _require(
        n_theta is None or (isinstance(n_theta, int) and n_theta >= 4),
        "config: n_theta must be an integer >= 4 or null",
    )
    _require(
        n_theta is None or isinstance(domain, UnitDisk),
        "config: n_theta only applies to disk domains",
    )

    lambda_start = raw.get("lambda_start", 0.0)
    _require(
        isinstance(lambda_start, (int, float)) and 0.0 <= lambda_start < EIGHT_PI,
        "config: lambda_start must lie in [0, 8*pi)",
    )
    lambda_max = raw.get("lambda_max")
    _require(
        lambda_max is None
        or (isinstance(lambda_max, (int, float)) and lambda_max > lambda_start),
        "config: lambda_max must exceed lambda_start or be null",
    )

    controls = _parse_controls(raw.get("controls", {}))

    out = raw.get("out")
    _require(
        out is None or (isinstance(out, str) and out),
        "config: 'out' must be a non-empty string or null",
    )
    quiet = raw.get("quiet", False)
    _require(isinstance(quiet, bool), "config: 'quiet' must be a boolean")
    report_samples = raw.get("report_samples", 8)
    _require(
        isinstance(report_samples, int) and report_samples >= 2,
        "config: report_samples must be an integer >= 2",
    )
    break_jacobian = raw.get("debug_break_jacobian", False)
    _require(
        isinstance(break_jacobian, bool),
        "config: 'debug_break_jacobian' must be a boolean",
    )

    return RunConfig(
        domain=domain,
        resolution=resolution,
        n_theta=n_theta,
        lambda_start=float(lambda_start),
        lambda_max=None if lambda_max is None else float(lambda_max),
        controls=controls,
        out=out,
        quiet=quiet,
        report_samples=report_samples,
        debug_break_jacobian=break_jacobian,
    )


def resolve_out_dir(config: RunConfig, flag_value: str | None) -> str:
    """Output directory precedence: env override > --out flag > config > default."""
    env = os.environ.get(OUT_ENV_VAR)
    if env:
        return env
    if flag_value:
        return flag_value
    if config.out:
        return config.out
    return "mfbranch_out"


# ----------------------------------------------------------------------
# serialization (deterministic, 17 significant digits)
# ----------------------------------------------------------------------


def format_float(x: float) -> str:
    """Fixed 17-significant-digit rendering; round-trips binary doubles."""
    return format(float(x), ".17g")


def dumps_json(obj: object, indent: int = 0) -> str:
    """Deterministic JSON with 17-significant-digit floats.

    The stdlib encoder renders floats with shortest-round-trip repr; the
    artifact contract pins 17 significant digits instead, so this walks the
    (small) payload by hand. Dict insertion order is preserved — callers
    build payloads in a fixed key order.
    """
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite float reached the JSON serializer")
        return format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(k))}: {dumps_json(v, indent + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{dumps_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"unsupported type for JSON artifact: {type(obj)!r}")


def _sigma2_of(point) -> float:
    spectrum = point.spectrum
    if spectrum.k_computed >= 2:
        return float(spectrum.sigmas[1])
    return math.nan


def write_branch_csv(path: str, branch) -> None:
    lines = [BRANCH_HEADER]
    for p in branch.points:
        sol = p.solution
        fields = [
            format_float(p.s),
            format_float(sol.lam),
            format_float(sol.energy),
            format_float(sol.entropy),
            format_float(-sol.lam),
            format_float(p.sigma1),
            format_float(_sigma2_of(p)),
            format_float(sol.mean_psi),
            format_float(sol.max_u),
            format_float(p.dlambda_ds),
            p.fold_flag.value,
        ]
        lines.append(",".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_thermo_csv(path: str, curve) -> None:
    lines = [THERMO_HEADER]
    for row in curve.rows():
        lines.append(
            ",".join(
                format_float(row[key])
                for key in ("E", "lambda", "S", "beta", "d2S_dE2", "sigma1", "sigma2")
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def landmarks_payload(branch, curve) -> dict:
    """Landmark summary combining branch classification and the energy curve.

    The infinite first-kind sentinel for the 8*pi crossing energy is
    serialized as null (the adjacent "kind" field disambiguates); landmarks
    that could not be extracted are listed under "missing" with reasons.
    """
    present: dict = {}
    missing: dict = {}
    if curve is not None:
        for name in LANDMARK_ORDER:
            if name in curve.landmarks:
                value = float(curve.landmarks[name])
                present[name] = None if math.isinf(value) else value
            elif name in curve.landmark_reasons:
                missing[name] = curve.landmark_reasons[name]
    folds = [r for r in branch.critical_points if r["kind"] is FoldFlag.FOLD]
    payload = {
        "kind": branch.kind.value,
        "lambda_star": float(folds[0]["lambda_star"]) if folds else None,
        "E_star": float(folds[0]["E_star"]) if folds else None,
        "landmarks": present,
        "missing": missing,
        "critical_points": [
            {
                "index": int(r["index"]),
                "kind": r["kind"].value,
                "lambda_star": float(r["lambda_star"]),
                "E_star": float(r["E_star"]),
            }
            for r in branch.critical_points
        ],
        "termination": branch.termination.value if branch.termination else None,
        "notes": list(branch.notes),
    }
    return payload


# ----------------------------------------------------------------------
# report
# ----------------------------------------------------------------------


def _sample_indices(n_points: int, n_samples: int) -> list[int]:
    if n_points <= n_samples:
        return list(range(n_points))
    idx = np.linspace(0, n_points - 1, n_samples).round().astype(int)
    return sorted(set(int(i) for i in idx))


def _flag(ok: bool) -> str:
    return "ok" if ok else "VIOLATED"


def build_report(config: RunConfig, mesh: Mesh, branch, curve, entropy_report) -> str:
    """Human-readable run summary: classification, identities, stability."""
    points = branch.points
    controls = config.controls
    lines: list[str] = []
    add = lines.append
    add("mfbranch run report")
    add("===================")
    add(f"domain: {config.domain_label()}, resolution {config.resolution}")
    add(f"interior nodes: {mesh.n_nodes}")
    add(f"points traced: {len(points)}")
    if points:
        add(
            "multiplier range: "
            f"[{points[0].lam:.9g}, {max(p.lam for p in points):.9g}]"
        )
        add(f"energy range: [{points[0].energy:.9g}, {points[-1].energy:.9g}]")
    add(f"termination: {branch.termination.value if branch.termination else 'none'}")
    add(f"domain kind: {branch.kind.value}")
    for note in branch.notes:
        add(f"note: {note}")
    add("")

    add("critical points:")
    if branch.critical_points:
        for rec in branch.critical_points:
            add(
                f"  {rec['kind'].value} at multiplier* = "
                f"{rec['lambda_star']:.9g} (= {rec['lambda_star'] / math.pi:.6g} pi), "
                f"E* = {rec['E_star']:.9g}  [point {rec['index']}]"
            )
    else:
        add("  none detected")
    add("")

    add("landmarks:")
    if curve is not None:
        for name in LANDMARK_ORDER:
            if name in curve.landmarks:
                value = curve.landmarks[name]
                rendered = "+inf (never crosses 8*pi)" if math.isinf(value) else f"{value:.9g}"
                add(f"  {name:6s} = {rendered}")
        for name in LANDMARK_ORDER:
            if name in curve.landmark_reasons:
                add(f"  {name:6s} missing: {curve.landmark_reasons[name]}")
        add("")
        add("concavity of S(E) (sign of the second derivative):")
        for lo, hi, sign in curve.concavity_intervals:
            label = {1: "convex", -1: "concave", 0: "flat"}[sign]
            add(f"  [{lo:.9g}, {hi:.9g}]: {label}")
    else:
        add("  unavailable (energy reparametrization failed)")
    add("")

    sample = _sample_indices(len(points), config.report_samples)
    add(f"identity checks (sampled at {len(sample)} branch points):")
    cross_errors = []
    for i in sample:
        sol = points[i].solution
        if points[i].sigma1 > controls.sigma_switch:
            tf = points[i].tangent or tangent(sol)
            cross_errors.append(tangent_cross_identity_error(sol, tf))
    if cross_errors:
        worst = max(cross_errors)
        add(
            "  energy-slope cross identity (linearized response vs moments): "
            f"max rel err {worst:.3e} [{_flag(worst <= 1e-8)}]"
        )
    prop_errors = []
    for i in sample:
        errs = proportionality_check(points[i].solution, points[i].spectrum)
        if errs.size:
            prop_errors.append(float(np.max(errs[: min(4, errs.size)])))
    if prop_errors:
        worst = max(prop_errors)
        add(
            "  mean/energy coefficient proportionality (leading 4 modes): "
            f"max rel err {worst:.3e} [{_flag(worst <= 1e-6)}]"
        )
    if entropy_report is not None:
        add(
            "  entropy slope vs negative multiplier: "
            f"max rel err {entropy_report.max_rel_error:.3e} "
            f"(worst row {entropy_report.worst_row}) "
            f"[{_flag(entropy_report.max_rel_error <= 1e-3)}]"
        )
        add(
            "  entropy slope at the endpoints: "
            f"abs err {entropy_report.endpoint_abs_error:.3e} "
            f"[{_flag(entropy_report.endpoint_abs_error <= 1e-3)}]"
        )
        if entropy_report.d2S_sign_flip_energy is not None:
            add(
                "  concave-to-convex flip of S(E) at E = "
                f"{entropy_report.d2S_sign_flip_energy:.9g}"
            )
    add("")

    add(f"stability checks (sampled at {len(sample)} branch points):")
    min_tau = min(float(np.min(p.spectrum.taus)) for p in points)
    add(
        "  positive generalized spectrum (all tau_k > 0): "
        f"min tau = {min_tau:.6g} [{_flag(min_tau > 0)}]"
    )
    window = [p for p in points if p.lam <= 0.99 * EIGHT_PI]
    if window:
        min_sig = min(p.sigma1 for p in window)
        add(
            "  first eigenvalue positive below 0.99 * 8*pi: "
            f"min sigma1 = {min_sig:.6g} [{_flag(min_sig > 0)}]"
        )
    reports = []
    for i in sample:
        sol = points[i].solution
        if sol.lam > 0:
            reports.append((i, nondegeneracy_check(sol, points[i].spectrum)))
    if reports:
        n = len(reports)
        nondeg = sum(r.nondegenerate for _, r in reports)
        h1 = sum(r.h1_holds for _, r in reports)
        h2 = sum(r.h2_holds for _, r in reports)
        suff = sum(r.sufficient_stability_holds for _, r in reports)
        worst_mu = max(r.mu_min for _, r in reports)
        add(
            "  second variation strictly negative on the constrained subspace: "
            f"{nondeg}/{n} points (max form bound {worst_mu:.6g})"
        )
        add(f"  stability-gap condition (form bound vs second mode): {h1}/{n} points")
        add(f"  eigenvalue-gap condition (second vs first mode): {h2}/{n} points")
        add(
            "  first-harmonic sufficient stability condition: "
            f"{suff}/{n} points"
        )
    fold_points = [p for p in points if p.fold_flag is FoldFlag.FOLD]
    for p in fold_points:
        a_star = p.a_star
        if a_star is not None:
            add(
                f"  fold coefficient at point {points.index(p)}: "
                f"a* = {a_star:.6g} [{_flag(a_star > 0)}]"
            )
    return "\n".join(lines) + "\n"


def _write_failure_report(out_dir: str, stage: str, exc: Exception, written: list[str]) -> None:
    lines = [
        "mfbranch run report",
        "===================",
        "FAILURE",
        f"stage: {stage}",
        f"error: {type(exc).__name__}: {exc}",
        f"artifacts completed before the failure: {written if written else 'none'}",
        "",
    ]
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(str(x) for x in lines))


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def _trace(config: RunConfig, mesh: Mesh):
    return trace_branch(
        mesh,
        config.controls,
        lambda_start=config.lambda_start,
        lambda_max=config.lambda_max,
    )


def cmd_run(config: RunConfig, out_dir: str) -> int:
    say = (lambda *_: None) if config.quiet else print
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    say(f"tracing branch on {config.domain_label()} at resolution {config.resolution}")
    mesh = config.build_mesh()
    try:
        branch = _trace(config, mesh)
    except NumericalError as exc:
        _write_failure_report(out_dir, "branch tracing", exc, written)
        say(f"FAILURE while tracing: {exc}")
        return 1

    branch_path = os.path.join(out_dir, "branch.csv")
    write_branch_csv(branch_path, branch)
    written.append("branch.csv")
    say(f"wrote {branch_path} ({len(branch.points)} points)")

    try:
        curve = energy_parametrize(branch)
        entropy_report = verify_entropy_identities(curve)
    except (NumericalError, ValueError) as exc:
        _write_failure_report(out_dir, "energy reparametrization", exc, written)
        say(f"FAILURE while reparametrizing: {exc}")
        return 1

    thermo_path = os.path.join(out_dir, "thermo.csv")
    write_thermo_csv(thermo_path, curve)
    written.append("thermo.csv")
    say(f"wrote {thermo_path}")

    landmarks_path = os.path.join(out_dir, "landmarks.json")
    with open(landmarks_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(landmarks_payload(branch, curve)) + "\n")
    written.append("landmarks.json")
    say(f"wrote {landmarks_path}")

    report_path = os.path.join(out_dir, "report.txt")
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(build_report(config, mesh, branch, curve, entropy_report))
    written.append("report.txt")
    say(f"wrote {report_path}")
    say(f"domain kind: {branch.kind.value}")
    return 0


def cmd_landmarks(config: RunConfig, out_dir: str) -> int:
    say = (lambda *_: None) if config.quiet else print
    os.makedirs(out_dir, exist_ok=True)
    mesh = config.build_mesh()
    try:
        branch = _trace(config, mesh)
        curve = energy_parametrize(branch)
    except NumericalError as exc:
        _write_failure_report(out_dir, "landmark extraction", exc, [])
        say(f"FAILURE: {exc}")
        return 1
    payload = landmarks_payload(branch, curve)
    text = dumps_json(payload) + "\n"
    with open(os.path.join(out_dir, "landmarks.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    # the JSON itself is the stdout contract for this subcommand
    print(text, end="")
    return 0


# ----------------------------------------------------------------------
# verification suite
# ----------------------------------------------------------------------


def _check_energy_consistency(points, sample) -> tuple[bool, str]:
    worst = 0.0
    for i in sample:
        sol = points[i].solution
        independent = energy(sol.mesh, sol.rho)
        worst = max(worst, abs(independent - sol.energy) / max(sol.energy, 1e-30))
    return worst <= 1e-8, f"max rel err {worst:.3e} (tol 1e-08)"


def _check_proportionality(points, sample) -> tuple[bool, str]:
    worst = 0.0
    count = 0
    for i in sample:
        errs = proportionality_check(points[i].solution, points[i].spectrum)
        if errs.size:
            worst = max(worst, float(np.max(errs[: min(4, errs.size)])))
            count += 1
    if count == 0:
        return False, "no points with a nonzero multiplier to test"
    return worst <= 1e-6, f"max rel err {worst:.3e} over {count} points (tol 1e-06)"


def _check_tangent(points, sample, controls) -> tuple[bool, str]:
    """Finite-difference energy slope against the linearized-response mean."""
    worst = 0.0
    count = 0
    for i in sample:
        p = points[i]
        if p.sigma1 <= max(controls.sigma_switch, 0.2):
            continue  # fresh solves at a nearly critical multiplier are ill-posed
        sol = p.solution
        mesh = sol.mesh
        tf = p.tangent or tangent(sol)
        # shrink the probe as criticality approaches: the energy-vs-multiplier
        # curve steepens like the reciprocal of the first eigenvalue, and a
        # fixed-width stencil there measures truncation error, not the slope
        delta = 1e-3 * max(sol.lam, 1.0) * min(1.0, p.sigma1 / 20.0)
        hi = newton_solve(mesh, sol.lam + delta, np.asarray(sol.psi))
        lo = newton_solve(mesh, sol.lam - delta, np.asarray(sol.psi))
        fd = (hi.energy - lo.energy) / (2 * delta)
        scale = max(abs(tf.dE_dlambda), 1e-12)
        worst = max(worst, abs(fd - tf.dE_dlambda) / scale)
        count += 1
    if count == 0:
        return False, "no sampled points away from criticality"
    return worst <= 1e-4, f"max rel err {worst:.3e} over {count} points (tol 1e-04)"


def _check_entropy(curve) -> tuple[bool, str]:
    report = verify_entropy_identities(curve)
    ok = report.max_rel_error <= 1e-3 and report.endpoint_abs_error <= 1e-3
    return ok, (
        f"max rel err {report.max_rel_error:.3e}, "
        f"endpoint abs err {report.endpoint_abs_error:.3e} (tol 1e-03)"
    )


def _check_tau_positivity(points) -> tuple[bool, str]:
    min_tau = min(float(np.min(p.spectrum.taus)) for p in points)
    return min_tau > 0, f"min generalized eigenvalue {min_tau:.6g}"


def _check_dense_equivalence(config: RunConfig) -> tuple[bool, str]:
    """Iterative vs dense spectra on a mesh small enough to solve densely."""
    resolution = config.resolution
    mesh = None
    while resolution >= 2:
        candidate = Mesh(config.domain, resolution)
        if candidate.n_nodes <= 200:
            mesh = candidate
            break
        resolution -= 1
    if mesh is None:
        return False, "no coarse mesh with <= 200 interior nodes"
    lam = 4.0
    sol = newton_solve(mesh, lam, np.zeros(mesh.n_nodes))
    spectrum = constrained_spectrum(sol, k=4)
    dense = dense_constrained_spectrum(sol, 4)
    k = min(spectrum.k_computed, dense.size, 4)
    worst = float(np.max(np.abs(spectrum.sigmas[:k] - dense[:k])))
    return worst <= 1e-8, (
        f"max abs gap {worst:.3e} over {k} modes at "
        f"{mesh.n_nodes} nodes (tol 1e-08)"
    )


def _check_jacobian(points, sample, broken: bool) -> tuple[bool, str]:
    """Directional finite difference of the weak residual vs the linearization."""
    worst = 0.0
    for i in sample[: min(3, len(sample))]:
        sol = points[i].solution
        mesh = sol.mesh
        rng = np.random.default_rng(12345 + i)
        direction = rng.standard_normal(mesh.n_nodes)
        direction /= float(np.sqrt(mesh.integrate(direction * direction)))
        h = 1e-6

        def weak(psi):
            return mesh.laplacian @ psi - mesh.weights * density(mesh, sol.lam, psi)

        fd = (weak(sol.psi + h * direction) - weak(sol.psi - h * direction)) / (2 * h)
        analytic = jacobian_apply(mesh, sol.lam, sol.rho, direction)
        if broken:
            analytic = 1.001 * analytic  # negative-control hook
        scale = max(float(np.linalg.norm(fd)), 1e-12)
        worst = max(worst, float(np.linalg.norm(fd - analytic)) / scale)
    return worst <= 1e-6, f"max rel err {worst:.3e} (tol 1e-06)"


def cmd_verify(config: RunConfig, out_dir: str) -> int:
    say = print  # pass/fail lines are the contract; --quiet keeps them
    mesh = config.build_mesh()
    if not config.quiet:
        say(
            f"verifying on {config.domain_label()} at resolution "
            f"{config.resolution} ({mesh.n_nodes} nodes)"
        )
    try:
        branch = _trace(config, mesh)
        curve = energy_parametrize(branch)
    except NumericalError as exc:
        say(f"FAIL branch-trace: {type(exc).__name__}: {exc}")
        return 1

    points = branch.points
    sample = _sample_indices(len(points), config.report_samples)
    checks = [
        ("energy-consistency", *_check_energy_consistency(points, sample)),
        ("proportionality", *_check_proportionality(points, sample)),
        ("tangent-slope", *_check_tangent(points, sample, config.controls)),
        ("entropy-slope", *_check_entropy(curve)),
        ("tau-positivity", *_check_tau_positivity(points)),
        ("dense-equivalence", *_check_dense_equivalence(config)),
        (
            "jacobian-consistency",
            *_check_jacobian(points, sample, config.debug_break_jacobian),
        ),
    ]
    failures = 0
    for name, ok, detail in checks:
        say(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    if failures:
        say(f"{failures} of {len(checks)} checks failed")
        return 1
    say(f"all {len(checks)} checks passed")
    return 0


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfbranch",
        description=(
            "Trace solution branches of the exponential mean-field equation "
            "and derive the microcanonical entropy curve."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("run", "trace a branch and write all artifacts"),
        ("verify", "run the identity/property check suite"),
        ("landmarks", "emit only the landmark summary JSON"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output directory for artifacts")
        p.add_argument(
            "--quiet", action="store_true", help="suppress progress output"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.quiet:
            config = dataclasses.replace(config, quiet=True)
        out_dir = resolve_out_dir(config, args.out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.command == "run":
        return cmd_run(config, out_dir)
    if args.command == "verify":
        return cmd_verify(config, out_dir)
    return cmd_landmarks(config, out_dir)


if __name__ == "__main__":
    sys.exit(main())
