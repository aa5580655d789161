"""Configuration-driven experiment runners writing CSV files.

Grid functions are written as ``i, j, x, y, value`` rows in storage order
(``i`` along x, fastest). All floats use 17 significant digits so that a
rerun with the same configuration reproduces every file byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import ChaosSolution, empirical_mean, empirical_variance
from .basis import ChaosBasis, build_basis
from .config import ExperimentConfig
from .galerkin import DeterministicSystem, project
from .integrators import Scheme, StepperConfig
from .kle import KLExpansion, make_kernel, solve_covariance_eigenproblem, write_eigenpairs_csv
from .solver import solve_system
from .spatial import Grid2D, ResolventCache, SplitOperators, assemble_operators
from .studies import corner_study, order_study, timing_table, variance_truncation_study

__all__ = [
    "Pipeline",
    "build_pipeline",
    "kle_inspect",
    "run_corner_study",
    "run_order_study",
    "run_solve",
    "run_timing_table",
    "run_variance_study",
    "write_grid_csv",
]

log = logging.getLogger(__name__)

FLOAT = "%.17g"
# above this many chaos coefficients only the non-zero ones get their own file
MAX_COEFFICIENT_FILES = 1000


def write_grid_csv(path, grid: Grid2D, values) -> None:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} grid values, got shape {values.shape}")
    J, I = np.divmod(np.arange(grid.size), grid.N)
    X, Y = grid.mesh
    table = np.column_stack([I, J, X.ravel(), Y.ravel(), values])
    np.savetxt(path, table, fmt=["%d", "%d", FLOAT, FLOAT, FLOAT], delimiter=",", header="i,j,x,y,value", comments="")


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([FLOAT % v if isinstance(v, float) else v for v in row])


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_checksums(out: Path, files) -> None:
    _write_rows(out / "checksums.csv", ["file", "sha256"], [(f.relative_to(out).as_posix(), _sha256(f)) for f in files])


def output_dir(cfg: ExperimentConfig, sub: str = "") -> Path:
    out = Path(cfg.directory) / sub if sub else Path(cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


@dataclass(frozen=True)
class Pipeline:
    grid: Grid2D
    ops: SplitOperators
    kle: KLExpansion
    basis: ChaosBasis
    system: DeterministicSystem


def build_kle(cfg: ExperimentConfig, grid: Grid2D, m: int | None = None) -> KLExpansion:
    kernel = make_kernel(cfg.kernel, cfg.length_scale, cfg.variance)
    mean = float(cfg.mean)
    return solve_covariance_eigenproblem(kernel, grid, cfg.m if m is None else m, lambda x, y: mean + 0.0 * x)


def build_pipeline(cfg: ExperimentConfig) -> Pipeline:
    """KL expansion, basis, operators and projected system for ``cfg``."""
    grid = Grid2D(cfg.N)
    ops = assemble_operators(grid, cfg.coefficient_a, cfg.coefficient_b)
    kle = build_kle(cfg, grid)
    basis = build_basis(cfg.m, cfg.K)
    return Pipeline(grid, ops, kle, basis, project(kle, basis, ops, cfg.forcing))


def _monte_carlo(cfg: ExperimentConfig, sol: ChaosSolution, out: Path) -> list[Path]:
    """Sample mean and variance of the chaos solution from ``mc_samples`` draws."""
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    n, batch = cfg.mc_samples, 10_000
    total = np.zeros(sol.grid.size)
    total_sq = np.zeros(sol.grid.size)
    done = 0
    while done < n:
        k = min(batch, n - done)
        xi = rng.uniform(-1.0, 1.0, size=(k, sol.basis.m))
        U = sol.evaluate(xi)
        total += U.sum(axis=1)
        total_sq += (U**2).sum(axis=1)
        done += k
    mean = total / n
    var = (total_sq - n * mean**2) / max(n - 1, 1)
    files = [out / "mc_mean.csv", out / "mc_variance.csv"]
    write_grid_csv(files[0], sol.grid, mean)
    write_grid_csv(files[1], sol.grid, var)
    return files


def run_solve(cfg: ExperimentConfig) -> dict[str, ChaosSolution]:
    """Solve every active chaos equation with each configured scheme.

    Writes per scheme: ``u_XXXX.csv`` for each coefficient, ``mean.csv``,
    ``variance.csv``, ``summary.csv`` and ``checksums.csv``.
    """
    pipe = build_pipeline(cfg)
    system = pipe.system
    cache = ResolventCache(pipe.ops)
    results = {}
    for scheme in cfg.scheme_list:
        stepper = StepperConfig(scheme, cfg.h, cfg.T, cfg.tol)
        sol = solve_system(system, stepper, cache)
        results[scheme.value] = sol
        out = output_dir(cfg, scheme.value)
        files = []
        if system.P <= MAX_COEFFICIENT_FILES:
            coefficient_ids = range(system.P)
        else:
            coefficient_ids = sol.active
        width = max(4, len(str(system.P - 1)))
        for p in coefficient_ids:
            path = out / f"u_{p:0{width}d}.csv"
            write_grid_csv(path, pipe.grid, sol.coefficient(p))
            files.append(path)
        for name, values in (("mean", empirical_mean(sol)), ("variance", empirical_variance(sol))):
            path = out / f"{name}.csv"
            write_grid_csv(path, pipe.grid, values)
            files.append(path)
        if cfg.mc_samples:
            files.extend(_monte_carlo(cfg, sol, out))
        summary = out / "summary.csv"
        _write_rows(
            summary,
            ["key", "value"],
            [
                ("scheme", scheme.value),
                ("N", cfg.N),
                ("m", cfg.m),
                ("K", cfg.K),
                ("P", system.P),
                ("active_count", system.active_count),
                ("active", " ".join(map(str, sol.active))),
                ("h", float(cfg.h)),
                ("T", float(cfg.T)),
                ("zero_tail", int(sol.has_zero_tail())),
                ("system_sha256", system.checksum()),
            ],
        )
        files.append(summary)
        _write_checksums(out, files)
        log.info("solve %s: %d active of %d coefficients -> %s", scheme.value, system.active_count, system.P, out)
    return results


def run_order_study(cfg: ExperimentConfig):
    """Errors against the dense reference for every scheme, ``h`` and ``p``."""
    pipe = build_pipeline(cfg)
    p_values = [p for p in cfg.p_values if pipe.system.is_active(p)]
    skipped = sorted(set(cfg.p_values) - set(p_values))
    if skipped:
        log.warning("skipping inactive equations %s (identically zero)", skipped)
    report = order_study(pipe.system, cfg.scheme_list, cfg.h_list, cfg.T, p_values, cfg.tol)
    out = output_dir(cfg)
    rows = []
    for scheme, errs in report.errors.items():
        for q, h in enumerate(report.h):
            for c, p in enumerate(report.p_values):
                rows.append((scheme, p, float(h), float(errs[q, c])))
            rows.append((scheme, "all", float(h), float(report.combined(scheme)[q])))
    _write_rows(out / "order_errors.csv", ["scheme", "p", "h", "error"], rows)
    slopes = []
    for scheme in report.errors:
        fits = [("all", report.slope(scheme))] + list(report.slope_by_p(scheme).items())
        for p, fit in fits:
            slopes.append((scheme, p, "" if fit is None else float(fit.slope), 0 if fit is None else len(fit.h)))
    _write_rows(out / "order_slopes.csv", ["scheme", "p", "slope", "points"], slopes)
    return report


def run_corner_study(cfg: ExperimentConfig):
    """Pointwise errors of ``u_0`` for plain and modified Lie splitting."""
    pipe = build_pipeline(cfg)
    study = corner_study(pipe.system, cfg.h, cfg.T, 0, cfg.tol)
    out = output_dir(cfg)
    for scheme, err in study.errors.items():
        write_grid_csv(out / f"corner_error_{scheme}.csv", pipe.grid, err)
    _write_rows(
        out / "corner_summary.csv",
        ["max_error_lie", "max_error_modified_lie", "ratio", "corner_spike_lie", "corner_spike_modified_lie"],
        [(
            study.max_error("lie"),
            study.max_error("modified-lie"),
            float(study.ratio),
            study.corner_spike("lie"),
            study.corner_spike("modified-lie"),
        )],
    )
    return study


def run_variance_study(cfg: ExperimentConfig):
    """Variance error at ``T`` against the ``m_max`` reference for each ``m``."""
    grid = Grid2D(cfg.N)
    ops = assemble_operators(grid, cfg.coefficient_a, cfg.coefficient_b)
    m_max = max(cfg.m_max, max(cfg.m_values))
    kle = build_kle(cfg, grid, m_max)
    study = variance_truncation_study(
        kle, ops, cfg.m_values, cfg.h, cfg.scheme_list, cfg.T, cfg.K, cfg.forcing, cfg.tol, m_max
    )
    names = list(study.errors)
    rows = [(int(m),) + tuple(float(study.errors[s][k]) for s in names) for k, m in enumerate(study.m_values)]
    _write_rows(output_dir(cfg) / "variance_errors.csv", ["m"] + names, rows)
    return study


def run_timing_table(cfg: ExperimentConfig):
    """Median solve time per ``(N, scheme)`` and KL setup time for small grids."""
    kernel = make_kernel(cfg.kernel, cfg.length_scale, cfg.variance)
    rows, kle_rows = timing_table(
        cfg.N_values,
        cfg.scheme_list,
        cfg.h,
        cfg.T,
        cfg.repeats,
        cfg.forcing,
        cfg.coefficient_a,
        cfg.coefficient_b,
        cfg.tol,
        kernel,
        cfg.m,
        cfg.kle_max_N,
    )
    out = output_dir(cfg)
    _write_rows(
        out / "timing.csv",
        ["N", "scheme", "median_seconds", "repeats"],
        [(r.N, r.scheme, r.median_seconds, r.repeats) for r in rows],
    )
    _write_rows(out / "kle_timing.csv", ["N", "seconds"], [(n, float(t)) for n, t in kle_rows])
    return rows, kle_rows


def kle_inspect(cfg: ExperimentConfig) -> KLExpansion:
    """Write the leading ``m`` eigenpairs and the captured variance fraction."""
    grid = Grid2D(cfg.N)
    kle = build_kle(cfg, grid)
    out = output_dir(cfg)
    write_eigenpairs_csv(kle, out / "eigenpairs.csv")
    kernel = kle.kernel
    trace = float(grid.quadrature_weights @ kernel(grid.coordinates, grid.coordinates))
    captured = np.cumsum(kle.eigenvalues) / trace if trace > 0 else np.zeros(kle.m)
    _write_rows(
        out / "eigenvalues.csv",
        ["k", "lambda", "captured_fraction"],
        [(k + 1, float(lam), float(c)) for k, (lam, c) in enumerate(zip(kle.eigenvalues, captured))],
    )
    return kle
