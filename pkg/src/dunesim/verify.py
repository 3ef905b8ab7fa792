"""Quantitative verification: conservation, contraction, convergence sweeps.

The sweep harness runs the fine solver across a decreasing list of scale
separations, measures the spatial L2 distance to the limiting profile at
final time, and fits the order of the error against epsilon by least squares
on the log-log points.  Errors are measured in the strong spatial norm at
final time, so the fitted order is labelled a strong-norm rate.  Random trial
fields come from a seeded generator recorded in the report, and reports
round-trip through CSV so they can be rebuilt from disk artifacts alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import grid as gridmod
from .errors import ConfigurationError
from .grid import Grid, ScalarField, norm_l2
from .homogenize import cell_solve, solve_corrector
from .solver import SolverConfig, Trajectory, period_map, solve_fine

REPORT_COLUMNS = ("epsilon", "error", "remainder", "mass_drift", "runtime_s")


def random_zero_mean_field(grid: Grid, rng: np.random.Generator,
                           norm: float = 1.0) -> ScalarField:
    """Unit-norm (by default) zero-mean field from the given generator."""
    values = rng.standard_normal((grid.n, grid.n))
    values -= values.mean()
    f = ScalarField(grid, values)
    scale = norm_l2(f)
    if scale == 0.0:
        raise ConfigurationError("degenerate random draw")
    return ScalarField(grid, values * (norm / scale))


def mass_drift(traj: Trajectory) -> float:
    """Largest deviation of the cell sum from its initial value."""
    masses = traj.diagnostics["mass"]
    if masses.size == 0:
        raise ConfigurationError("empty trajectory")
    return float(np.max(np.abs(masses - masses[0])))


def contraction_ratio(mu: float, nu: float, t: float, tau: float, trials: int,
                      config: SolverConfig, provider, grid: Grid,
                      seed: int = 0) -> float:
    """Worst measured one-period L2 contraction over random zero-mean pairs.

    For mu > 0 the ratio never exceeds exp(-mu) (plus discretization slack);
    the bound applies on the zero-mean subspace, where the diffusion term
    only adds contraction.
    """
    if trials < 2:
        raise ConfigurationError("need at least 2 trials")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        xi = random_zero_mean_field(grid, rng)
        eta = random_zero_mean_field(grid, rng)
        gap0 = norm_l2(xi - eta)
        img_xi = period_map(xi, t, tau, mu, nu, provider, config)
        img_eta = period_map(eta, t, tau, mu, nu, provider, config)
        worst = max(worst, norm_l2(img_xi - img_eta) / gap0)
    return worst


def fit_order(epsilons, errors) -> float:
    """Least-squares slope of log(error) against log(epsilon)."""
    eps = np.asarray(epsilons, dtype=float)
    err = np.asarray(errors, dtype=float)
    if eps.size < 3:
        raise ConfigurationError("order fit needs at least 3 points")
    if np.any(err <= 0) or np.any(eps <= 0):
        raise ConfigurationError("order fit needs positive errors and epsilons")
    slope = np.polyfit(np.log(eps), np.log(err), 1)[0]
    return float(slope)


@dataclass
class ErrorReport:
    """Sweep results: one row per epsilon, most-refined last fields.

    ``rows`` entries are dicts with the REPORT_COLUMNS keys (NaN where a
    quantity does not apply); ``failures`` records epsilons whose run raised,
    with the message.  ``fitted_order`` is None when undefined (fewer than
    three positive errors).
    """

    label: str
    epsilons: list[float] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    failures: list[tuple[float, str]] = field(default_factory=list)
    fitted_order: float | None = None
    seed: int | None = None

    def finish(self) -> "ErrorReport":
        ok = [e for e in self.errors if e > 0]
        if len(ok) == len(self.errors) and len(ok) >= 3:
            self.fitted_order = fit_order(self.epsilons, self.errors)
        else:
            self.fitted_order = None
        return self

    def write_csv(self, path: str | Path, deterministic: bool = False) -> Path:
        """Write the CSV report; ``deterministic`` masks the runtime column
        (wall-clock noise) so reruns of the same configuration are
        byte-identical.  Measured runtimes always appear in ``summary()``."""
        path = Path(path)
        with open(path, "w") as fh:
            fh.write(",".join(REPORT_COLUMNS) + "\n")
            for row in self.rows:
                values = []
                for c in REPORT_COLUMNS:
                    v = float(row.get(c, float("nan")))
                    if deterministic and c == "runtime_s":
                        v = float("nan")
                    values.append(repr(v))
                fh.write(",".join(values) + "\n")
        return path

    def summary(self) -> str:
        lines = [f"label={self.label}", f"points={len(self.epsilons)}"]
        if self.seed is not None:
            lines.append(f"seed={self.seed}")
        for row in self.rows:
            lines.append("  " + "  ".join(f"{c}={row.get(c, float('nan')):.6e}"
                                          for c in REPORT_COLUMNS))
        order = "undefined" if self.fitted_order is None else f"{self.fitted_order:.4f}"
        lines.append(f"fitted_order={order} (rate, strong norm)")
        for eps, msg in self.failures:
            lines.append(f"failed epsilon={eps}: {msg}")
        return "\n".join(lines)


def read_report_csv(path: str | Path, label: str = "") -> ErrorReport:
    path = Path(path)
    with open(path) as fh:
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    report = ErrorReport(label=label or path.stem)
    for row in data:
        entry = dict(zip(cols, (float(x) for x in row)))
        report.rows.append(entry)
        report.epsilons.append(entry["epsilon"])
        report.errors.append(entry["error"])
    return report.finish()


def write_plot_script(report_csv: str | Path, script_path: str | Path,
                      title: str = "convergence sweep") -> Path:
    """Gnuplot script: log-log error against epsilon with a slope-1 guide."""
    report_csv = Path(report_csv)
    script_path = Path(script_path)
    png = report_csv.with_suffix(".png").name
    text = "\n".join([
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'epsilon'",
        "set ylabel 'L2 error'",
        f"set title '{title}'",
        "set key left top",
        f"set output '{png}'",
        "set terminal pngcairo size 800,600",
        "ref(x) = x",
        f"plot '{report_csv.name}' using 1:2 skip 1 with linespoints "
        "title 'error', \\",
        "     ref(x) with lines dashtype 2 title 'slope 1'",
        "",
    ])
    script_path.write_text(text)
    return script_path


def _run_sweep(regime, law, forcing, z0, epsilons, T, config, grid,
               with_corrector: bool, label: str,
               persist_dir: str | Path | None = None) -> ErrorReport:
    eps_list = [float(e) for e in epsilons]
    if not eps_list:
        raise ConfigurationError("epsilon sweep must be nonempty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("epsilons must be strictly decreasing")

    limit = cell_solve(T, law, forcing, config, grid)
    start = cell_solve(0.0, law, forcing, config, grid) \
        if forcing.time_dependent else limit
    z_init = z0 if z0 is not None else start.value_at(0.0)

    corrector = None
    if with_corrector:
        corrector = solve_corrector(limit, None, T, law, forcing, config, grid)
    if persist_dir is not None:
        persist_dir = Path(persist_dir)
        persist_dir.mkdir(parents=True, exist_ok=True)

    report = ErrorReport(label=label)
    for i, eps in enumerate(eps_list):
        sub = regime.with_epsilon(eps)
        theta_T = (T / eps) % 1.0
        target = limit.value_at(theta_T)
        t0 = time.perf_counter()
        try:
            traj = solve_fine(z_init, sub, law, forcing, config, T)
        except Exception as exc:  # keep sweeping; record the failure
            report.failures.append((eps, str(exc)))
            continue
        elapsed = time.perf_counter() - t0
        final = traj.final
        if persist_dir is not None:
            # errors are recomputed from the persisted copies so the report
            # can be rebuilt from disk artifacts alone
            fpath = persist_dir / f"eps_{i:02d}_final.bin"
            lpath = persist_dir / f"eps_{i:02d}_limit.bin"
            gridmod.save_scalar(final, fpath)
            gridmod.save_scalar(target, lpath)
            final = gridmod.load_scalar(fpath, grid)
            target = gridmod.load_scalar(lpath, grid)
        err = norm_l2(final - target)
        row = {"epsilon": eps, "error": err, "remainder": float("nan"),
               "mass_drift": mass_drift(traj), "runtime_s": elapsed}
        if with_corrector:
            scaled = (final - target) / eps
            row["remainder"] = norm_l2(scaled - corrector.value_at(theta_T))
        report.epsilons.append(eps)
        report.errors.append(err)
        report.rows.append(row)
    return report.finish()


def two_scale_error(regime, law, forcing, z0, epsilons, T,
                    config: SolverConfig, grid: Grid,
                    persist_dir: str | Path | None = None) -> ErrorReport:
    """Distance between the fine solution and the limiting profile at final
    time, per epsilon, with the fitted strong-norm order.

    With z0 None the run starts on the limiting profile at phase 0, which
    suppresses the initial layer; errors are measured at T (choose T at
    least a few periods past the start).  With ``persist_dir`` the compared
    fields are saved there and the errors recomputed from the saved copies.
    """
    return _run_sweep(regime, law, forcing, z0, epsilons, T, config, grid,
                      with_corrector=False, label="two_scale",
                      persist_dir=persist_dir)


def corrector_error(regime, law, forcing, z0, epsilons, T,
                    config: SolverConfig, grid: Grid,
                    persist_dir: str | Path | None = None) -> ErrorReport:
    """Scaled remainders (error/epsilon) and corrector-refined remainders.

    ``errors`` holds the scaled remainder per epsilon; each row's
    ``remainder`` column is the distance between the scaled remainder field
    and the first-order corrector at the same phase.
    """
    if law.u_threshold > 0.0:
        raise ConfigurationError(
            "corrector sweep requires a law with zero speed threshold")
    base = _run_sweep(regime, law, forcing, z0, epsilons, T, config, grid,
                      with_corrector=True, label="corrector",
                      persist_dir=persist_dir)
    scaled = ErrorReport(label="corrector", failures=base.failures)
    for row in base.rows:
        r = row["error"] / row["epsilon"]
        new_row = dict(row)
        new_row["error"] = r
        scaled.rows.append(new_row)
        scaled.epsilons.append(row["epsilon"])
        scaled.errors.append(r)
    return scaled.finish()
