"""Limiting phase profile, first-order corrector and two-scale reconstruction.

As the scale separation grows, the fine-scale seabed tracks a 1-periodic
phase profile U(t, theta, x) solving the cell problem with the scale-free
coefficients (diffusivity a*g(|velocity|), source flux along the velocity
direction, no height coupling).  Slow time enters only as a parameter, so U
is computed as the period-map fixed point per slow-time sample, never as an
initial-value evolution: the fine initial condition belongs to the fine
solver alone.

The first-order corrector U1 solves the same phase evolution with sources
assembled from the height-coupling correction pair, the slow-time drift of U
and the correction-diffusivity flux of U.  The two-scale reconstruction
U + eps*U1 evaluated at phase t/eps approximates the fine solution to first
order in eps.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from . import grid as gridmod
from .errors import ConfigurationError, SolvabilityError
from .grid import Grid, ScalarField
from .physics import CoefficientProvider, Forcing, TransportLaw
from .solver import (PeriodicProfile, ProfileFamily, SolverConfig, _div_flux,
                     find_periodic)

# A corrector source whose spatial mean exceeds this (relative to the source
# size) has no zero-mean periodic solution; the slow-time drift of a
# converged profile stays far below it.
SOLVABILITY_TOL = 1e-6


def cell_solve(t: float, law: TransportLaw, forcing: Forcing,
               config: SolverConfig, grid: Grid,
               xi0: ScalarField | None = None) -> PeriodicProfile:
    """Periodic zero-mean profile of the limiting cell problem at slow time t.

    The coefficients carry no scale separation and no height coupling, so
    the profile is the same for every epsilon.
    """
    provider = CoefficientProvider(law, forcing, grid=grid).homogenized
    return find_periodic(t, 0.0, provider, config, grid, xi0=xi0)


def build_profile_family(ts, law: TransportLaw, forcing: Forcing,
                         config: SolverConfig, grid: Grid) -> ProfileFamily:
    """Limiting profiles on a slow-time lattice, warm-started along it."""
    ts = np.asarray(sorted(float(t) for t in ts))
    if ts.size == 0:
        raise ConfigurationError("need at least one slow-time sample")
    profiles = []
    guess = None
    for t in ts:
        prof = cell_solve(float(t), law, forcing, config, grid, xi0=guess)
        profiles.append(prof)
        guess = ScalarField(grid, prof.fields[0].copy())
    return ProfileFamily(ts=ts, profiles=profiles)


def slow_time_derivative(earlier: PeriodicProfile,
                         later: PeriodicProfile) -> PeriodicProfile:
    """Finite difference in slow time of two profiles on matching lattices."""
    if earlier.grid != later.grid:
        raise ConfigurationError("profiles live on different grids")
    if earlier.n_samples != later.n_samples:
        raise ConfigurationError("profiles have different phase lattices")
    dt = later.t - earlier.t
    if dt <= 0:
        raise ConfigurationError("profiles must be ordered in slow time")
    fields = (later.fields - earlier.fields) / dt
    return PeriodicProfile(grid=earlier.grid, t=earlier.t, tau=earlier.tau,
                           theta_samples=earlier.theta_samples.copy(),
                           fields=fields, report=None)


def _corrector_sources(profile: PeriodicProfile, du_dt: PeriodicProfile | None,
                       t: float, law: TransportLaw, forcing: Forcing,
                       grid: Grid) -> tuple[np.ndarray, float]:
    provider = CoefficientProvider(law, forcing, grid=grid)
    N = profile.n_samples
    h = grid.h
    sources = np.empty_like(profile.fields)
    for j in range(N):
        theta = profile.theta_samples[j]
        corr = provider.first_order(t, 0.0, theta)
        u = profile.fields[j]
        grad_e = (np.roll(u, -1, axis=0) - u) / h
        grad_n = (np.roll(u, -1, axis=1) - u) / h
        src = _div_flux(corr.flux_east + corr.diff_east * grad_e,
                        corr.flux_north + corr.diff_north * grad_n, h)
        if du_dt is not None:
            src = src + du_dt.fields[j]
        sources[j] = src
    means = np.abs(h * h * np.sum(sources, axis=(1, 2)))
    scale = max(1.0, float(np.max(np.sqrt(h * h * np.sum(sources ** 2, axis=(1, 2))))))
    return sources, float(np.max(means)) / scale


def solve_corrector(profile: PeriodicProfile, du_dt: PeriodicProfile | None,
                    t: float, law: TransportLaw, forcing: Forcing,
                    config: SolverConfig, grid: Grid) -> PeriodicProfile:
    """First-order corrector profile at slow time t.

    The phase operator is the limiting one; the source combines the
    correction flux divergence, the slow-time drift of the profile and the
    divergence of the correction diffusivity applied to the profile
    gradient.  The spatial mean of the source must vanish at every phase
    (the drift of a zero-mean profile and flux divergences qualify); a
    violation beyond tolerance raises.
    """
    if law.u_threshold > 0.0:
        raise ConfigurationError(
            "corrector requires a law with zero speed threshold")
    if du_dt is not None and (du_dt.n_samples != profile.n_samples
                              or du_dt.grid != profile.grid):
        raise ConfigurationError("drift profile lattice does not match")
    if profile.n_samples != config.dt_per_period:
        raise ConfigurationError(
            "profile phase lattice must match dt_per_period")
    sources, mean_violation = _corrector_sources(profile, du_dt, t, law,
                                                 forcing, grid)
    if mean_violation > SOLVABILITY_TOL:
        raise SolvabilityError(
            f"corrector source has spatial mean {mean_violation:.3e} "
            f"(tolerance {SOLVABILITY_TOL:.1e})")
    provider = CoefficientProvider(law, forcing, grid=grid).homogenized
    zero_flux = _ZeroFluxProvider(provider)
    return find_periodic(t, 0.0, zero_flux, config, grid, extra_source=sources)


class _ZeroFluxProvider:
    """Same diffusivity as the wrapped provider, but no built-in flux; the
    corrector carries its whole right-hand side as an explicit source."""

    def __init__(self, provider):
        self.provider = provider

    def __call__(self, t, tau, theta):
        from .physics import CoefficientField
        f = self.provider(t, tau, theta)
        zero = np.zeros_like(f.flux_east)
        return CoefficientField(grid=f.grid, diff_east=f.diff_east,
                                diff_north=f.diff_north,
                                flux_east=zero, flux_north=zero)


def reconstruct(u_family: ProfileFamily, u1_family: ProfileFamily | None,
                epsilon: float, t: float, order: int = 0) -> ScalarField:
    """Two-scale approximation at slow time t: U(t, t/eps mod 1, x), plus
    eps * U1 at the same phase for order 1."""
    if order not in (0, 1):
        raise ConfigurationError("order must be 0 or 1")
    if order == 1 and u1_family is None:
        raise ConfigurationError("order 1 needs a corrector family")
    theta = (t / epsilon) % 1.0
    out = u_family.value(t, 0.0, theta)
    if order == 1:
        out = out + epsilon * u1_family.value(t, 0.0, theta)
    return out


# ---------------------------------------------------------------------------
# Profile persistence: manifest + one field file per phase sample
# ---------------------------------------------------------------------------

def save_profile(profile: PeriodicProfile, outdir: str | Path,
                 binary: bool = True) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ext = "bin" if binary else "csv"
    lines = [f"n={profile.grid.n}", f"t={profile.t!r}", f"tau={profile.tau!r}",
             f"n_theta={profile.n_samples}",
             "thetas=" + ",".join(repr(float(th)) for th in profile.theta_samples),
             f"created_unix={time.time()!r}"]
    if profile.report is not None:
        for i, entry in enumerate(profile.report.entries):
            lines.append(f"convergence_{i}=mu:{entry.mu};nu:{entry.nu};"
                         f"iterations:{entry.iterations};"
                         f"distance:{entry.last_distance!r}")
        lines.append(f"wrap_residual={profile.report.wrap_residual!r}")
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n")
    for j in range(profile.n_samples):
        gridmod.save_scalar(ScalarField(profile.grid, profile.fields[j]),
                            outdir / f"theta_{j:04d}.{ext}")
    return outdir


def load_profile(outdir: str | Path) -> PeriodicProfile:
    outdir = Path(outdir)
    header: dict[str, str] = {}
    for line in (outdir / "manifest.txt").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            header[k] = v
    grid = gridmod.make_grid(int(header["n"]))
    n_theta = int(header["n_theta"])
    thetas = np.array([float(s) for s in header["thetas"].split(",")])
    fields = []
    for j in range(n_theta):
        for ext in ("bin", "csv"):
            path = outdir / f"theta_{j:04d}.{ext}"
            if path.exists():
                fields.append(gridmod.load_scalar(path, grid).values)
                break
        else:
            raise ConfigurationError(f"missing profile sample {j} in {outdir}")
    return PeriodicProfile(grid=grid, t=float(header["t"]),
                           tau=float(header["tau"]), theta_samples=thetas,
                           fields=np.stack(fields), report=None)
