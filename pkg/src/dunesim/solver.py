"""Implicit time integration and time-periodic cell solutions.

Every solve reduces to backward-Euler steps of

    (1 + mu*dtheta) w  -  dtheta * div((A + nu) grad w)  =  rhs,

a symmetric positive definite system solved matrix-free by unpreconditioned
conjugate gradients.  Because the flux divergence telescopes, the solve
preserves the cell sum of the state exactly (up to rounding), which is what
makes long fine-scale runs conservative.

The fine-scale solver advances the seabed with the stiff oscillatory
coefficients, stepping so that the fast phase theta gains 1/dt_per_period per
step.  The period map integrates the penalized phase evolution over one unit
period at frozen slow time; for mu > 0 it contracts with L2 factor at most
exp(-mu) on zero-mean pairs, so its fixed point (the time-periodic profile)
is found by plain iteration, continued in (mu, nu) down to the unpenalized,
unregularized problem.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import grid as gridmod
from .errors import ConfigurationError, FixedPointError, SteppingError
from .grid import Grid, ScalarField

DEFAULT_SCHEDULE = ((1.0, 1e-2), (0.25, 1e-3), (0.0, 1e-4), (0.0, 0.0))
DEGENERATE_SCHEDULE = ((1.0, 1e-2), (0.25, 1e-3), (0.0, 1e-4))


def default_schedule(degenerate: bool = False) -> tuple[tuple[float, float], ...]:
    """Continuation schedule in (mu, nu); degenerate forcing keeps a final
    positive nu because the unregularized diffusivity may vanish."""
    return DEGENERATE_SCHEDULE if degenerate else DEFAULT_SCHEDULE


@dataclass(frozen=True)
class SolverConfig:
    dt_per_period: int = 64
    linear_tol: float = 1e-10
    linear_maxiter: int = 50_000
    nu: float = 0.0
    mu: float = 0.0
    fixed_point_tol: float = 1e-9
    fixed_point_maxiter: int = 200
    continuation: tuple[tuple[float, float], ...] = DEFAULT_SCHEDULE
    snapshot_every: int = 0

    def __post_init__(self):
        if self.dt_per_period < 16:
            raise ConfigurationError("dt_per_period must be at least 16")
        if not 0.0 < self.linear_tol <= 1e-6:
            raise ConfigurationError("linear_tol must lie in (0, 1e-6]")
        if self.linear_maxiter < 1:
            raise ConfigurationError("linear_maxiter must be positive")
        if self.nu < 0 or self.mu < 0:
            raise ConfigurationError("nu and mu must be nonnegative")
        if self.fixed_point_tol <= 0:
            raise ConfigurationError("fixed_point_tol must be positive")
        if not self.continuation:
            raise ConfigurationError("continuation schedule must be nonempty")
        for mu, nu in self.continuation:
            if mu < 0 or nu < 0:
                raise ConfigurationError("continuation entries must be nonnegative")


@dataclass(frozen=True)
class State:
    t: float
    z: ScalarField


@dataclass
class Trajectory:
    """Accepted states of one fine-scale run.

    ``diagnostics`` holds one row per accepted step (plus the initial state):
    arrays ``step``, ``t``, ``theta``, ``mass``, ``l2_norm``, ``linear_iters``.
    ``snapshots`` is a strided list of (t, field) pairs that always contains
    the initial and final states.
    """

    grid: Grid
    times: np.ndarray
    diagnostics: dict[str, np.ndarray]
    snapshots: list[tuple[float, ScalarField]]

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1][1]

    def snapshot_at(self, t: float, tol: float = 1e-9) -> ScalarField:
        for ts, f in self.snapshots:
            if abs(ts - t) <= tol * max(1.0, abs(t)):
                return f
        raise ConfigurationError(f"no snapshot stored at t={t}")


# ---------------------------------------------------------------------------
# Backward-Euler linear algebra
# ---------------------------------------------------------------------------

def _div_flux(fe: np.ndarray, fn: np.ndarray, h: float) -> np.ndarray:
    return (fe - np.roll(fe, 1, axis=0)) / h + (fn - np.roll(fn, 1, axis=1)) / h


def _stiffness_apply(z: np.ndarray, de: np.ndarray, dn: np.ndarray, h: float) -> np.ndarray:
    """-div(D grad z) with face diffusivities de, dn (positive semidefinite)."""
    ge = (np.roll(z, -1, axis=0) - z) / h
    gn = (np.roll(z, -1, axis=1) - z) / h
    return -_div_flux(de * ge, dn * gn, h)


def _be_solve(rhs: np.ndarray, coeffs, nu: float, dtheta: float, mu_dt: float,
              config: SolverConfig, step: int | None = None) -> tuple[np.ndarray, int]:
    """Solve ((1 + mu_dt) I + dtheta * K_{A+nu}) w = rhs by CG.

    The operator maps zero-mean fields to zero-mean fields, so starting from
    rhs/(1 + mu_dt) keeps every Krylov update zero-mean and the solution mass
    exact to rounding.
    """
    g = coeffs.grid
    h = g.h
    de = coeffs.diff_east + nu
    dn = coeffs.diff_north + nu
    shift = 1.0 + mu_dt
    shape = rhs.shape

    def matvec(v):
        z = v.reshape(shape)
        return (shift * z + dtheta * _stiffness_apply(z, de, dn, h)).ravel()

    op = LinearOperator((rhs.size, rhs.size), matvec=matvec, dtype=float)
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    x0 = (rhs / shift).ravel()
    sol, info = cg(op, rhs.ravel(), x0=x0, rtol=config.linear_tol, atol=0.0,
                   maxiter=config.linear_maxiter, callback=count)
    if info != 0:
        res = float(np.linalg.norm(rhs.ravel() - matvec(sol))
                    / max(np.linalg.norm(rhs.ravel()), 1e-300))
        raise SteppingError(
            f"linear solve did not reach rtol={config.linear_tol} in "
            f"{config.linear_maxiter} iterations (residual {res:.3e})",
            step=step, residual=res)
    return sol.reshape(shape), iters


def step_implicit(state: State, dt: float, coeffs, stiffness: float,
                  config: SolverConfig, nu: float | None = None) -> State:
    """One backward-Euler step of the stiff seabed equation.

    Solves (I - dt*stiffness*div((A+nu) grad)) z_new = z_old
    + dt*stiffness*div(C) with the coefficients frozen at the step end.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    nu_eff = config.nu if nu is None else nu
    h = coeffs.grid.h
    tau_eff = dt * stiffness
    rhs = state.z.values + tau_eff * _div_flux(coeffs.flux_east, coeffs.flux_north, h)
    z_new, _ = _be_solve(rhs, coeffs, nu_eff, tau_eff, 0.0, config)
    return State(t=state.t + dt, z=ScalarField(state.z.grid, z_new))


# ---------------------------------------------------------------------------
# Fine-scale integration
# ---------------------------------------------------------------------------

def solve_fine(z0: ScalarField, regime, law, forcing, config: SolverConfig,
               T: float, provider=None, checkpoint_times=(),
               snapshot_every: int | None = None,
               cache_fields: bool | None = None) -> Trajectory:
    """Integrate the fine-scale model on [0, T].

    The step is dt = epsilon/dt_per_period so that theta = t/epsilon advances
    by exactly one lattice spacing per step (the mean-term regime also tracks
    tau = t/sqrt(epsilon); the long-term regime applies stiffness
    1/epsilon**2).  T must be a whole number of steps.  ``provider`` may
    replace the default coefficient assembly; it is called as
    provider(t, tau, theta) and its fields are cached per phase index when
    the forcing is time independent.
    """
    from .physics import CoefficientProvider

    if T <= 0:
        raise ConfigurationError("T must be positive")
    grid = z0.grid
    if provider is None:
        provider = CoefficientProvider(law, forcing, regime, grid).fine
    if cache_fields is None:
        cache_fields = forcing is not None and not forcing.time_dependent

    N = config.dt_per_period
    dt = regime.epsilon / N
    nsteps = int(round(T / dt))
    if nsteps < 1 or abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ConfigurationError(
            f"T={T} is not a whole number of steps of dt=epsilon/dt_per_period={dt}")
    stiffness = regime.stiffness
    tau_eff = dt * stiffness
    sqrt_eps = np.sqrt(regime.epsilon)

    checkpoint_steps = {}
    for tc in checkpoint_times:
        k = int(round(tc / dt))
        if abs(k * dt - tc) > 1e-9 * max(1.0, abs(tc)) or not 0 <= k <= nsteps:
            raise ConfigurationError(f"checkpoint t={tc} is not on the step lattice")
        checkpoint_steps[k] = tc
    stride = config.snapshot_every if snapshot_every is None else snapshot_every

    z = z0.values.copy()
    h = grid.h
    cell_area = h * h
    mass_of = lambda arr: cell_area * float(np.sum(arr))
    l2_of = lambda arr: float(np.sqrt(cell_area * np.sum(arr ** 2)))

    steps = np.arange(nsteps + 1)
    times = steps * dt
    diag = {"step": steps.astype(float), "t": times.copy(),
            "theta": ((steps % N) / N).astype(float),
            "mass": np.empty(nsteps + 1), "l2_norm": np.empty(nsteps + 1),
            "linear_iters": np.zeros(nsteps + 1)}
    diag["mass"][0] = mass_of(z)
    diag["l2_norm"][0] = l2_of(z)

    snapshots = [(0.0, ScalarField(grid, z.copy()))]
    cache: dict[int, object] = {}

    for k in range(nsteps):
        t_next = (k + 1) * dt
        phase_idx = (k + 1) % N
        theta = phase_idx / N
        tau = t_next / sqrt_eps if regime.is_mean else 0.0
        if cache_fields and phase_idx in cache:
            coeffs = cache[phase_idx]
        else:
            coeffs = provider(t_next, tau, theta)
            if cache_fields:
                cache[phase_idx] = coeffs
        rhs = z + tau_eff * _div_flux(coeffs.flux_east, coeffs.flux_north, h)
        try:
            z, iters = _be_solve(rhs, coeffs, config.nu, tau_eff, 0.0, config, step=k + 1)
        except SteppingError as err:
            raise SteppingError(f"step {k + 1} (t={t_next:.6g}): {err}",
                                step=k + 1, residual=err.residual) from err
        diag["mass"][k + 1] = mass_of(z)
        diag["l2_norm"][k + 1] = l2_of(z)
        diag["linear_iters"][k + 1] = iters
        want = (k + 1 == nsteps) or (k + 1) in checkpoint_steps \
            or (stride > 0 and (k + 1) % stride == 0)
        if want:
            snapshots.append((t_next, ScalarField(grid, z.copy())))

    return Trajectory(grid=grid, times=times, diagnostics=diag, snapshots=snapshots)


# ---------------------------------------------------------------------------
# Period map and periodic profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceEntry:
    mu: float
    nu: float
    iterations: int
    last_distance: float
    last_ratio: float | None


@dataclass(frozen=True)
class ConvergenceReport:
    entries: tuple[ConvergenceEntry, ...]
    wrap_residual: float

    def summary(self) -> str:
        lines = []
        for e in self.entries:
            ratio = "" if e.last_ratio is None else f" ratio={e.last_ratio:.3g}"
            lines.append(f"mu={e.mu} nu={e.nu} iterations={e.iterations} "
                         f"distance={e.last_distance:.3e}{ratio}")
        lines.append(f"wrap_residual={self.wrap_residual:.3e}")
        return "\n".join(lines)


@dataclass(frozen=True)
class PeriodicProfile:
    """A 1-periodic phase-resolved field S(theta, x) at frozen slow times.

    ``fields`` has shape (dt_per_period, n, n); sample j sits at phase
    theta_samples[j] = j/dt_per_period.  Converged profiles have spatial mean
    zero at every sample and wrap around to themselves after one more period.
    """

    grid: Grid
    t: float
    tau: float
    theta_samples: np.ndarray
    fields: np.ndarray
    report: ConvergenceReport | None = None

    @property
    def n_samples(self) -> int:
        return self.fields.shape[0]

    def value_at(self, theta: float) -> ScalarField:
        """Linear interpolation in phase with periodic wrap; lattice-aligned
        phases return the stored sample exactly."""
        N = self.n_samples
        pos = (float(theta) % 1.0) * N
        i0 = int(np.floor(pos))
        w = pos - i0
        if w < 1e-9 or w > 1.0 - 1e-9:
            idx = (i0 + int(round(w))) % N
            return ScalarField(self.grid, self.fields[idx].copy())
        i0 %= N
        i1 = (i0 + 1) % N
        return ScalarField(self.grid, (1.0 - w) * self.fields[i0] + w * self.fields[i1])

    def spatial_means(self) -> np.ndarray:
        return self.grid.h ** 2 * np.sum(self.fields, axis=(1, 2))

    def max_l2(self) -> float:
        return float(np.max(np.sqrt(self.grid.h ** 2 * np.sum(self.fields ** 2, axis=(1, 2)))))

    def distance(self, other: "PeriodicProfile") -> float:
        """Max over phase samples of the L2 distance."""
        if other.fields.shape != self.fields.shape:
            raise ConfigurationError("profiles have mismatched lattices")
        d = self.fields - other.fields
        return float(np.max(np.sqrt(self.grid.h ** 2 * np.sum(d ** 2, axis=(1, 2)))))


def period_map(xi, t: float, tau: float, mu: float, nu: float, provider,
               config: SolverConfig, grid: Grid | None = None,
               _collect: bool = False, _extra_source=None, _cache=None):
    """Advance the penalized phase evolution over one unit period.

    Integrates mu*w + dw/dtheta - div((A+nu) grad w) = div(C) (plus any extra
    source) from the start state ``xi`` with dt_per_period backward-Euler
    steps, coefficients frozen at each step's end phase, and returns the
    state at phase 1.  Slow times t and tau are frozen parameters.
    """
    if mu < 0 or nu < 0:
        raise ConfigurationError("mu and nu must be nonnegative")
    if isinstance(xi, ScalarField):
        grid = xi.grid
        state = xi.values.copy()
        wrap = True
    else:
        if grid is None:
            raise ConfigurationError("grid required for raw-array period_map")
        state = np.array(xi, dtype=float, copy=True)
        wrap = False
    N = config.dt_per_period
    dtheta = 1.0 / N
    h = grid.h
    collected = [state.copy()] if _collect else None

    for k in range(N):
        phase_idx = (k + 1) % N
        theta = phase_idx / N
        if _cache is not None and phase_idx in _cache:
            coeffs = _cache[phase_idx]
        else:
            coeffs = provider(t, tau, theta)
            if _cache is not None:
                _cache[phase_idx] = coeffs
        src = _div_flux(coeffs.flux_east, coeffs.flux_north, h)
        if _extra_source is not None:
            src = src + _extra_source[phase_idx]
        rhs = state + dtheta * src
        state, _ = _be_solve(rhs, coeffs, nu, dtheta, mu * dtheta, config, step=k + 1)
        if _collect and k < N - 1:
            collected.append(state.copy())

    if _collect:
        return state, collected
    return ScalarField(grid, state) if wrap else state


def find_periodic(t: float, tau: float, provider, config: SolverConfig,
                  grid: Grid, xi0: ScalarField | None = None,
                  extra_source=None) -> PeriodicProfile:
    """Construct the 1-periodic zero-mean solution of the cell problem.

    For each (mu, nu) of the continuation schedule the period map is iterated
    until successive period images are closer than fixed_point_tol in L2,
    warm-starting each entry from the previous fixed point; entries with
    mu = 0 project the spatial mean to zero after every period.  The returned
    profile is the full phase-resolved final cycle.
    """
    state = np.zeros((grid.n, grid.n)) if xi0 is None else xi0.values.copy()
    cell_area = grid.h ** 2
    l2 = lambda arr: float(np.sqrt(cell_area * np.sum(arr ** 2)))
    cache: dict[int, object] = {}
    entries = []

    for mu, nu in config.continuation:
        prev_dist = None
        converged = False
        iterations = 0
        ratio = None
        for _ in range(config.fixed_point_maxiter):
            nxt = period_map(state, t, tau, mu, nu, provider, config, grid,
                             _extra_source=extra_source, _cache=cache)
            if mu == 0.0:
                nxt = nxt - np.mean(nxt)
            dist = l2(nxt - state)
            ratio = None if prev_dist in (None, 0.0) else dist / prev_dist
            prev_dist = dist
            state = nxt
            iterations += 1
            if dist < config.fixed_point_tol:
                converged = True
                break
        if not converged:
            raise FixedPointError(
                f"period-map iteration stalled at schedule entry (mu={mu}, nu={nu}); "
                f"last distance {prev_dist:.3e}, last ratio {ratio}",
                entry=(mu, nu), last_ratio=ratio, last_distance=prev_dist)
        entries.append(ConvergenceEntry(mu=mu, nu=nu, iterations=iterations,
                                        last_distance=prev_dist, last_ratio=ratio))

    mu_f, nu_f = config.continuation[-1]
    end, samples = period_map(state, t, tau, mu_f, nu_f, provider, config, grid,
                              _collect=True, _extra_source=extra_source, _cache=cache)
    wrap_residual = l2(end - samples[0])
    N = config.dt_per_period
    report = ConvergenceReport(entries=tuple(entries), wrap_residual=wrap_residual)
    return PeriodicProfile(grid=grid, t=t, tau=tau,
                           theta_samples=np.arange(N) / N,
                           fields=np.stack(samples), report=report)


# ---------------------------------------------------------------------------
# Profile families over slow time and quasi-periodic reconstruction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileFamily:
    """Periodic profiles on a slow-time lattice (optionally a tau lattice).

    With a tau lattice, ``profiles`` is indexed [i_t][i_tau] and evaluation
    is bilinear in (t, tau) with periodic wrap in tau; otherwise it is a flat
    list over the t lattice with linear interpolation.  A single-entry t
    lattice means the family is frozen in slow time and accepts every t.
    """

    ts: np.ndarray
    profiles: list
    taus: np.ndarray | None = None

    def _locate(self, t: float) -> tuple[int, int, float]:
        ts = self.ts
        if ts.size == 1:
            return 0, 0, 0.0
        lo, hi = ts[0], ts[-1]
        tol = 1e-9 * max(1.0, abs(hi))
        if t < lo - tol or t > hi + tol:
            raise ConfigurationError(
                f"t={t} outside the profile family range [{lo}, {hi}]")
        t = min(max(t, lo), hi)
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = max(0, min(i, ts.size - 2))
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return i, i + 1, float(w)

    def _profile_at(self, t: float, tau: float):
        i0, i1, w = self._locate(t)
        if self.taus is None:
            return [(self.profiles[i0], 1.0 - w), (self.profiles[i1], w)]
        taus = self.taus
        if taus.size == 1:
            pairs_tau = [(0, 1.0)]
        else:
            pos = (float(tau) % 1.0) * taus.size
            j0 = int(np.floor(pos)) % taus.size
            wt = pos - np.floor(pos)
            pairs_tau = [(j0, 1.0 - wt), ((j0 + 1) % taus.size, wt)]
        out = []
        for it, wi in ((i0, 1.0 - w), (i1, w)):
            for jt, wj in pairs_tau:
                out.append((self.profiles[it][jt], wi * wj))
        return out

    def value(self, t: float, tau: float, theta: float) -> ScalarField:
        pairs = self._profile_at(t, tau)
        grid = pairs[0][0].grid
        acc = np.zeros((grid.n, grid.n))
        for prof, w in pairs:
            if w != 0.0:
                acc += w * prof.value_at(theta).values
        return ScalarField(grid, acc)


def profile_family(ts, provider, config: SolverConfig, grid: Grid,
                   taus=None) -> ProfileFamily:
    """Cell solutions on a slow-time lattice, each warm-started from the last.

    With ``taus`` (a lattice on [0, 1), for the regime with a second slow
    scale) one profile is solved per (t, tau) pair and evaluation becomes
    bilinear with periodic wrap in tau.
    """
    ts = np.asarray(sorted(float(t) for t in ts))
    if ts.size == 0:
        raise ConfigurationError("profile family needs at least one slow time")
    if taus is None:
        profiles = []
        guess = None
        for t in ts:
            prof = find_periodic(float(t), 0.0, provider, config, grid, xi0=guess)
            profiles.append(prof)
            guess = ScalarField(grid, prof.fields[0].copy())
        return ProfileFamily(ts=ts, profiles=profiles)
    taus = np.asarray(sorted(float(x) % 1.0 for x in taus))
    rows = []
    guess = None
    for t in ts:
        row = []
        for tau in taus:
            prof = find_periodic(float(t), float(tau), provider, config, grid,
                                 xi0=guess)
            row.append(prof)
            guess = ScalarField(grid, prof.fields[0].copy())
        rows.append(row)
    return ProfileFamily(ts=ts, profiles=rows, taus=taus)


@dataclass(frozen=True)
class QuasiPeriodicField:
    """Evaluates S(t, t/sqrt(eps), t/eps, x) from a profile family."""

    family: ProfileFamily
    epsilon: float

    def __call__(self, t: float) -> ScalarField:
        theta = (t / self.epsilon) % 1.0
        tau = (t / np.sqrt(self.epsilon)) % 1.0
        return self.family.value(t, tau, theta)


def quasi_periodic_reconstruction(family: ProfileFamily, epsilon: float) -> QuasiPeriodicField:
    """Wrap a profile family as a function of slow time: linear interpolation
    across the slow lattice, periodic wrap in the fast phase.  Evaluation
    outside the family's t range raises."""
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    return QuasiPeriodicField(family=family, epsilon=epsilon)


# ---------------------------------------------------------------------------
# Trajectory persistence: manifest + diagnostics CSV + snapshot fields
# ---------------------------------------------------------------------------

DIAG_COLUMNS = ("step", "t", "theta", "mass", "l2_norm", "linear_iters")


def save_trajectory(traj: Trajectory, outdir: str | Path,
                    manifest: dict | None = None, binary: bool = True) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = [f"n={traj.grid.n}", f"snapshots={len(traj.snapshots)}",
             f"created_unix={time.time()!r}"]
    for key, value in (manifest or {}).items():
        lines.append(f"{key}={value}")
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n")
    with open(outdir / "diagnostics.csv", "w") as fh:
        fh.write(",".join(DIAG_COLUMNS) + "\n")
        rows = np.column_stack([traj.diagnostics[c] for c in DIAG_COLUMNS])
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    ext = "bin" if binary else "csv"
    with open(outdir / "snapshot_times.txt", "w") as fh:
        for i, (t, f) in enumerate(traj.snapshots):
            name = f"snapshot_{i:06d}.{ext}"
            gridmod.save_scalar(f, outdir / name)
            fh.write(f"{name} t={t!r}\n")
    return outdir


def load_trajectory(outdir: str | Path) -> Trajectory:
    outdir = Path(outdir)
    header: dict[str, str] = {}
    for line in (outdir / "manifest.txt").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            header[k] = v
    grid = gridmod.make_grid(int(header["n"]))
    with open(outdir / "diagnostics.csv") as fh:
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    diagnostics = {c: data[:, i].copy() for i, c in enumerate(cols)}
    snapshots = []
    for line in (outdir / "snapshot_times.txt").read_text().splitlines():
        name, tpart = line.split(" t=")
        snapshots.append((float(tpart), gridmod.load_scalar(outdir / name, grid)))
    return Trajectory(grid=grid, times=diagnostics["t"].copy(),
                      diagnostics=diagnostics, snapshots=snapshots)
