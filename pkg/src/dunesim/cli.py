"""Command-line entry point: regime derivation, runs, cell solves, sweeps.

Subcommands
    regime   print the dimensional analysis of a regime (key=value and CSV)
    run      integrate the fine-scale model and persist the trajectory
    cell     construct a periodic cell profile and persist it
    verify   sweeps and checks: two_scale, corrector, contraction, mass

``run``, ``cell`` and ``verify`` are driven by a sectioned key=value
configuration file (INI syntax); every value can be overridden per section.
Reports are deterministic for a fixed configuration and seed: CSV outputs are
byte-identical across reruns (timestamps live only in manifests).
"""

from __future__ import annotations

import argparse
import configparser
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import grid as gridmod
from . import homogenize, scaling, solver, verify
from .errors import ConfigurationError, DuneSimError
from .physics import (CoefficientProvider, power3_law, rotating_tide,
                      tabulated_forcing, unidirectional_tide, van_rijn_law,
                      zero_forcing)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

_PARAM_FLAGS = {
    "u_bar": "characteristic water speed [m/s]",
    "water_height": "mean water height [m]",
    "tide_height": "tidal height variation [m]",
    "grain_diameter": "sand grain diameter [m]",
    "rho": "water density [kg/m^3]",
    "porosity": "sand porosity in [0,1)",
    "slope_lambda": "inverse maximum free slope",
    "alpha": "flux-law constant",
    "u_crit": "critical speed for grain motion [m/s]",
    "t_bar": "observation time [s]",
    "tide_period": "main tide period [s]",
    "lunar_period": "lunar realignment period [s]",
    "z_bar": "characteristic dune height [m]",
    "l_bar": "characteristic dune wavelength [m]",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dunesim",
        description="multiscale simulation of tide-driven seabed evolution")
    sub = parser.add_subparsers(dest="command", required=True)

    p_regime = sub.add_parser("regime", help="derive a dimensionless regime")
    p_regime.add_argument("--kind", default="short_small",
                          choices=scaling.REGIME_KINDS)
    p_regime.add_argument("--csv", action="store_true",
                          help="print the report as a CSV row")
    p_regime.add_argument("--out", help="also write the report under this directory")
    for name, help_text in _PARAM_FLAGS.items():
        p_regime.add_argument(f"--{name.replace('_', '-')}", type=float,
                              default=None, dest=name, help=help_text)

    for name, help_text in (("run", "fine-scale integration"),
                            ("cell", "periodic cell profile"),
                            ("verify", "verification sweeps and checks")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="sectioned key=value file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--grid", type=int, default=None, dest="grid_n")
        p.add_argument("--jobs", type=int, default=1)
        if name == "cell":
            p.add_argument("--t", type=float, default=0.0)
            p.add_argument("--tau", type=float, default=0.0)
        if name == "verify":
            p.add_argument("--epsilons",
                           help="comma-separated sweep values, largest first")
    return parser


# ---------------------------------------------------------------------------
# Configuration assembly
# ---------------------------------------------------------------------------

def _read_config(path: str) -> configparser.ConfigParser:
    cfg_path = Path(path)
    if not cfg_path.is_file():
        raise ConfigurationError(f"config file not found: {cfg_path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read(cfg_path)
    return parser


def _law_from_config(section) -> tuple[str, dict]:
    preset = section.get("preset", "power3")
    kwargs = {}
    for key in ("a", "b", "c"):
        if key in section:
            kwargs[key] = section.getfloat(key)
    if preset == "vanrijn" and "u_crit_sq" in section:
        kwargs["u_crit_sq"] = section.getfloat("u_crit_sq")
    return preset, kwargs


def _regime_from_config(cfg) -> scaling.RegimeSpec:
    section = cfg["regime"] if cfg.has_section("regime") else {}
    kind = section.get("kind", "short_small")
    epsilon = float(section["epsilon"]) if "epsilon" in section else None
    regime = scaling.snapped_regime(kind, epsilon=epsilon)
    if cfg.has_section("law"):
        preset, kwargs = _law_from_config(cfg["law"])
        law = van_rijn_law(**kwargs) if preset == "vanrijn" else power3_law(**kwargs)
        regime = scaling.RegimeSpec(kind=regime.kind, epsilon=regime.epsilon,
                                    a=kwargs.get("a", regime.a),
                                    b=kwargs.get("b", regime.b),
                                    c=kwargs.get("c", regime.c), law=law)
    return regime


def _forcing_from_config(cfg):
    section = cfg["forcing"] if cfg.has_section("forcing") else {}
    preset = section.get("preset", "rotating")
    if preset == "zero":
        return zero_forcing()
    if preset == "tabulated":
        if "path" not in section:
            raise ConfigurationError("tabulated forcing needs 'path'")
        return tabulated_forcing(section["path"])
    kwargs = dict(
        amplitude=float(section.get("amplitude", 1.0)),
        modulation=float(section.get("modulation", 0.0)),
        spatial_variation=float(section.get("spatial_variation", 0.0)),
        height_amplitude=float(section.get("height_amplitude", 1.0)),
    )
    if preset == "rotating":
        return rotating_tide(**kwargs)
    if preset == "unidirectional":
        direction = tuple(float(s) for s in section.get("direction", "1,0").split(","))
        return unidirectional_tide(direction=direction, **kwargs)
    raise ConfigurationError(f"unknown forcing preset {preset!r}")


def _solver_config(cfg, forcing) -> solver.SolverConfig:
    section = cfg["solver"] if cfg.has_section("solver") else {}
    kwargs = {}
    if "dt_per_period" in section:
        kwargs["dt_per_period"] = int(section["dt_per_period"])
    for key in ("linear_tol", "fixed_point_tol", "nu", "mu"):
        if key in section:
            kwargs[key] = float(section[key])
    for key in ("linear_maxiter", "fixed_point_maxiter", "snapshot_every"):
        if key in section:
            kwargs[key] = int(section[key])
    if "schedule" in section:
        entries = []
        for chunk in section["schedule"].split(","):
            mu_s, nu_s = chunk.split(":")
            entries.append((float(mu_s), float(nu_s)))
        kwargs["continuation"] = tuple(entries)
    else:
        kwargs["continuation"] = solver.default_schedule(forcing.degenerate)
    return solver.SolverConfig(**kwargs)


def _grid_from_config(cfg, override: int | None) -> gridmod.Grid:
    if override is not None:
        return gridmod.make_grid(override)
    section = cfg["grid"] if cfg.has_section("grid") else {}
    return gridmod.make_grid(int(section.get("n", 64)))


def _prepare_outdir(path_str: str | None, fallback: str | None) -> Path:
    target = path_str or fallback
    if target is None:
        raise ConfigurationError("no output directory given (--out or config)")
    out = Path(target)
    parent = out.parent
    if not parent.exists():
        raise ConfigurationError(f"output parent directory missing: {parent}")
    out.mkdir(exist_ok=True)
    probe = out / ".write_probe"
    try:
        probe.write_text("")
    except OSError as exc:
        raise ConfigurationError(f"output directory not writable: {out} ({exc})")
    probe.unlink()
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_regime(args) -> int:
    overrides = {name: getattr(args, name) for name in _PARAM_FLAGS}
    params, defaulted = scaling.params_for(args.kind, **overrides)
    spec = scaling.derive_regime(params, args.kind, defaulted=defaulted)
    report = scaling.regime_report(spec)
    csv_text = scaling.regime_csv(spec)
    print(csv_text if args.csv else report)
    if args.out:
        out = _prepare_outdir(args.out, None)
        (out / "regime.txt").write_text(report + "\n")
        (out / "regime.csv").write_text(csv_text)
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _read_config(args.config)
    run_section = cfg["run"] if cfg.has_section("run") else {}
    out = _prepare_outdir(args.out, run_section.get("out"))
    regime = _regime_from_config(cfg)
    forcing = _forcing_from_config(cfg)
    solver_cfg = _solver_config(cfg, forcing)
    grid = _grid_from_config(cfg, args.grid_n)
    T = float(run_section.get("T", 0.5))
    if "z0" in run_section:
        z0 = gridmod.load_scalar(run_section["z0"], grid)
    else:
        z0 = gridmod.zeros(grid)
    traj = solver.solve_fine(z0, regime, regime.law, forcing, solver_cfg, T)
    drift = verify.mass_drift(traj)
    manifest = {"regime": regime.kind, "epsilon": repr(regime.epsilon),
                "a": repr(regime.a), "b": repr(regime.b), "c": repr(regime.c),
                "law": regime.law.kind, "forcing": forcing.preset, "T": repr(T),
                "dt_per_period": solver_cfg.dt_per_period,
                "linear_tol": repr(solver_cfg.linear_tol),
                "fixed_point_tol": repr(solver_cfg.fixed_point_tol),
                "z0": run_section.get("z0", "zeros"),
                "mass_drift": repr(drift)}
    solver.save_trajectory(traj, out, manifest=manifest)
    print(f"trajectory written to {out} (steps={len(traj.times) - 1}, "
          f"mass_drift={drift:.3e})")
    return EXIT_OK


def _cmd_cell(args) -> int:
    cfg = _read_config(args.config)
    run_section = cfg["run"] if cfg.has_section("run") else {}
    out = _prepare_outdir(args.out, run_section.get("out"))
    regime = _regime_from_config(cfg)
    forcing = _forcing_from_config(cfg)
    solver_cfg = _solver_config(cfg, forcing)
    grid = _grid_from_config(cfg, args.grid_n)
    provider = CoefficientProvider(regime.law, forcing, regime, grid).fine
    try:
        profile = solver.find_periodic(args.t, args.tau, provider, solver_cfg, grid)
    except DuneSimError as exc:
        (out / "convergence.txt").write_text(f"failed: {exc}\n")
        print(f"cell solve failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    homogenize.save_profile(profile, out)
    (out / "convergence.txt").write_text(profile.report.summary() + "\n")
    print(f"profile written to {out} "
          f"(samples={profile.n_samples}, "
          f"max_mean={np.max(np.abs(profile.spatial_means())):.3e})")
    return EXIT_OK


def _sweep_epsilons(args, cfg) -> list[float]:
    if args.epsilons:
        text = args.epsilons
    else:
        section = cfg["verify"] if cfg.has_section("verify") else {}
        text = section.get("epsilons", "")
    values = [float(s) for s in text.split(",") if s.strip()]
    if not values:
        raise ConfigurationError("verify needs a nonempty epsilon list")
    return values


def _run_one_epsilon(payload):
    """Sweep member (module level so process pools can pickle it)."""
    (eps, kind, a, b, c, law_kind, u_crit_sq, forcing_cfg, solver_kwargs,
     grid_n, T) = payload
    law = van_rijn_law(a=a, b=b, c=c, u_crit_sq=u_crit_sq) \
        if law_kind == "vanrijn" else power3_law(a=a, b=b, c=c)
    regime = scaling.RegimeSpec(kind=kind, epsilon=eps, a=a, b=b, c=c, law=law)
    forcing = rotating_tide(**forcing_cfg) if forcing_cfg.pop("_preset") == "rotating" \
        else unidirectional_tide(**forcing_cfg)
    grid = gridmod.make_grid(grid_n)
    solver_cfg = solver.SolverConfig(**solver_kwargs)
    limit = homogenize.cell_solve(T, regime.law, forcing, solver_cfg, grid)
    z0 = limit.value_at(0.0)
    traj = solver.solve_fine(z0, regime, regime.law, forcing, solver_cfg, T)
    theta_T = (T / eps) % 1.0
    err = gridmod.norm_l2(traj.final - limit.value_at(theta_T))
    return eps, err, verify.mass_drift(traj)


def _cmd_verify(args) -> int:
    cfg = _read_config(args.config)
    section = cfg["verify"] if cfg.has_section("verify") else {}
    out = _prepare_outdir(args.out, section.get("out"))
    mode = section.get("mode", "two_scale")
    regime = _regime_from_config(cfg)
    forcing = _forcing_from_config(cfg)
    solver_cfg = _solver_config(cfg, forcing)
    grid = _grid_from_config(cfg, args.grid_n)
    seed = args.seed if args.seed is not None else int(section.get("seed", 0))

    if mode == "contraction":
        mu = float(section.get("mu", 0.5))
        nu = float(section.get("nu", 1e-3))
        trials = int(section.get("trials", 8))
        provider = CoefficientProvider(regime.law, forcing, regime, grid).fine
        ratio = verify.contraction_ratio(mu, nu, 0.0, 0.0, trials, solver_cfg,
                                         provider, grid, seed=seed)
        bound = float(np.exp(-mu) + 1e-6)
        (out / "contraction.txt").write_text(
            f"mu={mu}\nnu={nu}\ntrials={trials}\nseed={seed}\n"
            f"ratio={ratio!r}\nbound={bound!r}\n")
        print(f"contraction ratio={ratio:.6f} bound={bound:.6f}")
        return EXIT_OK if ratio <= bound else EXIT_FAILURE

    if mode == "mass":
        T = float(section.get("T", 0.5))
        traj = solver.solve_fine(gridmod.zeros(grid), regime, regime.law,
                                 forcing, solver_cfg, T)
        drift = verify.mass_drift(traj)
        (out / "mass.txt").write_text(f"T={T}\nmass_drift={drift!r}\n")
        print(f"mass drift={drift:.3e}")
        return EXIT_OK if drift <= 1e-9 else EXIT_FAILURE

    if mode not in ("two_scale", "corrector"):
        raise ConfigurationError(f"unknown verify mode {mode!r}")

    epsilons = _sweep_epsilons(args, cfg)
    T = float(section.get("T", 0.4))
    fields_dir = out / "fields"
    if mode == "corrector":
        report = verify.corrector_error(regime, regime.law, forcing, None,
                                        epsilons, T, solver_cfg, grid,
                                        persist_dir=fields_dir)
    elif args.jobs > 1 and forcing.preset in ("rotating", "unidirectional"):
        report = _parallel_two_scale(args.jobs, epsilons, regime, forcing,
                                     solver_cfg, grid, T, cfg)
    else:
        report = verify.two_scale_error(regime, regime.law, forcing, None,
                                        epsilons, T, solver_cfg, grid,
                                        persist_dir=fields_dir)
    report.seed = seed
    csv_path = report.write_csv(out / f"{mode}.csv", deterministic=True)
    verify.write_plot_script(csv_path, out / f"{mode}.gp", title=mode)
    (out / f"{mode}_summary.txt").write_text(report.summary() + "\n")
    print(report.summary())
    produced_all = not report.failures
    return EXIT_OK if produced_all else EXIT_FAILURE


def _parallel_two_scale(jobs, epsilons, regime, forcing, solver_cfg, grid, T, cfg):
    forcing_section = cfg["forcing"] if cfg.has_section("forcing") else {}
    forcing_cfg = {
        "_preset": forcing.preset,
        "amplitude": float(forcing_section.get("amplitude", 1.0)),
        "modulation": float(forcing_section.get("modulation", 0.0)),
        "spatial_variation": float(forcing_section.get("spatial_variation", 0.0)),
        "height_amplitude": float(forcing_section.get("height_amplitude", 1.0)),
    }
    solver_kwargs = {
        "dt_per_period": solver_cfg.dt_per_period,
        "linear_tol": solver_cfg.linear_tol,
        "linear_maxiter": solver_cfg.linear_maxiter,
        "fixed_point_tol": solver_cfg.fixed_point_tol,
        "fixed_point_maxiter": solver_cfg.fixed_point_maxiter,
        "continuation": solver_cfg.continuation,
    }
    payloads = [(eps, regime.kind, regime.a, regime.b, regime.c,
                 regime.law.kind, regime.law.u_crit_sq, dict(forcing_cfg),
                 solver_kwargs, grid.n, T) for eps in epsilons]
    report = verify.ErrorReport(label="two_scale")
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for eps, err, drift in pool.map(_run_one_epsilon, payloads):
            report.epsilons.append(eps)
            report.errors.append(err)
            report.rows.append({"epsilon": eps, "error": err,
                                "remainder": float("nan"),
                                "mass_drift": drift,
                                "runtime_s": float("nan")})
    return report.finish()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"regime": _cmd_regime, "run": _cmd_run,
                "cell": _cmd_cell, "verify": _cmd_verify}
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DuneSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
