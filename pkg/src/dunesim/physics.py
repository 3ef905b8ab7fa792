"""Sediment flux laws, tidal forcing presets and PDE coefficient assembly.

The model couples a diffusivity A and a source flux C to the water velocity
through a pair of nonnegative response functions (the diffusive response and
the transported-flux response).  Two laws are provided:

* ``power3``: both responses are u**3, positive for every positive speed,
* ``vanrijn``: both responses are chi(u**2 - u_crit**2), identically zero
  below the critical speed (a genuinely degenerate diffusivity).

Forcing presets supply the oscillatory velocity and water-height fields; the
phase variable ``theta`` is 1-periodic.  The ``rotating`` preset keeps the
speed equal to its amplitude at every phase (never degenerate), while the
``unidirectional`` preset passes through zero speed twice per period and
exercises the degenerate branch.

Coefficient assembly is exposed at two granularities: pointwise samples for
diagnostics and face-sampled fields consumed by the implicit solver.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from . import grid as gridmod
from .errors import ConfigurationError
from .grid import Grid

# Below this speed the unit direction of the velocity is replaced by zero;
# the flux response vanishes at least quadratically there, so the assembled
# source flux tends to zero continuously.
U_FLOOR = 1e-12


def chi(sigma):
    """Threshold response: 0 for negative input, sigma**1.5 otherwise."""
    s = np.asarray(sigma, dtype=float)
    out = np.where(s > 0.0, np.maximum(s, 0.0) ** 1.5, 0.0)
    return float(out) if np.isscalar(sigma) else out


@dataclass(frozen=True)
class TransportLaw:
    """Flux-law constants: responses, thresholds and model coefficients.

    ``a``, ``b`` and ``c`` are the dimensionless diffusion, height-coupling
    and source coefficients of the seabed equation.  ``u_threshold`` and
    ``g_floor`` record the speed above which the diffusive response is
    guaranteed to clear the floor; ``deriv_bound`` is a common bound on the
    responses and their derivatives over the working speed range.
    """

    kind: str
    a: float
    b: float
    c: float
    u_crit_sq: float
    u_threshold: float
    g_floor: float
    deriv_bound: float

    def __post_init__(self):
        if self.kind not in ("power3", "vanrijn"):
            raise ConfigurationError(f"unknown law kind {self.kind!r}")
        if self.a <= 0:
            raise ConfigurationError("law coefficient a must be positive")
        if self.g_floor <= 0:
            raise ConfigurationError("g_floor must be positive")

    def response(self, speed):
        """Common response of both law kinds as a function of speed >= 0."""
        u = np.asarray(speed, dtype=float)
        if np.any(u < 0):
            raise ConfigurationError("speed must be nonnegative")
        if self.kind == "power3":
            out = u ** 3
        else:
            out = chi(u ** 2 - self.u_crit_sq)
        return float(out) if np.isscalar(speed) else out

    def with_coefficients(self, a=None, b=None, c=None) -> "TransportLaw":
        return replace(self,
                       a=self.a if a is None else a,
                       b=self.b if b is None else b,
                       c=self.c if c is None else c)


def _bound_over(f: Callable, lo: float, hi: float, m: int = 4001) -> float:
    u = np.linspace(lo, hi, m)
    g = f(u)
    dg = np.gradient(g, u)
    return float(np.max(np.abs(g)) + np.max(np.abs(dg)))


def power3_law(a: float = 0.5, b: float = 4.0, c: float = 10.0) -> TransportLaw:
    """Cubic response law, positive for every positive speed.

    The threshold pair is bookkeeping only: u_threshold is zero and g_floor
    is calibrated to the smallest strictly positive sampled speed (0.01).
    """
    d = _bound_over(lambda u: u ** 3, 0.0, 10.0)
    return TransportLaw(kind="power3", a=a, b=b, c=c, u_crit_sq=0.0,
                        u_threshold=0.0, g_floor=1e-6, deriv_bound=d)


def van_rijn_law(a: float = 0.5, b: float = 3.0, c: float = 5.0,
                 u_crit_sq: float = 0.5, g_floor: float = 1e-3) -> TransportLaw:
    """Thresholded response law chi(u**2 - u_crit_sq).

    u_threshold inverts the response floor: response(u) >= g_floor exactly
    when u**2 >= u_crit_sq + g_floor**(2/3).
    """
    u_thr = float(np.sqrt(u_crit_sq + g_floor ** (2.0 / 3.0)))
    d = _bound_over(lambda u: chi(u ** 2 - u_crit_sq), 0.0, 10.0)
    return TransportLaw(kind="vanrijn", a=a, b=b, c=c, u_crit_sq=u_crit_sq,
                        u_threshold=u_thr, g_floor=g_floor, deriv_bound=d)


def eval_g(law: TransportLaw, side: str, u):
    """Evaluate one side of the law at speed u >= 0.

    ``side`` is "diffusion" (the response multiplying the gradient) or
    "transport" (the response multiplying the unit flux direction); the two
    provided law kinds use the same response for both sides.
    """
    if side not in ("diffusion", "transport"):
        raise ConfigurationError(f"unknown law side {side!r}")
    return law.response(u)


# ---------------------------------------------------------------------------
# Forcing presets.  Component functions are module level and bound with
# functools.partial so forcing objects stay picklable for parallel sweeps.
# ---------------------------------------------------------------------------

def _amplitude(t, x1, x2, *, base, modulation, spatial):
    amp = base * (1.0 + modulation * np.sin(2.0 * np.pi * t))
    return amp * (1.0 + spatial * np.cos(2.0 * np.pi * x1))


def _rotating_velocity(t, theta, x1, x2, *, base, modulation, spatial):
    amp = _amplitude(t, x1, x2, base=base, modulation=modulation, spatial=spatial)
    phase = 2.0 * np.pi * theta
    one = np.ones_like(np.asarray(x1, dtype=float))
    return amp * np.cos(phase) * one, amp * np.sin(phase) * one


def _unidirectional_velocity(t, theta, x1, x2, *, base, modulation, spatial, e1, e2):
    amp = _amplitude(t, x1, x2, base=base, modulation=modulation, spatial=spatial)
    s = np.sin(2.0 * np.pi * theta)
    one = np.ones_like(np.asarray(x1, dtype=float))
    return amp * s * e1 * one, amp * s * e2 * one


def _cosine_height(t, tau, theta, x1, x2, *, amplitude):
    return amplitude * np.cos(2.0 * np.pi * theta) * np.ones_like(np.asarray(x1, dtype=float))


def _zero_height(t, tau, theta, x1, x2):
    return np.zeros_like(np.asarray(x1, dtype=float))


def _zero_velocity(t, theta, x1, x2):
    z = np.zeros_like(np.asarray(x1, dtype=float))
    return z, z


@dataclass(frozen=True)
class Forcing:
    """Oscillatory velocity and height fields driving the seabed equation.

    ``velocity(t, theta, x1, x2)`` returns the two velocity components;
    ``height(t, tau, theta, x1, x2)`` the relative water-height variation.
    Optional perturbation fields (``velocity_slow``, ``velocity_long`` and
    ``height_long``) enter the mean-term and long-term compositions; when
    absent they are treated as zero.  ``theta_window`` records the phase
    interval on which the speed is guaranteed to stay above the law
    threshold, and ``satisfies`` lists the structural constraints the preset
    honours (for reporting, not enforcement).
    """

    preset: str
    velocity: Callable
    height: Callable
    velocity_slow: Callable | None = None
    velocity_long: Callable | None = None
    height_long: Callable | None = None
    theta_window: tuple[float, float] = (0.0, 1.0)
    degenerate: bool = False
    time_dependent: bool = False
    satisfies: tuple[str, ...] = ()


def rotating_tide(amplitude: float = 1.0, modulation: float = 0.0,
                  spatial_variation: float = 0.0,
                  height_amplitude: float = 1.0) -> Forcing:
    """Velocity of constant speed rotating once per period; never degenerate.

    amplitude * (1 + modulation*sin(2 pi t)) * (1 + spatial_variation*cos(2 pi x1))
    scales the rotating unit vector; the height variation is cos(2 pi theta).
    """
    if abs(spatial_variation) >= 1.0 or abs(modulation) >= 1.0:
        raise ConfigurationError("rotating preset needs |modulation|, |spatial_variation| < 1")
    vel = partial(_rotating_velocity, base=amplitude,
                  modulation=modulation, spatial=spatial_variation)
    hgt = partial(_cosine_height, amplitude=height_amplitude)
    return Forcing(preset="rotating", velocity=vel, height=hgt,
                   theta_window=(0.0, 1.0), degenerate=False,
                   time_dependent=(modulation != 0.0),
                   satisfies=("zero_theta_mean_velocity", "zero_theta_mean_height",
                              "speed_above_threshold_everywhere"))


def unidirectional_tide(amplitude: float = 1.0, direction=(1.0, 0.0),
                        modulation: float = 0.0, spatial_variation: float = 0.0,
                        height_amplitude: float = 1.0) -> Forcing:
    """Back-and-forth velocity along a fixed axis; speed vanishes twice per
    period, so the assembled diffusivity is degenerate there."""
    e = np.asarray(direction, dtype=float)
    nrm = float(np.hypot(e[0], e[1]))
    if nrm == 0.0:
        raise ConfigurationError("unidirectional preset needs a nonzero direction")
    vel = partial(_unidirectional_velocity, base=amplitude, modulation=modulation,
                  spatial=spatial_variation, e1=e[0] / nrm, e2=e[1] / nrm)
    hgt = partial(_cosine_height, amplitude=height_amplitude)
    return Forcing(preset="unidirectional", velocity=vel, height=hgt,
                   theta_window=(0.2, 0.3), degenerate=True,
                   time_dependent=(modulation != 0.0),
                   satisfies=("zero_theta_mean_velocity", "zero_theta_mean_height",
                              "degenerate_at_theta_0_and_half"))


def zero_forcing() -> Forcing:
    """Still water: zero velocity and height variation."""
    return Forcing(preset="zero", velocity=_zero_velocity, height=_zero_height,
                   theta_window=(0.0, 1.0), degenerate=True, time_dependent=False,
                   satisfies=("zero_theta_mean_velocity", "zero_theta_mean_height"))


class _TabulatedField:
    """Periodic linear interpolation in theta over tabulated grid fields."""

    def __init__(self, thetas: np.ndarray, arrays: np.ndarray, grid: Grid):
        order = np.argsort(thetas)
        self.thetas = np.asarray(thetas, dtype=float)[order]
        self.arrays = np.asarray(arrays, dtype=float)[order]
        self.grid = grid

    def _weights(self, theta: float):
        th = float(theta) % 1.0
        ext = np.concatenate([self.thetas, [self.thetas[0] + 1.0]])
        idx = int(np.searchsorted(ext, th, side="right")) - 1
        idx = max(0, min(idx, len(self.thetas) - 1))
        t0 = ext[idx]
        t1 = ext[idx + 1]
        w = 0.0 if t1 == t0 else (th - t0) / (t1 - t0)
        return idx, (idx + 1) % len(self.thetas), w

    def at(self, theta: float) -> np.ndarray:
        i0, i1, w = self._weights(theta)
        return (1.0 - w) * self.arrays[i0] + w * self.arrays[i1]

    def sample(self, theta: float, x1, x2) -> np.ndarray:
        """Periodic bilinear interpolation of the theta-slice at (x1, x2)."""
        a = self.at(theta)
        n = self.grid.n
        p1 = np.asarray(x1, dtype=float) * n
        p2 = np.asarray(x2, dtype=float) * n
        i0 = np.floor(p1).astype(int)
        j0 = np.floor(p2).astype(int)
        w1 = p1 - i0
        w2 = p2 - j0
        i0 %= n
        j0 %= n
        i1 = (i0 + 1) % n
        j1 = (j0 + 1) % n
        return ((1 - w1) * (1 - w2) * a[i0, j0] + w1 * (1 - w2) * a[i1, j0]
                + (1 - w1) * w2 * a[i0, j1] + w1 * w2 * a[i1, j1])


class _TabulatedVelocity:
    def __init__(self, comp0: _TabulatedField, comp1: _TabulatedField):
        self.comp0 = comp0
        self.comp1 = comp1

    def __call__(self, t, theta, x1, x2):
        return self.comp0.sample(theta, x1, x2), self.comp1.sample(theta, x1, x2)


class _TabulatedHeight:
    def __init__(self, field: _TabulatedField):
        self.field = field

    def __call__(self, t, tau, theta, x1, x2):
        return self.field.sample(theta, x1, x2)


def tabulated_forcing(path: str | Path) -> Forcing:
    """Load a forcing from a directory of per-phase field files.

    The directory holds ``manifest.txt`` with key=value lines:
    ``thetas`` (comma list), ``velocity_files`` (comma list of vector-field
    files, one per theta) and ``height_files`` (comma list of scalar-field
    files, optional; zero height when absent).
    """
    path = Path(path)
    manifest = path / "manifest.txt"
    if not manifest.is_file():
        raise ConfigurationError(f"tabulated forcing manifest not found: {manifest}")
    entries: dict[str, str] = {}
    for line in manifest.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    if "thetas" not in entries or "velocity_files" not in entries:
        raise ConfigurationError(f"{manifest}: needs 'thetas' and 'velocity_files'")
    thetas = np.array([float(s) for s in entries["thetas"].split(",")])
    vfiles = [s.strip() for s in entries["velocity_files"].split(",")]
    if len(vfiles) != thetas.size:
        raise ConfigurationError(f"{manifest}: one velocity file per theta required")
    vfields = [gridmod.load_vector(path / f) for f in vfiles]
    g = vfields[0].grid
    comp0 = _TabulatedField(thetas, np.stack([v.values[:, :, 0] for v in vfields]), g)
    comp1 = _TabulatedField(thetas, np.stack([v.values[:, :, 1] for v in vfields]), g)
    velocity = _TabulatedVelocity(comp0, comp1)
    if "height_files" in entries and entries["height_files"]:
        hfiles = [s.strip() for s in entries["height_files"].split(",")]
        if len(hfiles) != thetas.size:
            raise ConfigurationError(f"{manifest}: one height file per theta required")
        hfields = [gridmod.load_scalar(path / f, g) for f in hfiles]
        height = _TabulatedHeight(_TabulatedField(thetas, np.stack([f.values for f in hfields]), g))
    else:
        height = _zero_height
    return Forcing(preset="tabulated", velocity=velocity, height=height,
                   degenerate=True, time_dependent=False, satisfies=())


def forcing_eval(f: Forcing, t: float, tau: float, theta: float, x):
    """Evaluate the base velocity pair and height variation at one point
    (or, with array coordinates, on a lattice)."""
    x1, x2 = x
    u1, u2 = f.velocity(t, theta, x1, x2)
    m = f.height(t, tau, theta, x1, x2)
    return (u1, u2), m


# ---------------------------------------------------------------------------
# Coefficient assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSample:
    """Pointwise PDE coefficients and their first-order split.

    ``diffusivity = base_diffusivity + split_scale * diffusivity_corr`` holds
    exactly (same floating point expression), and likewise per flux
    component.  ``split_scale`` is the regime's height-coupling scale.
    """

    diffusivity: float
    flux: np.ndarray
    diffusivity_corr: float
    flux_corr: np.ndarray
    base_diffusivity: float
    base_flux: np.ndarray
    split_scale: float


def _direction(u1, u2):
    speed = np.hypot(u1, u2)
    safe = np.where(speed > U_FLOOR, speed, 1.0)
    d1 = np.where(speed > U_FLOOR, u1 / safe, 0.0)
    d2 = np.where(speed > U_FLOOR, u2 / safe, 0.0)
    return speed, d1, d2


def _composed_velocity(law, forcing, regime, t, tau, theta, x1, x2):
    u1, u2 = forcing.velocity(t, theta, x1, x2)
    if regime.is_mean and forcing.velocity_slow is not None:
        p1, p2 = forcing.velocity_slow(t, tau, theta, x1, x2)
        root = np.sqrt(regime.epsilon)
        u1 = u1 + root * p1
        u2 = u2 + root * p2
    if regime.is_long and forcing.velocity_long is not None:
        p1, p2 = forcing.velocity_long(t, theta, x1, x2)
        u1 = u1 + regime.epsilon ** 2 * p1
        u2 = u2 + regime.epsilon ** 2 * p2
    return u1, u2


def _composed_height(forcing, regime, t, tau, theta, x1, x2):
    m = forcing.height(t, tau, theta, x1, x2)
    if regime.is_long and forcing.height_long is not None:
        m = m + regime.epsilon ** 2 * forcing.height_long(t, tau, theta, x1, x2)
    return m


def assemble_coefficients(law: TransportLaw, forcing: Forcing, regime,
                          t: float, tau: float, theta: float, x) -> CoefficientSample:
    """Assemble the diffusivity and source flux at a single point.

    The height coupling enters through the factor (1 - b*scale*m) where the
    scale is the regime's split scale; the returned sample carries the exact
    base/correction split of that factor.
    """
    x1, x2 = x
    u1, u2 = _composed_velocity(law, forcing, regime, t, tau, theta, x1, x2)
    m = _composed_height(forcing, regime, t, tau, theta, x1, x2)
    speed, d1, d2 = _direction(u1, u2)
    g = law.response(speed)
    scale = regime.split_scale

    a0 = law.a * g
    a1 = -(law.b) * m * a0
    diff = a0 + scale * a1
    c0 = law.c * g
    c0_vec = np.array([c0 * d1, c0 * d2])
    c1_vec = -(law.b) * m * c0_vec
    flux = c0_vec + scale * c1_vec
    return CoefficientSample(diffusivity=float(diff), flux=flux,
                             diffusivity_corr=float(a1), flux_corr=c1_vec,
                             base_diffusivity=float(a0), base_flux=c0_vec,
                             split_scale=float(scale))


@dataclass(frozen=True)
class CoefficientField:
    """Face-sampled coefficients for one instant: diffusivity on east and
    north faces, source-flux components on their matching faces."""

    grid: Grid
    diff_east: np.ndarray
    diff_north: np.ndarray
    flux_east: np.ndarray
    flux_north: np.ndarray


class CoefficientProvider:
    """Evaluates coefficient fields on a grid for one (law, forcing, regime).

    ``fine`` assembles the full oscillatory coefficients used by the
    fine-scale solver and the cell problems of its periodic orbit;
    ``homogenized`` drops the height coupling and the regime scale (the
    limiting coefficients); ``first_order`` gives the height-coupling
    correction pair used by the corrector equation.

    Instances are immutable and safe to share across concurrent solves.
    The regime is only needed for the ``fine`` mode; the limiting and
    correction coefficients are scale free and use the base fields directly.
    """

    def __init__(self, law: TransportLaw, forcing: Forcing, regime=None,
                 grid: Grid | None = None):
        if grid is None:
            raise ConfigurationError("coefficient provider needs a grid")
        self.law = law
        self.forcing = forcing
        self.regime = regime
        self.grid = grid

    def _one_face(self, mode, t, tau, theta, x1, x2):
        law, forcing, regime = self.law, self.forcing, self.regime
        if mode == "fine":
            if regime is None:
                raise ConfigurationError("fine coefficients need a regime")
            u1, u2 = _composed_velocity(law, forcing, regime, t, tau, theta, x1, x2)
            m = _composed_height(forcing, regime, t, tau, theta, x1, x2)
            factor = 1.0 - law.b * regime.split_scale * np.asarray(m, dtype=float)
            speed, d1, d2 = _direction(u1, u2)
            g = law.response(speed)
            a = law.a * g * factor
            c0 = law.c * g * factor
            return a, c0 * d1, c0 * d2
        u1, u2 = forcing.velocity(t, theta, x1, x2)
        speed, d1, d2 = _direction(u1, u2)
        g = law.response(speed)
        if mode == "first_order":
            m = np.asarray(forcing.height(t, tau, theta, x1, x2))
            a = -(law.a * law.b) * m * g
            c0 = -(law.c * law.b) * m * g
            return a, c0 * d1, c0 * d2
        a = law.a * g
        c0 = law.c * g
        return a, c0 * d1, c0 * d2

    def _fields(self, mode, t, tau, theta) -> CoefficientField:
        g = self.grid
        a_e, ce1, _ = self._one_face(mode, t, tau, theta, g.x1_east, g.x2_east)
        a_n, _, cn2 = self._one_face(mode, t, tau, theta, g.x1_north, g.x2_north)
        if mode == "fine" and (np.min(a_e) < 0.0 or np.min(a_n) < 0.0):
            raise ConfigurationError(
                "negative diffusivity: height coupling b*scale*m exceeds 1")
        return CoefficientField(grid=g, diff_east=a_e, diff_north=a_n,
                                flux_east=ce1, flux_north=cn2)

    def fine(self, t: float, tau: float, theta: float) -> CoefficientField:
        return self._fields("fine", t, tau, theta)

    def homogenized(self, t: float, tau: float, theta: float) -> CoefficientField:
        return self._fields("homogenized", t, tau, theta)

    def first_order(self, t: float, tau: float, theta: float) -> CoefficientField:
        return self._fields("first_order", t, tau, theta)
