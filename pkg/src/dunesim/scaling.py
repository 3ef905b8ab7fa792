"""Dimensional analysis: from physical constants to dimensionless regimes.

Starting from the dimensional seabed equation, nondimensionalization produces
three factors,

    f_diff   = (lambda/(1-p)) * alpha * t_bar * u_bar**3 * (rho*D)**1.5
               / (ln(4H/D)**3 * L_bar**2)
    f_src    = (1/(1-p))      * alpha * t_bar * u_bar**3 * (rho*D)**1.5
               / (ln(4H/D)**3 * L_bar * z_bar)
    f_height = 3*M_bar / (H * ln(4H/D))

together with the scale separation epsilon (ratio of the tide period, or the
lunar period for the long-term regime, to the observation time).  Each regime
then reads the equation with coefficients a = f_diff*eps, c = f_src*eps and
b = f_height/eps (mean-term divides f_height by sqrt(eps); long-term
multiplies the factors by eps**2 instead of eps).

Each regime also carries a "snapped" coefficient set: the round dimensionless
constants conventionally used with it.  Simulations default to the snapped
values so runs are reproducible from a handful of rationals; the exact
derivation is reported alongside, with the ratio of every computed factor to
its reference magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigurationError
from .physics import TransportLaw, power3_law, van_rijn_law

REGIME_KINDS = ("short_small", "short_big", "mean_small", "long_small")


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional inputs (SI units)."""

    u_bar: float = 1.0            # characteristic water speed, m/s
    water_height: float = 50.0    # mean water height H, m
    tide_height: float = 5.0      # tidal height variation M_bar, m
    grain_diameter: float = 1e-4  # sand grain diameter, m
    rho: float = 1000.0           # water density, kg/m^3
    porosity: float = 0.5         # sand porosity p, in [0, 1)
    slope_lambda: float = 0.5     # inverse maximum free slope (dimensionless)
    alpha: float = 100.0          # flux-law constant (dimensionless)
    u_crit: float = 0.0           # critical speed for grain motion, m/s
    t_bar: float = 8.6e6          # observation time, s
    tide_period: float = 4.7e4    # main tide period, s
    lunar_period: float = 2.6e6   # earth-moon-sun realignment period, s
    z_bar: float = 1.0            # characteristic dune height, m
    l_bar: float = 10.0           # characteristic dune wavelength, m

    def __post_init__(self):
        positive = ("u_bar", "water_height", "tide_height", "grain_diameter",
                    "rho", "alpha", "t_bar", "tide_period", "lunar_period",
                    "z_bar", "l_bar")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0.0 <= self.porosity < 1.0:
            raise ConfigurationError("porosity must lie in [0, 1)")
        if self.u_crit < 0:
            raise ConfigurationError("u_crit must be nonnegative")
        if self.grain_diameter >= 4.0 * self.water_height:
            raise ConfigurationError(
                "grain diameter must be far below the water height (log factor)")


# Per-regime default inputs.  The long-term observation time is 16 years
# (5.0e8 s), consistent with a lunar-to-observation ratio near 1/192.  The
# big-speck regime (50 m dunes) uses 100 m of water: that depth reproduces
# all three of its reference magnitudes simultaneously, while 50 m is off by
# more than a factor 2 on the height factor.
PRESET_PARAMS: dict[str, PhysicalParams] = {
    "short_small": PhysicalParams(),
    "short_big": PhysicalParams(water_height=100.0, grain_diameter=5e-3,
                                z_bar=50.0, l_bar=300.0, u_crit=0.5),
    "mean_small": PhysicalParams(t_bar=1.4e8, grain_diameter=5e-5),
    "long_small": PhysicalParams(t_bar=5.0e8, grain_diameter=7e-5),
}

# Snapped dimensionless coefficients per regime: (epsilon, a, b, c).
SNAPPED: dict[str, tuple[float, float, float, float]] = {
    "short_small": (1.0 / 200.0, 0.5, 4.0, 10.0),
    "short_big": (1.0 / 200.0, 0.5, 3.0, 5.0),
    "mean_small": (1.0 / 3000.0, 1.0, 1.0, 20.0),
    "long_small": (1.0 / 192.0, 1.0, 4.0, 20.0),
}

# Reference magnitudes for the derivation report (the values the exact
# factors are compared against, where such references exist).
REFERENCE_MAGNITUDES: dict[str, dict[str, float]] = {
    "short_small": {"epsilon": 1.0 / 200.0, "f_diff": 90.0, "f_src": 1800.0,
                    "f_height": 2e-2},
    "short_big": {"epsilon": 1.0 / 200.0, "f_diff": 90.0, "f_src": 1000.0,
                  "f_height": 1.3e-2},
    "mean_small": {"epsilon": 1.0 / 3000.0, "lunar_ratio": 1.0 / 54.0},
    "long_small": {"epsilon": 1.0 / 192.0},
}


@dataclass(frozen=True)
class RegimeDerivation:
    """Exact (unsnapped) outputs of the dimensional analysis."""

    epsilon: float
    a: float
    b: float
    c: float
    factors: dict[str, float]
    ratios: dict[str, float]          # computed / reference, where defined
    lunar_ratio: float | None = None  # 1/(t_bar*omega_lunar) for mean-term
    defaulted: tuple[str, ...] = ()


@dataclass(frozen=True)
class RegimeSpec:
    """A model regime: scale separation, coefficients and transport law.

    ``stiffness`` is the factor multiplying the spatial operator (1/eps for
    the short and mean regimes, 1/eps**2 for long-term).  ``split_scale`` is
    the scale of the height coupling (eps, or sqrt(eps) for mean-term).
    """

    kind: str
    epsilon: float
    a: float
    b: float
    c: float
    law: TransportLaw
    derivation: RegimeDerivation | None = None

    def __post_init__(self):
        if self.kind not in REGIME_KINDS:
            raise ConfigurationError(f"unknown regime kind {self.kind!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        if self.a <= 0:
            raise ConfigurationError("coefficient a must be positive")
        # keep the law's copy of (a, b, c) in sync with the regime
        if (self.law.a, self.law.b, self.law.c) != (self.a, self.b, self.c):
            object.__setattr__(self, "law",
                               self.law.with_coefficients(self.a, self.b, self.c))

    @property
    def is_mean(self) -> bool:
        return self.kind == "mean_small"

    @property
    def is_long(self) -> bool:
        return self.kind == "long_small"

    @property
    def stiffness(self) -> float:
        return 1.0 / self.epsilon ** 2 if self.is_long else 1.0 / self.epsilon

    @property
    def split_scale(self) -> float:
        return math.sqrt(self.epsilon) if self.is_mean else self.epsilon

    def with_epsilon(self, epsilon: float) -> "RegimeSpec":
        return replace(self, epsilon=epsilon, derivation=None)


def snapped_regime(kind: str, epsilon: float | None = None,
                   law: TransportLaw | None = None) -> RegimeSpec:
    """Regime with the conventional snapped coefficients; epsilon and the law
    can be overridden (sweeps vary epsilon at fixed coefficients)."""
    if kind not in SNAPPED:
        raise ConfigurationError(f"unknown regime kind {kind!r}")
    eps0, a, b, c = SNAPPED[kind]
    if law is None:
        law = van_rijn_law(a=a, b=b, c=c) if kind == "short_big" \
            else power3_law(a=a, b=b, c=c)
    return RegimeSpec(kind=kind, epsilon=epsilon if epsilon is not None else eps0,
                      a=a, b=b, c=c, law=law)


def _factors(p: PhysicalParams) -> dict[str, float]:
    log_term = math.log(4.0 * p.water_height / p.grain_diameter)
    if log_term <= 0:
        raise ConfigurationError("nonpositive log factor: grain too large")
    common = (p.alpha * p.t_bar * p.u_bar ** 3
              * (p.rho * p.grain_diameter) ** 1.5 / log_term ** 3)
    one_minus_p = 1.0 - p.porosity
    return {
        "f_diff": (p.slope_lambda / one_minus_p) * common / p.l_bar ** 2,
        "f_src": (1.0 / one_minus_p) * common / (p.l_bar * p.z_bar),
        "f_height": 3.0 * p.tide_height / (p.water_height * log_term),
    }


def derive_regime(params: PhysicalParams, kind: str,
                  defaulted: tuple[str, ...] = ()) -> RegimeSpec:
    """Run the dimensional analysis and attach it to the snapped regime.

    The exact epsilon is the tide-to-observation period ratio (lunar period
    for the long-term regime); parameters with epsilon >= 1 are rejected.
    The derivation records every factor and, where a reference magnitude
    exists, the computed/reference ratio.
    """
    if kind not in REGIME_KINDS:
        raise ConfigurationError(f"unknown regime kind {kind!r}")
    factors = _factors(params)
    fast_period = params.lunar_period if kind == "long_small" else params.tide_period
    eps = fast_period / params.t_bar
    if eps >= 1.0:
        raise ConfigurationError(
            f"no scale separation: epsilon = {eps:.3g} >= 1")
    lunar_ratio = params.lunar_period / params.t_bar if kind == "mean_small" else None

    if kind == "long_small":
        a_exact = factors["f_diff"] * eps ** 2
        c_exact = factors["f_src"] * eps ** 2
        b_exact = factors["f_height"] / eps
    elif kind == "mean_small":
        a_exact = factors["f_diff"] * eps
        c_exact = factors["f_src"] * eps
        b_exact = factors["f_height"] / math.sqrt(eps)
    else:
        a_exact = factors["f_diff"] * eps
        c_exact = factors["f_src"] * eps
        b_exact = factors["f_height"] / eps

    refs = REFERENCE_MAGNITUDES[kind]
    computed = dict(factors)
    computed["epsilon"] = eps
    if lunar_ratio is not None:
        computed["lunar_ratio"] = lunar_ratio
    ratios = {name: computed[name] / ref for name, ref in refs.items()}

    derivation = RegimeDerivation(epsilon=eps, a=a_exact, b=b_exact, c=c_exact,
                                  factors=factors, ratios=ratios,
                                  lunar_ratio=lunar_ratio, defaulted=defaulted)
    base = snapped_regime(kind)
    return replace(base, derivation=derivation)


def params_for(kind: str, **overrides) -> tuple[PhysicalParams, tuple[str, ...]]:
    """Preset parameters for a regime with overridden fields; returns the
    parameters and the names of fields left at their defaults."""
    if kind not in PRESET_PARAMS:
        raise ConfigurationError(f"unknown regime kind {kind!r}")
    base = PRESET_PARAMS[kind]
    clean = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(clean) - set(base.__dataclass_fields__)
    if unknown:
        raise ConfigurationError(f"unknown physical parameters: {sorted(unknown)}")
    defaulted = tuple(sorted(set(base.__dataclass_fields__) - set(clean)))
    return replace(base, **clean), defaulted


def regime_report(spec: RegimeSpec) -> str:
    """Key=value report: snapped values, exact derivation and reference ratios."""
    lines = [f"kind={spec.kind}",
             f"epsilon_snapped={spec.epsilon!r}",
             f"a_snapped={spec.a!r}", f"b_snapped={spec.b!r}", f"c_snapped={spec.c!r}",
             f"law={spec.law.kind}",
             f"stiffness={spec.stiffness!r}"]
    d = spec.derivation
    if d is not None:
        lines += [f"epsilon_exact={d.epsilon!r}",
                  f"a_exact={d.a!r}", f"b_exact={d.b!r}", f"c_exact={d.c!r}"]
        for name in sorted(d.factors):
            lines.append(f"{name}={d.factors[name]!r}")
        if d.lunar_ratio is not None:
            lines.append(f"lunar_ratio={d.lunar_ratio!r}")
        for name in sorted(d.ratios):
            lines.append(f"ratio_{name}={d.ratios[name]!r}")
        if d.defaulted:
            lines.append("defaulted=" + ",".join(d.defaulted))
    return "\n".join(lines)


def regime_csv(spec: RegimeSpec) -> str:
    """Two-line CSV (header + row) of the regime report."""
    pairs = []
    for line in regime_report(spec).splitlines():
        key, value = line.split("=", 1)
        pairs.append((key, value))
    header = ",".join(k for k, _ in pairs)
    row = ",".join(v.replace(",", ";") for _, v in pairs)
    return header + "\n" + row + "\n"
