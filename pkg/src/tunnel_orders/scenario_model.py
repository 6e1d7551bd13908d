"""Problem instances: potential, dimension, quantum-correction kind, budgets.

A Scenario is the raw statement; validate_scenario checks the hard
invariants (unit curvature at the origin, the truncation rule M >= 2K+2,
parity when n > 1), attaches the correction series u and a convergence
radius, and returns the immutable ValidatedScenario everything else
consumes. The four figure-level presets plus two service potentials are
built here so tests and configs share one source of truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import tomli
from gmpy2 import mpq
from mpmath import mp

from .errors import ConfigurationError, HalfIntegerPowerError
from .series_core import TruncatedSeries, fraction_str, parse_fraction

CORRECTIONS = ("none", "radial_u1", "sphere")
PRESET_NAMES = ("harmonic", "cubic", "neg_quartic", "double_well", "sphere", "radial_on")

DEFAULT_K = 40
DEFAULT_PRECISION_BITS = 256

# polynomial potentials, coefficient of Q^m at index m
_POLY_PRESETS = {
    "harmonic": ["0", "0", "1/2"],
    "cubic": ["0", "0", "1/2", "-1"],
    "neg_quartic": ["0", "0", "1/2", "0", "-1"],
    "double_well": ["0", "0", "1/2", "-1", "1/2"],
    "radial_on": ["0", "0", "1/2", "0", "-1"],
}


@dataclass(frozen=True)
class Scenario:
    label: str
    n: int
    correction: str
    potential: TruncatedSeries  # rational mode, index m = coefficient of Q^m
    K: int
    M: int
    precision_bits: int


@dataclass(frozen=True)
class ValidatedScenario:
    label: str
    n: int
    correction: str
    potential: TruncatedSeries  # padded to truncation order M
    u: TruncatedSeries          # correction series, padded to M
    K: int
    M: int
    precision_bits: int
    radius: float               # float estimate; math.inf when V has no nonzero root
    potential_is_even: bool


def cos_series(M: int) -> TruncatedSeries:
    coeffs = [mpq(0)] * (M + 1)
    sign = 1
    for j in range(0, M + 1, 2):
        coeffs[j] = mpq(sign, math.factorial(j))
        sign = -sign
    return TruncatedSeries(coeffs, M)


def sin_over_q_series(M: int) -> TruncatedSeries:
    coeffs = [mpq(0)] * (M + 1)
    sign = 1
    for j in range(0, M + 1, 2):
        coeffs[j] = mpq(sign, math.factorial(j + 1))
        sign = -sign
    return TruncatedSeries(coeffs, M)


def sphere_u_series(M: int) -> TruncatedSeries:
    """Taylor series of Q*cot(Q) = cos(Q) / (sin(Q)/Q); starts 1 - Q^2/3 - Q^4/45."""
    return cos_series(M).div(sin_over_q_series(M))


def one_minus_cos_series(M: int) -> TruncatedSeries:
    one = TruncatedSeries.one(M)
    return one - cos_series(M)


def preset(name: str, n: int | None = None, *, K: int = DEFAULT_K,
           M: int | None = None, precision_bits: int = DEFAULT_PRECISION_BITS,
           label: str | None = None) -> Scenario:
    """Build a named scenario; sphere and radial_on require the dimension n."""
    if name not in PRESET_NAMES:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    if M is None:
        M = 2 * K + 2
    if name in ("sphere", "radial_on"):
        if n is None:
            raise ConfigurationError(f"preset {name!r} requires the dimension n")
    elif n not in (None, 1):
        raise ConfigurationError(f"preset {name!r} is one-dimensional")
    if name == "sphere":
        potential = one_minus_cos_series(M)
        correction = "sphere"
    else:
        coeffs = [parse_fraction(c) for c in _POLY_PRESETS[name]]
        potential = TruncatedSeries(coeffs, max(M, len(coeffs) - 1))
        correction = "radial_u1" if name == "radial_on" else "none"
    dim = 1 if n is None else int(n)
    return Scenario(label=label or name, n=dim, correction=correction,
                    potential=potential, K=K, M=M, precision_bits=precision_bits)


def _pad(series: TruncatedSeries, M: int) -> TruncatedSeries:
    if series.trunc == M:
        return series
    if series.trunc > M:
        return series.truncate_to(M)
    return TruncatedSeries(series.coeffs, M, series.label)


def _nonzero_root_radius(potential: TruncatedSeries, precision_bits: int) -> float:
    """Modulus of the smallest nonzero root of the potential polynomial.

    V = Q^2/2 + ... always has the double root at 0; it is deflated exactly
    before root finding. Returns inf when nothing remains (harmonic).
    """
    coeffs = list(potential.coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    deflated = coeffs[2:]  # V(0)=V'(0)=0 is enforced before this runs
    if len(deflated) <= 1:
        return math.inf
    with mp.workprec(precision_bits):
        poly = [mpmath.mpf(int(c.numerator)) / int(c.denominator)
                for c in reversed(deflated)]
        roots = mpmath.polyroots(poly, maxsteps=200, extraprec=precision_bits)
        return float(min(abs(r) for r in roots))


def validate_scenario(s: Scenario) -> ValidatedScenario:
    """Check every invariant and attach the derived fields."""
    if s.n < 1:
        raise ConfigurationError("dimension n must be a positive integer")
    if s.correction not in CORRECTIONS:
        raise ConfigurationError(f"unknown correction {s.correction!r}")
    if s.correction == "none" and s.n != 1:
        raise ConfigurationError("correction 'none' is the plain 1D case; it requires n=1")
    if s.K < 1:
        raise ConfigurationError("K must be at least 1")
    if s.M < 2 * s.K + 2:
        raise ConfigurationError(
            f"M={s.M} is too small: the truncation rule requires M >= 2K+2 = {2 * s.K + 2} "
            "so every energy coefficient up to K is truncation independent")
    if s.precision_bits < 128:
        raise ConfigurationError("precision_bits must be at least 128")

    if s.potential.trunc > s.M and any(c != 0 for c in s.potential.coeffs[s.M + 1:]):
        raise ConfigurationError("potential degree exceeds the truncation order M")
    v = _pad(s.potential, s.M)
    c = v.coeffs
    if c[0] != 0 or (s.M >= 1 and c[1] != 0):
        raise ConfigurationError("normalization error: potential must vanish to "
                                 "second order at the origin (V(0)=V'(0)=0)")
    if s.M < 2 or c[2] != mpq(1, 2):
        raise ConfigurationError("normalization error: potential curvature at the "
                                 "origin must be exactly 1 (coefficient of Q^2 = 1/2)")

    is_even = all(c[m] == 0 for m in range(1, s.M + 1, 2))
    if s.correction == "sphere":
        u = sphere_u_series(s.M)
    else:
        u = TruncatedSeries.one(s.M)

    if s.n > 1 and not is_even:
        raise HalfIntegerPowerError(
            "n > 1 with odd powers in the potential violates the order-Q^0 "
            "solvability constraint; such scenarios need half-integer powers "
            "of hbar and are refused")

    if s.correction == "sphere":
        # the correction series has its first pole at pi, inside the
        # potential's own first nonzero root (2*pi for 1-cos); the pole
        # bounds where coefficient rows converge
        radius = math.pi
    else:
        radius = _nonzero_root_radius(v, s.precision_bits)

    return ValidatedScenario(label=s.label, n=s.n, correction=s.correction,
                             potential=v, u=u, K=s.K, M=s.M,
                             precision_bits=s.precision_bits, radius=radius,
                             potential_is_even=is_even)


# -- config documents -------------------------------------------------

_SCENARIO_KEYS = {"label", "preset", "n", "correction", "potential", "K", "M",
                  "precision_bits"}
_TOP_TABLES = {"scenario", "eval", "expand", "fit", "verify"}


@dataclass(frozen=True)
class ConfigDocument:
    scenario: Scenario
    eval_points: tuple
    stage_tables: dict  # raw [expand]/[fit]/[verify] tables, validated by the CLI


def parse_config(text: str) -> ConfigDocument:
    """Parse a TOML config into a Scenario plus stage tables.

    Unknown tables or unknown keys in [scenario]/[eval] are errors with the
    offending key path named; stage tables are checked by their consumers.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"config is not valid TOML: {exc}") from exc

    unknown = set(doc) - _TOP_TABLES
    if unknown:
        raise ConfigurationError(f"unknown config table(s): {sorted(unknown)}")
    sc = doc.get("scenario")
    if not isinstance(sc, dict):
        raise ConfigurationError("missing [scenario] table")
    bad = set(sc) - _SCENARIO_KEYS
    if bad:
        raise ConfigurationError(
            f"unknown key(s) under scenario: {sorted('scenario.' + k for k in bad)}")

    K = _int_key(sc, "K", DEFAULT_K)
    M = _int_key(sc, "M", 2 * K + 2)
    bits = _int_key(sc, "precision_bits", DEFAULT_PRECISION_BITS)
    n = _int_key(sc, "n", None)
    label = sc.get("label")
    if label is not None and not isinstance(label, str):
        raise ConfigurationError("scenario.label must be a string")

    if "preset" in sc:
        if "potential" in sc:
            raise ConfigurationError("give scenario.preset or scenario.potential, not both")
        if "correction" in sc:
            raise ConfigurationError("scenario.correction is implied by the preset")
        name = sc["preset"]
        if not isinstance(name, str):
            raise ConfigurationError("scenario.preset must be a string")
        scenario = preset(name, n, K=K, M=M, precision_bits=bits, label=label)
    else:
        if "potential" not in sc:
            raise ConfigurationError("scenario.potential is required when no preset is named")
        raw = sc["potential"]
        if not isinstance(raw, list) or not raw:
            raise ConfigurationError("scenario.potential must be a non-empty array "
                                     "of fraction strings, index = power of Q")
        coeffs = [_rational_entry(c, f"scenario.potential[{i}]") for i, c in enumerate(raw)]
        correction = sc.get("correction", "none")
        potential = TruncatedSeries(coeffs, max(M, len(coeffs) - 1))
        scenario = Scenario(label=label or "custom", n=n or 1, correction=correction,
                            potential=potential, K=K, M=M, precision_bits=bits)

    points: list = []
    ev = doc.get("eval", {})
    if not isinstance(ev, dict):
        raise ConfigurationError("[eval] must be a table")
    bad = set(ev) - {"points"}
    if bad:
        raise ConfigurationError(
            f"unknown key(s) under eval: {sorted('eval.' + k for k in bad)}")
    for i, p in enumerate(ev.get("points", [])):
        points.append(_rational_entry(p, f"eval.points[{i}]", allow_float=True))

    stages = {k: doc[k] for k in ("expand", "fit", "verify") if k in doc}
    return ConfigDocument(scenario=scenario, eval_points=tuple(points),
                          stage_tables=stages)


def load_scenario(text: str) -> Scenario:
    """Parse a config document and return its scenario with defaults applied."""
    return parse_config(text).scenario


def serialize_scenario(s: Scenario) -> str:
    """Emit the resolved scenario as a config document (round-trips via load_scenario)."""
    coeffs = list(s.potential.coeffs)
    while len(coeffs) > 3 and coeffs[-1] == 0:
        coeffs.pop()
    pot = ", ".join(f'"{fraction_str(c)}"' for c in coeffs)
    return (
        "[scenario]\n"
        f'label = "{s.label}"\n'
        f"n = {s.n}\n"
        f'correction = "{s.correction}"\n'
        f"potential = [{pot}]\n"
        f"K = {s.K}\n"
        f"M = {s.M}\n"
        f"precision_bits = {s.precision_bits}\n"
    )


def _int_key(table: dict, key: str, default):
    if key not in table:
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigurationError(f"scenario.{key} must be an integer")
    return val


def _rational_entry(value, path: str, *, allow_float: bool = False) -> mpq:
    if isinstance(value, bool):
        raise ConfigurationError(f"{path}: expected a rational, got a boolean")
    if isinstance(value, int):
        return mpq(value)
    if isinstance(value, str):
        try:
            return parse_fraction(value)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
    if isinstance(value, float) and allow_float:
        # TOML floats arrive as binary doubles; their shortest repr is the
        # decimal the user wrote, so go through that for an exact rational
        f = Fraction(repr(value))
        return mpq(f.numerator, f.denominator)
    raise ConfigurationError(f"{path}: expected a fraction string, got {value!r}")
