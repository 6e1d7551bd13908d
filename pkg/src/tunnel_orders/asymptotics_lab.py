"""Large-order growth: closed-form predictions, fits, and the layer check.

The shared growth model for a positive sequence seq_k, k = 1, 2, ... is

    seq_k ~ prefactor * Gamma(k) * k^exponent / a0^(k + exponent)

and every prediction below fills the three constants from classical data
(turning point, actions, singularity amplitude). Fits recover the same
three constants from a finite sequence by Richardson extrapolation in 1/k
and never look at the classical side, so prediction and fit are
independent ends of one comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
from mpmath import mp

from .classical_geometry import (DEGENERATE, NONE, SIMPLE, SPHERE_SINGULAR,
                                 ActionData, TurningPoint, _cos_half_pi_n)
from .errors import ConfigurationError, DomainError, NumericError
from .scenario_model import ValidatedScenario

_LAYER_WINDOW = (4, 6)
_LAYER_AGREE = mpmath.mpf("1e-8")


@dataclass(frozen=True)
class AsymptoticPrediction:
    target: str              # "energy" or "wavefunction"
    formula: str             # which closed-form branch produced this
    a0: object               # growth scale (mpf)
    exponent: object         # k-power in the model (mpf)
    prefactor: object        # leading constant (mpf; exact 0 for null cases)
    assumptions: tuple[str, ...]
    q: object = None         # evaluation point for wavefunction targets


@dataclass(frozen=True)
class FitResult:
    a0_est: object
    a0_unc: object
    exponent_est: object
    exponent_unc: object
    prefactor_est: object
    prefactor_unc: object
    a0_used: object          # pinned value if given, else a0_est
    exponent_used: object    # hint if given, else exponent_est
    k_window: tuple[int, int]
    pinned_a0: bool
    low_confidence: bool     # ratio sequence not monotone over the window
    diagnostics: tuple       # rows (k, value, inv_ratio, a0 estimates by degree)


@dataclass(frozen=True)
class VerdictComponent:
    name: str
    predicted: float
    fitted: float
    uncertainty: float
    tol_kind: str            # "relative" | "absolute" | "null_of_reference"
    tol: float
    gap: float
    passed: bool


@dataclass(frozen=True)
class Verdict:
    target: str
    formula: str
    components: tuple[VerdictComponent, ...]
    passed: bool


@dataclass(frozen=True)
class ToleranceSet:
    a0_rel: float = 1e-3
    exponent_abs: float = 0.05
    prefactor_rel: float = 0.05
    null_level: float = 0.05


@dataclass(frozen=True)
class BoundaryLayerResult:
    n: int
    variant: str
    ratio: object            # extracted energy/amplitude ratio
    closed_form: object
    window_gap: object       # extraction spread across the z-window


def _neville_zero(xs, ys):
    """Polynomial through (xs, ys), evaluated at 0."""
    t = list(ys)
    n = len(t)
    for lvl in range(1, n):
        for i in range(n - lvl):
            t[i] = (xs[i + lvl] * t[i] - xs[i] * t[i + 1]) / (xs[i + lvl] - xs[i])
    return t[0]


def _extrapolate(ks, ys, max_degree):
    """Estimates at 1/k -> 0 for degrees 0..max_degree, from the last points."""
    ests = []
    for deg in range(max_degree + 1):
        pts = min(deg + 1, len(ks))
        xs = [mpmath.mpf(1) / k for k in ks[-pts:]]
        ests.append(_neville_zero(xs, ys[-pts:]))
    return ests


def fit_growth(seq, *, precision_bits=256, model_exponent_hint=None,
               pinned_a0=None, top_fraction=0.5, max_degree=4):
    """Recover (a0, exponent, prefactor) of the growth model from seq.

    seq[i] is the term of order k = i + 1. Only the top `top_fraction` of
    the sequence enters (early orders are pre-asymptotic); at least 8
    usable entries are required. `pinned_a0` replaces the fitted scale in
    the exponent and prefactor chains (used for null tests, where the
    sequence itself carries no scale information), and
    `model_exponent_hint` does the same for the k-power in the prefactor
    chain.
    """
    n_total = len(seq)
    count = max(int(round(n_total * top_fraction)), 9)
    if n_total < count:
        raise DomainError(f"sequence of length {n_total} is too short to fit "
                          "(need at least 8 usable orders plus one for ratios)")
    ks = list(range(n_total - count + 1, n_total + 1))

    with mp.workprec(precision_bits):
        ys = [_to_mpf(seq[k - 1]) for k in ks]
        if all(y == 0 for y in ys):
            raise DomainError("sequence is identically zero over the fit window; "
                              "there is no growth to fit")
        if any(y == 0 for y in ys):
            raise DomainError("zero entries inside the fit window break the ratio chain")

        # inv_k = k seq_k / seq_{k+1} -> a0 (1 + 1/k)^(-exponent)
        rk = [ks[i] for i in range(count - 1)]
        inv = [ks[i] * ys[i] / ys[i + 1] for i in range(count - 1)]
        a0_ests = _extrapolate(rk, inv, max_degree)
        a0_est = a0_ests[-1]
        a0_unc = abs(a0_ests[-1] - a0_ests[-2])
        a0_used = _to_mpf(pinned_a0) if pinned_a0 is not None else a0_est

        # z_k = k (a0 r_k - 1) -> exponent
        zs = [k * (a0_used / inv_i - 1) for k, inv_i in zip(rk, inv)]
        exp_ests = _extrapolate(rk, zs, max_degree)
        exponent_est = exp_ests[-1]
        exponent_unc = abs(exp_ests[-1] - exp_ests[-2])
        e_used = (_to_mpf(model_exponent_hint) if model_exponent_hint is not None
                  else exponent_est)

        # C_k = seq_k a0^(k+e) / (Gamma(k) k^e) -> prefactor
        cs = [y * a0_used ** (k + e_used) / (mpmath.gamma(k) * mpmath.mpf(k) ** e_used)
              for k, y in zip(ks, ys)]
        pre_ests = _extrapolate(ks, cs, max_degree)
        prefactor_est = pre_ests[-1]
        prefactor_unc = abs(pre_ests[-1] - pre_ests[-2])

        diffs = [inv[i + 1] - inv[i] for i in range(len(inv) - 1)]
        low_confidence = any(d1 * d2 < 0 for d1, d2 in zip(diffs, diffs[1:]))

        # per-k running a0 estimates (degree d uses the d+1 latest points)
        rows = []
        for i, k in enumerate(ks):
            inv_i = inv[i] if i < len(inv) else None
            running = []
            for deg in range(max_degree + 1):
                if i < len(inv) and i >= deg:
                    xs = [mpmath.mpf(1) / rk[j] for j in range(i - deg, i + 1)]
                    running.append(_neville_zero(xs, inv[i - deg:i + 1]))
                else:
                    running.append(None)
            rows.append((k, ys[i], inv_i, tuple(running)))

    return FitResult(a0_est=a0_est, a0_unc=a0_unc,
                     exponent_est=exponent_est, exponent_unc=exponent_unc,
                     prefactor_est=prefactor_est, prefactor_unc=prefactor_unc,
                     a0_used=a0_used, exponent_used=e_used,
                     k_window=(ks[0], ks[-1]), pinned_a0=pinned_a0 is not None,
                     low_confidence=low_confidence, diagnostics=tuple(rows))


def _to_mpf(x):
    if isinstance(x, mpmath.mpf):
        return x
    if hasattr(x, "numerator"):
        return mpmath.mpf(int(x.numerator)) / int(x.denominator)
    return mpmath.mpf(x)


def predict_energy(vs: ValidatedScenario, tp: TurningPoint, act: ActionData,
                   b_amp) -> AsymptoticPrediction:
    """Closed-form growth constants for the energy coefficient sequence."""
    if tp.kind == NONE:
        raise DomainError("no turning point: the energy sequence does not grow "
                          "factorially and there is nothing to predict")
    bits = vs.precision_bits
    with mp.workprec(bits):
        sqrt_pi = mpmath.sqrt(mp.pi)
        if vs.n == 1 and tp.kind == SIMPLE:
            doubling = 2 if vs.potential_is_even else 1
            note = ("even potential: both symmetric escape paths contribute"
                    if doubling == 2 else
                    "asymmetric potential: a single escape path contributes")
            return AsymptoticPrediction(
                target="energy", formula="simple_1d",
                a0=act.a0, exponent=mpmath.mpf(1) / 2,
                prefactor=-doubling * b_amp / sqrt_pi,
                assumptions=(note,))
        if vs.n == 1 and tp.kind == DEGENERATE:
            om = tp.omega
            doubling = 2 if vs.potential_is_even else 1
            note = ("even potential: both symmetric escape paths contribute"
                    if doubling == 2 else
                    "asymmetric potential: a single escape path contributes")
            return AsymptoticPrediction(
                target="energy", formula="degenerate_1d",
                a0=act.a0, exponent=(1 + om) / (2 * om),
                prefactor=-doubling * b_amp / sqrt_pi,
                assumptions=(note,))
        if vs.correction == "radial_u1":
            if tp.kind != SIMPLE:
                raise DomainError("radial prediction needs a simple turning point")
            return AsymptoticPrediction(
                target="energy", formula="radial",
                a0=act.a0, exponent=mpmath.mpf(vs.n) / 2,
                prefactor=-2 * b_amp / mpmath.gamma(mpmath.mpf(vs.n) / 2),
                assumptions=("spherically symmetric escape shell",))
        if vs.correction == "sphere":
            return AsymptoticPrediction(
                target="energy", formula="sphere",
                a0=act.a0, exponent=mpmath.mpf(vs.n) / 2,
                prefactor=-2 * b_amp / mpmath.gamma(mpmath.mpf(vs.n) / 2),
                assumptions=("full sweep to the opposite pole taken as the "
                             "growth scale (a0 = 2 S_plus)",
                             "amplitude vanishes identically in odd dimension",))
    raise DomainError(f"no energy prediction covers kind={tp.kind}, n={vs.n}, "
                      f"correction={vs.correction}")


def predict_wavefunction(vs: ValidatedScenario, tp: TurningPoint, act: ActionData,
                         q, phi0_at_q) -> AsymptoticPrediction:
    """Growth constants for the prefactor coefficient sequence at fixed q."""
    if tp.kind == NONE:
        raise DomainError("no turning point: prefactor rows stay bounded")
    bits = vs.precision_bits
    with mp.workprec(bits):
        q = _to_mpf(q)
        if not 0 < q < tp.q_plus:
            raise DomainError("pointwise prediction needs 0 < q < Q+")
        phi0 = _to_mpf(phi0_at_q)
        a_q = act.a_of(q)
        if tp.kind == SIMPLE:
            dur = act.duration_of(q)
            if vs.n == 1:
                return AsymptoticPrediction(
                    target="wavefunction", formula="simple_1d", q=q,
                    a0=a_q, exponent=mpmath.mpf(0),
                    prefactor=phi0 * mpmath.e ** dur / (2 * mp.pi),
                    assumptions=())
            return AsymptoticPrediction(
                target="wavefunction", formula="radial", q=q,
                a0=a_q, exponent=mpmath.mpf(0),
                prefactor=phi0 * mpmath.e ** (vs.n * dur) / (2 * mp.pi),
                assumptions=("duration enters once per dimension",))
        if tp.kind == DEGENERATE:
            om = tp.omega
            dur_reg = act.duration_reg_of(q)
            num = (2 * om) ** (1 / (2 * om)) * (tp.q_plus - q) ** (1 / om)
            den = mpmath.sqrt(2 * mp.pi) * mpmath.gamma((1 + om) / (2 * om))
            return AsymptoticPrediction(
                target="wavefunction", formula="degenerate_1d", q=q,
                a0=a_q, exponent=1 / (2 * om),
                prefactor=phi0 * num * mpmath.e ** dur_reg / den,
                assumptions=())
        dur = act.duration_of(q)
        cos_factor = _cos_half_pi_n(vs.n)
        pref = (mpmath.mpf(0) if cos_factor == 0
                else phi0 * (-cos_factor) * mpmath.e ** (vs.n * dur) / mp.pi)
        return AsymptoticPrediction(
            target="wavefunction", formula="sphere", q=q,
            a0=a_q, exponent=mpmath.mpf(0), prefactor=pref,
            assumptions=("duration enters once per dimension, which the "
                         "small-q limit of the amplitude requires",))


def boundary_layer_verify(n: int, variant: str, *, precision_bits=256) -> BoundaryLayerResult:
    """Solve the matching layer at the origin and extract energy/amplitude.

    The layer equation for the slope h = g' of the inner correction is
    2 z h = h' + (n-1) h / z + 2 E, integrated once to

        h(z) = e^(z^2) z^(1-n) (C - 2 E int_0^z t^(n-1) e^(-t^2) dt).

    E normalizes to 1; the outer match reads off B as half the z -> inf
    limit of h z^(n-1) e^(-z^2), which is evaluated with the exact
    quadrature tail at both ends of the z-window so the extraction must be
    window-independent. Bounded behavior fixes C: zero for the symmetric
    and radial variants, and the full two-sided Gaussian mass when only
    z -> -infinity boundedness is available (asymmetric variant, n = 1).
    """
    if n < 1:
        raise DomainError("layer dimension must be a positive integer")
    if variant not in ("symmetric", "asymmetric", "radial"):
        raise ConfigurationError(f"unknown layer variant '{variant}'")
    if variant != "radial" and n != 1:
        raise DomainError("symmetric/asymmetric layer variants are one-dimensional")
    bits = precision_bits
    with mp.workprec(bits + 32):
        energy = mpmath.mpf(1)

        def j_of(z):
            return mp.quad(lambda t: t ** (n - 1) * mpmath.e ** (-t * t), [0, z])

        def j_tail(z):
            return mp.quad(lambda t: t ** (n - 1) * mpmath.e ** (-t * t), [z, mp.inf])

        if variant == "asymmetric":
            c_const = -2 * energy * mp.quad(lambda t: mpmath.e ** (-t * t),
                                            [0, mp.inf])
        else:
            c_const = mpmath.mpf(0)

        # half the settled amplitude of h z^(n-1) e^(-z^2)
        def b_extract(z):
            return (c_const - 2 * energy * (j_of(z) + j_tail(z))) / 2

        b_lo = b_extract(mpmath.mpf(_LAYER_WINDOW[0]))
        b_hi = b_extract(mpmath.mpf(_LAYER_WINDOW[1]))
        gap = abs(b_hi - b_lo)
        if gap > _LAYER_AGREE * abs(b_hi):
            raise NumericError("layer amplitude extraction is window-dependent: "
                               f"spread {mpmath.nstr(gap, 6)}")
        ratio = energy / b_hi

        if variant == "asymmetric":
            closed = -1 / mpmath.sqrt(mp.pi)
        else:
            closed = -2 / mpmath.gamma(mpmath.mpf(n) / 2)
        return BoundaryLayerResult(n=n, variant=variant, ratio=ratio,
                                   closed_form=closed, window_gap=gap)


def compare(prediction: AsymptoticPrediction, fit: FitResult,
            tol: ToleranceSet, *, null_reference=None) -> Verdict:
    """Prediction against fit, one component per growth constant.

    A prediction with exactly zero prefactor switches to the null rule:
    the fitted prefactor must stay below null_level times a reference
    prefactor of the same kind (a neighboring scenario where the effect is
    alive), which the caller must supply.
    """
    comps = []
    if prediction.prefactor == 0:
        if null_reference is None:
            raise ConfigurationError("null comparison needs a reference prefactor "
                                     "from a non-null companion scenario")
        ref = abs(_to_mpf(null_reference))
        fitted = abs(fit.prefactor_est)
        gap = float(fitted / ref)
        comps.append(VerdictComponent(
            name="prefactor_null", predicted=0.0, fitted=float(fit.prefactor_est),
            uncertainty=float(fit.prefactor_unc), tol_kind="null_of_reference",
            tol=tol.null_level, gap=gap, passed=gap <= tol.null_level))
    else:
        gap_a0 = float(abs(fit.a0_est - prediction.a0) / abs(prediction.a0))
        comps.append(VerdictComponent(
            name="a0", predicted=float(prediction.a0), fitted=float(fit.a0_est),
            uncertainty=float(fit.a0_unc), tol_kind="relative",
            tol=tol.a0_rel, gap=gap_a0, passed=gap_a0 <= tol.a0_rel))
        gap_e = float(abs(fit.exponent_est - prediction.exponent))
        comps.append(VerdictComponent(
            name="exponent", predicted=float(prediction.exponent),
            fitted=float(fit.exponent_est), uncertainty=float(fit.exponent_unc),
            tol_kind="absolute", tol=tol.exponent_abs, gap=gap_e,
            passed=gap_e <= tol.exponent_abs))
        gap_p = float(abs(fit.prefactor_est - prediction.prefactor)
                      / abs(prediction.prefactor))
        comps.append(VerdictComponent(
            name="prefactor", predicted=float(prediction.prefactor),
            fitted=float(fit.prefactor_est), uncertainty=float(fit.prefactor_unc),
            tol_kind="relative", tol=tol.prefactor_rel, gap=gap_p,
            passed=gap_p <= tol.prefactor_rel))
    return Verdict(target=prediction.target, formula=prediction.formula,
                   components=tuple(comps), passed=all(c.passed for c in comps))
