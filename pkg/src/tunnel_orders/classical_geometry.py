"""Turning-point location, actions, and regularized duration integrals.

Everything here is float-mode work at the scenario's precision_bits:
root finding with exact-rational confirmation, and quadrature with the
endpoint behavior removed analytically (substitution xi = t^2 at a simple
turning point, explicit 1/Q and 1/(omega*(Q+ - Q)) subtractions for the
duration integrals). Every quadrature is run at two refinement levels and
must agree to 1e-12 relative, otherwise a NumericError carries the
diagnostics. High working precision is what makes the subtracted
integrands safe to evaluate naively near their endpoints: the cancellation
loses ~30 digits there and we carry 77+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import mpmath
from gmpy2 import mpq
from mpmath import mp

from .errors import DomainError, NumericError
from .scenario_model import ValidatedScenario
from .series_core import TruncatedSeries

SIMPLE = "simple"
DEGENERATE = "degenerate"
SPHERE_SINGULAR = "sphere_singular"
NONE = "none"

_QUAD_REL = mpmath.mpf("1e-12")


@dataclass(frozen=True)
class TurningPoint:
    q_plus: object          # mpf; the smallest positive zero of V (pi on the sphere)
    kind: str
    a: object = None        # -V'(Q+) at a simple turning point
    omega: object = None    # sqrt(V''(Q+)) at a degenerate minimum
    e_top: object = None    # V at the sphere pole


@dataclass(frozen=True)
class ActionData:
    s_plus: object                      # integral of sqrt(2V) from 0 to Q+
    a0: object                          # 2 * s_plus, the growth constant
    i_reg: object                       # regularized duration integral
    s_of: Callable                      # Q -> action integral from 0
    a_of: Callable                      # Q -> a0 - 2 S(Q)
    duration_of: Callable | None        # Q -> integral of 1/sqrt(2V) up to Q+
    duration_reg_of: Callable | None    # degenerate kind: upper-end subtracted


def _quad(f, points, bits, where: str):
    """Tanh-sinh quadrature with a mandatory two-level agreement check.

    Nodes can land within rounding distance of an endpoint, where a zero of
    V evaluates to exactly 0 and the integrand hits 1/0. Every integrand
    here is either bounded or carries an integrable endpoint singularity,
    so the true weighted contribution of such a node is below the target
    precision; it is dropped rather than propagated.
    """
    def safe(x):
        try:
            return f(x)
        except ZeroDivisionError:
            return mpmath.mpf(0)

    with mp.workprec(bits + 32):
        lo = mp.quad(safe, points, maxdegree=7)
        hi = mp.quad(safe, points, maxdegree=8)
        scale = max(abs(hi), mpmath.mpf(1) / 10**9)
        if abs(hi - lo) > _QUAD_REL * scale:
            raise NumericError(
                f"quadrature did not settle for {where}: levels differ by "
                f"{mpmath.nstr(abs(hi - lo), 6)} against scale {mpmath.nstr(scale, 6)}")
        return hi


def _taylor_shift(coeffs, c, bits):
    """Coefficients a_j with p(c + u) = sum_j a_j u^j."""
    with mp.workprec(bits):
        a = [mpmath.mpf(int(x.numerator)) / int(x.denominator) for x in coeffs]
        n = len(a)
        for j in range(n):
            for i in range(n - 2, j - 1, -1):
                a[i] += c * a[i + 1]
        return a


def _sqrt2v_factory(vs: ValidatedScenario, tp: TurningPoint | None = None):
    """sqrt(2V) as a function safe to evaluate arbitrarily close to Q+.

    Horner in Q near a zero of V at Q+ is cancellation noise once
    (Q+ - q)^2 drops below the working epsilon, and that noise enters the
    subtracted duration integrands at full weight. Near Q+ the potential is
    therefore evaluated through its Taylor shift at Q+, with the
    coefficients known to vanish (exact-rational classification) zeroed, in
    the variable s = Q+ - q, which is computed exactly for q >= Q+/2.
    """
    v = vs.potential
    qp = None
    from_top = None
    if tp is not None and tp.kind in (SIMPLE, DEGENERATE):
        qp = tp.q_plus
        shifted = _taylor_shift(v.coeffs, qp, vs.precision_bits + 64)
        from_top = [a if j % 2 == 0 else -a for j, a in enumerate(shifted)]
        from_top[0] = mpmath.mpf(0)
        if tp.kind == DEGENERATE:
            from_top[1] = mpmath.mpf(0)

    def f_sqrt2v(q):
        if from_top is not None and q > qp * 3 / 4:
            s = qp - q
            val = mpmath.mpf(0)
            for c in reversed(from_top):
                val = val * s + c
        else:
            val, _ = v.eval_at(q)
        if val <= 0:
            # V is confirmed positive on the open interval, so this is a
            # node within rounding distance of a zero of V
            raise ZeroDivisionError("sqrt(2V) at a rounded-off endpoint")
        return mpmath.sqrt(2 * val)
    return f_sqrt2v


def _poly_eval_exact(coeffs, x: mpq) -> mpq:
    acc = mpq(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _rational_approximant(x, digits: int = 40) -> mpq:
    f = Fraction(mpmath.nstr(x, digits))
    return mpq(f.numerator, f.denominator)


def find_turning_point(vs: ValidatedScenario) -> TurningPoint:
    """Locate and classify the smallest positive zero of the potential.

    Roots come from the deflated polynomial (the double zero at the origin
    divided out), get Newton-polished at working precision, and the
    classification |V'(root)| <> 10^(-bits/4) is then confirmed in exact
    rational arithmetic at a 40-digit rational approximant of the root.
    """
    bits = vs.precision_bits
    v = vs.potential

    if vs.correction == "sphere":
        with mp.workprec(bits):
            q_pi = +mp.pi
            e_top, _ = v.eval_at(q_pi)
            if e_top <= 0:
                raise DomainError("sphere potential must stay positive at the pole")
            return TurningPoint(q_plus=q_pi, kind=SPHERE_SINGULAR, e_top=e_top)

    coeffs = list(v.coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    deflated = coeffs[2:]
    if len(deflated) <= 1:
        return TurningPoint(q_plus=None, kind=NONE)

    with mp.workprec(bits):
        tol = mpmath.mpf(10) ** (-(bits // 4))
        poly = [mpmath.mpf(int(c.numerator)) / int(c.denominator)
                for c in reversed(deflated)]
        roots = mpmath.polyroots(poly, maxsteps=200, extraprec=bits)
        real_pos = sorted(r.real for r in roots
                          if abs(r.imag) < tol and r.real > tol)
        if not real_pos:
            return TurningPoint(q_plus=None, kind=NONE)
        root = real_pos[0]

        dv = v.derivative()
        ddv = dv.derivative()
        slope, _ = dv.eval_at(root)
        degenerate = abs(slope) < tol
        # polish on V' for a double zero (simple zero of V'), else on V
        target = dv if degenerate else v
        dtarget = target.derivative()
        for _ in range(8):
            fx, _ = target.eval_at(root)
            dfx, _ = dtarget.eval_at(root)
            root = root - fx / dfx

        r_exact = _rational_approximant(root)
        v_exact = _poly_eval_exact(coeffs, r_exact)
        dv_exact = _poly_eval_exact([m * coeffs[m] for m in range(1, len(coeffs))], r_exact)
        if abs(v_exact) > mpq(1, 10**30):
            raise NumericError(f"turning-point confirmation failed: V({r_exact}) = "
                               f"{float(v_exact):.3e} is not small")
        for j in range(1, 32):
            sample = _poly_eval_exact(coeffs, r_exact * j / 32)
            if sample <= 0:
                raise NumericError("potential is not positive between the origin "
                                   "and the located turning point")

        if degenerate:
            if abs(dv_exact) > mpq(1, 10**30):
                raise NumericError("degenerate classification not confirmed exactly")
            curv, _ = ddv.eval_at(root)
            if curv <= 0:
                raise DomainError("degenerate point must be a minimum (V'' > 0)")
            return TurningPoint(q_plus=root, kind=DEGENERATE, omega=mpmath.sqrt(curv))
        if slope >= 0:
            raise DomainError("turning point must have V' < 0 when simple")
        return TurningPoint(q_plus=root, kind=SIMPLE, a=-slope)


def action_integrals(vs: ValidatedScenario, tp: TurningPoint) -> ActionData:
    """Actions and durations by quadrature; relative target 1e-12."""
    if tp.kind == NONE:
        raise DomainError("no turning point: action integrals are undefined")
    bits = vs.precision_bits
    v = vs.potential
    qp = tp.q_plus

    f_sqrt2v = _sqrt2v_factory(vs, tp)

    with mp.workprec(bits + 32):
        if tp.kind == SIMPLE:
            # Q = Q+ - t^2 removes the sqrt zero at the turning point
            def integrand(t):
                return 2 * t * f_sqrt2v(qp - t * t)
            s_plus = _quad(integrand, [0, mpmath.sqrt(qp)], bits, "S_plus")
        else:
            s_plus = _quad(f_sqrt2v, [0, qp], bits, "S_plus")
        a0 = 2 * s_plus

    def s_of(q):
        with mp.workprec(bits + 32):
            q = +mpmath.mpf(q) if not isinstance(q, mpmath.mpf) else q
            if q == 0:
                return mpmath.mpf(0)
            if not 0 < q <= qp:
                raise DomainError(f"action wanted at Q={float(q):.6g}, outside (0, Q+]")
            if tp.kind == SIMPLE and q > qp / 2:
                def integrand(t):
                    return 2 * t * f_sqrt2v(qp - t * t)
                upper = _quad(integrand, [0, mpmath.sqrt(qp - q)], bits, "S tail")
                return s_plus - upper
            return _quad(f_sqrt2v, [0, q], bits, "S")

    def a_of(q):
        return a0 - 2 * s_of(q)

    duration_of = None
    duration_reg_of = None
    if tp.kind == SIMPLE:
        def duration_of(q):
            with mp.workprec(bits + 32):
                if not 0 < q < qp:
                    raise DomainError("duration integral needs 0 < Q < Q+")
                def integrand(t):
                    return 2 * t / f_sqrt2v(qp - t * t)
                return _quad(integrand, [0, mpmath.sqrt(qp - q)], bits, "duration")
    elif tp.kind == SPHERE_SINGULAR:
        def duration_of(q):
            with mp.workprec(bits + 32):
                if not 0 < q < qp:
                    raise DomainError("duration integral needs 0 < Q < pi")
                return _quad(lambda t: 1 / f_sqrt2v(t), [q, qp], bits, "duration")
    else:
        def duration_reg_of(q):
            # the log divergence at the degenerate minimum is subtracted
            with mp.workprec(bits + 32):
                if not 0 < q < qp:
                    raise DomainError("regularized duration needs 0 < Q < Q+")
                om = tp.omega
                def integrand(t):
                    return 1 / f_sqrt2v(t) - 1 / (om * (qp - t))
                return _quad(integrand, [q, qp], bits, "regularized duration")

    i_reg = regularized_duration(vs, tp)
    return ActionData(s_plus=s_plus, a0=a0, i_reg=i_reg, s_of=s_of, a_of=a_of,
                      duration_of=duration_of, duration_reg_of=duration_reg_of)


def _check_bounded_after_subtraction(integrand, a, b, where: str):
    # probe the subtracted integrand near both endpoints; an unbounded
    # value there means the wrong singular term was removed
    with mp.extraprec(64):
        span = b - a
        for probe in (a + span * mpmath.mpf("1e-9"), b - span * mpmath.mpf("1e-9")):
            val = integrand(probe)
            if not mpmath.isfinite(val) or abs(val) > 10**6:
                raise NumericError(f"{where}: integrand still unbounded after "
                                   f"subtraction (value {mpmath.nstr(val, 6)})")


def regularized_duration(vs: ValidatedScenario, tp: TurningPoint):
    """The case-dependent finite part of the duration integral from 0 to Q+.

    simple: subtract 1/Q at the origin (the turning-point end is already
    integrable and handled by the xi = t^2 substitution).
    degenerate: subtract both 1/Q and 1/(omega*(Q+ - Q)).
    sphere: subtract 1/Q at the origin, the singular end of the integrand.
    """
    if tp.kind == NONE:
        raise DomainError("no turning point: the duration integral is undefined")
    bits = vs.precision_bits
    v = vs.potential
    qp = tp.q_plus

    f_sqrt2v = _sqrt2v_factory(vs, tp)

    with mp.workprec(bits + 32):
        if tp.kind == SIMPLE:
            def low(q):
                return 1 / f_sqrt2v(q) - 1 / q
            _check_bounded_after_subtraction(low, mpmath.mpf(0), qp / 2, "duration (origin half)")
            part1 = _quad(low, [0, qp / 2], bits, "regularized duration, origin half")
            def high(t):
                q = qp - t * t
                return 2 * t * (1 / f_sqrt2v(q) - 1 / q)
            part2 = _quad(high, [0, mpmath.sqrt(qp / 2)], bits,
                          "regularized duration, turning-point half")
            return part1 + part2
        if tp.kind == DEGENERATE:
            om = tp.omega
            def integrand(q):
                return 1 / f_sqrt2v(q) - 1 / (om * (qp - q)) - 1 / q
            _check_bounded_after_subtraction(integrand, mpmath.mpf(0), qp, "duration (degenerate)")
            return _quad(integrand, [0, qp], bits, "regularized duration (degenerate)")
        # sphere: 1/sqrt(2V) is singular at theta=0 only; V(pi) > 0
        def integrand(q):
            return 1 / f_sqrt2v(q) - 1 / q
        _check_bounded_after_subtraction(integrand, mpmath.mpf(0), qp, "duration (sphere)")
        return _quad(integrand, [0, qp], bits, "regularized duration (sphere)")


def regularized_duration_printed_variant(vs: ValidatedScenario, tp: TurningPoint):
    """Sphere only: the variant with the subtraction written at the far end.

    The integrand 1/sqrt(2V) is singular at theta = 0, not at pi, so the
    1/(pi - theta) subtraction leaves a non-integrable origin; the only
    reading that converges is the symmetric-cutoff limit, evaluated here by
    quadrature at two cutoffs with linear extrapolation. A report can then
    state which variant agrees with fitted data (the two coincide, because
    the cutoff integrals of 1/theta and 1/(pi - theta) cancel by symmetry).
    """
    if tp.kind != SPHERE_SINGULAR:
        raise DomainError("printed-variant duration applies to the sphere case only")
    bits = vs.precision_bits
    v = vs.potential
    qp = tp.q_plus

    f_sqrt2v = _sqrt2v_factory(vs, tp)

    with mp.workprec(bits + 32):
        def cut(eps):
            return _quad(lambda t: 1 / f_sqrt2v(t) - 1 / (qp - t),
                         [eps, qp - eps], bits, "printed-variant duration")
        eps = mpmath.mpf("1e-5")
        v1 = cut(eps)
        v2 = cut(eps / 2)
        return 2 * v2 - v1


def _cos_half_pi_n(n: int) -> int:
    # exact cos(pi*n/2) so odd dimensions null the amplitude exactly
    if n % 2:
        return 0
    return 1 if n % 4 == 0 else -1


def singularity_amplitude(vs: ValidatedScenario, tp: TurningPoint, act: ActionData):
    """Amplitude B of the 1/Q^n blow-up of the prefactor toward the origin.

    Each branch is the closed small-Q limit of the corresponding pointwise
    asymptotic form (the duration integral contributes exp(I) * Q+/Q per
    dimension); B is never probed numerically from the divergent rows.
    """
    if tp.kind == NONE:
        raise DomainError("no turning point: no amplitude to compute")
    bits = vs.precision_bits
    with mp.workprec(bits):
        e_i = mpmath.e ** act.i_reg
        if tp.kind == SIMPLE:
            base = (tp.q_plus * e_i) ** vs.n / (2 * mp.pi)
            return base
        if tp.kind == DEGENERATE:
            om = tp.omega
            num = (2 * om) ** (1 / (2 * om)) * tp.q_plus ** (1 + 1 / om) * e_i
            den = mpmath.sqrt(2 * mp.pi) * mpmath.gamma((1 + om) / (2 * om))
            return num / den
        cos_factor = _cos_half_pi_n(vs.n)
        if cos_factor == 0:
            return mpmath.mpf(0)
        return -cos_factor * (tp.q_plus * e_i) ** vs.n / mp.pi
