"""Truncated power-series algebra over exact rationals or big floats.

Everything downstream (potentials, actions, wavefunction coefficient rows)
is carried as a TruncatedSeries: a finite list of coefficients c_0..c_M in
one arithmetic mode. Rational mode uses gmpy2.mpq and is exactly
reproducible bit for bit; float mode uses mpmath at a declared precision
(at least 128 bits) and exists only for quadrature and fitting stages.

Arithmetic follows the min rule: any binary operation truncates its result
at the shorter operand's order, so precision can only be lost explicitly.
Division by a series with zero constant term is refused; callers factor
powers of Q by hand (shift_down), which keeps pole bookkeeping visible.
"""

from __future__ import annotations

from contextlib import nullcontext
from fractions import Fraction
from typing import Iterable

import mpmath
from gmpy2 import mpq
from mpmath import mp

from .errors import ConfigurationError, DomainError

RATIONAL = "rational"
FLOAT = "float"
MIN_FLOAT_BITS = 128

ZERO = mpq(0)
ONE = mpq(1)


def parse_fraction(text: str | int) -> mpq:
    """Parse "p/q", "p", or a decimal literal like "0.25" into an exact rational."""
    if isinstance(text, int):
        return mpq(text)
    if not isinstance(text, str):
        raise ConfigurationError(f"expected a fraction string, got {text!r}")
    try:
        f = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"not a rational: {text!r}") from exc
    return mpq(f.numerator, f.denominator)


def fraction_str(x) -> str:
    """Canonical "p/q" form (plain "p" when the denominator is 1)."""
    return str(mpq(x))


def to_mpf(x, bits: int) -> mpmath.mpf:
    """Convert an exact rational (or float) to an mpf at the given precision."""
    with mp.workprec(bits):
        if isinstance(x, mpq):
            return mpmath.mpf(int(x.numerator)) / mpmath.mpf(int(x.denominator))
        return +mpmath.mpf(x)


class TruncatedSeries:
    """Finite power series sum of c_m Q^m for m = 0..trunc, one arithmetic mode."""

    __slots__ = ("coeffs", "trunc", "label", "mode", "precision_bits")

    def __init__(self, coeffs, trunc=None, label="Q", *, mode=RATIONAL,
                 precision_bits=None):
        coeffs = list(coeffs)
        if trunc is None:
            trunc = len(coeffs) - 1
        if trunc < 0:
            raise ConfigurationError("truncation order must be >= 0")
        if len(coeffs) > trunc + 1:
            raise ConfigurationError(
                f"{len(coeffs)} coefficients but truncation order {trunc}")
        if mode == RATIONAL:
            if precision_bits is not None:
                raise ConfigurationError("rational mode carries no precision_bits")
            coeffs = [mpq(c) for c in coeffs]
            pad = ZERO
        elif mode == FLOAT:
            if precision_bits is None or precision_bits < MIN_FLOAT_BITS:
                raise ConfigurationError(
                    f"float mode needs precision_bits >= {MIN_FLOAT_BITS}")
            coeffs = [to_mpf(c, precision_bits) for c in coeffs]
            pad = to_mpf(0, precision_bits)
        else:
            raise ConfigurationError(f"unknown arithmetic mode {mode!r}")
        coeffs.extend([pad] * (trunc + 1 - len(coeffs)))
        self.coeffs = coeffs
        self.trunc = trunc
        self.label = label
        self.mode = mode
        self.precision_bits = precision_bits

    # -- constructors -------------------------------------------------

    @classmethod
    def rational(cls, coeffs: Iterable, trunc=None, label="Q") -> "TruncatedSeries":
        return cls(coeffs, trunc, label)

    @classmethod
    def floating(cls, coeffs: Iterable, precision_bits: int, trunc=None,
                 label="Q") -> "TruncatedSeries":
        return cls(coeffs, trunc, label, mode=FLOAT, precision_bits=precision_bits)

    @classmethod
    def zero(cls, trunc: int, label="Q") -> "TruncatedSeries":
        return cls([ZERO], trunc, label)

    @classmethod
    def one(cls, trunc: int, label="Q") -> "TruncatedSeries":
        return cls([ONE], trunc, label)

    @classmethod
    def monomial(cls, power: int, trunc: int, coeff=ONE, label="Q") -> "TruncatedSeries":
        if power > trunc:
            raise ConfigurationError("monomial power exceeds truncation order")
        coeffs = [ZERO] * power + [mpq(coeff)]
        return cls(coeffs, trunc, label)

    # -- plumbing ------------------------------------------------------

    def _like(self, coeffs, trunc) -> "TruncatedSeries":
        return TruncatedSeries(coeffs, trunc, self.label, mode=self.mode,
                               precision_bits=self.precision_bits)

    def _ctx(self):
        # float-mode arithmetic always runs at the series' declared precision
        return mp.workprec(self.precision_bits) if self.mode == FLOAT else nullcontext()

    def _check_mate(self, other: "TruncatedSeries"):
        if not isinstance(other, TruncatedSeries):
            raise ConfigurationError(f"expected a series, got {other!r}")
        if self.mode != other.mode or self.precision_bits != other.precision_bits:
            raise ConfigurationError(
                f"arithmetic mode mismatch: {self.mode}/{self.precision_bits} "
                f"vs {other.mode}/{other.precision_bits}")

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (self.mode == other.mode and self.trunc == other.trunc
                and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.mode, self.trunc, tuple(map(str, self.coeffs))))

    def __repr__(self):
        head = ", ".join(str(c) for c in self.coeffs[:4])
        tail = ", ..." if self.trunc >= 4 else ""
        return f"TruncatedSeries([{head}{tail}], trunc={self.trunc}, mode={self.mode})"

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def truncate_to(self, trunc: int) -> "TruncatedSeries":
        if trunc >= self.trunc:
            return self
        return self._like(self.coeffs[:trunc + 1], trunc)

    # -- ring operations (min rule on truncation order) ----------------

    def __add__(self, other):
        self._check_mate(other)
        n = min(self.trunc, other.trunc)
        return self._like([self.coeffs[m] + other.coeffs[m] for m in range(n + 1)], n)

    def __sub__(self, other):
        self._check_mate(other)
        n = min(self.trunc, other.trunc)
        return self._like([self.coeffs[m] - other.coeffs[m] for m in range(n + 1)], n)

    def __neg__(self):
        return self._like([-c for c in self.coeffs], self.trunc)

    def scaled(self, factor) -> "TruncatedSeries":
        factor = mpq(factor) if self.mode == RATIONAL else _as_float(factor)
        with self._ctx():
            return self._like([factor * c for c in self.coeffs], self.trunc)

    def __mul__(self, other):
        """Cauchy product truncated at the shorter operand's order."""
        self._check_mate(other)
        n = min(self.trunc, other.trunc)
        a, b = self.coeffs, other.coeffs
        out = []
        with self._ctx():
            for m in range(n + 1):
                acc = a[0] * b[m]
                for i in range(1, m + 1):
                    acc += a[i] * b[m - i]
                out.append(acc)
        return self._like(out, n)

    def div(self, other) -> "TruncatedSeries":
        """Series quotient q with q*other = self up to truncation.

        Refuses a divisor with zero constant term; factor powers of Q
        with shift_down first.
        """
        self._check_mate(other)
        if other.coeffs[0] == 0:
            raise DomainError("division by a series with zero constant term")
        n = min(self.trunc, other.trunc)
        a, b = self.coeffs, other.coeffs
        out = []
        with self._ctx():
            inv0 = 1 / b[0]
            for m in range(n + 1):
                acc = a[m]
                for i in range(1, m + 1):
                    acc -= b[i] * out[m - i]
                out.append(acc * inv0)
        return self._like(out, n)

    def sqrt_unit(self) -> "TruncatedSeries":
        """Square root of a series with constant term exactly 1.

        Convolution recurrence: s_m = (c_m - sum_{i=1..m-1} s_i s_{m-i}) / 2,
        so squaring the output reproduces the input up to truncation.
        """
        if self.coeffs[0] != 1:
            raise DomainError("sqrt_unit needs constant term exactly 1")
        c = self.coeffs
        half = mpq(1, 2) if self.mode == RATIONAL else to_mpf(mpq(1, 2), self.precision_bits)
        out = [c[0]]
        with self._ctx():
            for m in range(1, self.trunc + 1):
                acc = c[m]
                for i in range(1, m):
                    acc -= out[i] * out[m - i]
                out.append(acc * half)
        return self._like(out, self.trunc)

    # -- calculus ------------------------------------------------------

    def derivative(self) -> "TruncatedSeries":
        """Termwise d/dQ; drops one order of truncation."""
        if self.trunc == 0:
            return self._like([self.coeffs[0] * 0], 0)
        out = [m * self.coeffs[m] for m in range(1, self.trunc + 1)]
        return self._like(out, self.trunc - 1)

    def antiderivative(self, cap: int | None = None) -> "TruncatedSeries":
        """Termwise integral from 0 (constant term 0); gains one order,
        optionally capped."""
        if self.mode == RATIONAL:
            out = [ZERO] + [self.coeffs[m] / mpq(m + 1) for m in range(self.trunc + 1)]
        else:
            out = [to_mpf(0, self.precision_bits)]
            out += [self.coeffs[m] / (m + 1) for m in range(self.trunc + 1)]
        n = self.trunc + 1
        if cap is not None and cap < n:
            out = out[:cap + 1]
            n = cap
        return self._like(out, n)

    def shift_up(self, j: int) -> "TruncatedSeries":
        """Multiply by Q^j exactly (truncation order grows by j)."""
        pad = ZERO if self.mode == RATIONAL else to_mpf(0, self.precision_bits)
        return self._like([pad] * j + self.coeffs, self.trunc + j)

    def shift_down(self, j: int) -> "TruncatedSeries":
        """Divide by Q^j; the lowest j coefficients must vanish exactly."""
        if any(c != 0 for c in self.coeffs[:j]):
            raise DomainError(f"cannot divide by Q^{j}: low-order coefficients nonzero")
        return self._like(self.coeffs[j:], self.trunc - j)

    # -- evaluation ----------------------------------------------------

    def eval_at(self, q):
        """Horner evaluation at q; returns (value, tail_bound).

        tail_bound is |c_M q^M|, the last retained term, a heuristic
        leftover indicator only. The authoritative accuracy control is the
        caller's two-truncation comparison (see expansion_engine.eval_phi).
        Rational series evaluated at an mpq stay exact; any other pairing
        runs in mpmath floats at the active working precision.
        """
        exact = self.mode == RATIONAL and isinstance(q, (mpq, int))
        if exact:
            x = mpq(q)
            acc = mpq(self.coeffs[-1])
        else:
            x = +mpmath.mpf(q) if not isinstance(q, mpmath.mpf) else q
            acc = mpmath.mpf(0) + _as_float(self.coeffs[-1])
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + (c if exact else _as_float(c))
        tail = abs((self.coeffs[-1] if exact else _as_float(self.coeffs[-1]))
                   * x ** self.trunc)
        return acc, tail


def _as_float(c):
    if isinstance(c, mpq):
        return mpmath.mpf(int(c.numerator)) / mpmath.mpf(int(c.denominator))
    return mpmath.mpf(c)
