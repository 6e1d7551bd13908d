"""The exact recursion: Hamilton-Jacobi series, coefficient rows, energies.

All arithmetic is exact rational. The k-th coefficient row solves

    2Q S' Phi_k' + Q (S'' - n) Phi_k + (n-1) u S' Phi_k
        = Q Phi_{k-1}'' + (n-1) u Phi_{k-1}' + 2Q sum_p E^(p) Phi_{k-p}

power by power in Q. The equation is kept Q-multiplied so every series
stays polynomial; the 1/(2Q) factors of the radial form never appear.
Three structural facts drive the loop:

 * order Q^0 is the solvability constraint 0 = (n-1) phi_{k-1,1}; its
   violation means the expansion needs half-integer powers of hbar;
 * at order Q^1 the coefficient multiplying phi_{k,0} cancels identically
   (w_1 = 1, u_0 = 1), so that slot is a normalization gauge - fixed to
   phi_{k,0} = 0 for k >= 1 - and the equation instead determines E^(k);
 * order Q^m, m >= 2, solves for phi_{k,m-1} with leading factor 2(m-1).

Row k-1 must reach two powers beyond row k, so row k is valid up to
index M - 2 - 2k and E^(K) needs M >= 2K + 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from gmpy2 import mpq

from .errors import ConfigurationError, DomainError, HalfIntegerPowerError
from .scenario_model import ValidatedScenario
from .series_core import TruncatedSeries

_HALF = mpq(1, 2)
_TAIL_TRUST = 1e-8
_TAIL_DROP = 10


@dataclass(frozen=True)
class HJData:
    w: TruncatedSeries     # S' = sqrt(2V) = Q + O(Q^2)
    S: TruncatedSeries     # integral of w, S(0) = 0
    u: TruncatedSeries     # quantum-correction series
    phi0: TruncatedSeries  # leading prefactor, phi0(0) = 1


@dataclass(frozen=True)
class ExpansionResult:
    label: str
    n: int
    K: int
    M: int
    E0: mpq                # = n/2
    E: list                # E^(1..K), exact rationals
    phi: list              # ragged rows; row k holds phi_{k,0..M-2-2k}
    normalization: str


class PhiValue(NamedTuple):
    value: object          # exact mpq when q is rational, else mpf
    tail_check: float      # relative shift when the last 10 coefficients are dropped
    trusted: bool


def _c_factor(Mo: int, m: int, w, uw, nm1: int):
    c = (Mo + m) * w[Mo - m]
    if nm1:
        c += nm1 * uw[Mo - m]
    return c


def _phi0_coeffs(w, uw, nm1: int, M: int):
    # row 0 is valid up to index M-2; the homogeneous equation at order
    # Q^Mo fixes phi_{0,Mo-1} from everything below it
    row = [mpq(1)] + [mpq(0)] * (M - 2)
    for Mo in range(2, M):
        acc = mpq(0)
        for m in range(Mo - 1):
            cm = row[m]
            if cm:
                acc -= cm * _c_factor(Mo, m, w, uw, nm1)
        row[Mo - 1] = acc / (2 * (Mo - 1))
    return row


def compute_prequantities(vs: ValidatedScenario) -> HJData:
    """Hamilton-Jacobi data: w = Q * sqrt(2V/Q^2), its integral, u, and phi0."""
    two_v = vs.potential.scaled(2)
    w = two_v.shift_down(2).sqrt_unit().shift_up(1)
    S = w.antiderivative()
    nm1 = vs.n - 1
    uw = (vs.u * w).coeffs if nm1 else None
    phi0 = _phi0_coeffs(w.coeffs, uw, nm1, vs.M)
    return HJData(w=w, S=S, u=vs.u,
                  phi0=TruncatedSeries(phi0, vs.M - 2, vs.potential.label))


def run_recursion(h: HJData, vs: ValidatedScenario) -> ExpansionResult:
    """All E^(k) and coefficient rows phi_k for k = 1..K, exactly."""
    M, K, n = vs.M, vs.K, vs.n
    if M < 2 * K + 2:
        raise ConfigurationError(f"M={M} violates the rule M >= 2K+2 = {2 * K + 2}")
    nm1 = n - 1
    w = h.w.coeffs
    u = h.u.coeffs
    uw = (h.u * h.w).coeffs if nm1 else None
    rows = [list(h.phi0.coeffs)]
    E: list = []

    for k in range(1, K + 1):
        prev = rows[k - 1]
        if nm1 and prev[1] != 0:
            raise HalfIntegerPowerError(
                f"order-Q^0 constraint violated at k={k}: (n-1)*phi_{{k-1,1}} = "
                f"{nm1 * prev[1]} != 0")
        # order Q^1 solvability: with phi_{k,0} gauged to 0 this fixes E^(k)
        e_k = -prev[2] - nm1 * (prev[2] + u[1] * prev[1] * _HALF)
        E.append(e_k)

        valid = M - 2 - 2 * k
        row = [mpq(0)] * (valid + 1)
        for Mo in range(2, valid + 2):
            acc = mpq(Mo * (Mo + 1)) * prev[Mo + 1]
            if nm1:
                s = mpq(0)
                for j in range(Mo + 1):
                    uj = u[j]
                    if uj:
                        s += uj * (Mo + 1 - j) * prev[Mo + 1 - j]
                acc += nm1 * s
            s = mpq(0)
            for p in range(1, k + 1):
                ep = E[p - 1]
                if ep:
                    s += ep * rows[k - p][Mo - 1]
            acc += 2 * s
            for m in range(Mo - 1):
                cm = row[m]
                if cm:
                    acc -= cm * _c_factor(Mo, m, w, uw, nm1)
            row[Mo - 1] = acc / (2 * (Mo - 1))
        rows.append(row)

    return ExpansionResult(label=vs.label, n=n, K=K, M=M, E0=mpq(n, 2), E=E,
                           phi=rows, normalization="phi_k(0) = 1 if k=0 else 0")


def expand_scenario(vs: ValidatedScenario) -> ExpansionResult:
    return run_recursion(compute_prequantities(vs), vs)


def _horner(coeffs, q):
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * q + c
    return acc


def eval_phi(result: ExpansionResult, k: int, q, radius: float | None = None) -> PhiValue:
    """Evaluate row k at q with the two-truncation accuracy check.

    tail_check compares the full row against the row with its last 10
    coefficients dropped; values above 1e-8 relative are flagged untrusted
    (never silently accepted). Rational q gives an exact rational value.
    """
    if not 0 <= k <= result.K:
        raise DomainError(f"row k={k} not computed (K={result.K})")
    if radius is not None and not abs(float(q)) < radius:
        raise DomainError(f"|q|={float(q):.6g} is not inside the convergence "
                          f"radius {radius:.6g}")
    row = result.phi[k]
    if isinstance(q, int):
        q = mpq(q)
    value = _horner(row, q)
    if len(row) > _TAIL_DROP:
        shorter = _horner(row[:-_TAIL_DROP], q)
        if value == shorter:
            tail = 0.0
        elif value == 0:
            tail = float("inf")
        else:
            tail = abs(float((value - shorter) / value))
    else:
        tail = float("inf") if value != 0 else 0.0
    return PhiValue(value=value, tail_check=tail, trusted=tail <= _TAIL_TRUST)


def eval_phi_sequence(result: ExpansionResult, q, radius: float | None = None):
    """PhiValue for every k = 1..K at the same point (the pointwise sequence)."""
    return [eval_phi(result, k, q, radius) for k in range(1, result.K + 1)]
