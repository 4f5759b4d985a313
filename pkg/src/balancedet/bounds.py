"""Closed-form bounds: trace moments, the two-sided determinant sandwich,
the balanced-matrix determinant bound and the scalar envelopes behind it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matcore import SymMatrix, determinant, _as_array

CHAIN_TOL = 1e-9
# s^2 below zero by less than this is roundoff and clamps to 0
S2_CLAMP = 1e-12


@dataclass(frozen=True)
class SpectralStats:
    n: int
    trace: float
    trace_sq: float
    m: float
    s: float


@dataclass(frozen=True)
class ProofTrace:
    n: int
    s: float
    s_lo: float
    s_hi: float
    gjsw_upper_value: float
    envelope_at_s: float
    theorem_bound: float
    det_value: float
    chain_ok: bool
    s_in_interval: bool = True


def spectral_stats(A) -> SpectralStats:
    """Mean and spread of the eigenvalues of symmetric A from tr A and tr A^2."""
    a = _as_array(A)
    n = a.shape[0]
    trace = float(np.trace(a))
    trace_sq = float(np.sum(a * a))
    m = trace / n
    s2 = trace_sq / n - m * m
    if s2 < 0.0:
        if s2 < -S2_CLAMP:
            raise ArithmeticError(f"negative spread^2 {s2!r} beyond roundoff")
        s2 = 0.0
    return SpectralStats(n, trace, trace_sq, m, math.sqrt(s2))


def gjsw_lower(stats: SpectralStats) -> float:
    n, m, s = stats.n, stats.m, stats.s
    if n < 2:
        raise ValueError("sandwich needs n >= 2")
    r = math.sqrt(n - 1)
    return (m - s * r) * (m + s / r) ** (n - 1)


def gjsw_upper(stats: SpectralStats) -> float:
    n, m, s = stats.n, stats.m, stats.s
    if n < 2:
        raise ValueError("sandwich needs n >= 2")
    r = math.sqrt(n - 1)
    return (m + s * r) * (m - s / r) ** (n - 1)


def theorem_bound(n: int) -> float:
    """2 (1 - 1/(n-1))^(n-1); tends to 2/e from below."""
    if n < 2:
        raise ValueError(f"bound defined for n >= 2, got {n}")
    if n == 2:
        return 0.0
    k = n - 1
    return 2.0 * math.exp(k * math.log1p(-1.0 / k))


def lemma1_lower(n: int) -> float:
    """Minimum of tr B^2 over the feasible set."""
    if n < 2:
        raise ValueError(f"trace bound defined for n >= 2, got {n}")
    return n / (n - 1)


def envelope_f(t: float, a: float) -> float:
    """(1 + a t)(1 - t/a)^(a^2), decreasing in t on [0, a]."""
    if a <= 0:
        raise ValueError(f"a must be positive, got {a}")
    if not 0.0 <= t <= a:
        raise ValueError(f"t={t} outside [0, {a}]")
    if t == a:
        return 0.0
    return (1.0 + a * t) * math.exp(a * a * math.log1p(-t / a))


def envelope_g(s: float, n: int) -> float:
    """(1 - s sqrt(n-1))(1 + s/sqrt(n-1))^(n-1); vanishes at s = 1/sqrt(n-1)."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    r = math.sqrt(n - 1)
    return (1.0 - s * r) * (1.0 + s / r) ** (n - 1)


def proof_chain(B, det_value: float | None = None) -> ProofTrace:
    """Trace det(I+B) <= upper sandwich = f(s) <= f(s_lo) = bound for one B.

    ``B`` is a FeasibleMatrix, SymMatrix or array with zero diagonal.
    ``det_value`` may be passed when det(I+B) is already known.
    """
    b = B.array if hasattr(B, "array") else np.asarray(B, dtype=float)
    n = b.shape[0]
    if n < 3:
        raise ValueError("proof chain needs n >= 3")
    a = b + np.eye(n)
    stats = spectral_stats(a)
    s = stats.s
    r = math.sqrt(n - 1)
    s_lo, s_hi = 1.0 / r, r
    # the upper end is strict and is recorded, not assumed
    in_interval = (s >= s_lo - CHAIN_TOL) and (s < s_hi)

    upper = gjsw_upper(stats)
    env = envelope_f(min(max(s, 0.0), r), r)
    bound = theorem_bound(n)
    det = determinant(a) if det_value is None else det_value

    ok = (
        in_interval
        and det <= upper + CHAIN_TOL
        and abs(upper - env) <= CHAIN_TOL
        and env <= bound + CHAIN_TOL
    )
    return ProofTrace(n, s, s_lo, s_hi, upper, env, bound, det, bool(ok), bool(in_interval))


def sandwich(A) -> tuple[float, float, float]:
    """(lower, det, upper) for a matrix known to be positive semidefinite."""
    stats = spectral_stats(A)
    return gjsw_lower(stats), determinant(A), gjsw_upper(stats)


def limit_value() -> float:
    return 2.0 / math.e


@dataclass(frozen=True)
class BoundReport:
    n: int
    deltas: tuple
    is_dominant: bool
    is_balanced: bool
    determinant: float
    det_ratio: float | None
    stats: SpectralStats
    gjsw_lower: float | None
    gjsw_upper: float | None
    psd_precondition: str
    sandwich_ok: bool | None
    theorem_bound: float | None
    margin: float | None
    within_bound: bool | None
    trace: ProofTrace | None
    notes: tuple = ()


def bound_report(J, tol: float = 1e-9) -> BoundReport:
    """Everything the inequality says about one matrix J.

    The sandwich is only asserted when J is positive semidefinite by
    construction (balanced with nonnegative diagonal); otherwise it is
    computed and flagged as an unverified precondition.
    """
    from .matcore import classify, det_ratio, unit_diagonal_scale

    a = _as_array(J)
    n = a.shape[0]
    notes = []
    bal = classify(a, tol)
    det = determinant(a)
    diag = np.diag(a)
    ratio = det_ratio(a) if np.all(diag != 0.0) else None
    stats = spectral_stats(a)

    psd_known = bal.is_dominant and bool(np.all(diag >= 0.0))
    lower = upper = None
    sandwich_ok = None
    if n >= 2:
        lower, upper = gjsw_lower(stats), gjsw_upper(stats)
        if psd_known:
            sandwich_ok = lower - CHAIN_TOL <= det <= upper + CHAIN_TOL
    psd_precondition = "verified (diagonally dominant, nonnegative diagonal)" if psd_known else "unverified precondition"

    bound = margin = within = None
    trace = None
    if not bal.is_balanced:
        notes.append("not balanced; bound not applicable")
    elif n < 2 or ratio is None:
        notes.append("bound needs n >= 2 and a nonzero diagonal")
    else:
        bound = theorem_bound(n)
        margin = bound - ratio
        within = ratio <= bound + CHAIN_TOL
        if n >= 3 and np.all(diag > 0.0):
            unit = unit_diagonal_scale(a)
            if classify(unit, tol).is_balanced:
                trace = proof_chain(unit.array - np.eye(n))
            else:
                notes.append("unit-diagonal congruence breaks balance; proof chain skipped")
    return BoundReport(
        n, tuple(float(x) for x in bal.deltas), bal.is_dominant, bal.is_balanced,
        det, ratio, stats, lower, upper, psd_precondition, sandwich_ok,
        bound, margin, within, trace, tuple(notes),
    )
