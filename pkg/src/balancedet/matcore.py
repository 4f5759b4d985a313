"""Symmetric matrices, diagonal dominance classification and determinants.

The determinant engine is a Bunch-Kaufman symmetric indefinite LDL^T
factorization with 1x1 and 2x2 pivots, so signed and singular inputs are
handled without assuming positive definiteness.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

DEFAULT_TOL = 1e-9
SYMMETRY_TOL = 1e-12

# Bunch-Kaufman growth constant
_BK_ALPHA = (1.0 + math.sqrt(17.0)) / 8.0


class DomainError(ValueError):
    """Raised when an operation's mathematical precondition is not met."""


class MatrixFormatError(ValueError):
    """Raised when matrix text input cannot be parsed or is not symmetric."""


@dataclass(frozen=True)
class SymMatrix:
    """Dense real symmetric matrix stored as its packed upper triangle.

    ``upper`` holds the row-major entries (i, j) with i <= j. The full array
    is rebuilt from that single triangle, so (i, j) and (j, i) always read
    the same stored value.
    """

    n: int
    upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        upper = np.array(self.upper, dtype=float).ravel()
        if upper.size != self.n * (self.n + 1) // 2:
            raise ValueError("packed triangle has wrong length for n")
        if not np.all(np.isfinite(upper)):
            raise ValueError("matrix entries must be finite")
        upper.setflags(write=False)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_array(cls, a, tol: float = SYMMETRY_TOL) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
        if np.max(np.abs(a - a.T), initial=0.0) > tol * scale:
            raise ValueError("matrix is not symmetric")
        n = a.shape[0]
        return cls(n, a[np.triu_indices(n)])

    @classmethod
    def identity(cls, n: int) -> "SymMatrix":
        return cls.from_array(np.eye(n))

    @cached_property
    def array(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        a[iu] = self.upper
        a.T[iu] = self.upper
        a.setflags(write=False)
        return a

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.array)

    def __getitem__(self, ij):
        i, j = ij
        return float(self.array[i, j])

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.n, self.upper.tobytes()))


@dataclass(frozen=True)
class BalanceReport:
    deltas: np.ndarray
    is_dominant: bool
    is_balanced: bool
    tolerance: float


def _as_array(J) -> np.ndarray:
    if isinstance(J, np.ndarray):
        return J.astype(float, copy=False)
    arr = getattr(J, "array", None)
    return arr if isinstance(arr, np.ndarray) else np.asarray(J, dtype=float)


def delta(J) -> np.ndarray:
    """Row dominance margins |J_ii| - sum_{j != i} |J_ij|."""
    a = np.abs(_as_array(J))
    d = np.diag(a)
    return 2.0 * d - a.sum(axis=1)


def classify(J, tol: float = DEFAULT_TOL) -> BalanceReport:
    if tol < 0:
        raise ValueError(f"tolerance must be nonnegative, got {tol}")
    d = delta(J)
    dominant = bool(np.min(d) >= -tol)
    balanced = bool(np.max(np.abs(d)) <= tol)
    return BalanceReport(d, dominant, balanced, tol)


def bunch_kaufman_slogdet(a) -> tuple[float, float]:
    """Return (sign, log|det|) of a symmetric matrix via Bunch-Kaufman LDL^T.

    A singular matrix returns (0.0, -inf).
    """
    sign, logs = _bk_pivot_logs(a)
    if sign == 0.0:
        return 0.0, -math.inf
    return sign, math.fsum(logs)


def _bk_pivot_logs(a) -> tuple[float, list[float]]:
    """Sign of det and the log-magnitudes of the D blocks of P A P^T = L D L^T."""
    w = np.array(a, dtype=float)
    n = w.shape[0]
    sign = 1.0
    logs = []
    k = 0
    while k < n:
        absakk = abs(w[k, k])
        if k + 1 < n:
            col = np.abs(w[k + 1:, k])
            imax = k + 1 + int(np.argmax(col))
            colmax = col[imax - k - 1]
        else:
            imax, colmax = k, 0.0

        if max(absakk, colmax) == 0.0:
            return 0.0, []

        step = 1
        kp = k
        if absakk < _BK_ALPHA * colmax:
            row = np.abs(w[imax, k:])
            row[imax - k] = 0.0
            rowmax = row.max()
            if absakk * rowmax >= _BK_ALPHA * colmax * colmax:
                kp = k
            elif abs(w[imax, imax]) >= _BK_ALPHA * rowmax:
                kp = imax
            else:
                kp = imax
                step = 2

        kk = k + step - 1
        if kp != kk:
            # symmetric permutation leaves the determinant unchanged
            w[[kk, kp], :] = w[[kp, kk], :]
            w[:, [kk, kp]] = w[:, [kp, kk]]

        if step == 1:
            d = w[k, k]
            if d == 0.0:
                return 0.0, []
            if d < 0:
                sign = -sign
            logs.append(math.log(abs(d)))
            if k + 1 < n:
                c = w[k + 1:, k]
                w[k + 1:, k + 1:] -= np.outer(c, c / d)
        else:
            d11, d21, d22 = w[k, k], w[k + 1, k], w[k + 1, k + 1]
            # |d21| dominates in a 2x2 pivot, so scale by it to limit cancellation
            detd = d21 * ((d11 / d21) * d22 - d21)
            if detd == 0.0:
                return 0.0, []
            if detd < 0:
                sign = -sign
            logs.append(math.log(abs(detd)))
            if k + 2 < n:
                c = w[k + 2:, k:k + 2]
                inv = np.array([[d22, -d21], [-d21, d11]]) / detd
                w[k + 2:, k + 2:] -= c @ inv @ c.T
        k += step
    return sign, logs


def slogdet(J) -> tuple[float, float]:
    return bunch_kaufman_slogdet(_as_array(J))


def determinant(J) -> float:
    sign, logabs = slogdet(J)
    if sign == 0.0:
        return 0.0
    return sign * math.exp(logabs)


def cofactor_determinant(a) -> float:
    """Laplace expansion along the first row. Exponential cost; small n only."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    total = 0.0
    cols = np.arange(n)
    for j in range(n):
        if a[0, j] == 0.0:
            continue
        minor = a[1:, cols != j]
        total += (-1) ** j * a[0, j] * cofactor_determinant(minor)
    return total


def det_ratio(J) -> float:
    """det J divided by the product of the diagonal, via log magnitudes."""
    a = _as_array(J)
    diag = np.diag(a)
    if np.any(diag == 0.0):
        raise DomainError("det_ratio needs a nonzero diagonal")
    sign, logs = _bk_pivot_logs(a)
    if sign == 0.0:
        return 0.0
    dsign = float(np.prod(np.sign(diag)))
    logs.extend(-np.log(np.abs(diag)))
    return sign * dsign * math.exp(math.fsum(logs))


def unit_diagonal_scale(J) -> SymMatrix:
    """Congruence D^{-1/2} J D^{-1/2} with D the diagonal of J."""
    a = _as_array(J)
    diag = np.diag(a)
    if np.any(diag <= 0.0):
        raise DomainError("unit_diagonal_scale needs a positive diagonal")
    r = 1.0 / np.sqrt(diag)
    out = r[:, None] * a * r[None, :]
    np.fill_diagonal(out, 1.0)
    return SymMatrix.from_array(0.5 * (out + out.T))


def shifted_identity(B) -> SymMatrix:
    """I + B for a SymMatrix or array B."""
    a = _as_array(B)
    return SymMatrix.from_array(a + np.eye(a.shape[0]))


# --- text interchange format -------------------------------------------------

def format_matrix(J) -> str:
    a = _as_array(J)
    n = a.shape[0]
    lines = [str(n)]
    for row in a:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> SymMatrix:
    tokens = [line.split() for line in io.StringIO(text) if line.strip()]
    if not tokens:
        raise MatrixFormatError("empty matrix file")
    try:
        n = int(tokens[0][0])
    except ValueError as exc:
        raise MatrixFormatError(f"bad dimension line: {tokens[0]!r}") from exc
    if len(tokens[0]) != 1 or n < 1:
        raise MatrixFormatError("first line must hold a single positive integer n")
    rows = tokens[1:]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise MatrixFormatError(f"expected {n} rows of {n} values")
    try:
        a = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise MatrixFormatError(str(exc)) from exc
    if not np.all(np.isfinite(a)):
        raise MatrixFormatError("non-finite entry")
    try:
        return SymMatrix.from_array(a, tol=SYMMETRY_TOL)
    except ValueError as exc:
        raise MatrixFormatError(str(exc)) from exc


def read_matrix(path) -> SymMatrix:
    return parse_matrix(Path(path).read_text())


def write_matrix(path, J) -> None:
    Path(path).write_text(format_matrix(J))


def from_rows(rows: Iterable[Iterable[float]]) -> SymMatrix:
    return SymMatrix.from_array(np.array([list(r) for r in rows], dtype=float))
