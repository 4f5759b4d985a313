"""Matrix families: the extremal witness, random points of the feasible set
(symmetric, zero diagonal, rows summing to one), signed variants, general
positive balanced matrices and Gram (PSD) matrices.

Randomness: every sample draws from its own PCG64 stream seeded by
``SeedSequence([seed, index])``, so a sample is fully determined by
``(n, config, index)`` and sweeps are order independent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .matcore import SymMatrix

FEAS_TOL = 1e-10
NEWTON_SWITCH = 1e-2
NEWTON_HALVINGS = 8


class BaseLaw(str, enum.Enum):
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"


class SinkhornError(RuntimeError):
    def __init__(self, deviation: float, iterations: int):
        super().__init__(
            f"symmetric Sinkhorn did not converge in {iterations} iterations "
            f"(max row-sum deviation {deviation:.3e})"
        )
        self.deviation = deviation
        self.iterations = iterations


class FeasibilityError(ValueError):
    pass


@dataclass(frozen=True)
class SampleConfig:
    seed: int = 0
    sinkhorn_tol: float = 1e-12
    sinkhorn_max_iter: int = 100_000
    base_law: BaseLaw = BaseLaw.EXPONENTIAL

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.sinkhorn_tol <= 0:
            raise ValueError("sinkhorn_tol must be positive")
        if self.sinkhorn_max_iter < 1:
            raise ValueError("sinkhorn_max_iter must be >= 1")
        object.__setattr__(self, "base_law", BaseLaw(self.base_law))

    def as_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "sinkhorn_tol": self.sinkhorn_tol,
            "sinkhorn_max_iter": self.sinkhorn_max_iter,
            "base_law": self.base_law.value,
        }


@lru_cache(maxsize=None)
def offdiag_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached ``np.triu_indices(n, 1)``; the storage order of FeasibleMatrix entries."""
    iu, ju = np.triu_indices(n, 1)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def _row_sums(n: int, entries: np.ndarray, absolute: bool) -> np.ndarray:
    iu, ju = offdiag_indices(n)
    v = np.abs(entries) if absolute else entries
    return np.bincount(iu, v, minlength=n) + np.bincount(ju, v, minlength=n)


@dataclass(frozen=True)
class FeasibleMatrix:
    """Symmetric zero-diagonal B whose rows sum to one.

    ``entries`` are the strictly-upper values in ``np.triu_indices(n, 1)``
    order. With ``signed`` set, rows of |B| sum to one instead and entries may
    be negative.
    """

    n: int
    entries: np.ndarray = field(repr=False)
    signed: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise FeasibilityError("feasible matrices need n >= 2")
        e = np.array(self.entries, dtype=float).ravel()
        if e.size != self.n * (self.n - 1) // 2:
            raise FeasibilityError("wrong number of off-diagonal entries")
        if not np.all(np.isfinite(e)):
            raise FeasibilityError("entries must be finite")
        if not self.signed and np.any(e < 0):
            raise FeasibilityError("negative entry in an unsigned feasible matrix")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        res = self.residual
        if res > FEAS_TOL:
            raise FeasibilityError(f"row sums deviate from 1 by {res:.3e}")

    @classmethod
    def from_array(cls, b, signed: bool = False) -> "FeasibleMatrix":
        b = np.asarray(b, dtype=float)
        n = b.shape[0]
        if np.any(np.diag(b) != 0.0):
            raise FeasibilityError("diagonal must be zero")
        if np.max(np.abs(b - b.T)) > 1e-12:
            raise FeasibilityError("matrix is not symmetric")
        return cls(n, b[offdiag_indices(n)], signed)

    @property
    def residual(self) -> float:
        """Largest deviation of a row sum (of |B| when signed) from 1."""
        return float(np.max(np.abs(_row_sums(self.n, self.entries, self.signed) - 1.0)))

    @cached_property
    def array(self) -> np.ndarray:
        b = np.zeros((self.n, self.n))
        iu = offdiag_indices(self.n)
        b[iu] = self.entries
        b.T[iu] = self.entries
        b.setflags(write=False)
        return b

    def shifted(self) -> SymMatrix:
        """I + B."""
        return SymMatrix.from_array(self.array + np.eye(self.n))

    def trace_sq(self) -> float:
        """tr B^2 = sum over i != j of B_ij^2."""
        return 2.0 * float(np.dot(self.entries, self.entries))

    def with_signs(self, signs) -> "FeasibleMatrix":
        return FeasibleMatrix(self.n, self.entries * np.asarray(signs, dtype=float), signed=True)

    def __eq__(self, other):
        if not isinstance(other, FeasibleMatrix):
            return NotImplemented
        return (self.n, self.signed) == (other.n, other.signed) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.n, self.signed, self.entries.tobytes()))


def extremal(n: int) -> FeasibleMatrix:
    """All off-diagonal entries 1/(n-1); the equality case of the bound."""
    if n < 2:
        raise ValueError(f"extremal matrix needs n >= 2, got {n}")
    return FeasibleMatrix(n, np.full(n * (n - 1) // 2, 1.0 / (n - 1)))


def sinkhorn_symmetric(M, cfg: SampleConfig = SampleConfig()) -> FeasibleMatrix:
    """Find positive x with diag(x) M diag(x) row stochastic.

    Runs the damped fixed point x <- sqrt(x / (M x)), which converges for
    zero-diagonal M with strictly positive off-diagonal entries. Once the row
    sums are within ``NEWTON_SWITCH`` of one, Newton steps on x * (M x) = 1
    (with step halving) finish the job; when no Newton step shrinks the
    deviation a damped step is taken instead.
    """
    m = M.array if hasattr(M, "array") else np.asarray(M, dtype=float)
    n = m.shape[0]
    if n < 3:
        raise ValueError("symmetric Sinkhorn needs n >= 3")
    if np.any(np.diag(m) != 0.0):
        raise ValueError("input must have zero diagonal")
    iu = offdiag_indices(n)
    upper = m[iu]
    if np.any(upper <= 0.0):
        raise ValueError("off-diagonal entries must be strictly positive")
    m = np.zeros((n, n))
    m[iu] = upper
    m.T[iu] = upper

    x = np.ones(n)
    mx = m @ x
    dev = float(np.max(np.abs(x * mx - 1.0)))
    for _ in range(cfg.sinkhorn_max_iter):
        if dev < cfg.sinkhorn_tol:
            entries = x[iu[0]] * upper * x[iu[1]]
            out_dev = float(np.max(np.abs(_row_sums(n, entries, False) - 1.0)))
            if out_dev < cfg.sinkhorn_tol:
                return FeasibleMatrix(n, entries)
        if dev < NEWTON_SWITCH:
            stepped = _newton_step(m, x, mx, dev)
            if stepped is not None:
                x, mx, dev = stepped
                continue
        x = np.sqrt(x / mx)
        mx = m @ x
        dev = float(np.max(np.abs(x * mx - 1.0)))
    raise SinkhornError(dev, cfg.sinkhorn_max_iter)


def _newton_step(m, x, mx, dev):
    """Backtracking Newton step on x * (M x) = 1; None if no step reduces the deviation."""
    n = x.size
    jac = m * x[:, None]
    jac[np.diag_indices(n)] += mx
    try:
        step = np.linalg.solve(jac, x * mx - 1.0)
    except np.linalg.LinAlgError:
        return None
    t = 1.0
    for _ in range(NEWTON_HALVINGS):
        x_new = x - t * step
        if np.all(x_new > 0.0):
            mx_new = m @ x_new
            dev_new = float(np.max(np.abs(x_new * mx_new - 1.0)))
            if dev_new < dev:
                return x_new, mx_new, dev_new
        t *= 0.5
    return None


def _draw_magnitudes(rng: np.random.Generator, size: int, law: BaseLaw) -> np.ndarray:
    if law is BaseLaw.UNIFORM:
        return 1.0 - rng.random(size)  # (0, 1]
    return rng.standard_exponential(size)


def _raw_offdiag(n: int, entries: np.ndarray) -> np.ndarray:
    m = np.zeros((n, n))
    iu = offdiag_indices(n)
    m[iu] = entries
    m.T[iu] = entries
    return m


def _feasible_from_rng(n: int, cfg: SampleConfig, rng: np.random.Generator) -> FeasibleMatrix:
    if n < 3:
        raise ValueError(f"feasible sampling needs n >= 3, got {n}")
    mags = _draw_magnitudes(rng, n * (n - 1) // 2, cfg.base_law)
    return sinkhorn_symmetric(_raw_offdiag(n, mags), cfg)


def sample_feasible(n: int, cfg: SampleConfig = SampleConfig(), index: int = 0) -> FeasibleMatrix:
    return _feasible_from_rng(n, cfg, rng_for(cfg.seed, index))


def sample_signed(n: int, cfg: SampleConfig = SampleConfig(), index: int = 0) -> FeasibleMatrix:
    """A feasible sample with each symmetric pair negated with probability 1/2.

    The magnitudes come from the same stream as :func:`sample_feasible`,
    so keeping every sign reproduces that sample exactly.
    """
    rng = rng_for(cfg.seed, index)
    base = _feasible_from_rng(n, cfg, rng)
    signs = np.where(rng.random(base.entries.size) < 0.5, -1.0, 1.0)
    return base.with_signs(signs)


def sample_balanced_general(n: int, cfg: SampleConfig = SampleConfig(), index: int = 0) -> SymMatrix:
    """Entrywise positive balanced J with J_ii = sum_{j != i} J_ij (diagonal not normalized)."""
    if n < 2:
        raise ValueError(f"balanced sampling needs n >= 2, got {n}")
    rng = rng_for(cfg.seed, index)
    m = _raw_offdiag(n, _draw_magnitudes(rng, n * (n - 1) // 2, cfg.base_law))
    np.fill_diagonal(m, m.sum(axis=1))
    return SymMatrix.from_array(m)


def sample_psd(n: int, cfg: SampleConfig = SampleConfig(), index: int = 0) -> SymMatrix:
    """G^T G with G an n x n standard normal matrix."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    g = rng_for(cfg.seed, index).standard_normal((n, n))
    return gram(g)


def gram(g) -> SymMatrix:
    g = np.asarray(g, dtype=float)
    a = g.T @ g
    return SymMatrix(a.shape[0], a[np.triu_indices(a.shape[0])])


def perturbed_extremal(n: int, cfg: SampleConfig = SampleConfig(), index: int = 0, eps: float = 1e-3) -> FeasibleMatrix:
    """Extremal matrix with one random symmetric pair raised by eps, rescaled back onto the feasible set."""
    rng = rng_for(cfg.seed, index)
    entries = np.full(n * (n - 1) // 2, 1.0 / (n - 1))
    entries[rng.integers(entries.size)] += eps
    return sinkhorn_symmetric(_raw_offdiag(n, entries), cfg)
