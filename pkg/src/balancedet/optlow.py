"""Minimizing det(I+B) over the feasible polytope.

Free coordinates are the strictly-upper entries B_ij (i < j). The polytope
is the intersection of the affine set {row sums = 1} with the nonnegative
orthant; projections onto it use Dykstra's algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bounds import theorem_bound
from .matcore import bunch_kaufman_slogdet, determinant
from .sampling import FeasibleMatrix, SampleConfig, extremal, offdiag_indices, sample_feasible

PROJ_MOVE_TOL = 1e-12
PROJ_FEAS_TOL = 1e-10
PROJ_MAX_CYCLES = 100_000
SINGULAR_LOG = math.log(1e-300)
NEAR_SINGULAR = 1e-12


class ProjectionError(RuntimeError):
    def __init__(self, residual: float, move: float):
        super().__init__(f"Dykstra projection did not converge (row-sum residual {residual:.3e}, last move {move:.3e})")
        self.residual = residual
        self.move = move


class SingularError(ArithmeticError):
    """I + B is numerically singular; use :func:`min_eigen_gradient` instead."""


@dataclass(frozen=True)
class OptConfig:
    starts: int = 32
    seed: int = 0
    max_iter: int = 10_000
    step0: float = 0.1
    min_step: float = 1e-16
    grad_tol: float = 1e-10
    value_tol: float = 1e-12
    oracle: bool = True
    oracle_step: float = 1e-2


@dataclass
class OptResult:
    n: int
    best_value: float
    best_matrix: FeasibleMatrix
    starts: int
    iterations_total: int
    converged: bool
    oracle_value: float | None = None
    oracle_gap: float | None = None
    best_start: int = 0
    start_values: list[float] = field(default_factory=list)
    histories: list[list[float]] = field(default_factory=list, repr=False)


@dataclass
class GridOracle:
    n: int
    step: float
    divisions: int
    points: int
    min_value: float
    min_point: tuple[float, float]
    max_value: float
    max_point: tuple[float, float]
    closed_form_error: float


def _row_sums(n: int, v: np.ndarray) -> np.ndarray:
    iu, ju = offdiag_indices(n)
    return np.bincount(iu, v, minlength=n) + np.bincount(ju, v, minlength=n)


def _affine_project(n: int, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of v onto {row sums = 1}.

    The normal matrix A A^T = (n-2) I + 1 1^T has the explicit inverse
    (I - 1 1^T / (2n-2)) / (n-2).
    """
    r = _row_sums(n, v) - 1.0
    y = (r - r.sum() / (2 * n - 2)) / (n - 2)
    iu, ju = offdiag_indices(n)
    return v - y[iu] - y[ju]


def _free_coords(C) -> tuple[int, np.ndarray]:
    if isinstance(C, FeasibleMatrix):
        return C.n, np.array(C.entries)
    c = C.array if hasattr(C, "array") else np.asarray(C, dtype=float)
    if c.ndim == 1:
        m = c.size
        n = int(round((1 + math.sqrt(1 + 8 * m)) / 2))
        if n * (n - 1) // 2 != m:
            raise ValueError(f"{m} is not a triangular number of free coordinates")
        return n, c.copy()
    if c.shape[0] != c.shape[1] or np.any(np.diag(c) != 0.0):
        raise ValueError("expected a square zero-diagonal matrix")
    if np.max(np.abs(c - c.T)) > 1e-12:
        raise ValueError("matrix is not symmetric")
    n = c.shape[0]
    return n, c[offdiag_indices(n)].copy()


def _polish_support(n: int, x: np.ndarray) -> np.ndarray:
    """Least-norm correction of the row sums that keeps zero entries at zero.

    Dykstra leaves row-sum residuals near its stopping tolerance, enough for
    I+B to lose semidefiniteness by ~1e-12 near singular points. The
    correction is discarded if it would make an entry negative.
    """
    r = _row_sums(n, x) - 1.0
    if not np.any(r):
        return x
    support = x > 0.0
    a = incidence_matrix(n)[:, support]
    y = np.linalg.lstsq(a @ a.T, r, rcond=None)[0]
    out = x.copy()
    out[support] -= a.T @ y
    if np.any(out < 0.0):
        return x
    if np.max(np.abs(_row_sums(n, out) - 1.0)) > np.max(np.abs(r)):
        return x
    return out


def polytope_project(C) -> FeasibleMatrix:
    """Euclidean projection onto the feasible polytope (free coordinates).

    ``C`` is a symmetric zero-diagonal matrix or a vector of free
    coordinates.
    """
    n, v = _free_coords(C)
    if n < 3:
        raise ValueError("polytope projection needs n >= 3")
    x = v
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    move = math.inf
    residual = math.inf
    for _ in range(PROJ_MAX_CYCLES):
        y = _affine_project(n, x + p)
        p = x + p - y
        x_new = np.maximum(y + q, 0.0)
        q = y + q - x_new
        move = float(np.max(np.abs(x_new - x)))
        x = x_new
        if move < PROJ_MOVE_TOL:
            x = _polish_support(n, x)
            residual = float(np.max(np.abs(_row_sums(n, x) - 1.0)))
            if residual <= PROJ_FEAS_TOL:
                return FeasibleMatrix(n, x)
    raise ProjectionError(residual, move)


def objective(B: FeasibleMatrix) -> float:
    return determinant(B.array + np.eye(B.n))


def det_gradient(B: FeasibleMatrix) -> np.ndarray:
    """d det(I+B) / d B_ij over the free coordinates: 2 det(I+B) inv(I+B)_ij."""
    n = B.n
    a = B.array + np.eye(n)
    sign, logabs = bunch_kaufman_slogdet(a)
    if sign == 0.0 or logabs < SINGULAR_LOG:
        raise SingularError("I + B is singular; det gradient needs the eigenvalue fallback")
    inv = np.linalg.inv(a)
    iu, ju = offdiag_indices(n)
    return 2.0 * sign * math.exp(logabs) * inv[iu, ju]


def min_eigen_gradient(B: FeasibleMatrix, steps: int = 5) -> np.ndarray:
    """Gradient of the smallest eigenvalue of I+B via a few inverse-iteration steps.

    For a simple eigenvalue with unit eigenvector v the pair (i, j)
    derivative is 2 v_i v_j.
    """
    n = B.n
    a = B.array + np.eye(n)
    # shift below the spectrum (I+B is PSD on the polytope) so the solve is well posed
    shifted = a + 1e-8 * np.eye(n)
    v = np.ones(n) / math.sqrt(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    for _ in range(steps):
        v = np.linalg.solve(shifted, v)
        v /= np.linalg.norm(v)
    iu, ju = offdiag_indices(n)
    return 2.0 * v[iu] * v[ju]


def projected_gradient_norm(B: FeasibleMatrix, g: np.ndarray) -> float:
    """|| x - P(x - g) ||, zero exactly at first-order stationary points."""
    return float(np.linalg.norm(B.entries - polytope_project(B.entries - g).entries))


def _descend(B: FeasibleMatrix, cfg: OptConfig):
    """One projected-gradient run; returns (B, value, iterations, converged, history)."""
    value = objective(B)
    history = [value]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if value < cfg.value_tol:
            converged = True
            break
        if abs(value) < NEAR_SINGULAR:
            g = min_eigen_gradient(B)
        else:
            g = det_gradient(B)
        if projected_gradient_norm(B, g) < cfg.grad_tol:
            converged = True
            break
        t = cfg.step0
        accepted = False
        while t >= cfg.min_step:
            trial = polytope_project(B.entries - t * g)
            trial_value = objective(trial)
            if trial_value < value:
                B, value = trial, trial_value
                accepted = True
                break
            t *= 0.5
        history.append(value)
        if not accepted:
            break
    return B, value, it, converged, history


def minimize_det(n: int, cfg: OptConfig = OptConfig()) -> OptResult:
    """Multi-start projected gradient descent for the minimum of det(I+B)."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if n in (2, 3):
        # the feasible set is a single point
        B = extremal(n)
        value = objective(B)
        res = OptResult(n, value, B, 1, 0, True, start_values=[value], histories=[[value]])
        if n == 3 and cfg.oracle:
            oracle = oracle_grid(3, cfg.oracle_step)
            res.oracle_value = oracle.min_value
            res.oracle_gap = value - oracle.min_value
        return res

    sample_cfg = SampleConfig(seed=cfg.seed)
    best = None
    total_iter = 0
    any_converged = False
    start_values, histories = [], []
    for k in range(cfg.starts):
        B0 = sample_feasible(n, sample_cfg, index=k)
        B, value, iters, conv, hist = _descend(B0, cfg)
        total_iter += iters
        any_converged = any_converged or conv
        start_values.append(value)
        histories.append(hist)
        # strict comparison keeps the lowest start index on ties
        if best is None or value < best[1]:
            best = (B, value, k)

    B, value, k = best
    res = OptResult(n, value, B, cfg.starts, total_iter, any_converged,
                    best_start=k, start_values=start_values, histories=histories)
    if n == 4 and cfg.oracle:
        oracle = oracle_grid(4, cfg.oracle_step)
        res.oracle_value = oracle.min_value
        res.oracle_gap = value - oracle.min_value
    return res


def block_witness(n: int) -> FeasibleMatrix:
    """A 2x2 swap block next to extremal(n-2); I+B is singular."""
    if n < 4:
        raise ValueError("block witness needs n >= 4")
    b = np.zeros((n, n))
    b[0, 1] = b[1, 0] = 1.0
    b[2:, 2:] = extremal(n - 2).array
    return FeasibleMatrix.from_array(b)


# --- n = 4 brute force -------------------------------------------------------

# entries in (12, 13, 14, 23, 24, 34) order: x, y, 1-x-y, 1-x-y, y, x
_N4_BASE = np.array([0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
_N4_DX = np.array([1.0, 0.0, -1.0, -1.0, 0.0, 1.0])
_N4_DY = np.array([0.0, 1.0, -1.0, -1.0, 1.0, 0.0])


@lru_cache(maxsize=None)
def _incidence(n: int) -> np.ndarray:
    iu, ju = offdiag_indices(n)
    a = np.zeros((n, iu.size))
    a[iu, np.arange(iu.size)] = 1.0
    a[ju, np.arange(iu.size)] = 1.0
    a.setflags(write=False)
    return a


def incidence_matrix(n: int) -> np.ndarray:
    """Row-sum operator on free coordinates: (A v)_i = sum_j B_ij."""
    return _incidence(n)


def check_n4_parametrization() -> None:
    """Confirm base + x DX + y DY sweeps exactly the n = 4 affine row-sum set."""
    a = incidence_matrix(4)
    if not np.allclose(a @ _N4_BASE, 1.0, atol=0, rtol=0):
        raise AssertionError("base point violates the row sums")
    if np.any(a @ _N4_DX != 0.0) or np.any(a @ _N4_DY != 0.0):
        raise AssertionError("direction leaves the affine set")
    null_dim = a.shape[1] - np.linalg.matrix_rank(a)
    if null_dim != 2 or np.linalg.matrix_rank(np.column_stack([_N4_DX, _N4_DY])) != 2:
        raise AssertionError("directions do not span the solution space")


def oracle_grid(n: int, step: float, validate: bool = True, tol: float = 1e-12) -> GridOracle:
    """Exhaustive det(I+B) over a grid of the n = 4 polytope (n = 3 is a point).

    The n = 4 polytope is {x, y >= 0, x + y <= 1}. The number of divisions
    is 1/step rounded up to a multiple of 3, so spacing never exceeds
    ``step`` and the centroid (the maximizer) is a grid point. With
    ``validate`` each engine determinant is compared to 16 x y (1-x-y).
    """
    if n not in (3, 4):
        raise ValueError(f"grid oracle supports n in {{3, 4}}, got {n}")
    if not 0 < step <= 0.1:
        raise ValueError(f"step must be in (0, 0.1], got {step}")
    if n == 3:
        v = objective(extremal(3))
        return GridOracle(3, step, 0, 1, v, (0.5, 0.5), v, (0.5, 0.5), 0.0)

    check_n4_parametrization()
    k = math.ceil(round(1.0 / step, 9))
    k += (-k) % 3
    a = np.eye(4)
    iu, ju = offdiag_indices(4)
    lo, hi = math.inf, -math.inf
    lo_pt = hi_pt = (0.0, 0.0)
    worst = 0.0
    points = 0
    for i in range(k + 1):
        x = i / k
        for j in range(k + 1 - i):
            y = j / k
            z = (k - i - j) / k
            v = _N4_BASE + x * _N4_DX + y * _N4_DY
            a[iu, ju] = v
            a[ju, iu] = v
            sign, logabs = bunch_kaufman_slogdet(a)
            d = 0.0 if sign == 0.0 else sign * math.exp(logabs)
            if validate:
                err = abs(d - 16.0 * x * y * z)
                worst = max(worst, err)
                if err > tol:
                    raise AssertionError(f"closed form 16xyz disagrees with engine at ({x}, {y}): {err:.3e}")
            points += 1
            if d < lo:
                lo, lo_pt = d, (x, y)
            if d > hi:
                hi, hi_pt = d, (x, y)
    return GridOracle(4, step, k, points, lo, lo_pt, hi, hi_pt, worst)


def bound_consistent(res: OptResult) -> bool:
    return 0.0 <= res.best_value + 1e-12 and res.best_value <= theorem_bound(res.n) + 1e-9
