"""Property sweeps over sampled matrices.

Each family pairs a sampler with the inequality it should satisfy:

* ``theorem``    det(I+B) <= bound(n) and the proof chain closes, B feasible
* ``conjecture`` det J / prod J_ii <= bound(n), J positive balanced, unnormalized
* ``signed``     as ``theorem`` with random signs on symmetric pairs
* ``lemma1``     tr B^2 >= n/(n-1), with the equality characterization
* ``lemma3``     the two-sided trace-moment sandwich on Gram matrices

Sample ``i`` of a sweep depends only on ``(family, n, config, i)``, so sweeps
can be split across workers and reduced in any order.
"""

from __future__ import annotations

import enum
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bounds
from .matcore import det_ratio, determinant, format_matrix
from .sampling import (
    FeasibleMatrix,
    SampleConfig,
    SinkhornError,
    sample_balanced_general,
    sample_feasible,
    sample_psd,
    sample_signed,
)

VIOLATION_TOL = 1e-9
TRACE_TOL = 1e-12
EQUALITY_TOL = 1e-9
EQUALITY_ENTRY_TOL = 1e-4
PSD_EIG_TOL = 1e-9
SCHEMA_VERSION = 1


class Family(str, enum.Enum):
    THEOREM = "theorem"
    CONJECTURE = "conjecture"
    SIGNED = "signed"
    LEMMA1 = "lemma1"
    LEMMA3 = "lemma3"


# violations in these families contradict a proved statement
PROOF_BACKED = frozenset({Family.THEOREM, Family.SIGNED, Family.LEMMA1, Family.LEMMA3})

_MIN_N = {
    Family.THEOREM: 3,
    Family.CONJECTURE: 2,
    Family.SIGNED: 3,
    Family.LEMMA1: 3,
    Family.LEMMA3: 2,
}


@dataclass
class Violation:
    index: int
    value: float
    bound: float
    reason: str
    matrix: str


@dataclass
class SampleFailure:
    index: int
    message: str


@dataclass
class VerifyReport:
    family: str
    n: int
    count: int
    violations: int
    worst_margin: float
    tightest_sample_seed: int
    tightest_sample_index: int
    elapsed: float
    chain_failures: int = 0
    psd_all: bool | None = None
    failures: list[SampleFailure] = field(default_factory=list)
    violation_log: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0 and not self.failures

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def numeric_payload(self) -> dict:
        """Everything except wall-clock timing."""
        d = self.to_dict()
        d.pop("elapsed")
        return d


def sample_for(family: Family, n: int, cfg: SampleConfig, index: int):
    """Regenerate the matrix a sweep evaluated at ``index``."""
    family = Family(family)
    if family in (Family.THEOREM, Family.LEMMA1):
        return sample_feasible(n, cfg, index)
    if family is Family.SIGNED:
        return sample_signed(n, cfg, index)
    if family is Family.CONJECTURE:
        return sample_balanced_general(n, cfg, index)
    return sample_psd(n, cfg, index)


def _evaluate(family: Family, n: int, cfg: SampleConfig, index: int):
    """Return (margin, violation or None, chain_ok, psd) for one sample."""
    mat = sample_for(family, n, cfg, index)
    chain_ok = True
    psd = None
    reason = None

    if family in (Family.THEOREM, Family.SIGNED):
        a = mat.array + np.eye(n)
        value = determinant(a)
        bound = bounds.theorem_bound(n)
        margin = bound - value
        trace = bounds.proof_chain(mat, det_value=value)
        chain_ok = trace.chain_ok
        if value > bound + VIOLATION_TOL:
            reason = "det(I+B) exceeds bound"
        elif not chain_ok:
            reason = "proof chain broken"
        if family is Family.SIGNED:
            psd = bool(np.linalg.eigvalsh(a)[0] >= -PSD_EIG_TOL)
            if not psd and reason is None:
                reason = "I+B not positive semidefinite"
    elif family is Family.CONJECTURE:
        value = det_ratio(mat)
        bound = bounds.theorem_bound(n)
        margin = bound - value
        if value > bound + VIOLATION_TOL:
            reason = "det J / prod J_ii exceeds bound"
    elif family is Family.LEMMA1:
        value = mat.trace_sq()
        bound = bounds.lemma1_lower(n)
        margin = value - bound
        if value < bound - TRACE_TOL:
            reason = "tr B^2 below n/(n-1)"
        elif value <= bound + EQUALITY_TOL and _max_center_deviation(mat) > EQUALITY_ENTRY_TOL:
            reason = "tr B^2 at the minimum but B is not the extremal matrix"
    else:
        stats = bounds.spectral_stats(mat)
        lower, upper = bounds.gjsw_lower(stats), bounds.gjsw_upper(stats)
        value = determinant(mat)
        margin = min(value - lower, upper - value)
        bound = lower if value - lower < upper - value else upper
        if margin < -VIOLATION_TOL:
            reason = "determinant outside the trace-moment sandwich"

    violation = None
    if reason is not None:
        violation = Violation(index, float(value), float(bound), reason, format_matrix(mat))
    return float(margin), violation, chain_ok, psd


def _max_center_deviation(B: FeasibleMatrix) -> float:
    return float(np.max(np.abs(B.entries - 1.0 / (B.n - 1))))


def _run_chunk(args):
    family, n, cfg, start, stop = args
    worst = math.inf
    worst_index = start
    violations = []
    failures = []
    chain_failures = 0
    psd_all = True
    for i in range(start, stop):
        try:
            margin, violation, chain_ok, psd = _evaluate(family, n, cfg, i)
        except (SinkhornError, ArithmeticError, ValueError) as exc:
            failures.append(SampleFailure(i, str(exc)))
            continue
        if margin < worst:
            worst, worst_index = margin, i
        if violation is not None:
            violations.append(violation)
        if not chain_ok:
            chain_failures += 1
        if psd is False:
            psd_all = False
    return worst, worst_index, violations, failures, chain_failures, psd_all


def _chunks(count: int, jobs: int):
    size = max(1, math.ceil(count / max(1, jobs * 4)))
    return [(s, min(count, s + size)) for s in range(0, count, size)]


def sweep(family, n: int, count: int, seed: int = 0, jobs: int = 1,
          cfg: SampleConfig | None = None) -> VerifyReport:
    """Run ``count`` samples of ``family`` at dimension ``n``."""
    family = Family(family)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if n < _MIN_N[family]:
        raise ValueError(f"{family.value} needs n >= {_MIN_N[family]}, got {n}")
    cfg = replace(cfg, seed=seed) if cfg is not None else SampleConfig(seed=seed)

    t0 = time.perf_counter()
    tasks = [(family, n, cfg, a, b) for a, b in _chunks(count, jobs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]

    worst, worst_index = math.inf, 0
    violations, failures = [], []
    chain_failures = 0
    psd_all = True
    for w, wi, v, f, cf, pa in parts:
        if w < worst or (w == worst and wi < worst_index):
            worst, worst_index = w, wi
        violations.extend(v)
        failures.extend(f)
        chain_failures += cf
        psd_all = psd_all and pa
    violations.sort(key=lambda v: v.index)
    failures.sort(key=lambda f: f.index)

    return VerifyReport(
        family=family.value,
        n=n,
        count=count,
        violations=len(violations),
        worst_margin=worst,
        tightest_sample_seed=int(seed),
        tightest_sample_index=worst_index,
        elapsed=time.perf_counter() - t0,
        chain_failures=chain_failures,
        psd_all=psd_all if family is Family.SIGNED else None,
        failures=failures,
        violation_log=violations,
    )


def verify_theorem(n: int, count: int, seed: int = 0, jobs: int = 1) -> VerifyReport:
    return sweep(Family.THEOREM, n, count, seed, jobs)


def verify_conjecture(n: int, count: int, seed: int = 0, jobs: int = 1) -> VerifyReport:
    return sweep(Family.CONJECTURE, n, count, seed, jobs)


def verify_signed(n: int, count: int, seed: int = 0, jobs: int = 1) -> VerifyReport:
    return sweep(Family.SIGNED, n, count, seed, jobs)


def verify_lemma(which, n: int, count: int, seed: int = 0, jobs: int = 1) -> VerifyReport:
    which = Family(which)
    if which not in (Family.LEMMA1, Family.LEMMA3):
        raise ValueError(f"not a lemma family: {which.value}")
    return sweep(which, n, count, seed, jobs)


def equality_case_probe(B: FeasibleMatrix, tol: float = EQUALITY_TOL) -> bool:
    """True iff tr B^2 sits at its minimum n/(n-1) within ``tol``.

    tr B^2 - n/(n-1) equals the sum of squared deviations from 1/(n-1), so a
    positive probe forces every entry within sqrt(tol) of the centre; that
    consequence is checked with a factor 10 of headroom.
    """
    if tol < 0:
        raise ValueError(f"tolerance must be nonnegative, got {tol}")
    hit = B.trace_sq() <= bounds.lemma1_lower(B.n) + tol
    if hit:
        dev = _max_center_deviation(B)
        if dev > 10.0 * math.sqrt(tol) + 1e-12:
            raise AssertionError(
                f"trace at its minimum but an entry is {dev:.3e} from 1/(n-1)"
            )
    return hit


def write_report(report: VerifyReport, out, manifest: dict | None = None) -> Path:
    """Write the JSON report and, if any, the violating matrices beside it."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    if manifest is not None:
        doc["manifest"] = manifest
    if report.violation_log:
        vdir = out.with_name(out.stem + "_violations")
        vdir.mkdir(exist_ok=True)
        for v in report.violation_log:
            (vdir / f"{report.family}_n{report.n}_i{v.index}.txt").write_text(v.matrix)
    out.write_text(json.dumps(doc, indent=2))
    return out
