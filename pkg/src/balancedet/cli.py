"""balancedet command line.

    balancedet bound --n 5
    balancedet check matrix.txt
    balancedet extremal --n 6 --out ext6.txt      # I + B, the equality case
    balancedet sample --family feasible --n 6 --seed 3 --format json
    balancedet verify --family theorem --n 8 --count 10000 --out report.json
    balancedet minimize --n 5 --starts 32 --out min5.json
    balancedet curve --n 3 --points 101 --out curve.csv

JSON reports embed a manifest (command, parameters, seed, version, times);
``rerun_manifest`` recomputes the numerical result from it. Exit codes: 0 ok,
1 usage or operational error, 2 a bound was violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds, matcore, optlow, sampling, verify

SCHEMA_VERSION = 1
EQUALITY_REL_TOL = 1e-10
EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if x is None:
        return "n/a"
    return f"{x:.17g}"


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int | None = None
    tool_version: str = __version__
    started: str = ""
    finished: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


# --- payloads: pure functions of their parameters ---------------------------

def payload_bound(p: dict) -> dict:
    n = p["n"]
    if n < 2:
        raise UsageError("bound needs n >= 2")
    b = bounds.theorem_bound(n)
    lim = bounds.limit_value()
    return {"n": n, "theorem_bound": b, "lemma1_lower": bounds.lemma1_lower(n),
            "limit": lim, "gap_to_limit": lim - b}


def _sample(family: str, n: int, cfg: sampling.SampleConfig, index: int):
    if family == "feasible":
        return sampling.sample_feasible(n, cfg, index)
    if family == "signed":
        return sampling.sample_signed(n, cfg, index)
    if family == "balanced":
        return sampling.sample_balanced_general(n, cfg, index)
    if family == "psd":
        return sampling.sample_psd(n, cfg, index)
    if family == "extremal":
        return sampling.extremal(n)
    raise UsageError(f"unknown family {family!r}")


def payload_sample(p: dict) -> dict:
    cfg = sampling.SampleConfig(seed=p["seed"], base_law=p.get("base_law", "exponential"))
    out = []
    for k in range(p.get("count", 1)):
        index = p.get("index", 0) + k
        mat = _sample(p["family"], p["n"], cfg, index)
        a = mat.array
        entry = {"index": index, "matrix": matcore.format_matrix(a)}
        if isinstance(mat, sampling.FeasibleMatrix):
            entry["feasibility_residual"] = mat.residual
            entry["det_shifted"] = matcore.determinant(a + np.eye(p["n"]))
        else:
            if p["family"] == "balanced":
                entry["balance_residual"] = float(np.max(np.abs(matcore.delta(a))))
            entry["det"] = matcore.determinant(a)
        out.append(entry)
    return {"family": p["family"], "n": p["n"], "seed": p["seed"], "samples": out}


def payload_verify(p: dict) -> dict:
    rep = verify.sweep(p["family"], p["n"], p["count"], p["seed"], jobs=p.get("jobs", 1))
    d = rep.to_dict()
    d["_elapsed"] = d.pop("elapsed")
    d["proof_backed"] = verify.Family(p["family"]) in verify.PROOF_BACKED
    d["_report"] = rep
    return d


def payload_minimize(p: dict) -> dict:
    cfg = optlow.OptConfig(starts=p["starts"], seed=p["seed"], oracle=p.get("oracle", False))
    res = optlow.minimize_det(p["n"], cfg)
    note = None
    if p["n"] >= 4:
        note = ("minimum over the closed polytope is attained on its boundary; "
                "entries of the witness may vanish, so this does not settle the "
                "strictly positive version of the lower-bound question")
    return {
        "n": res.n,
        "best_value": res.best_value,
        "best_matrix": matcore.format_matrix(res.best_matrix.array),
        "starts": res.starts,
        "iterations_total": res.iterations_total,
        "converged": res.converged,
        "oracle_value": res.oracle_value,
        "oracle_gap": res.oracle_gap,
        "best_start": res.best_start,
        "start_values": res.start_values,
        "theorem_bound": bounds.theorem_bound(res.n),
        "note": note,
    }


def curve_rows(p: dict) -> tuple[list[str], list[list[float]]]:
    points = p["points"]
    if points < 2:
        raise UsageError("curve needs at least 2 points")
    n = p.get("n")
    a = p.get("a")
    if n is not None:
        if n < 2:
            raise UsageError("curve --n needs n >= 2")
        a = math.sqrt(n - 1)
    if a is None or not a > 0:
        raise UsageError("curve needs --a > 0 or --n >= 2")
    ts = np.linspace(0.0, a, points)
    ts[-1] = a
    header = ["t", "f"]
    rows = [[float(t), bounds.envelope_f(float(t), a)] for t in ts]
    if n is not None:
        header += ["s", "g"]
        for r, s in zip(rows, ts):
            r += [float(s), bounds.envelope_g(float(s), n)]
    return header, rows


def payload_curve(p: dict) -> dict:
    header, rows = curve_rows(p)
    return {"header": header, "rows": rows}


PAYLOADS = {
    "bound": payload_bound,
    "sample": payload_sample,
    "verify": payload_verify,
    "minimize": payload_minimize,
    "curve": payload_curve,
}


def numeric_result(payload: dict) -> dict:
    """Drop timing and in-memory objects; what remains must reproduce exactly."""
    return {k: v for k, v in payload.items() if not k.startswith("_")}


def rerun_manifest(manifest: dict) -> dict:
    """Recompute the numerical result recorded under a report's manifest."""
    cmd = manifest["command"]
    if cmd not in PAYLOADS:
        raise UsageError(f"command {cmd!r} has no reproducible payload")
    return numeric_result(PAYLOADS[cmd](dict(manifest["parameters"])))


def _document(manifest: RunManifest, payload: dict) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "manifest": manifest.as_dict(),
           "result": numeric_result(payload)}
    if "_elapsed" in payload:
        doc["timing"] = {"elapsed": payload["_elapsed"]}
    return doc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------

def cmd_bound(args) -> int:
    params = {"n": args.n}
    manifest = RunManifest("bound", params, started=_now())
    res = payload_bound(params)
    manifest.finished = _now()
    if args.format == "json":
        _emit(json.dumps(_document(manifest, res), indent=2) + "\n", args.out)
    else:
        _emit(
            f"n               {res['n']}\n"
            f"theorem_bound   {fmt(res['theorem_bound'])}\n"
            f"lemma1_lower    {fmt(res['lemma1_lower'])}\n"
            f"limit_2_over_e  {fmt(res['limit'])}\n"
            f"gap_to_limit    {fmt(res['gap_to_limit'])}\n",
            args.out,
        )
    return EXIT_OK


def _report_dict(rep: bounds.BoundReport) -> dict:
    d = asdict(rep)
    d["deltas"] = list(rep.deltas)
    d["notes"] = list(rep.notes)
    d["equality"] = _at_equality(rep)
    return d


def _at_equality(rep: bounds.BoundReport) -> bool | None:
    if rep.margin is None:
        return None
    return abs(rep.margin) <= EQUALITY_REL_TOL * max(1.0, rep.theorem_bound)


def cmd_check(args) -> int:
    try:
        J = matcore.read_matrix(args.matrix)
    except (OSError, matcore.MatrixFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    rep = bounds.bound_report(J, tol=args.tol)
    code = EXIT_VIOLATION if rep.within_bound is False or (rep.trace and not rep.trace.chain_ok) else EXIT_OK
    if args.format == "json":
        manifest = RunManifest("check", {"matrix": str(args.matrix), "tol": args.tol}, started=_now(), finished=_now())
        doc = {"schema_version": SCHEMA_VERSION, "manifest": manifest.as_dict(), "result": _report_dict(rep)}
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
        return code

    lines = [
        f"n                 {rep.n}",
        f"deltas            {' '.join(fmt(d) for d in rep.deltas)}",
        f"dominant          {rep.is_dominant}",
        f"balanced          {rep.is_balanced}",
        f"det               {fmt(rep.determinant)}",
        f"det_ratio         {fmt(rep.det_ratio)}",
        f"m                 {fmt(rep.stats.m)}",
        f"s                 {fmt(rep.stats.s)}",
        f"sandwich_lower    {fmt(rep.gjsw_lower)}",
        f"sandwich_upper    {fmt(rep.gjsw_upper)}",
        f"psd_precondition  {rep.psd_precondition}",
        f"sandwich_ok       {rep.sandwich_ok}",
        f"theorem_bound     {fmt(rep.theorem_bound)}",
        f"margin            {fmt(rep.margin)}",
        f"within_bound      {rep.within_bound}",
        f"equality          {_at_equality(rep)}",
    ]
    if rep.trace is not None:
        t = rep.trace
        lines += [
            f"chain.s           {fmt(t.s)}  in [{fmt(t.s_lo)}, {fmt(t.s_hi)}): {t.s_in_interval}",
            f"chain.upper       {fmt(t.gjsw_upper_value)}",
            f"chain.envelope    {fmt(t.envelope_at_s)}",
            f"chain.ok          {t.chain_ok}",
        ]
    lines += [f"note: {note}" for note in rep.notes]
    _emit("\n".join(lines) + "\n", args.out)
    return code


def cmd_extremal(args) -> int:
    if args.n < 2:
        raise UsageError("extremal needs n >= 2")
    b = sampling.extremal(args.n).array
    _emit(matcore.format_matrix(b if args.bare else b + np.eye(args.n)), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    params = {"family": args.family, "n": args.n, "seed": args.seed, "index": args.index,
              "count": args.count, "base_law": args.base_law}
    manifest = RunManifest("sample", params, seed=args.seed, started=_now())
    res = payload_sample(params)
    manifest.finished = _now()
    if args.format == "json":
        _emit(json.dumps(_document(manifest, res), indent=2) + "\n", args.out)
    else:
        _emit("".join(s["matrix"] for s in res["samples"]), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    params = {"family": args.family, "n": args.n, "count": args.count, "seed": args.seed, "jobs": args.jobs}
    manifest = RunManifest("verify", params, seed=args.seed, started=_now())
    res = payload_verify(params)
    manifest.finished = _now()
    rep = res["_report"]
    if args.out:
        out = Path(args.out)
        doc = _document(manifest, res)
        verify.write_report(rep, out, manifest=None)
        out.write_text(json.dumps(doc, indent=2))
    print(
        f"{rep.family} n={rep.n} count={rep.count} violations={rep.violations} "
        f"worst_margin={fmt(rep.worst_margin)} tightest_index={rep.tightest_sample_index} "
        f"chain_failures={rep.chain_failures} psd_all={rep.psd_all} failures={len(rep.failures)} "
        f"elapsed={rep.elapsed:.2f}s"
    )
    for v in rep.violation_log[:5]:
        print(f"  violation index={v.index} value={fmt(v.value)} bound={fmt(v.bound)} ({v.reason})")
    if rep.violations and res["proof_backed"]:
        return EXIT_VIOLATION
    if rep.violations:
        print("  conjecture-form violations are findings; matrices logged in the report")
    if rep.failures:
        for f in rep.failures[:5]:
            print(f"  sample failure index={f.index}: {f.message}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_minimize(args) -> int:
    params = {"n": args.n, "starts": args.starts, "seed": args.seed, "oracle": args.oracle}
    if args.oracle and args.n > 4:
        raise UsageError("--oracle is available for n <= 4")
    manifest = RunManifest("minimize", params, seed=args.seed, started=_now())
    res = payload_minimize(params)
    manifest.finished = _now()
    if args.format == "json" or args.out:
        _emit(json.dumps(_document(manifest, res), indent=2) + "\n", args.out)
    if not args.out or args.format != "json":
        print(f"n={res['n']} best_value={fmt(res['best_value'])} converged={res['converged']} "
              f"starts={res['starts']} iterations={res['iterations_total']} "
              f"oracle={fmt(res['oracle_value'])}")
        print(res["best_matrix"], end="")
        if res["note"]:
            print(f"note: {res['note']}")
    return EXIT_OK


def cmd_curve(args) -> int:
    params = {"points": args.points, "a": args.a, "n": args.n}
    header, rows = curve_rows(params)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=None)
    common.add_argument("--format", choices=["json", "csv", "text"], default="text")

    parser = argparse.ArgumentParser(prog="balancedet", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", parents=[common], help="closed-form bound for dimension n")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("check", parents=[common], help="full report for a matrix file")
    p.add_argument("matrix")
    p.add_argument("--tol", type=float, default=matcore.DEFAULT_TOL)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("extremal", parents=[common], help="print the equality case I + B")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bare", action="store_true", help="print B without the identity")
    p.set_defaults(func=cmd_extremal)

    p = sub.add_parser("sample", parents=[common], help="draw matrices from a family")
    p.add_argument("--family", choices=["feasible", "signed", "balanced", "psd", "extremal"], default="feasible")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--base-law", choices=["uniform", "exponential"], default="exponential")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", parents=[common], help="sweep an inequality over samples")
    p.add_argument("--family", choices=[f.value for f in verify.Family], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=10_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("minimize", parents=[common], help="search for the minimum of det(I+B)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--starts", type=int, default=32)
    p.add_argument("--oracle", action="store_true")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("curve", parents=[common], help="CSV of the envelope functions")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--a", type=float)
    g.add_argument("--n", type=int)
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=cmd_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
