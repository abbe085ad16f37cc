"""Command-line front end.

Subcommands: integrate, measure, very-small, fubini-check, nl-check,
equivalence-report.  Reports are emitted as JSON (default), CSV (the
convergence rows, for plotting) or a plain table.  Exit codes encode the
three-valued verdict so shell pipelines can branch on integrability:

    0   integrable / verified / contained / overlapping
    2   undecided (cap reached before the tolerance was met)
    1   domain, precondition or internal errors (and CRITICAL
        fubini inconsistencies)
    64  malformed invocations and unparsable inputs

Thread count comes from --threads or the DYADINT_THREADS environment
variable; output bytes are identical for any thread count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .bridge import default_schedule, equivalence_report
from .calculus import fubini_check, newton_leibniz_check
from .errors import DimensionError, DyadintError, ParseError
from .geometry import parse_box
from .integrate import (
    SCHEMA,
    DyadicSumReport,
    integrate,
    is_very_small,
    jordan_measure,
)
from .oracles import from_expr, parse_oracle, region_from_box, region_from_json

_EX_OK = 0
_EX_ERROR = 1
_EX_UNDECIDED = 2
_EX_USAGE = 64


@dataclass
class JobSpec:
    """One validated CLI job; invalid specs never reach execution."""

    command: str
    output: str
    threads: int
    epsilon: float
    k_max: Optional[int]
    strategy: str
    seed: int
    options: dict


def _threads_from(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("DYADINT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParseError(f"DYADINT_THREADS is not an integer: {env!r}")
    return 1


def _load_region(text: str, dim: Optional[int]):
    stripped = text.strip()
    if stripped.startswith("{"):
        region = region_from_json(stripped)
    elif stripped.startswith(("[", "(")):
        region = region_from_box(parse_box(stripped))
    else:
        region = region_from_json(Path(stripped).read_text())
    if dim is not None and region.dim != dim:
        raise DimensionError(f"region has dimension {region.dim}, --dim says {dim}")
    return region


def _report_payload(report: DyadicSumReport, output: str) -> str:
    if output == "csv":
        return report.to_csv()
    if output == "table":
        lines = [f"{'k':>4} {'L':>24} {'U':>24} {'cubes':>10}"]
        for r in report.rows:
            lines.append(f"{r.k:>4} {r.lower!r:>24} {r.upper!r:>24} {r.cubes:>10}")
        v = report.verdict
        lines.append(f"verdict: {v.status}"
                     + (f" enclosure={list(v.enclosure)}" if v.enclosure else "")
                     + (f" gap={v.gap!r}" if v.gap is not None else ""))
        lines.append(f"pad: {report.pad!r}")
        return "\n".join(lines) + "\n"
    return report.to_json_str() + "\n"


def _verdict_exit(report: DyadicSumReport) -> int:
    return _EX_OK if report.verdict.status == "integrable" else _EX_UNDECIDED


def run(job: JobSpec) -> tuple[int, str]:
    """Execute a validated job; returns (exit_code, payload text)."""
    opt = job.options
    if job.command == "integrate":
        if "oracle" in opt:
            oracle = parse_oracle(opt["oracle"])
        else:
            oracle = from_expr(opt["expr"], opt["support"])
        report = integrate(oracle, job.epsilon, job.k_max, job.strategy, job.threads)
        return _verdict_exit(report), _report_payload(report, job.output)

    if job.command == "measure":
        report = jordan_measure(
            opt["region"], job.epsilon, job.k_max, job.strategy, job.threads
        )
        return _verdict_exit(report), _report_payload(report, job.output)

    if job.command == "very-small":
        result = is_very_small(opt["region"], job.epsilon, job.k_max, job.threads)
        code = _EX_OK if result.verdict else _EX_UNDECIDED
        if job.output == "json":
            return code, json.dumps(result.to_json()) + "\n"
        return code, _report_payload(result.report, job.output)

    if job.command == "nl-check":
        check = newton_leibniz_check(
            opt["g"], opt["F"], opt["a"], opt["b"], job.epsilon, job.k_max, job.threads
        )
        code = _EX_OK if check.contained else _EX_UNDECIDED
        if job.output == "json":
            return code, json.dumps(check.to_json()) + "\n"
        return code, _report_payload(check.report, job.output)

    if job.command == "fubini-check":
        fr = fubini_check(
            opt["expr"],
            box=opt.get("box"),
            u=opt.get("u"),
            v=opt.get("v"),
            a=opt.get("a"),
            b=opt.get("b"),
            epsilon=job.epsilon,
            k_max=job.k_max,
            threads=job.threads,
        )
        if fr.critical:
            code = _EX_ERROR
        elif fr.both_integrable and fr.overlap:
            code = _EX_OK
        else:
            code = _EX_UNDECIDED
        if job.output == "json":
            return code, json.dumps(fr.to_json()) + "\n"
        return code, _report_payload(fr.direct_report, job.output)

    if job.command == "equivalence-report":
        oracle = from_expr(opt["expr"], opt["support"])
        schedule = default_schedule(
            oracle.support,
            max_cells=opt["max_cells"],
            n_random=opt["random_partitions"],
            seed=job.seed,
        )
        rep = equivalence_report(
            oracle, k_max=job.k_max if job.k_max is not None else 10,
            schedule=schedule, threads=job.threads,
        )
        code = _EX_OK if rep.mutual_overlap else _EX_ERROR
        if job.output == "json":
            return code, json.dumps(rep.to_json()) + "\n"
        lines = ["family,k_or_cells,L,U"]
        for r in rep.semiclosed:
            lines.append(f"semiclosed,{r.k},{r.lower!r},{r.upper!r}")
        for r in rep.closed:
            lines.append(f"closed,{r.k},{r.lower!r},{r.upper!r}")
        for c, l, u in rep.classical:
            lines.append(f"classical,{c},{l!r},{u!r}")
        return code, "\n".join(lines) + "\n"

    raise ParseError(f"unknown command {job.command!r}")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dyadint",
        description="Validated Riemann integration on dyadic cubes.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, strategy=True):
        sp.add_argument("--eps", type=float, default=1e-6,
                        help="target gap tolerance (default 1e-6)")
        sp.add_argument("--k-max", type=int, default=None,
                        help="refinement cap (default depends on dimension)")
        if strategy:
            sp.add_argument("--strategy", choices=("adaptive", "uniform"),
                            default="adaptive")
        sp.add_argument("--output", choices=("json", "csv", "table"), default="json")
        sp.add_argument("--threads", type=int, default=None,
                        help="evaluation threads (env DYADINT_THREADS)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("integrate", help="integrate an expression over a box")
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--expr", default=None)
    sp.add_argument("--support", default=None,
                    help="box literal, e.g. '[0,1)x[0,1)'")
    sp.add_argument("--oracle", default=None,
                    help="oracle pipeline, e.g. 'abs(expr(x1, [-1,1)))'")
    common(sp)

    sp = sub.add_parser("measure", help="Jordan measure of a region")
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--region", required=True,
                    help="region JSON (file or inline) or a box literal")
    common(sp)

    sp = sub.add_parser("very-small", help="is the region Jordan-null?")
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--region", required=True)
    common(sp, strategy=False)

    sp = sub.add_parser("nl-check", help="Newton-Leibniz containment check")
    sp.add_argument("--g", required=True, help="integrand g(x1)")
    sp.add_argument("--F", required=True, help="candidate antiderivative F(x1)")
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--b", type=float, required=True)
    common(sp, strategy=False)

    sp = sub.add_parser("fubini-check",
                        help="direct vs repeated integral cross-check")
    sp.add_argument("--expr", required=True)
    sp.add_argument("--box", default=None, help="2-D box literal domain")
    sp.add_argument("--region", default=None,
                    help="region JSON carrying a y_simple block")
    sp.add_argument("--a", type=float, default=None)
    sp.add_argument("--b", type=float, default=None)
    sp.add_argument("--u", default=None)
    sp.add_argument("--v", default=None)
    common(sp, strategy=False)

    sp = sub.add_parser("equivalence-report",
                        help="semiclosed vs closed vs classical brackets")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--expr", required=True)
    sp.add_argument("--support", required=True)
    sp.add_argument("--max-cells", type=int, default=4096)
    sp.add_argument("--random-partitions", type=int, default=3)
    common(sp, strategy=False)
    return p


def _jobspec_from(args) -> JobSpec:
    threads = _threads_from(args)
    options: dict = {}
    if args.command == "integrate":
        if args.oracle is not None:
            options = {"oracle": args.oracle}
        else:
            if args.expr is None or args.support is None or args.dim is None:
                raise ParseError("integrate needs --dim/--expr/--support or --oracle")
            if args.dim < 1:
                raise ParseError("--dim must be >= 1")
            support = parse_box(args.support)
            if support.dim != args.dim:
                raise DimensionError(
                    f"support has dimension {support.dim}, --dim says {args.dim}"
                )
            options = {"expr": args.expr, "support": support}
    elif args.command in ("measure", "very-small"):
        options = {"region": _load_region(args.region, args.dim)}
    elif args.command == "nl-check":
        options = {"g": args.g, "F": args.F, "a": args.a, "b": args.b}
    elif args.command == "fubini-check":
        options = {"expr": args.expr}
        if args.box is not None:
            options["box"] = args.box
        elif args.region is not None:
            text = args.region.strip()
            obj = json.loads(text if text.startswith("{")
                             else Path(text).read_text())
            ys = obj.get("y_simple")
            if ys is None:
                if obj.get("constraints"):
                    raise ParseError(
                        "fubini-check needs a y_simple block or a box region"
                    )
                options["box"] = obj["bbox"]
            else:
                options.update(
                    a=float(ys["a"]), b=float(ys["b"]), u=ys["u"], v=ys["v"]
                )
        elif None not in (args.a, args.b, args.u, args.v):
            options.update(a=args.a, b=args.b, u=args.u, v=args.v)
        else:
            raise ParseError("fubini-check needs --box, --region, or --a/--b/--u/--v")
    elif args.command == "equivalence-report":
        support = parse_box(args.support)
        if support.dim != args.dim:
            raise DimensionError(
                f"support has dimension {support.dim}, --dim says {args.dim}"
            )
        options = {
            "expr": args.expr,
            "support": support,
            "max_cells": args.max_cells,
            "random_partitions": args.random_partitions,
        }
    return JobSpec(
        command=args.command,
        output=args.output,
        threads=threads,
        epsilon=args.eps,
        k_max=args.k_max,
        strategy=getattr(args, "strategy", "adaptive"),
        seed=args.seed,
        options=options,
    )


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(
        json.dumps({"schema": SCHEMA, "error": {"type": kind, "message": message}})
        + "\n"
    )


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return _EX_USAGE if e.code not in (0, None) else 0
    try:
        job = _jobspec_from(args)
    except ParseError as e:
        _emit_error("parse", str(e))
        return _EX_USAGE
    except (DyadintError, OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        _emit_error(type(e).__name__, str(e))
        return _EX_ERROR
    try:
        code, payload = run(job)
    except ParseError as e:
        _emit_error("parse", str(e))
        return _EX_USAGE
    except DyadintError as e:
        _emit_error(type(e).__name__, str(e))
        return _EX_ERROR
    sys.stdout.write(payload)
    return code


if __name__ == "__main__":
    sys.exit(main())
