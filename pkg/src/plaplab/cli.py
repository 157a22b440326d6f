"""Command-line interface.

Subcommands::

    plaplab solve        one eigenproblem on one grid
    plaplab check        run scenario files (or bundled scenarios by name)
    plaplab sweep        run the cartesian [sweep] ranges of a scenario file
    plaplab convergence  eigenvalue refinement study for a scenario
    plaplab scenarios    list the bundled scenarios

Exit codes: 0 when every verdict is pass, or matches its expected outcome, or
is an un-annotated inconclusive; 1 when any verdict is unexpected; 2 on
configuration or output errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from plaplab import __version__
from plaplab.config import load_document, load_scenario, with_overrides
from plaplab.emit import SIGNIFICANT_DIGITS, emit, _jsonable
from plaplab.errors import ConfigurationError, ParameterError
from plaplab.geometry import DomainSpec, WeightSpec
from plaplab.harness import PROBLEMS, SCHEMA_VERSION, convergence, run_scenario, solve_one, sweep
from plaplab.solvers import SolverOptions

EXIT_OK, EXIT_UNEXPECTED, EXIT_CONFIG = 0, 1, 2


def bundled_scenarios() -> dict[str, Path]:
    """Bundled scenario names mapped to their files."""
    root = resources.files("plaplab") / "scenarios"
    return {
        Path(str(p)).stem: Path(str(p))
        for p in sorted(root.iterdir(), key=lambda q: q.name)
        if p.name.endswith(".toml")
    }


def resolve_scenario(ref: str) -> Path:
    """A path to an existing file, or the name of a bundled scenario."""
    path = Path(ref)
    if path.is_file():
        return path
    bundled = bundled_scenarios()
    if ref in bundled:
        return bundled[ref]
    raise ConfigurationError(
        f"no scenario file {ref!r} and no bundled scenario of that name "
        f"(bundled: {', '.join(bundled)})"
    )


def parse_domain(text: str, n: int) -> DomainSpec:
    """``interval:a,b`` or ``rectangle:ax,bx,ay,by``."""
    kind, _, rest = text.partition(":")
    try:
        vals = [float(x) for x in rest.split(",")] if rest else []
    except ValueError:
        raise ConfigurationError(f"bad domain bounds in {text!r}") from None
    if kind == "interval":
        vals = vals or [0.0, 1.0]
        if len(vals) != 2:
            raise ConfigurationError("interval needs 2 bounds")
        return DomainSpec.interval(*vals, n)
    if kind == "rectangle":
        vals = vals or [0.0, 1.0, 0.0, 1.0]
        if len(vals) != 4:
            raise ConfigurationError("rectangle needs 4 bounds")
        return DomainSpec.rectangle(*vals, n)
    raise ConfigurationError(f"unknown domain kind {kind!r}")


def parse_weight(text: str) -> WeightSpec:
    """``zero``, ``linear:a=2`` (``a=1;0`` in 2D) or ``quadratic:c=1,x0=0.5``."""
    form, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        try:
            nums = [float(v) for v in val.split(";")]
        except ValueError:
            raise ConfigurationError(f"bad weight parameter {item!r}") from None
        params[key.strip()] = nums[0] if len(nums) == 1 else nums
    if form == "tabulated":
        raise ConfigurationError("tabulated weights are only available in scenario files")
    return WeightSpec(form, params)


def _common(parser: argparse.ArgumentParser, fmt_default: str = "json"):
    parser.add_argument("--format", choices=("json", "csv"), default=fmt_default)
    parser.add_argument("--out", help="write the report here instead of stdout")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--tol", type=float, help="override the solver tolerance")
    parser.add_argument("--timings", action="store_true",
                        help="include wall-clock times in JSON (breaks byte-identity)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plaplab",
        description="First eigenvalues of weighted p-Laplacian, plate and buckling "
                    "problems, and checks of eigenvalue inequalities.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one eigenproblem")
    s.add_argument("--problem", choices=PROBLEMS, default="plaplacian")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--domain", default="interval:0,1",
                   help="interval:a,b or rectangle:ax,bx,ay,by")
    s.add_argument("--n", type=int, default=129, help="nodes per axis")
    s.add_argument("--weight", default="zero",
                   help="zero | linear:a=2 | quadratic:c=1,x0=0.5")
    s.add_argument("--field", action="store_true", help="include the eigenfunction in JSON")
    _common(s)

    c = sub.add_parser("check", help="run scenarios")
    c.add_argument("scenarios", nargs="*", help="scenario files or bundled names")
    c.add_argument("--bundled", action="store_true", help="run every bundled scenario")
    _common(c)

    w = sub.add_parser("sweep", help="run the [sweep] cells of a scenario file")
    w.add_argument("scenario")
    w.add_argument("--jobs", type=int, default=1)
    _common(w)

    v = sub.add_parser("convergence", help="eigenvalue refinement study")
    v.add_argument("scenario")
    v.add_argument("--problem", action="append", choices=PROBLEMS,
                   help="problem to study (repeatable); default all")
    _common(v)

    sub.add_parser("scenarios", help="list bundled scenarios")
    return ap


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)


def _cmd_solve(args) -> int:
    opts = SolverOptions(tol=args.tol or SolverOptions.tol, seed=args.seed or 0)
    domain = parse_domain(args.domain, args.n)
    weight = parse_weight(args.weight)
    res, grid = solve_one(domain, weight, args.problem, args.p, opts)
    row = {"schema_version": SCHEMA_VERSION, "domain": args.domain, "resolution": args.n,
           "weight": weight.describe(), **res.summary(),
           "normalization": res.normalization}
    if args.format == "json":
        if args.field:
            row["coords"] = [c for c in grid.coords]
            row["u"] = res.u
        text = json.dumps(_jsonable(row), indent=2, allow_nan=False) + "\n"
    else:
        cols = ["problem", "p", "resolution", "lambda", "residual", "iterations",
                "converged", "degraded"]
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(cols)
        wr.writerow([format(row[k], f".{SIGNIFICANT_DIGITS}g")
                     if isinstance(row[k], float) else row[k] for k in cols])
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    _write(text, args.out)
    return EXIT_OK if res.converged else EXIT_UNEXPECTED


def _overrides(args):
    return lambda spec: with_overrides(spec, seed=args.seed, tol=args.tol)


def _cmd_check(args) -> int:
    refs = list(args.scenarios)
    if args.bundled:
        refs += [name for name, path in bundled_scenarios().items()
                 if "sweep" not in load_document(path)]
    if not refs:
        raise ConfigurationError("give scenario files/names or --bundled")
    specs = [_overrides(args)(load_scenario(resolve_scenario(r))) for r in refs]
    reports = [run_scenario(s) for s in specs]
    payload = reports[0] if len(reports) == 1 else reports
    _write(emit(payload, args.format, args.out, timings=args.timings), args.out)
    for r in reports:
        for msg in r.unexpected:
            logging.getLogger("plaplab").error("%s: %s", r.scenario.get("name"), msg)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_UNEXPECTED


def _cmd_sweep(args) -> int:
    doc = load_document(resolve_scenario(args.scenario))
    reports = sweep(doc, jobs=args.jobs, overrides=_overrides(args))
    _write(emit(reports, args.format, args.out, timings=args.timings, key="cells"), args.out)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_UNEXPECTED


def _convergence_csv(report) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["problem", "p", "resolution", "h", "value", "richardson"])
    for row in report.convergence:
        ratios = [None, None] + list(row["richardson"])
        for n, h, val, rr in zip(row["resolutions"], row["h"], row["values"], ratios):
            wr.writerow([row["problem"], format(row["p"], ".12g"), n, format(h, ".12g"),
                         format(val, ".12g"), "" if rr is None else format(rr, ".12g")])
    return buf.getvalue()


def _cmd_convergence(args) -> int:
    spec = _overrides(args)(load_scenario(resolve_scenario(args.scenario)))
    report = convergence(spec, tuple(args.problem or PROBLEMS))
    if args.format == "csv":
        text = _convergence_csv(report)
        if args.out:
            Path(args.out).write_text(text)
    else:
        text = emit(report, "json", args.out, timings=args.timings)
    _write(text, args.out)
    return EXIT_OK if not report.errors else EXIT_UNEXPECTED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "scenarios":
            for name, path in bundled_scenarios().items():
                print(f"{name}\t{path}")
            return EXIT_OK
        return {
            "solve": _cmd_solve,
            "check": _cmd_check,
            "sweep": _cmd_sweep,
            "convergence": _cmd_convergence,
        }[args.command](args)
    except (ConfigurationError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
