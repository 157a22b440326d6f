"""Scenario pipelines: solve once per (problem, p, resolution), evaluate
functionals and hypotheses, and turn them into verdicts.

Verdicts are formed at the finest resolution; the coarser grids supply the
refinement traces that decide whether a functional is trusted.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from plaplab import bounds
from plaplab.bounds import FAIL, INCONCLUSIVE, PASS, Verdict
from plaplab.config import ScenarioSpec, expand_sweep
from plaplab.errors import ConfigurationError, PlaplabError
from plaplab.functionals import (
    ConditionReport,
    FunctionalEstimate,
    bochner_residual,
    buckling_quotient,
    curvature_condition,
    hf_boundary,
    i_functional,
    identity_residual,
    plate_quotient,
    power_test_function,
)
from plaplab.geometry import TABULATED, DomainSpec, Grid, WeightField, WeightSpec, make_grid, weight_tables
from plaplab.solvers import (
    EigenResult,
    SolverOptions,
    solve_buckling,
    solve_clamped_plate,
    solve_plaplacian_dirichlet,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

PLAPLACIAN = "plaplacian"
PLATE = "plate"
BUCKLING = "buckling"
PROBLEMS = (PLAPLACIAN, PLATE, BUCKLING)

IDENTITY_TOL = 1e-2
TABULATED_FLAG = "tabulated-weight"


def weight_field(spec: WeightSpec, grid: Grid) -> WeightField:
    """Weight tables on ``grid``.

    Tabulated values given on a different uniform grid over the same domain
    are interpolated linearly (so the weight is only C0 between table nodes).
    """
    if spec.form == TABULATED:
        values = np.asarray(spec.params["values"], dtype=float)
        if values.shape != grid.shape:
            if values.ndim != grid.dim or min(values.shape) < 2:
                raise ConfigurationError(
                    f"tabulated weight of shape {values.shape} does not fit a {grid.dim}D domain"
                )
            axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(grid.spec.bounds, values.shape)]
            interp = RegularGridInterpolator(axes, values)
            spec = WeightSpec.tabulated(interp(grid.points().reshape(-1, grid.dim)).reshape(grid.shape))
    return weight_tables(spec, grid)


def solve(problem: str, grid: Grid, w: WeightField, p: float = 2.0,
          opts: SolverOptions | None = None) -> EigenResult:
    """Dispatch to the solver for ``problem``."""
    if problem == PLAPLACIAN:
        return solve_plaplacian_dirichlet(grid, w, p, opts)
    if problem == PLATE:
        return solve_clamped_plate(grid, w, opts)
    if problem == BUCKLING:
        return solve_buckling(grid, w, opts)
    raise ConfigurationError(f"unknown problem {problem!r}; known: {list(PROBLEMS)}")


def richardson_ratios(values) -> list[float]:
    """``(v_i - v_{i+1}) / (v_{i+1} - v_{i+2})``; about 4 for second order."""
    v = list(values)
    out = []
    for a, b, c in zip(v, v[1:], v[2:]):
        out.append((a - b) / (b - c) if b != c else float("inf"))
    return out


@dataclass
class Report:
    """Everything a scenario run produced, in a JSON-friendly layout."""

    scenario: dict
    eigenvalues: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    functionals: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    convergence: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    unexpected: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    cell: dict | None = None

    @property
    def ok(self) -> bool:
        return not self.unexpected

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
        }
        if self.cell is not None:
            out["cell"] = self.cell
        out.update(
            eigenvalues=self.eigenvalues,
            conditions=self.conditions,
            functionals=self.functionals,
            diagnostics=self.diagnostics,
            convergence=self.convergence,
            verdicts=[v.to_dict() for v in self.verdicts],
            errors=self.errors,
            unexpected=self.unexpected,
        )
        if timings:
            out["timings"] = self.timings
        return out


class _Run:
    """Per-scenario state: grids, weights and the solve cache."""

    def __init__(self, spec: ScenarioSpec, report: Report):
        self.spec = spec
        self.report = report
        self.grids = {n: spec.grid(n) for n in spec.resolutions}
        self.weights = {n: weight_field(spec.weight, g) for n, g in self.grids.items()}
        self.cache: dict[tuple, EigenResult | None] = {}
        self.flags = [TABULATED_FLAG] if spec.weight.form == TABULATED else []

    @property
    def finest(self) -> int:
        return self.spec.resolutions[-1]

    def solve(self, problem: str, p: float, n: int) -> EigenResult | None:
        key = (problem, float(p), n)
        if key in self.cache:
            return self.cache[key]
        t0 = time.perf_counter()
        try:
            res = solve(problem, self.grids[n], self.weights[n], p, self.spec.solver)
        except PlaplabError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            log.warning("%s p=%g n=%d failed: %s", problem, p, n, exc)
            self.report.errors.append(
                {"problem": problem, "p": float(p), "resolution": n, "error": str(exc)}
            )
            res = None
        self.report.timings.append(
            {"problem": problem, "p": float(p), "resolution": n,
             "seconds": time.perf_counter() - t0}
        )
        if res is not None:
            self.report.eigenvalues.append({
                "problem": problem,
                "p": float(p),
                "resolution": n,
                "h": self.grids[n].h,
                "lambda": res.lam,
                "residual": res.residual,
                "iterations": res.iterations,
                "converged": res.converged,
                "degraded": res.degraded,
            })
        self.cache[key] = res
        return res

    def trace(self, problem: str, p: float) -> list[EigenResult | None]:
        return [self.solve(problem, p, n) for n in self.spec.resolutions]

    # helpers producing hypothesis reports at the finest resolution

    def condition(self, name: str, u, c: float) -> ConditionReport | None:
        try:
            rep = curvature_condition(u, self.weights[self.finest], c,
                                      tol_cond=self.spec.tol_cond, name=name)
        except PlaplabError as exc:
            self.report.errors.append({"condition": name, "error": str(exc)})
            return None
        self._record(rep, c)
        return rep

    def ric(self) -> ConditionReport:
        return self.condition("Ric_f>=0", None, 0.0)

    def hf(self) -> ConditionReport:
        rep = hf_boundary(self.weights[self.finest], tol_cond=self.spec.tol_cond)
        self._record(rep, None)
        return rep

    def _record(self, rep: ConditionReport, c: float | None):
        row = rep.to_dict()
        if c is not None:
            row["c"] = c
        if row not in self.report.conditions:
            self.report.conditions.append(row)

    def functional(self, name: str, fn: Callable, fields, **meta) -> FunctionalEstimate | None:
        if any(f is None for f in fields):
            return None
        ws = [self.weights[n] for n in self.spec.resolutions]
        try:
            est = fn(fields, ws)
        except PlaplabError as exc:
            self.report.errors.append({"functional": name, "error": str(exc)})
            return None
        self.report.functionals.append({"name": name, **meta, **est.to_dict()})
        return est


def _converged(named: dict[str, EigenResult | None]) -> dict[str, bool]:
    return {k: bool(r is not None and r.converged) for k, r in named.items()}


def _degraded_flags(named: dict[str, EigenResult | None]) -> list[str]:
    return [f"degraded:{k}" for k, r in named.items() if r is not None and r.degraded]


def _lam(r: EigenResult | None) -> float:
    return r.lam if r is not None else float("nan")


def _check_thm11(run: _Run) -> list[Verdict]:
    out = []
    for p in run.spec.p:
        rp, r2p = run.trace(PLAPLACIAN, p), run.trace(PLAPLACIAN, 2 * p)
        fine_p, fine_2p = rp[-1], r2p[-1]
        named = {f"p={p:g}": fine_p, f"p={2 * p:g}": fine_2p}
        if p == 2:
            kw = {"ric": run.ric(), "hf": run.hf()}
        else:
            c = -(p - 1) * (p - 2)
            u = fine_p.u if fine_p is not None else None
            kw = {"cond": run.condition(f"thm11-condition(p={p:g})", u, c) if u is not None else None}
        v = bounds.check_thm11(_lam(fine_p), _lam(fine_2p), p, converged=_converged(named),
                               tol_verdict=run.spec.tol_verdict,
                               flags=run.flags + _degraded_flags(named), **kw)
        v.extra["trace"] = [_lam(b) / _lam(a) ** 2 for a, b in zip(rp, r2p)]
        out.append(v)
    return out


def _check_thm12(run: _Run, case: int) -> list[Verdict]:
    lam, gam, buck = run.trace(PLAPLACIAN, 2.0), run.trace(PLATE, 2.0), run.trace(BUCKLING, 2.0)
    named = {"lambda": lam[-1], "gamma": gam[-1], "Lambda": buck[-1]}
    us = [r.u if r is not None else None for r in lam]
    if case == 1:
        u = us[-1]
        cond = run.condition("thm12-condition(c=-4/3)", u, -4.0 / 3.0) if u is not None else None
        reports = {"thm12-condition(c=-4/3)": cond} if cond is not None else {}
        beta, alpha = 4.0 / 3.0, 2.0 / 3.0
    else:
        reports = {"Ric_f>=0": run.ric(), "H_f>=0": run.hf()}
        beta, alpha = 2.0, 2.0
    phis = [power_test_function(u, beta) if u is not None else None for u in us]
    functionals = {
        f"I(p=2,alpha={alpha:.6g})": run.functional(
            f"I(p=2,alpha={alpha:.6g})", lambda fs, ws: i_functional(fs, 2.0, alpha, ws), us,
            p=2.0, alpha=alpha),
        f"plate(u^{beta:.6g})": run.functional(
            f"plate(u^{beta:.6g})", plate_quotient, phis, beta=beta),
        f"buckling(u^{beta:.6g})": run.functional(
            f"buckling(u^{beta:.6g})", buckling_quotient, phis, beta=beta),
    }
    missing = [k for k, v in functionals.items() if v is None]
    functionals = {k: v for k, v in functionals.items() if v is not None}
    converged = _converged(named)
    converged.update({f"functional:{k}": False for k in missing})
    if not reports:
        reports = {"thm12-condition(c=-4/3)": ConditionReport(
            "thm12-condition(c=-4/3)", float("nan"), run.spec.tol_cond, ())}
    verdicts = bounds.check_thm12(_lam(lam[-1]), _lam(gam[-1]), _lam(buck[-1]), case,
                                  reports, functionals, converged=converged,
                                  tol_verdict=run.spec.tol_verdict,
                                  flags=run.flags + _degraded_flags(named))
    traces = (
        [_lam(g) / _lam(a) ** 2 for a, g in zip(lam, gam)],
        [_lam(b) / _lam(a) for a, b in zip(lam, buck)],
    )
    for v, t in zip(verdicts, traces):
        v.extra["trace"] = t
    return verdicts


def _check_prop21(run: _Run) -> list[Verdict]:
    out = []
    for p in run.spec.p:
        rs = run.trace(PLAPLACIAN, p)
        us = [r.u if r is not None else None for r in rs]
        for alpha in run.spec.alpha:
            name = f"I(p={p:g},alpha={alpha:.6g})"
            est = run.functional(name, lambda fs, ws: i_functional(fs, p, alpha, ws), us,
                                 p=p, alpha=alpha)
            named = {f"p={p:g}": rs[-1]}
            converged = _converged(named)
            if est is None:
                est = FunctionalEstimate(float("nan"), "convergent", ())
                converged[f"functional:{name}"] = False
            kw = {}
            if abs(alpha - 2 * (p - 1)) < bounds.DEGENERACY_TOL:
                kw = {"ric": run.ric(), "hf": run.hf()}
            elif us[-1] is not None:
                c = (p - 1) * (alpha - 2 * p + 2)
                kw = {"cond": run.condition(f"prop21-condition(p={p:g},alpha={alpha:.6g})", us[-1], c)}
            v = bounds.check_prop21(est, _lam(rs[-1]), p, alpha, converged=converged,
                                    tol_verdict=run.spec.tol_verdict,
                                    flags=run.flags + _degraded_flags(named), **kw)
            v.extra["trace"] = [val / _lam(r) for val, r in zip(est.refinement_trace, rs)]
            out.append(v)
    return out


def _diagnostic_verdict(claim: str, lhs: float, rhs: float, ok: bool, converged: bool,
                        flags, extra: dict) -> Verdict:
    margin = (rhs - lhs) / rhs if rhs else float("nan")
    if not converged:
        outcome = INCONCLUSIVE
        flags = list(flags) + ["unconverged"]
    else:
        outcome = PASS if ok else FAIL
    return Verdict(claim=claim, hypotheses={}, lhs=lhs, rhs=rhs, margin=margin,
                   outcome=outcome, flags=tuple(flags), extra=extra)


def _check_identities(run: _Run) -> list[Verdict]:
    out = []
    for p in run.spec.p:
        rs = run.trace(PLAPLACIAN, p)
        for alpha in run.spec.alpha:
            res = [
                identity_residual(r.u, r.lam, p, alpha, run.weights[n]) if r is not None else float("nan")
                for r, n in zip(rs, run.spec.resolutions)
            ]
            ratios = [a / b if b else float("inf") for a, b in zip(res, res[1:])]
            run.report.diagnostics.append({
                "name": "identity", "p": p, "alpha": alpha,
                "resolutions": list(run.spec.resolutions), "residuals": res, "ratios": ratios,
            })
            ok = bool(np.isfinite(res[-1]) and res[-1] <= IDENTITY_TOL)
            out.append(_diagnostic_verdict(
                "identity", res[-1], IDENTITY_TOL, ok, all(r is not None and r.converged for r in rs),
                run.flags, {"p": p, "alpha": alpha, "lambda_p": _lam(rs[-1]), "trace": res},
            ))
    return out


def _check_bochner(run: _Run) -> list[Verdict]:
    rs = run.trace(PLAPLACIAN, 2.0)
    sups, excluded = [], []
    for r, n in zip(rs, run.spec.resolutions):
        if r is None:
            sups.append(float("nan"))
            excluded.append(0)
            continue
        b = bochner_residual(r.u, run.weights[n], 2.0)
        sups.append(b.sup)
        excluded.append(b.excluded)
    run.report.diagnostics.append({
        "name": "bochner", "p": 2.0, "resolutions": list(run.spec.resolutions),
        "sup_residuals": sups, "excluded_nodes": excluded,
    })
    ok = bool(np.all(np.isfinite(sups)) and all(b < a for a, b in zip(sups, sups[1:])))
    return [_diagnostic_verdict(
        "bochner", sups[-1], sups[0], ok, all(r is not None and r.converged for r in rs),
        run.flags, {"p": 2.0, "lambda_p": _lam(rs[-1]), "trace": sups},
    )]


_CHECKS = {
    "thm11": _check_thm11,
    "thm12-case1": lambda run: _check_thm12(run, 1),
    "thm12-case2": lambda run: _check_thm12(run, 2),
    "prop21": _check_prop21,
    "identities": _check_identities,
    "bochner": _check_bochner,
}


def _convergence_rows(run: _Run) -> list[dict]:
    rows = []
    keys = sorted({(prob, p) for prob, p, _ in run.cache})
    for prob, p in keys:
        vals = [_lam(run.cache.get((prob, p, n))) for n in run.spec.resolutions]
        rows.append({
            "problem": prob,
            "p": p,
            "resolutions": list(run.spec.resolutions),
            "h": [run.grids[n].h for n in run.spec.resolutions],
            "values": vals,
            "richardson": richardson_ratios(vals),
        })
    return rows


def _mark_unexpected(spec: ScenarioSpec, report: Report) -> None:
    for v in report.verdicts:
        expected = spec.expected(v.claim)
        if expected is not None and v.outcome != expected:
            report.unexpected.append(f"{v.claim}: expected {expected}, got {v.outcome}")
        elif expected is None and v.outcome == FAIL:
            report.unexpected.append(f"{v.claim}: fail")


def run_scenario(spec: ScenarioSpec) -> Report:
    """Run every check of ``spec``; verdicts come from the finest resolution."""
    report = Report(scenario=spec.echo())
    run = _Run(spec, report)
    for check in spec.checks:
        report.verdicts.extend(_CHECKS[check](run))
    report.convergence = _convergence_rows(run)
    _mark_unexpected(spec, report)
    return report


def convergence(spec: ScenarioSpec, problems=PROBLEMS) -> Report:
    """Refinement study of the eigenvalues alone (no checks)."""
    report = Report(scenario=spec.echo())
    run = _Run(spec, report)
    for prob in problems:
        if prob == PLAPLACIAN:
            for p in spec.p:
                run.trace(PLAPLACIAN, p)
        else:
            run.trace(prob, 2.0)
    report.convergence = _convergence_rows(run)
    return report


def solve_one(domain: DomainSpec, weight: WeightSpec, problem: str, p: float = 2.0,
              opts: SolverOptions | None = None) -> tuple[EigenResult, Grid]:
    grid = make_grid(domain)
    return solve(problem, grid, weight_field(weight, grid), p, opts), grid


def _run_cell(args) -> Report:
    index, params, spec = args
    if isinstance(spec, Exception):
        report = Report(scenario={}, cell={"index": index, "params": params})
        report.errors.append({"cell": index, "error": str(spec)})
        report.unexpected.append(f"cell {index}: {spec}")
        return report
    try:
        report = run_scenario(spec)
    except Exception as exc:  # isolate any failure to its own cell
        report = Report(scenario=spec.echo())
        report.errors.append({"cell": index, "error": f"{type(exc).__name__}: {exc}"})
        report.unexpected.append(f"cell {index}: {type(exc).__name__}: {exc}")
    report.cell = {"index": index, "params": params}
    return report


def sweep(doc: dict, jobs: int = 1, overrides: Callable | None = None) -> list[Report]:
    """One report per cell of the document's ``[sweep]`` ranges, in cell order."""
    cells = expand_sweep(doc)
    tasks = []
    for i, (params, spec) in enumerate(cells):
        if overrides is not None and not isinstance(spec, Exception):
            spec = overrides(spec)
        tasks.append((i, params, spec))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell, tasks))
    return [_run_cell(t) for t in tasks]
