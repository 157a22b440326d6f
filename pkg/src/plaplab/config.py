"""Scenario files: TOML documents describing one verification run.

A scenario names a domain, a weight, exponent lists, the resolutions of the
refinement study and the checks to run.  Example::

    name = "interval-thm12-case2"
    checks = ["thm12-case2"]
    p = [2.0]
    resolutions = [129, 257, 513]
    seed = 0

    [domain]
    kind = "interval"
    bounds = [0.0, 1.0]

    [weight]
    form = "quadratic"
    c = 1.0
    x0 = 0.5

    [solver]
    tol = 1e-8

    [expect]
    "thm12.plate" = "pass"

An optional ``[sweep]`` table maps ``p``, ``alpha``, ``beta`` or
``weight.<param>`` to lists of values; see :func:`expand_sweep`.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from plaplab.bounds import DEFAULT_TOL_VERDICT, FAIL, INCONCLUSIVE, PASS
from plaplab.errors import ConfigurationError
from plaplab.functionals import DEFAULT_TOL_COND
from plaplab.geometry import (
    INTERVAL,
    MIN_RESOLUTION,
    RECTANGLE,
    TABULATED,
    DomainSpec,
    Grid,
    WeightSpec,
    make_grid,
)
from plaplab.solvers import SolverOptions

CHECKS = ("thm11", "thm12-case1", "thm12-case2", "prop21", "identities", "bochner")
OUTCOMES = (PASS, FAIL, INCONCLUSIVE)
MAX_SWEEP_CELLS = 10_000
WILDCARD = "*"

_TOP_KEYS = {"name", "checks", "p", "alpha", "beta", "resolutions", "seed",
             "tol_verdict", "tol_cond", "domain", "weight", "solver", "expect", "sweep"}


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Validated scenario.  ``resolutions`` are node counts per axis."""

    name: str
    domain: DomainSpec
    weight: WeightSpec
    p: tuple[float, ...]
    alpha: tuple[float, ...]
    resolutions: tuple[int, ...]
    checks: tuple[str, ...]
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 0
    tol_verdict: float = DEFAULT_TOL_VERDICT
    tol_cond: float = DEFAULT_TOL_COND
    expect: dict = field(default_factory=dict)

    def __post_init__(self):
        validate(self)

    def expected(self, claim: str) -> str | None:
        return self.expect.get(claim, self.expect.get(WILDCARD))

    def grid(self, n: int) -> Grid:
        return make_grid(self.domain.with_resolution(n))

    def echo(self) -> dict:
        """JSON-friendly description of the scenario."""
        return {
            "name": self.name,
            "domain": {"kind": self.domain.kind,
                       "bounds": [list(b) for b in self.domain.bounds]},
            "weight": self.weight.describe(),
            "p": list(self.p),
            "alpha": list(self.alpha),
            "resolutions": list(self.resolutions),
            "checks": list(self.checks),
            "solver": {
                "tol": self.solver.tol,
                "max_outer": self.solver.max_outer,
                "max_inner": self.solver.max_inner,
                "eps": self.solver.eps,
                "inner_tol": self.solver.inner_tol,
            },
            "seed": self.seed,
            "tol_verdict": self.tol_verdict,
            "tol_cond": self.tol_cond,
            "expect": dict(self.expect),
        }


def validate(spec: ScenarioSpec) -> None:
    res = spec.resolutions
    if len(res) < 3:
        raise ConfigurationError("a refinement study needs at least 3 resolutions")
    if any(b <= a for a, b in zip(res, res[1:])):
        raise ConfigurationError("resolutions must be strictly increasing")
    if res[0] < MIN_RESOLUTION:
        raise ConfigurationError(f"resolutions must be at least {MIN_RESOLUTION} nodes per axis")
    unknown = set(spec.checks) - set(CHECKS)
    if unknown:
        raise ConfigurationError(f"unknown checks {sorted(unknown)}; known: {list(CHECKS)}")
    if any(not p > 1 for p in spec.p):
        raise ConfigurationError("every exponent p must exceed 1")
    needs_two = {"thm12-case1", "thm12-case2", "bochner"} & set(spec.checks)
    if needs_two and 2.0 not in spec.p:
        raise ConfigurationError(f"checks {sorted(needs_two)} need p = 2 in the p list")
    if {"thm11", "prop21", "identities"} & set(spec.checks) and not spec.p:
        raise ConfigurationError("the p list is empty")
    if {"prop21", "identities"} & set(spec.checks) and not spec.alpha:
        raise ConfigurationError("checks prop21/identities need an alpha (or beta) list")
    if "identities" in spec.checks and any(a <= 0 for a in spec.alpha):
        raise ConfigurationError("identity checks need alpha > 0")
    for claim, outcome in spec.expect.items():
        if outcome not in OUTCOMES:
            raise ConfigurationError(f"expected outcome for {claim!r} must be one of {OUTCOMES}")
    if not spec.tol_verdict >= 0 or not spec.tol_cond >= 0:
        raise ConfigurationError("tolerances must be non-negative")


def _floats(value, key: str) -> tuple[float, ...]:
    vals = value if isinstance(value, list) else [value]
    try:
        return tuple(float(v) for v in vals)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key!r} must be a number or a list of numbers") from None


def _domain(table: dict) -> DomainSpec:
    kind = table.get("kind")
    bounds = table.get("bounds")
    n = MIN_RESOLUTION
    try:
        if kind == INTERVAL:
            a, b = (float(x) for x in bounds)
            return DomainSpec.interval(a, b, n)
        if kind == RECTANGLE:
            ax, bx, ay, by = (float(x) for x in bounds)
            return DomainSpec.rectangle(ax, bx, ay, by, n)
    except (TypeError, ValueError):
        raise ConfigurationError(f"bad bounds {bounds!r} for domain kind {kind!r}") from None
    raise ConfigurationError(f"domain kind must be {INTERVAL!r} or {RECTANGLE!r}, got {kind!r}")


def _weight(table: dict) -> WeightSpec:
    table = dict(table)
    form = table.pop("form", "zero")
    if form == TABULATED:
        values = np.asarray(table.pop("values", None), dtype=float)
        if values.ndim == 0 or values.size == 0:
            raise ConfigurationError("tabulated weight needs a non-empty 'values' array")
        return WeightSpec.tabulated(values)
    return WeightSpec(form, table)


def _expect(value) -> dict:
    if value is None:
        return {}
    if isinstance(value, str):
        return {WILDCARD: value}
    if isinstance(value, dict):
        return {str(k): str(v) for k, v in value.items()}
    raise ConfigurationError("'expect' must be an outcome or a table claim -> outcome")


def _solver(table: dict, seed: int) -> SolverOptions:
    allowed = {"tol", "max_outer", "max_inner", "eps", "inner_tol"}
    extra = set(table) - allowed
    if extra:
        raise ConfigurationError(f"unknown solver options {sorted(extra)}")
    try:
        return SolverOptions(**table, seed=seed)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def spec_from_dict(doc: dict[str, Any]) -> ScenarioSpec:
    """Build a :class:`ScenarioSpec` from a parsed scenario document."""
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown scenario keys {sorted(unknown)}")
    if "domain" not in doc:
        raise ConfigurationError("scenario needs a [domain] table")
    if "alpha" in doc and "beta" in doc:
        raise ConfigurationError("give either alpha or beta, not both")
    alpha = _floats(doc["alpha"], "alpha") if "alpha" in doc else ()
    if "beta" in doc:
        alpha = tuple(2 * b - 2 for b in _floats(doc["beta"], "beta"))
    seed = int(doc.get("seed", 0))
    res = doc.get("resolutions", [])
    if not isinstance(res, list) or any(int(r) != r for r in res):
        raise ConfigurationError("'resolutions' must be a list of integers")
    checks = doc.get("checks", [])
    if isinstance(checks, str):
        checks = [checks]
    return ScenarioSpec(
        name=str(doc.get("name", "scenario")),
        domain=_domain(doc["domain"]),
        weight=_weight(doc.get("weight", {})),
        p=_floats(doc.get("p", [2.0]), "p"),
        alpha=alpha,
        resolutions=tuple(int(r) for r in res),
        checks=tuple(checks),
        solver=_solver(doc.get("solver", {}), seed),
        seed=seed,
        tol_verdict=float(doc.get("tol_verdict", DEFAULT_TOL_VERDICT)),
        tol_cond=float(doc.get("tol_cond", DEFAULT_TOL_COND)),
        expect=_expect(doc.get("expect")),
    )


def load_document(path: str | Path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"scenario file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def load_scenario(path: str | Path) -> ScenarioSpec:
    doc = load_document(path)
    doc.pop("sweep", None)
    return spec_from_dict(doc)


def with_overrides(spec: ScenarioSpec, seed: int | None = None,
                   tol: float | None = None) -> ScenarioSpec:
    """Apply command-line ``--seed`` / ``--tol`` overrides."""
    solver = spec.solver
    if seed is not None:
        solver = replace(solver, seed=seed)
    if tol is not None:
        solver = replace(solver, tol=tol)
    return replace(spec, solver=solver, seed=solver.seed)


def expand_sweep(doc: dict) -> list[tuple[dict, ScenarioSpec]]:
    """Cartesian product of the ``[sweep]`` ranges, in a fixed cell order.

    Keys ``p``, ``alpha`` and ``beta`` replace the corresponding lists with a
    single value; ``weight.<param>`` replaces one weight parameter.  Returns
    ``(cell parameters, scenario)`` pairs; a cell whose scenario is invalid
    carries the :class:`ConfigurationError` instead of a scenario.
    """
    doc = dict(doc)
    ranges = doc.pop("sweep", None)
    if not ranges:
        raise ConfigurationError("sweep needs a non-empty [sweep] table")
    keys = list(ranges)
    for k in keys:
        if k not in ("p", "alpha", "beta") and not k.startswith("weight."):
            raise ConfigurationError(f"cannot sweep over {k!r}")
    values = [ranges[k] if isinstance(ranges[k], list) else [ranges[k]] for k in keys]
    n_cells = int(np.prod([len(v) for v in values]))
    if n_cells > MAX_SWEEP_CELLS:
        raise ConfigurationError(f"sweep has {n_cells} cells, limit is {MAX_SWEEP_CELLS}")
    cells = []
    for combo in itertools.product(*values):
        params = dict(zip(keys, combo))
        cell = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
        for k, v in params.items():
            if k.startswith("weight."):
                cell.setdefault("weight", {})[k.split(".", 1)[1]] = v
            else:
                cell[k] = [v]
                if k == "beta":
                    cell.pop("alpha", None)
                if k == "alpha":
                    cell.pop("beta", None)
        try:
            cells.append((params, spec_from_dict(cell)))
        except ConfigurationError as exc:
            cells.append((params, exc))
    return cells
