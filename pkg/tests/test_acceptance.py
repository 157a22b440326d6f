"""Acceptance criteria.

Each test covers one criterion and records a one-line PASS/FAIL result; the
lines are printed in the terminal summary (see ``conftest.py``).  This module
is collected last so that criterion 11 can time the whole session.
"""

import json
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import pytest

from conftest import SESSION_START, interval_weight
from oracles import BEAM_K, LAMBDA_P, PI2, ROD_BUCKLING, lambda_p_shooting
from plaplab.bounds import CONTRADICTED_NOTE, INCONCLUSIVE, PASS, thm11_coefficients, thm12_constants
from plaplab.cli import bundled_scenarios, main
from plaplab.config import load_scenario
from plaplab.functionals import SUSPECTED_DIVERGENT, bochner_residual
from plaplab.geometry import DomainSpec, WeightSpec, make_grid, weight_tables
from plaplab.harness import run_scenario
from plaplab.solvers import (
    solve_buckling,
    solve_clamped_plate,
    solve_linear_dirichlet,
    solve_plaplacian_dirichlet,
)

RESULTS: dict[int, tuple[bool, str, str]] = {}
SUITE_BUDGET = 300.0


@contextmanager
def criterion(n, title):
    details = []
    try:
        yield details
    except BaseException as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        RESULTS[n] = (False, title, msg)
        print(f"criterion {n:2d}: FAIL  {title}  ({msg})")
        raise
    RESULTS[n] = (True, title, "; ".join(details))
    print(f"criterion {n:2d}: PASS  {title}  ({'; '.join(details)})")


_reports = {}


def bundled(name):
    if name not in _reports:
        _reports[name] = run_scenario(load_scenario(bundled_scenarios()[name]))
    return _reports[name]


def by_claim(report):
    return {v.claim: v for v in report.verdicts}


def test_criterion_01_string_eigenvalue():
    with criterion(1, "string eigenvalue pi^2 within 0.1%, under 1 s") as d:
        t0 = time.perf_counter()
        grid = make_grid(DomainSpec.interval(0.0, 1.0, 512))
        r = solve_linear_dirichlet(grid, weight_tables(WeightSpec.zero(), grid))
        elapsed = time.perf_counter() - t0
        err = abs(r.lam - PI2) / PI2
        d += [f"lambda={r.lam:.6f}", f"rel.err={err:.1e}", f"{elapsed:.2f}s"]
        assert r.converged
        assert err < 1e-3
        assert elapsed < 1.0


def test_criterion_02_p_laplacian_eigenvalue():
    with criterion(2, "p=4 eigenvalue within 1% of 3 pi^4/4, under 30 s") as d:
        target = LAMBDA_P[4.0]
        assert target == pytest.approx(3 * PI2**2 / 4, rel=1e-12)
        assert lambda_p_shooting(4.0) == pytest.approx(target, rel=1e-8)
        t0 = time.perf_counter()
        w = interval_weight(512)
        r = solve_plaplacian_dirichlet(w.grid, w, 4.0)
        elapsed = time.perf_counter() - t0
        err = abs(r.lam - target) / target
        d += [f"lambda={r.lam:.4f}", f"rel.err={err:.1e}", f"{elapsed:.2f}s"]
        assert r.converged
        assert err < 1e-2
        assert elapsed < 30.0


def test_criterion_03_thm11_at_p2():
    with criterion(3, "lambda_4/lambda_2^2 = 0.75 +- 0.02 inside [1/9, 1]") as d:
        coef = thm11_coefficients(2)
        assert (coef.lower, coef.upper) == (Fraction(1, 9), Fraction(1))
        v = by_claim(bundled("interval-thm11"))["thm11"]
        d += [f"ratio={v.lhs:.5f}", v.outcome]
        assert v.lhs == pytest.approx(0.75, abs=0.02)
        assert v.outcome == PASS


def test_criterion_04_beam_and_rod():
    with criterion(4, "clamped beam k^4 and rod 4 pi^2 within 1%") as d:
        w = interval_weight(512)
        gamma = solve_clamped_plate(w.grid, w).lam
        buck = solve_buckling(w.grid, w).lam
        d += [f"Gamma={gamma:.3f}", f"Lambda={buck:.4f}"]
        assert gamma == pytest.approx(BEAM_K**4, rel=1e-2)
        assert buck == pytest.approx(ROD_BUCKLING, rel=1e-2)


def test_criterion_05_thm12_case2():
    with criterion(5, "plate/buckling comparison with 16/3 on interval and square") as d:
        rows = by_claim(bundled("interval-thm12-case2"))
        plate, buck = rows["thm12.plate"], rows["thm12.buckling"]
        d += [f"Gamma/lambda^2={plate.lhs:.4f}", f"margin={plate.margin:.4f}",
              f"Lambda/lambda={buck.lhs:.4f}"]
        assert plate.rhs == float(thm12_constants()["case2"])
        assert plate.lhs == pytest.approx(5.1388, abs=0.02)
        assert plate.margin == pytest.approx(0.0365, abs=0.02)
        assert buck.lhs == pytest.approx(4.0, abs=0.02)
        assert plate.outcome == PASS and buck.outcome == PASS

        square = bundled("square-thm12-case2")
        srows = by_claim(square)
        assert srows["thm12.plate"].outcome == PASS
        assert srows["thm12.buckling"].outcome == PASS
        ratios = {row["problem"]: row["richardson"][0] for row in square.convergence}
        d += [f"square Richardson {k}={v:.3f}" for k, v in sorted(ratios.items())]
        assert set(ratios) == {"plaplacian", "plate", "buckling"}
        for val in ratios.values():
            assert val == pytest.approx(4.0, abs=0.5)


def test_criterion_06_prop21():
    with criterion(6, "I_{2,2}/lambda = 3 +- 0.06 in [1/3, 3]; square containment") as d:
        v = by_claim(bundled("interval-prop21"))["prop21"]
        d += [f"I/lambda={v.lhs:.5f}", v.outcome]
        assert v.lhs == pytest.approx(3.0, abs=0.06)
        assert v.outcome == PASS
        s = by_claim(bundled("square-thm12-case2"))["prop21"]
        d += [f"square I/lambda={s.lhs:.4f}", s.outcome]
        assert s.outcome == PASS
        assert 1 / 3 <= s.lhs <= 3


def test_criterion_07_identity():
    with criterion(7, "first-integral identity below 1e-2, about 4x per halving") as d:
        for name in ("interval-identities", "interval-weighted-identities"):
            rep = bundled(name)
            diags = [x for x in rep.diagnostics if x["name"] == "identity"]
            assert sorted(x["alpha"] for x in diags) == [1.0, 2.0, 3.0]
            for x in diags:
                assert x["residuals"][-1] < 1e-2
                for r in x["ratios"]:
                    assert r == pytest.approx(4.0, abs=0.5)
            worst = max(x["residuals"][-1] for x in diags)
            d.append(f"{name}: max residual {worst:.1e}")
            assert all(v.outcome == PASS for v in rep.verdicts if v.claim == "identity")


def test_criterion_08_bochner():
    with criterion(8, "Bochner residual refines; exact for quadratics") as d:
        rep = bundled("interval-identities")
        (boch,) = [x for x in rep.diagnostics if x["name"] == "bochner"]
        sups = boch["sup_residuals"]
        d.append("sup " + " > ".join(f"{s:.3g}" for s in sups))
        assert all(b < a for a, b in zip(sups, sups[1:]))
        w = interval_weight(65)
        x = w.grid.coords[0]
        exact1 = bochner_residual(3 * x**2 - x + 1, w).sup
        g = make_grid(DomainSpec.rectangle(0, 1, 0, 1, 33))
        X, Y = g.mesh()
        exact2 = bochner_residual(X**2 - 2 * X * Y + 0.5 * Y**2 + Y,
                                  weight_tables(WeightSpec.zero(), g)).sup
        d.append(f"quadratic {max(exact1, exact2):.1e}")
        assert exact1 <= 1e-10 and exact2 <= 1e-10


def test_criterion_09_case1_discrepancy():
    with criterion(9, "64/45 comparison reported inconclusive and contradicted") as d:
        spec = load_scenario(bundled_scenarios()["interval-thm12-case1"])
        assert spec.expected("thm12.case1.plate") == INCONCLUSIVE
        rep = bundled("interval-thm12-case1")
        (cond,) = [c for c in rep.conditions if c["name"].startswith("thm12-condition")]
        assert cond["satisfied"]
        (i23,) = [f for f in rep.functionals if f["name"].startswith("I(p=2,alpha=0.666667")]
        assert i23["singular_flag"] == SUSPECTED_DIVERGENT
        plate = by_claim(rep)["thm12.case1.plate"]
        d += [f"condition min={cond['min_value']:.3f}", f"Gamma/lambda^2={plate.lhs:.3f}",
              f"I_2,2/3 {i23['singular_flag']}"]
        assert plate.lhs == pytest.approx(5.14, abs=0.02)
        assert plate.lhs > float(Fraction(64, 45))
        for v in rep.verdicts:
            assert v.outcome == INCONCLUSIVE
            assert CONTRADICTED_NOTE in v.notes
        assert rep.ok


def test_criterion_10_gating():
    with criterion(10, "no pass or fail through unmet H_f or Ric_f hypotheses") as d:
        for name, key in (("gating-hf-negative", "H_f>=0"), ("gating-ric-negative", "Ric_f>=0")):
            rep = bundled(name)
            gated = [v for v in rep.verdicts if key in v.hypotheses]
            assert gated
            for v in gated:
                assert v.hypotheses[key] is False
                assert v.outcome == INCONCLUSIVE
            for v in rep.verdicts:
                if not v.hypotheses_satisfied:
                    assert v.outcome == INCONCLUSIVE
            d.append(f"{name}: {len(gated)} gated rows inconclusive")
            assert rep.ok


def test_criterion_11_determinism(capsys):
    with criterion(11, "bundled check twice is byte-identical; suite under 5 min") as d:
        outs = []
        for _ in range(2):
            code = main(["check", "--bundled"])
            outs.append(capsys.readouterr().out)
            assert code == 0
        assert outs[0] == outs[1]
        n_reports = len(json.loads(outs[0])["reports"])
        elapsed = time.perf_counter() - SESSION_START
        d += [f"{n_reports} scenarios", f"{len(outs[0])} bytes", f"session {elapsed:.1f}s"]
        assert math.isfinite(elapsed) and elapsed < SUITE_BUDGET
