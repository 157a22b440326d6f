"""Closed-form bound coefficients and hypothesis-gated inequality verdicts.

Coefficients are returned as :class:`fractions.Fraction` whenever the inputs
are rational and every square root involved is exact, and as floats otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from plaplab.errors import ParameterError
from plaplab.functionals import ConditionReport, FunctionalEstimate

VALID = "valid"
DEGENERATE = "degenerate"
COMPLEX = "complex-discriminant"

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

DEFAULT_TOL_VERDICT = 0.02
DEGENERACY_TOL = 1e-12

CONTRADICTED_NOTE = "claim numerically contradicted; test function inadmissible"

Number = float | Fraction


def _as_fraction(x: float) -> Fraction | None:
    """The rational a float most plausibly stands for (e.g. 2/3), if any."""
    if isinstance(x, Fraction):
        return x
    if not math.isfinite(x):
        return None
    r = Fraction(x).limit_denominator(10**6)
    return r if abs(float(r) - x) <= 1e-15 * max(1.0, abs(x)) else None


def _exact_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


@dataclass(frozen=True)
class BoundPair:
    """Lower and upper coefficient of a two-sided bound."""

    lower: Number
    upper: Number
    validity: str = VALID

    @property
    def valid(self) -> bool:
        return self.validity == VALID

    def as_floats(self) -> tuple[float, float]:
        return float(self.lower), float(self.upper)


def _check_p(p) -> None:
    if not p > 1:
        raise ParameterError(f"exponent p must exceed 1, got {p}")


def prop21_bounds(p: float, alpha: float) -> BoundPair:
    """``(M1, M2)``, the roots in ``M`` of ``d^2 M^2 - (2d + q) M + 1 = 0``.

    Here ``d = alpha - p + 1`` and ``q = p^2/(2p - 1)``.  The roots are real
    when ``4d + q >= 0``; the quadratic degenerates when ``d = 0``.
    """
    _check_p(p)
    nan = float("nan")
    d_float = alpha - p + 1
    if abs(d_float) < DEGENERACY_TOL:
        return BoundPair(nan, nan, DEGENERATE)
    pf, af = _as_fraction(p), _as_fraction(alpha)
    if pf is not None and af is not None:
        d = af - pf + 1
        q = pf * pf / (2 * pf - 1)
        disc = 4 * d + q
        if disc < 0 and float(disc) < -DEGENERACY_TOL:
            return BoundPair(nan, nan, COMPLEX)
        root = _exact_sqrt(q * max(disc, Fraction(0)))
        if root is not None:
            b, den = 2 * d + q, 2 * d * d
            return BoundPair((b - root) / den, (b + root) / den)
    q = p * p / (2 * p - 1)
    disc = 4 * d_float + q
    if disc < -DEGENERACY_TOL:
        return BoundPair(nan, nan, COMPLEX)
    root = p / math.sqrt(2 * p - 1) * math.sqrt(max(disc, 0.0))
    b, den = 2 * d_float + q, 2 * d_float**2
    return BoundPair((b - root) / den, (b + root) / den)


def prop21_root_defect(p: float, alpha: float, m: Number) -> float:
    """Value of ``d^2 m^2 - (2d + q) m + 1`` (zero at ``M1`` and ``M2``)."""
    d = alpha - p + 1
    q = p * p / (2 * p - 1)
    m = float(m)
    return d * d * m * m - (2 * d + q) * m + 1


def thm11_coefficients(p: float) -> BoundPair:
    """``((p^2+4p-2) -+ p sqrt(p^2+8p-4)) / (2(p+1)(2p-1))``."""
    _check_p(p)
    pf = _as_fraction(p)
    if pf is not None:
        disc = pf * pf + 8 * pf - 4
        root = _exact_sqrt(disc)
        if root is not None:
            a, den = pf * pf + 4 * pf - 2, 2 * (pf + 1) * (2 * pf - 1)
            return BoundPair((a - pf * root) / den, (a + pf * root) / den)
    a = p * p + 4 * p - 2
    s = p * math.sqrt(p * p + 8 * p - 4)
    den = 2 * (p + 1) * (2 * p - 1)
    return BoundPair((a - s) / den, (a + s) / den)


def thm12_constants() -> dict[str, Fraction]:
    """Headline constants of the plate/buckling comparison."""
    return {
        "case1": Fraction(64, 45),
        "case2": Fraction(16, 3),
        "prior_plate": Fraction(16, 3),
        "prior_buckling": Fraction(4),
    }


# --- verdicts -------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    """Outcome of one inequality check.

    ``lhs`` is the computed ratio and ``rhs`` the bound on the side that sets
    the margin; ``margin`` is the relative slack, negative when violated.
    """

    claim: str
    hypotheses: dict
    lhs: float
    rhs: float
    margin: float
    outcome: str
    notes: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def hypotheses_satisfied(self) -> bool:
        return all(self.hypotheses.values())

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "hypotheses_satisfied": self.hypotheses_satisfied,
            "hypotheses": dict(self.hypotheses),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "outcome": self.outcome,
            "notes": list(self.notes),
            "flags": list(self.flags),
            "extra": dict(self.extra),
        }


def _side_margins(lhs: float, lower: Number | None, upper: Number | None):
    sides = []
    if upper is not None:
        u = float(upper)
        sides.append(((u - lhs) / abs(u), u))
    if lower is not None:
        lo = float(lower)
        sides.append(((lhs - lo) / abs(lo), lo))
    return min(sides, key=lambda s: s[0])


def _decide(claim: str, hypotheses: Mapping[str, bool], lhs: float,
            lower: Number | None, upper: Number | None, tol_verdict: float,
            blockers: Iterable[str] = (), flags: Iterable[str] = (),
            notes: Iterable[str] = (), extra: Mapping | None = None) -> Verdict:
    blockers = list(blockers)
    notes = list(notes)
    hyps = {k: bool(v) for k, v in hypotheses.items()}
    if math.isfinite(lhs):
        margin, rhs = _side_margins(lhs, lower, upper)
    else:
        margin, rhs = float("nan"), float(upper if upper is not None else lower)
    if not math.isfinite(margin) and not blockers:
        blockers.append("non-finite")
    flags = list(flags)
    flags += [b for b in blockers if b not in flags]
    if not all(hyps.values()):
        outcome = INCONCLUSIVE
        unmet = sorted(k for k, v in hyps.items() if not v)
        notes.append("hypothesis unmet: " + ", ".join(unmet))
    elif blockers:
        outcome = INCONCLUSIVE
    else:
        outcome = PASS if margin >= -tol_verdict else FAIL
    return Verdict(claim=claim, hypotheses=hyps, lhs=float(lhs), rhs=rhs,
                   margin=float(margin), outcome=outcome, notes=tuple(notes),
                   flags=tuple(flags), extra=dict(extra or {}))


def _report_flags(reports: Mapping[str, ConditionReport]) -> dict[str, bool]:
    return {name: r.satisfied for name, r in reports.items()}


def _convergence_blockers(converged: Mapping[str, bool] | None) -> list[str]:
    return [f"unconverged:{k}" for k, ok in sorted((converged or {}).items()) if not ok]


def _functional_blockers(functionals: Mapping[str, FunctionalEstimate] | None) -> list[str]:
    return [
        f"suspected-divergent:{k}"
        for k, est in (functionals or {}).items()
        if not est.convergent
    ]


def check_thm11(lam_p: float, lam_2p: float, p: float,
                cond: ConditionReport | None = None,
                hf: ConditionReport | None = None,
                ric: ConditionReport | None = None,
                converged: Mapping[str, bool] | None = None,
                tol_verdict: float = DEFAULT_TOL_VERDICT,
                flags: Iterable[str] = ()) -> Verdict:
    """``c_lower lam_p^2 <= lam_2p <= c_upper lam_p^2``.

    For ``p != 2`` the hypothesis is ``cond`` (the form with
    ``c = -(p-1)(p-2)`` on the p-eigenfunction); for ``p = 2`` it is
    ``Ric_f >= 0`` (``ric``) together with ``H_f >= 0`` (``hf``).  A missing
    report counts as an unmet hypothesis.
    """
    coef = thm11_coefficients(p)
    if p == 2:
        hyps = {"Ric_f>=0": bool(ric and ric.satisfied), "H_f>=0": bool(hf and hf.satisfied)}
    else:
        hyps = {"condition(p)": bool(cond and cond.satisfied)}
    lhs = lam_2p / lam_p**2
    extra = {"lambda_p": lam_p, "lambda_2p": lam_2p, "p": p,
             "bound_lower": float(coef.lower), "bound_upper": float(coef.upper)}
    return _decide("thm11", hyps, lhs, coef.lower, coef.upper, tol_verdict,
                   blockers=_convergence_blockers(converged), flags=flags, extra=extra)


def check_thm12(lam: float, gamma: float, lam_buck: float, case: int,
                reports: Mapping[str, ConditionReport],
                functionals: Mapping[str, FunctionalEstimate] | None = None,
                converged: Mapping[str, bool] | None = None,
                tol_verdict: float = DEFAULT_TOL_VERDICT,
                flags: Iterable[str] = ()) -> list[Verdict]:
    """Plate and buckling verdicts ``Gamma <= c lam^2`` and ``Lambda <= c lam``.

    ``reports`` holds the hypothesis checks: for case 1 the form with
    ``c = -4/3`` on the Dirichlet eigenfunction, for case 2 ``Ric_f >= 0`` and
    ``H_f >= 0``.  ``functionals`` are the estimates the case's argument
    rests on; any suspected-divergent one makes the verdict inconclusive.
    """
    if case not in (1, 2):
        raise ParameterError(f"case must be 1 or 2, got {case}")
    c = thm12_constants()["case1" if case == 1 else "case2"]
    prefix = "thm12.case1" if case == 1 else "thm12"
    hyps = _report_flags(reports)
    blockers = _convergence_blockers(converged) + _functional_blockers(functionals)
    rows = (
        ("plate", gamma / lam**2, {"gamma": gamma}),
        ("buckling", lam_buck / lam, {"lambda_buck": lam_buck}),
    )
    out = []
    for kind, lhs, own in rows:
        extra = {"p": 2.0, "lambda_p": lam, **own, "bound_upper": float(c)}
        v = _decide(f"{prefix}.{kind}", hyps, lhs, None, c, tol_verdict,
                    blockers=blockers, flags=flags, extra=extra)
        if (v.outcome == INCONCLUSIVE and v.hypotheses_satisfied
                and v.margin < -tol_verdict and _functional_blockers(functionals)):
            v = Verdict(**{**v.__dict__, "notes": v.notes + (CONTRADICTED_NOTE,)})
        out.append(v)
    return out


def check_prop21(estimate: FunctionalEstimate, lam: float, p: float, alpha: float,
                 cond: ConditionReport | None = None,
                 hf: ConditionReport | None = None,
                 ric: ConditionReport | None = None,
                 converged: Mapping[str, bool] | None = None,
                 tol_verdict: float = DEFAULT_TOL_VERDICT,
                 flags: Iterable[str] = ()) -> Verdict:
    """``M1 <= I_{p,alpha} / lam <= M2``.

    For ``alpha != 2(p-1)`` the hypothesis is ``cond`` (the form with
    ``c = (p-1)(alpha-2p+2)``); for ``alpha = 2(p-1)`` it is ``Ric_f >= 0``
    with ``H_f >= 0``.
    """
    bounds = prop21_bounds(p, alpha)
    if abs(alpha - 2 * (p - 1)) < DEGENERACY_TOL:
        hyps = {"Ric_f>=0": bool(ric and ric.satisfied), "H_f>=0": bool(hf and hf.satisfied)}
    else:
        hyps = {"condition(p,alpha)": bool(cond and cond.satisfied)}
    blockers = _convergence_blockers(converged) + _functional_blockers({"I": estimate})
    extra = {"lambda_p": lam, "p": p, "alpha": alpha, "validity": bounds.validity,
             "I": estimate.value}
    if not bounds.valid:
        blockers.append(f"bound:{bounds.validity}")
        return _decide("prop21", hyps, estimate.value / lam, None, float("nan"),
                       tol_verdict, blockers=blockers, flags=flags, extra=extra)
    extra.update(bound_lower=float(bounds.lower), bound_upper=float(bounds.upper))
    return _decide("prop21", hyps, estimate.value / lam, bounds.lower, bounds.upper,
                   tol_verdict, blockers=blockers, flags=flags, extra=extra)
