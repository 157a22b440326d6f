"""Functionals, hypothesis checks and identity residuals evaluated on computed
eigenfunctions.

Integrals use the trapezoidal ``dmu`` weights of the grid.  Integrands with a
negative power of ``u`` are singular on the boundary, where ``u = 0``; those
boundary nodes are dropped.  Whether the resulting integral converges under
refinement is judged from a refinement trace (see :func:`classify_trace`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from plaplab.calculus import (
    clamped_laplacian_rows,
    gradient,
    hessian,
    integrate_weighted,
    p_energy,
)
from plaplab.errors import ConfigurationError, DomainError, ParameterError
from plaplab.geometry import MIN_RESOLUTION, Grid, WeightField

CONVERGENT = "convergent"
SUSPECTED_DIVERGENT = "suspected-divergent"

GROWTH_THRESHOLD = 1.2
DEFAULT_TOL_COND = 1e-8


@dataclass(frozen=True)
class FunctionalEstimate:
    """Value on the finest grid plus the values on every grid of the trace."""

    value: float
    singular_flag: str
    refinement_trace: tuple[float, ...]
    spacings: tuple[float, ...] = ()

    @property
    def convergent(self) -> bool:
        return self.singular_flag == CONVERGENT

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "singular_flag": self.singular_flag,
            "refinement_trace": list(self.refinement_trace),
            "spacings": list(self.spacings),
        }


@dataclass(frozen=True)
class ConditionReport:
    """Pointwise hypothesis check ``min_value >= -tol_cond``."""

    name: str
    min_value: float
    tol_cond: float
    location: tuple[float, ...]

    @property
    def satisfied(self) -> bool:
        return self.min_value >= -self.tol_cond

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "min_value": self.min_value,
            "tol_cond": self.tol_cond,
            "satisfied": self.satisfied,
            "location": list(self.location),
        }


def classify_trace(values: Sequence[float]) -> str:
    """Flag a trace whose magnitude grows by more than 20% at every refinement."""
    v = np.abs(np.asarray(values, dtype=float))
    if len(v) < 3:
        raise ConfigurationError("a refinement trace needs at least 3 resolutions")
    if not np.all(np.isfinite(v)):
        return SUSPECTED_DIVERGENT
    ratios = v[1:] / np.where(v[:-1] == 0, np.inf, v[:-1])
    return SUSPECTED_DIVERGENT if np.all(ratios > GROWTH_THRESHOLD) else CONVERGENT


def _estimate(values: list[float], ws: Sequence[WeightField]) -> FunctionalEstimate:
    spacings = [w.grid.h for w in ws]
    if any(b >= a for a, b in zip(spacings, spacings[1:])):
        raise ConfigurationError("refinement trace must go from coarse to fine grids")
    return FunctionalEstimate(
        value=values[-1],
        singular_flag=classify_trace(values),
        refinement_trace=tuple(values),
        spacings=tuple(spacings),
    )


def _pairs(us, ws):
    if isinstance(ws, WeightField):
        raise ConfigurationError("refinement estimates need one field per resolution")
    us, ws = list(us), list(ws)
    if len(us) != len(ws):
        raise ConfigurationError("fields and weights differ in number")
    return us, ws


def _positive_interior(u: np.ndarray, grid: Grid) -> np.ndarray:
    u = grid.check_field(u, "u")
    if np.any(u[grid.interior] <= 0):
        raise DomainError("u must be strictly positive at interior nodes")
    return u


def _upow(u: np.ndarray, e: float, grid: Grid) -> np.ndarray:
    """``|u|^e``; for ``e < 0`` boundary nodes and zeros of ``u`` are dropped."""
    a = np.abs(u)
    if e >= 0:
        return a**e
    keep = (a > 0) & grid.interior
    out = np.zeros_like(a)
    out[keep] = a[keep] ** e
    return out


def grad_norm(u: np.ndarray, grid: Grid) -> np.ndarray:
    return np.sqrt(np.sum(gradient(u, grid) ** 2, axis=-1))


# --- I_{p,alpha} and the first-integral identity -----------------------------


def i_value(u: np.ndarray, p: float, alpha: float, w: WeightField) -> float:
    """``int |u|^{alpha-p} |grad u|^{2p} dmu / int |u|^alpha |grad u|^p dmu``."""
    if not p > 1:
        raise ParameterError(f"exponent p must exceed 1, got {p}")
    grid = w.grid
    u = _positive_interior(u, grid)
    r = grad_norm(u, grid)
    num = integrate_weighted(_upow(u, alpha - p, grid) * r ** (2 * p), w)
    den = integrate_weighted(_upow(u, alpha, grid) * r**p, w)
    if den == 0:
        raise DomainError("denominator of I_{p,alpha} vanishes")
    return num / den


def i_functional(us: Sequence[np.ndarray], p: float, alpha: float,
                 ws: Sequence[WeightField]) -> FunctionalEstimate:
    """``I_{p,alpha}`` with a refinement trace, coarse grid first."""
    us, ws = _pairs(us, ws)
    return _estimate([i_value(u, p, alpha, w) for u, w in zip(us, ws)], ws)


def identity_residual(u: np.ndarray, lam: float, p: float, alpha: float,
                      w: WeightField) -> float:
    """Relative defect of ``int |u|^a |grad u|^p dmu = lam/(a+1) int |u|^{a+p} dmu``."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    grid = w.grid
    u = grid.check_field(u, "u")
    r = grad_norm(u, grid)
    lhs = integrate_weighted(_upow(u, alpha, grid) * r**p, w)
    rhs = lam / (alpha + 1) * integrate_weighted(_upow(u, alpha + p, grid), w)
    if rhs == 0:
        raise DomainError("right-hand side of the identity vanishes")
    return abs(lhs - rhs) / abs(rhs)


# --- power test functions and Rayleigh-Ritz quotients ------------------------


def power_test_function(u: np.ndarray, beta: float) -> np.ndarray:
    """``u^beta``; for ``beta > 1`` it vanishes with its normal derivative."""
    if not beta > 1:
        raise ParameterError(
            f"beta = {beta}: u^beta has a nonzero normal derivative for beta <= 1, "
            "so it is not admissible for the clamped problems"
        )
    u = np.asarray(u, dtype=float)
    scale = np.max(np.abs(u)) if u.size else 0.0
    if np.any(u < -1e-12 * scale):
        raise DomainError("power test functions need u >= 0")
    return np.clip(u, 0.0, None) ** beta


def _clamped_energy(phi: np.ndarray, w: WeightField) -> tuple[np.ndarray, float]:
    """Interior values of ``phi`` and ``int (Delta_f phi)^2 dmu``.

    The form is summed as squares of ``Delta_f phi`` rather than through the
    assembled fourth-order matrix, which loses about ``h^-2`` in relative
    accuracy to cancellation.
    """
    grid = w.grid
    phi = grid.check_field(phi, "phi")
    if any(n < MIN_RESOLUTION for n in grid.shape):
        raise ConfigurationError(f"grid {grid.shape} too coarse for the clamped stencil")
    lap = clamped_laplacian_rows(grid, w) @ phi[grid.interior]
    return phi[grid.interior], float(np.sum(w.measure_weights.ravel() * lap * lap))


def plate_quotient_value(phi: np.ndarray, w: WeightField) -> float:
    """``int (Delta_f phi)^2 dmu / int phi^2 dmu`` with clamped closure."""
    x, num = _clamped_energy(phi, w)
    mass = w.measure_weights[w.grid.interior]
    den = float(np.sum(mass * x * x))
    if den == 0:
        raise DomainError("zero test function")
    return num / den


def buckling_quotient_value(phi: np.ndarray, w: WeightField) -> float:
    """``int (Delta_f phi)^2 dmu / int |grad phi|^2 dmu`` with clamped closure."""
    x, num = _clamped_energy(phi, w)
    den = p_energy(w.grid.embed(x), 2.0, w)
    if den == 0:
        raise DomainError("zero test function")
    return num / den


def plate_quotient(phis: Sequence[np.ndarray], ws: Sequence[WeightField]) -> FunctionalEstimate:
    phis, ws = _pairs(phis, ws)
    return _estimate([plate_quotient_value(f, w) for f, w in zip(phis, ws)], ws)


def buckling_quotient(phis: Sequence[np.ndarray], ws: Sequence[WeightField]) -> FunctionalEstimate:
    phis, ws = _pairs(phis, ws)
    return _estimate([buckling_quotient_value(f, w) for f, w in zip(phis, ws)], ws)


# --- hypothesis checks --------------------------------------------------------


def _location(grid: Grid, flat_index: int) -> tuple[float, ...]:
    ij = np.unravel_index(flat_index, grid.shape)
    return tuple(float(c[k]) for c, k in zip(grid.coords, ij))


def curvature_condition(u: np.ndarray | None, w: WeightField, c: float,
                        tol_cond: float = DEFAULT_TOL_COND,
                        name: str = "curvature") -> ConditionReport:
    """Smallest eigenvalue over interior nodes of ``hess f + c hess u / u``.

    With the Euclidean base metric ``hess f`` is the Bakry-Emery tensor, so
    ``c = 0`` tests ``Ric_f >= 0``.
    """
    grid = w.grid
    form = np.array(w.hess_f, dtype=float)
    if c != 0:
        if u is None:
            raise ParameterError("the tested form involves u, but no u was given")
        u = _positive_interior(u, grid)
        H = hessian(u, grid)
        with np.errstate(divide="ignore", invalid="ignore"):
            form = form + c * H / u[..., None, None]
    mins = np.linalg.eigvalsh(form[grid.interior])[:, 0]
    k = int(np.argmin(mins))
    flat = np.flatnonzero(grid.interior.ravel())[k]
    return ConditionReport(name=name, min_value=float(mins[k]), tol_cond=tol_cond,
                           location=_location(grid, flat))


def hf_values(w: WeightField) -> np.ndarray:
    """``H_f = -<grad f, nu>`` at boundary nodes (faces are flat); NaN elsewhere."""
    grid = w.grid
    face = grid.boundary & ~grid.corner
    out = np.full(grid.shape, np.nan)
    out[face] = -np.sum(w.grad_f[face] * grid.normals[face], axis=-1)
    return out


def hf_boundary(w: WeightField, grid: Grid | None = None,
                tol_cond: float = DEFAULT_TOL_COND) -> ConditionReport:
    """Minimum of the f-mean curvature over non-corner boundary nodes."""
    grid = grid or w.grid
    if not w.grid.same_as(grid):
        raise ConfigurationError("weight field lives on a different grid")
    vals = hf_values(w)
    k = int(np.nanargmin(vals))
    return ConditionReport(name="H_f>=0", min_value=float(vals.ravel()[k]),
                           tol_cond=tol_cond, location=_location(grid, k))


# --- Bochner formula and boundary identity ------------------------------------


@dataclass(frozen=True, eq=False)
class BochnerResidual:
    """Node-wise Bochner defect; NaN outside the evaluation set."""

    values: np.ndarray
    mask: np.ndarray
    excluded: int

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values[self.mask])))


def _div(F: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(
        np.gradient(F[..., a], grid.spacing[a], axis=a, edge_order=2)
        for a in range(grid.dim)
    )


def bochner_residual(u: np.ndarray, w: WeightField, p: float = 2.0,
                     min_depth: int = 2, delta: float = 1e-6) -> BochnerResidual:
    """Defect of the weighted Bochner formula for the p-Laplacian.

    Computes

        (1/p) L(|grad u|^p) - |grad u|^{2p-4} (|Hess u|_A^2 + hess f(grad u, grad u))
            - |grad u|^{p-2} <grad u, grad Delta_{p,f} u>

    where ``L psi = e^f div(e^{-f} |grad u|^{p-2} A grad psi)`` is the
    linearized p-Laplacian, ``A = I + (p-2) nu nu^T`` and ``nu = grad u/|grad u|``.
    In one dimension ``L/p = ((p-1)/p) e^f (e^{-f} |u'|^{p-2} psi')'``; at
    ``p = 2`` it is ``Delta_f / 2``.  All derivatives are nodal differences.
    Nodes within ``min_depth`` layers of the boundary, and nodes where
    ``|grad u| < delta * max|grad u|``, are excluded.
    """
    if not p > 1:
        raise ParameterError(f"exponent p must exceed 1, got {p}")
    grid = w.grid
    u = grid.check_field(u, "u")
    g = gradient(u, grid)
    r = np.sqrt(np.sum(g * g, axis=-1))
    deep = grid.depth >= min_depth
    mask = deep & (r > 0) & (r >= delta * np.max(r))
    if not np.any(mask):
        raise DomainError("no node left to evaluate the Bochner residual on")
    excluded = int(np.sum(deep & ~mask))

    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(r[..., None] > 0, g / r[..., None], 0.0)
        rp2 = np.where(r > 0, r ** (p - 2), 1.0 if p == 2 else 0.0)
    H = hessian(u, grid)
    grad_r = gradient(r, grid)
    udr = np.sum(g * grad_r, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(r > 0, udr**2 / r**2, 0.0)
    hess_a = (
        np.sum(H * H, axis=(-2, -1))
        + 2 * (p - 2) * np.sum(grad_r**2, axis=-1)
        + (p - 2) ** 2 * tail
    )
    ric = np.einsum("...i,...ij,...j->...", g, w.hess_f, g)

    psi = r**p
    dpsi = gradient(psi, grid)
    F = rp2[..., None] * (dpsi + (p - 2) * nu * np.sum(nu * dpsi, axis=-1)[..., None])
    lin = _div(F, grid) - np.sum(w.grad_f * F, axis=-1)

    flux = rp2[..., None] * g
    plap = _div(flux, grid) - np.sum(w.grad_f * flux, axis=-1)
    dplap = gradient(plap, grid)

    res = lin / p - rp2**2 * (hess_a + ric) - rp2 * np.sum(g * dplap, axis=-1)
    values = np.where(mask, res, np.nan)
    return BochnerResidual(values=values, mask=mask, excluded=excluded)


def boundary_normal_gradient_identity(u: np.ndarray, w: WeightField,
                                      grid: Grid | None = None) -> float:
    """Defect of ``(1/2) d|grad u|^2/dnu = -H_f |grad u|^2`` on flat faces.

    Maximum over non-corner boundary nodes, relative to the largest boundary
    value of ``|grad u|^2``.
    """
    grid = grid or w.grid
    u = grid.check_field(u, "u")
    psi = np.sum(gradient(u, grid) ** 2, axis=-1)
    dpsi = gradient(psi, grid)
    face = grid.boundary & ~grid.corner
    dnu = np.sum(dpsi[face] * grid.normals[face], axis=-1)
    hf = hf_values(w)[face]
    scale = np.max(psi[face])
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(0.5 * dnu + hf * psi[face])) / scale)
