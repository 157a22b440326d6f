"""First eigenpairs of the weighted Dirichlet, p-Laplacian, clamped-plate and
buckling problems.

All linear problems are solved by inverse iteration on a symmetric pencil
``A x = lam B x`` with one sparse LU factorization of ``A``.  The p-Laplacian
uses the nonlinear inverse power method: each outer step minimizes the convex
energy

    (1/p) int (|grad v|^2 + eps^2)^{p/2} dmu - int u_k^{p-1} v dmu

by damped Newton and renormalizes ``v`` in ``L^p(dmu)``.  Eigenvalues are
always reported as the Rayleigh quotient of the final iterate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from plaplab.calculus import (
    EnergyStencil,
    assemble_clamped_bilaplacian,
    assemble_laplacian_f,
    energy_stencil,
    flux_factor,
)
from plaplab.errors import ConfigurationError, DomainError, ParameterError
from plaplab.geometry import Grid, WeightField

log = logging.getLogger(__name__)

DIRICHLET = "dirichlet"
PLAPLACIAN = "plaplacian"
PLATE = "plate"
BUCKLING = "buckling"


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_outer: int = 500
    max_inner: int = 100
    eps: float | None = None
    inner_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ParameterError("iteration limits must be at least 1")
        if self.eps is not None and self.eps < 0:
            raise ParameterError("eps must be non-negative")


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Outcome of a first-eigenpair solve.

    ``u`` is a full-grid field (zero on the boundary) normalized in
    ``L^p(dmu)`` (``p = 2`` for the linear problems).  ``history`` holds the
    Rayleigh quotient after every outer iteration.
    """

    problem: str
    lam: float
    u: np.ndarray
    residual: float
    iterations: int
    converged: bool
    p: float = 2.0
    normalization: str = "Lp(mu)-unit"
    degraded: bool = False
    history: tuple[float, ...] = field(default=(), repr=False)
    restarts: int = 0

    def summary(self) -> dict:
        return {
            "problem": self.problem,
            "p": self.p,
            "lambda": self.lam,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "degraded": self.degraded,
        }


def _random_positive(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return 1.0 + 0.5 * rng.random(n)


def _fix_sign(x: np.ndarray) -> np.ndarray:
    return -x if np.mean(x) < 0 else x


def _inverse_iteration(A: sp.spmatrix, B: sp.spmatrix, x0: np.ndarray,
                       opts: SolverOptions):
    """Smallest eigenpair of the SPD pencil ``(A, B)``.

    Converged means the Rayleigh quotient changed by less than ``opts.tol``
    (relative).  The vector then keeps being refined while its residual still
    halves per step and exceeds ``opts.tol``; for fourth-order pencils the
    residual has a rounding floor of order ``eps * cond(A)``.

    Returns ``(lam, x, residual, iterations, converged, history)``.
    """
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise ConfigurationError(f"operator is singular: {exc}") from exc
    x = x0 / np.sqrt(x0 @ (B @ x0))
    history = []
    lam_old = np.inf
    converged = False
    it = 0
    for it in range(1, opts.max_outer + 1):
        y = lu.solve(B @ x)
        nrm = y @ (B @ y)
        if not nrm > 0:
            raise ConfigurationError("B is not positive definite on the discrete space")
        x = y / np.sqrt(nrm)
        lam = float(x @ (A @ x))
        history.append(lam)
        if abs(lam - lam_old) <= opts.tol * abs(lam):
            converged = True
            break
        lam_old = lam
    residual = _pencil_residual(A, B, x, lam)
    while converged and residual > opts.tol and it < opts.max_outer:
        y = lu.solve(B @ x)
        y = y / np.sqrt(y @ (B @ y))
        lam_y = float(y @ (A @ y))
        res_y = _pencil_residual(A, B, y, lam_y)
        if not res_y < 0.5 * residual:
            break
        x, lam, residual = y, lam_y, res_y
        it += 1
        history.append(lam)
    return lam, x, residual, it, converged, tuple(history)


def _pencil_residual(A, B, x, lam) -> float:
    Ax = A @ x
    return float(np.linalg.norm(Ax - lam * (B @ x)) / np.linalg.norm(Ax))


def _stagnated(history) -> bool:
    """Rayleigh quotients still oscillating after many steps."""
    if len(history) < 20:
        return False
    tail = np.diff(history[-10:])
    return bool(np.any(tail > 0) and np.any(tail < 0))


def _solve_pencil(problem: str, grid: Grid, A, B, mass: np.ndarray,
                  opts: SolverOptions, positive: bool) -> EigenResult:
    n = A.shape[0]
    restarts = 0
    x0 = _random_positive(n, opts.seed)
    while True:
        lam, x, res, it, conv, hist = _inverse_iteration(A, B, x0, opts)
        if conv or restarts >= 2 or not _stagnated(hist):
            break
        restarts += 1
        log.info("%s: inverse iteration stagnated, restarting", problem)
        x0 = _random_positive(n, opts.seed + restarts)
    if not conv:
        log.warning("%s: not converged after %d iterations", problem, it)
    x = _fix_sign(x)
    x = x / np.sqrt(np.sum(mass * x * x))
    if positive and np.any(x <= 0):
        raise DomainError(
            f"{problem}: first eigenfunction is not positive at "
            f"{int(np.sum(x <= 0))} interior nodes"
        )
    return EigenResult(
        problem=problem,
        lam=lam,
        u=grid.embed(x),
        residual=res,
        iterations=it,
        converged=conv,
        normalization="L2(mu)-unit",
        history=hist,
        restarts=restarts,
    )


def _check_grid(grid: Grid, w: WeightField):
    if not w.grid.same_as(grid):
        raise ConfigurationError("weight field lives on a different grid")


def solve_linear_dirichlet(grid: Grid, w: WeightField,
                           opts: SolverOptions | None = None) -> EigenResult:
    """First Dirichlet eigenpair of ``-Delta_f``."""
    opts = opts or SolverOptions()
    _check_grid(grid, w)
    L = assemble_laplacian_f(grid, w)
    res = _solve_pencil(DIRICHLET, grid, -L.form, sp.diags(L.mass), L.mass, opts,
                        positive=True)
    return res


def solve_clamped_plate(grid: Grid, w: WeightField,
                        opts: SolverOptions | None = None) -> EigenResult:
    """First eigenpair of ``Delta_f^2 u = Gamma u`` with clamped conditions."""
    opts = opts or SolverOptions()
    _check_grid(grid, w)
    B2 = assemble_clamped_bilaplacian(grid, w)
    return _solve_pencil(PLATE, grid, B2.form, sp.diags(B2.mass), B2.mass, opts,
                         positive=False)


def solve_buckling(grid: Grid, w: WeightField,
                   opts: SolverOptions | None = None) -> EigenResult:
    """First eigenpair of ``Delta_f^2 u = -Lambda Delta_f u``, clamped.

    The pencil is the clamped form ``int (Delta_f u)^2 dmu`` against the
    Dirichlet energy ``int |grad u|^2 dmu``; both act on the same interior
    unknowns.  ``u`` is normalized in ``L^2(dmu)``.
    """
    opts = opts or SolverOptions()
    _check_grid(grid, w)
    B2 = assemble_clamped_bilaplacian(grid, w)
    L = assemble_laplacian_f(grid, w)
    return _solve_pencil(BUCKLING, grid, B2.form, -L.form, B2.mass, opts,
                         positive=False)


# --- nonlinear p-Laplacian ---------------------------------------------------


class _PEnergy:
    """Discrete ``(1/p) sum c (|G v|^2 + eps^2)^{p/2} - b.v`` on interior values."""

    def __init__(self, stencil: EnergyStencil, interior: np.ndarray, p: float,
                 eps: float):
        self.G = stencil.restrict(interior)
        self.c = stencil.c
        self.p = p
        self.eps = eps

    def _terms(self, v):
        g = np.stack([G @ v for G in self.G])
        s = np.sum(g * g, axis=0) + self.eps**2
        return g, s

    def value(self, v, b) -> float:
        _, s = self._terms(v)
        return float(np.sum(self.c * s ** (self.p / 2)) / self.p - b @ v)

    def gradient(self, v, b) -> np.ndarray:
        g, s = self._terms(v)
        a = self.c * flux_factor(s, self.p)
        return sum(G.T @ (a * gk) for G, gk in zip(self.G, g)) - b

    def hessian(self, v) -> sp.csr_matrix:
        g, s = self._terms(v)
        p = self.p
        a = self.c * flux_factor(s, p)
        # s^{(p-4)/2} vanishes with s only for p > 4; guard s = 0 explicitly
        t = np.zeros_like(s)
        pos = s > 0
        t[pos] = self.c[pos] * (p - 2) * s[pos] ** ((p - 4) / 2)
        H = None
        for k, Gk in enumerate(self.G):
            for l, Gl in enumerate(self.G):
                d = t * g[k] * g[l]
                if k == l:
                    d = d + a
                term = Gk.T @ sp.diags(d) @ Gl
                H = term if H is None else H + term
        return H.tocsc()


def _newton_direction(E: _PEnergy, v: np.ndarray, grad: np.ndarray):
    try:
        d = -spla.spsolve(E.hessian(v), grad)
    except (RuntimeError, ValueError):
        return None
    if not np.all(np.isfinite(d)) or d @ grad >= 0:
        return None
    return d


def _newton_minimize(E: _PEnergy, b: np.ndarray, v: np.ndarray,
                     opts: SolverOptions):
    """Damped Newton with Armijo backtracking; gradient descent as fallback.

    Returns ``(v, ok, degraded, steps)``.
    """
    bnorm = np.linalg.norm(b)
    f = E.value(v, b)
    degraded = False
    for k in range(opts.max_inner):
        grad = E.gradient(v, b)
        gnorm = np.linalg.norm(grad)
        if gnorm <= opts.inner_tol * bnorm:
            return v, True, degraded, k
        direction = None if degraded else _newton_direction(E, v, grad)
        if direction is not None and -(direction @ grad) <= 2e-13 * max(abs(f), 1e-300):
            # Newton decrement at rounding level: energy is stationary
            return v + direction, True, degraded, k
        if direction is None:
            if not degraded:
                log.info("Newton step unavailable, falling back to gradient descent")
            degraded = True
            direction = -grad
        slope = direction @ grad
        step = 1.0
        while step >= 1e-14:
            trial = v + step * direction
            ft = E.value(trial, b)
            if ft <= f + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            # no decrease representable in floating point
            if gnorm <= 1e-7 * bnorm:
                return v, True, degraded, k
            if degraded:
                return v, False, degraded, k
            degraded = True
            continue
        v, f = trial, ft
    gnorm = np.linalg.norm(E.gradient(v, b))
    return v, bool(gnorm <= 1e-7 * bnorm), degraded, opts.max_inner


def p_rayleigh_quotient(u: np.ndarray, p: float, w: WeightField,
                        stencil: EnergyStencil | None = None) -> float:
    """``int |grad u|^p dmu / int |u|^p dmu`` with the solver's discretization."""
    grid = w.grid
    u = grid.check_field(u, "u")
    st = stencil or energy_stencil(grid, w)
    g = st.components(u)
    num = np.sum(st.c * np.sum(g * g, axis=0) ** (p / 2))
    den = np.sum(w.measure_weights * np.abs(u) ** p)
    if den == 0:
        raise DomainError("zero field has no Rayleigh quotient")
    return float(num / den)


def solve_plaplacian_dirichlet(grid: Grid, w: WeightField, p: float,
                               opts: SolverOptions | None = None) -> EigenResult:
    """First Dirichlet eigenpair of the weighted p-Laplacian.

    Starts from the ``p = 2`` eigenfunction.  For ``p < 2`` the degenerate
    coefficient is regularized with ``eps = 1e-8 * max|grad u0|`` unless
    ``opts.eps`` is given; for ``p >= 2`` the default is no regularization.
    """
    opts = opts or SolverOptions()
    p = float(p)
    if not p > 1:
        raise ParameterError(f"exponent p must exceed 1, got {p}")
    _check_grid(grid, w)
    start = solve_linear_dirichlet(grid, w, replace(opts, tol=min(opts.tol, 1e-10)))
    if p == 2.0:
        return replace(start, problem=PLAPLACIAN, p=p, normalization="Lp(mu)-unit")

    st = energy_stencil(grid, w)
    interior = np.flatnonzero(grid.interior.ravel())
    m = w.measure_weights.ravel()[interior]
    x = start.u.ravel()[interior]
    gscale = max(np.max(np.abs(G @ start.u.ravel())) for G in st.G)
    if opts.eps is None:
        eps = 1e-8 * gscale if p < 2 else 0.0
    else:
        eps = opts.eps
    stages = [_PEnergy(st, interior, p, e) for e in _eps_schedule(eps, gscale, p)]
    exact = _PEnergy(st, interior, p, 0.0)

    def normalize(v):
        return v / np.sum(m * np.abs(v) ** p) ** (1 / p)

    def quotient(v):
        g = np.stack([G @ v for G in exact.G])
        num = np.sum(exact.c * np.sum(g * g, axis=0) ** (p / 2))
        return float(num / np.sum(m * np.abs(v) ** p))

    def step(x, lam):
        b = m * np.abs(x) ** (p - 1)
        v = x * lam ** (-1 / (p - 1))
        deg = False
        for E in stages:
            v, ok, d, _ = _newton_minimize(E, b, v, opts)
            deg |= d
        deg |= not ok
        x = normalize(_fix_sign(v))
        return x, quotient(x), deg

    def residual_of(x, lam):
        # -Delta_p u = lam |u|^{p-2} u, tested in the node measure
        rhs = lam * m * np.abs(x) ** (p - 2) * x
        return float(np.linalg.norm(exact.gradient(x, rhs)) / np.linalg.norm(rhs))

    x = normalize(x)
    lam = quotient(x)
    history = [lam]
    converged = False
    degraded = False
    it = 0
    for it in range(1, opts.max_outer + 1):
        x, lam_new, deg = step(x, lam)
        degraded |= deg
        history.append(lam_new)
        if abs(lam_new - lam) <= opts.tol * abs(lam_new):
            lam = lam_new
            converged = True
            break
        lam = lam_new
    if not converged:
        log.warning("p-Laplacian (p=%g): not converged after %d outer iterations", p, it)

    # refine the eigenfunction while its residual still halves per step
    residual = residual_of(x, lam)
    while converged and residual > opts.tol and it < opts.max_outer:
        y, lam_y, deg = step(x, lam)
        res_y = residual_of(y, lam_y)
        if not res_y < 0.5 * residual:
            break
        x, lam, residual = y, lam_y, res_y
        degraded |= deg
        it += 1
        history.append(lam)
    if degraded:
        log.warning("p-Laplacian (p=%g): inner solves ran in degraded mode", p)

    if np.any(x <= 0):
        raise DomainError(f"p-Laplacian (p={p}) eigenfunction is not positive")
    return EigenResult(
        problem=PLAPLACIAN,
        lam=lam,
        u=grid.embed(x),
        residual=residual,
        iterations=it,
        converged=converged,
        p=p,
        normalization="Lp(mu)-unit",
        degraded=degraded,
        history=tuple(history),
    )


def _eps_schedule(eps: float, scale: float, p: float) -> list[float]:
    """Regularization levels for the inner solves, coarse to fine."""
    if p >= 2 or scale == 0:
        return [eps]
    levels = []
    e = 1e-2 * scale
    while e > eps * 10:
        levels.append(e)
        e /= 10
    return levels + [eps]
