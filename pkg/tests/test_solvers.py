import numpy as np
import pytest

from conftest import interval_weight, square_weight
from oracles import BEAM_GAMMA, LAMBDA_P, PI2, ROD_BUCKLING
from plaplab.calculus import apply_p_laplacian, assemble_clamped_bilaplacian, assemble_laplacian_f
from plaplab.errors import ParameterError
from plaplab.geometry import WeightSpec
from plaplab.solvers import (
    SolverOptions,
    p_rayleigh_quotient,
    solve_buckling,
    solve_clamped_plate,
    solve_linear_dirichlet,
    solve_plaplacian_dirichlet,
)


def test_string_eigenpair(dirichlet512, w512):
    r = dirichlet512
    assert r.converged
    assert abs(r.lam - PI2) / PI2 < 1e-3
    x = w512.grid.coords[0]
    s = np.sin(np.pi * x)
    s /= np.sqrt(np.sum(w512.measure_weights * s**2))
    np.testing.assert_allclose(r.u, s, atol=1e-4)
    assert np.all(r.u[w512.grid.interior] > 0)
    assert r.residual < 1e-8


def test_linear_drift_shifts_eigenvalue():
    w = interval_weight(512, WeightSpec.linear(2.0))
    r = solve_linear_dirichlet(w.grid, w)
    assert abs(r.lam - (PI2 + 1)) / (PI2 + 1) < 5e-3


def test_square_eigenvalue():
    w = square_weight(129)
    r = solve_linear_dirichlet(w.grid, w)
    assert abs(r.lam - 2 * PI2) / (2 * PI2) < 5e-3
    assert np.all(r.u[w.grid.interior] > 0)


def test_rayleigh_quotient_monotone(dirichlet512):
    h = np.asarray(dirichlet512.history)
    assert np.all(np.diff(h[1:]) <= 1e-12 * h[1:-1])


def test_scale_invariance(w512):
    r = solve_linear_dirichlet(w512.grid, w512)
    for c in (1e-3, 7.0):
        assert p_rayleigh_quotient(c * r.u, 2.0, w512) == pytest.approx(r.lam, rel=1e-12)


def test_domain_monotonicity():
    lam1 = solve_linear_dirichlet(*(lambda w: (w.grid, w))(interval_weight(257))).lam
    lam2 = solve_linear_dirichlet(*(lambda w: (w.grid, w))(interval_weight(257, b=2.0))).lam
    assert lam1 > lam2
    assert lam2 == pytest.approx(lam1 / 4, rel=1e-3)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_p_laplacian_interval(p, w512):
    r = solve_plaplacian_dirichlet(w512.grid, w512, p)
    assert r.converged and not r.degraded
    assert abs(r.lam - LAMBDA_P[p]) / LAMBDA_P[p] < 0.01
    assert np.all(r.u[w512.grid.interior] > 0)


def test_p_laplacian_variational_consistency(w512):
    r = solve_plaplacian_dirichlet(w512.grid, w512, 4.0)
    assert p_rayleigh_quotient(r.u, 4.0, w512) == pytest.approx(r.lam, rel=1e-10)
    # the energy pairing <-Delta_p u, u>_mu / int u^4 is the same quotient
    num = -np.sum(w512.measure_weights * apply_p_laplacian(r.u, 4.0, w512) * r.u)
    den = np.sum(w512.measure_weights * r.u**4)
    assert num / den == pytest.approx(r.lam, rel=1e-10)
    assert np.sum(w512.measure_weights * np.abs(r.u) ** 4) == pytest.approx(1.0, rel=1e-12)


def test_p_two_reduction(w512, dirichlet512):
    opts = SolverOptions()
    r = solve_plaplacian_dirichlet(w512.grid, w512, 2.0, opts)
    assert abs(r.lam - dirichlet512.lam) <= 10 * opts.tol * dirichlet512.lam


def test_p_laplacian_rejects_p_le_one(w512):
    with pytest.raises(ParameterError):
        solve_plaplacian_dirichlet(w512.grid, w512, 1.0)


def test_p_laplacian_square():
    w = square_weight(33)
    r = solve_plaplacian_dirichlet(w.grid, w, 3.0)
    assert r.converged
    assert np.all(r.u[w.grid.interior] > 0)
    # lambda_p of the square lies between those of the inscribed and
    # circumscribed problems; a loose sanity window for p = 3
    assert LAMBDA_P[3.0] < r.lam < 4 * LAMBDA_P[3.0]


def test_clamped_beam(plate512):
    assert plate512.converged
    assert abs(plate512.lam - BEAM_GAMMA) / BEAM_GAMMA < 0.01


def test_plate_dominates_lambda_squared(plate512, dirichlet512):
    assert plate512.lam >= 0.99 * dirichlet512.lam**2
    w = square_weight(33)
    lam = solve_linear_dirichlet(w.grid, w).lam
    assert solve_clamped_plate(w.grid, w).lam >= 0.99 * lam**2


def test_buckling_rod(buckling512, dirichlet512):
    assert buckling512.converged
    assert abs(buckling512.lam - ROD_BUCKLING) / ROD_BUCKLING < 0.01
    assert buckling512.lam / dirichlet512.lam == pytest.approx(4.0, rel=0.01)


def test_buckling_quotient_of_mode(buckling512, w512):
    x = buckling512.u[w512.grid.interior]
    B = assemble_clamped_bilaplacian(w512.grid, w512)
    L = assemble_laplacian_f(w512.grid, w512)
    q = (x @ (B.form @ x)) / (-(x @ (L.form @ x)))
    assert q == pytest.approx(buckling512.lam, rel=1e-7)


def test_square_plate_refinement_ratio():
    vals = []
    for n in (33, 65, 129):
        w = square_weight(n)
        vals.append(solve_clamped_plate(w.grid, w).lam)
    ratio = (vals[0] - vals[1]) / (vals[1] - vals[2])
    assert 3.5 < ratio < 4.5


def test_weighted_plate_and_buckling():
    w = interval_weight(257, WeightSpec.quadratic(1.0, 0.5))
    lam = solve_linear_dirichlet(w.grid, w).lam
    gam = solve_clamped_plate(w.grid, w)
    buck = solve_buckling(w.grid, w)
    assert gam.converged and buck.converged
    assert gam.lam > lam**2 * 0.99 and buck.lam > 0


def test_unconverged_is_flagged(w512):
    r = solve_plaplacian_dirichlet(w512.grid, w512, 4.0, SolverOptions(max_outer=1, tol=1e-14))
    assert not r.converged
    assert r.iterations == 1


def test_deterministic(w512):
    a = solve_plaplacian_dirichlet(w512.grid, w512, 3.0)
    b = solve_plaplacian_dirichlet(w512.grid, w512, 3.0)
    assert a.lam == b.lam
    np.testing.assert_array_equal(a.u, b.u)


def test_solver_options_validation():
    with pytest.raises(ParameterError):
        SolverOptions(tol=0)
    with pytest.raises(ParameterError):
        SolverOptions(max_outer=0)
    with pytest.raises(ParameterError):
        SolverOptions(eps=-1.0)


def test_fourth_order_residual_floor(plate512, buckling512):
    # rounding limits these pencils to roughly eps * cond(A) at n = 512
    for r in (plate512, buckling512):
        assert r.converged
        assert r.residual < 1e-6
