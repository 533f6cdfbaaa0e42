import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlstokes.forcing import random_band_limited, taylor_green
from nlstokes.kernels import ScaledKernel, constant, fractional, normalize_profile
from nlstokes.spectral import (IllPosedError, IncompatibleForcingError, PeriodicGrid,
                               SpectralError, SpectralField, StokesProblem,
                               apply_nonlocal_operator, divergence_audit, divergence_zero_sets,
                               field_norm, leray_project, solve_pressure_poisson, solve_stokes)
from nlstokes.symbols import SymbolCache, b_symbol, lambda_symbol


def kernels(d, delta, beta=0.5):
    return (ScaledKernel(normalize_profile(constant("diffusion"), d), delta, d),
            ScaledKernel(normalize_profile(fractional(beta), d), delta, d))


def test_grid_validation_and_points():
    with pytest.raises(SpectralError):
        PeriodicGrid(2, 7)
    with pytest.raises(SpectralError):
        PeriodicGrid(4, 8)
    g = PeriodicGrid(2, 8)
    assert g.kmax == 3
    assert g.points()[0, 0, 0] == -math.pi
    assert not g.retained[4, 0]
    with pytest.raises(SpectralError):
        g.index_of((4, 0))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_real_round_trip(d):
    g = PeriodicGrid(d, 8)
    f = random_band_limited(g, 3, seed=4, ncomp=1)
    back = SpectralField.from_real(g, f.to_real())
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-12 * np.max(np.abs(f.coeffs))
    assert f.is_real()


def test_single_mode_synthesis_matches_cosine():
    g = PeriodicGrid(2, 16)
    f = SpectralField.from_modes(g, [((2, -1), 0.5 * (2 * math.pi) ** 2)], real=True)
    x = g.points()
    assert np.allclose(f.to_real()[0], np.cos(2 * x[0] - x[1]), atol=1e-13)


def test_on_grid_truncates_and_pads():
    small, big = PeriodicGrid(2, 8), PeriodicGrid(2, 16)
    f = random_band_limited(big, 5, seed=1)
    up = f.on_grid(small).on_grid(big)
    assert np.all(up.coeffs[:, 4, 0] == 0)
    assert np.allclose(up.on_grid(small).coeffs, f.on_grid(small).coeffs)


@pytest.mark.parametrize("d", [2, 3])
def test_local_taylor_green_is_exact(d):
    g = PeriodicGrid(d, 8)
    tg = taylor_green(g, nu=0.7)
    sol = solve_stokes(StokesProblem(tg.forcing, 0.7, "local"))
    scale = np.max(np.abs(tg.velocity.coeffs))
    assert np.max(np.abs(sol.velocity.coeffs - tg.velocity.coeffs)) < 1e-13 * scale
    assert np.max(np.abs(sol.pressure.coeffs - tg.pressure.coeffs)) < 1e-13 * scale


def test_nonlocal_matches_dense_block_oracle():
    d, nu = 2, 0.8
    g = PeriodicGrid(d, 8)
    f = random_band_limited(g, 3, seed=11)
    diff, grad = kernels(d, 0.4)
    sol = solve_stokes(StokesProblem(f, nu, diffusion=diff, gradient=grad))
    for xi in [(1, 0), (2, -3), (3, 3), (0, 1)]:
        n = math.hypot(*xi)
        lam, b = lambda_symbol(diff, n), b_symbol(grad, n)
        bv = b * np.array(xi) / n
        A = np.zeros((d + 1, d + 1), dtype=complex)
        A[:d, :d] = nu * lam * np.eye(d)
        A[:d, d] = 1j * bv
        A[d, :d] = -1j * bv
        idx = (slice(None),) + g.index_of(xi)
        rhs = np.append(f.coeffs[idx], 0)
        x = np.linalg.solve(A, rhs)
        assert np.allclose(sol.velocity.coeffs[idx], x[:d], rtol=1e-12, atol=1e-12)
        assert np.allclose(sol.pressure.coeffs[(0,) + g.index_of(xi)], x[d], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("variant", ["nonlocal", "modified", "local"])
def test_residuals_vanish(variant):
    g = PeriodicGrid(3, 8)
    f = random_band_limited(g, 3, seed=2)
    diff, grad = kernels(3, 0.3)
    sol = solve_stokes(StokesProblem(f, 1.0, variant, diff, grad))
    scale = field_norm(f)
    assert sol.residual < 1e-11 * scale
    assert sol.div_local < 1e-11 * scale
    assert sol.div_nonlocal < 1e-11 * scale
    assert sol.velocity.is_real() and sol.pressure.is_real()


def test_incompatible_forcing():
    g = PeriodicGrid(2, 8)
    c = np.zeros((2,) + g.shape, dtype=complex)
    c[0, 0, 0] = 1.0
    with pytest.raises(IncompatibleForcingError):
        solve_stokes(StokesProblem(SpectralField(g, c), variant="local"))


def test_ill_posed_kernel_is_reported_with_modes():
    g = PeriodicGrid(2, 8)
    f = taylor_green(g).forcing
    root = 5.884300966383533  # zero of b_1 for (d=2, beta=-2), placed on |xi| = 1
    grad = ScaledKernel(normalize_profile(fractional(-2.0), 2), root, 2)
    diff = ScaledKernel(normalize_profile(constant("diffusion"), 2), root, 2)
    with pytest.raises(IllPosedError) as info:
        solve_stokes(StokesProblem(f, diffusion=diff, gradient=grad))
    assert (1, 0) in info.value.modes and (0, -1) in info.value.modes


def test_problem_validation():
    g = PeriodicGrid(2, 8)
    f = taylor_green(g).forcing
    with pytest.raises(SpectralError):
        StokesProblem(f, variant="other")
    with pytest.raises(SpectralError):
        StokesProblem(f, nu=0.0, variant="local")
    with pytest.raises(SpectralError):
        StokesProblem(f)
    with pytest.raises(SpectralError):
        StokesProblem(f.component(0), variant="local")


def test_operators_on_a_single_mode():
    g = PeriodicGrid(2, 16)
    diff, grad = kernels(2, 0.5)
    xi = (3, -2)
    n = math.hypot(*xi)
    p = SpectralField.from_modes(g, [(xi, 1.0)])
    idx = g.index_of(xi)
    Lp = apply_nonlocal_operator("L", p, diff)
    assert Lp.coeffs[(0,) + idx] == pytest.approx(-lambda_symbol(diff, n), rel=1e-14)
    Gp = apply_nonlocal_operator("G", p, grad)
    assert np.allclose(Gp.coeffs[(slice(None),) + idx], 1j * b_symbol(grad, n) * np.array(xi) / n)
    DGp = apply_nonlocal_operator("D", Gp, grad)
    assert DGp.coeffs[(0,) + idx] == pytest.approx(-b_symbol(grad, n) ** 2, rel=1e-13)
    with pytest.raises(SpectralError):
        apply_nonlocal_operator("G", Gp, grad)
    with pytest.raises(SpectralError):
        apply_nonlocal_operator("X", p, grad)


def test_pressure_poisson_inverts_minus_DG():
    g = PeriodicGrid(2, 16)
    _, grad = kernels(2, 0.3)
    rhs = random_band_limited(g, 6, seed=9, ncomp=1)
    p = solve_pressure_poisson(rhs, grad)
    back = apply_nonlocal_operator("D", apply_nonlocal_operator("G", p, grad), grad) * -1.0
    assert np.max(np.abs(back.coeffs - rhs.coeffs)) < 1e-12 * np.max(np.abs(rhs.coeffs))


def test_norms():
    g = PeriodicGrid(2, 16)
    f = SpectralField.from_modes(g, [((1, 2), 0.5 * (2 * math.pi) ** 2)], real=True)
    # cos(x + 2y) has mean square 1/2 over the 4 pi^2 cell
    assert field_norm(f) == pytest.approx(math.pi * math.sqrt(2), rel=1e-14)
    assert field_norm(f, "Hs", s=1) == pytest.approx(math.sqrt(5) * math.pi * math.sqrt(2))
    diff, _ = kernels(2, 0.2)
    lam = lambda_symbol(diff, math.sqrt(5))
    assert field_norm(f, "Sdelta", symbols=diff) == pytest.approx(math.sqrt(lam) * math.pi * math.sqrt(2))
    with pytest.raises(SpectralError):
        field_norm(f, "H1")


def test_leray_projection_and_zero_sets():
    g = PeriodicGrid(2, 16)
    _, grad = kernels(2, 0.3)
    u = leray_project(random_band_limited(g, 7, seed=5))
    loc, nl = divergence_audit(u, grad)
    assert loc < 1e-10 and nl < 1e-10
    zl, zn = divergence_zero_sets(u, grad)
    assert zl.all() and zn.all()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.floats(-3, 3), st.floats(-3, 3))
def test_solver_is_linear(seed, a, c):
    g = PeriodicGrid(2, 8)
    diff, grad = kernels(2, 0.5)
    sym = SymbolCache(diff, grad)
    f1 = random_band_limited(g, 3, seed)
    f2 = random_band_limited(g, 3, seed + 1)
    s = lambda f: solve_stokes(StokesProblem(f, symbols=sym)).velocity.coeffs
    lhs = s(f1 * a + f2 * c)
    assert np.allclose(lhs, a * s(f1) + c * s(f2), atol=1e-9 * (1 + np.max(np.abs(lhs))))
