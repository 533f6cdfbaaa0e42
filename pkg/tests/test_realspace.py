import math

import numpy as np
import pytest

from nlstokes.convergence import observed_order
from nlstokes.forcing import rng
from nlstokes.kernels import (ScaledKernel, constant, cubic_spline, fractional, normalize_profile,
                              truncated_gaussian)
from nlstokes.realspace import (LatticeField, RealSpaceError, adjointness_residual,
                                apply_operator_realspace, ball_box_integral, build_stencil,
                                cell_fraction, planewave_symbol_check)
from nlstokes.spectral import PeriodicGrid
from nlstokes.symbols import b_symbol, lambda_symbol


def kern(profile, delta=0.4, d=2):
    return ScaledKernel(normalize_profile(profile, d), delta, d)


def random_pair(grid, seed):
    g = rng(seed)
    return (LatticeField(grid, g.standard_normal((grid.dim,) + grid.shape)),
            LatticeField(grid, g.standard_normal(grid.shape)))


def test_cell_fraction_oracles():
    assert cell_fraction((0.0, 0.0), 0.1, 1.0) == 1.0
    assert cell_fraction((0.0, 0.0), 1.0, 0.1) == pytest.approx(math.pi * 0.01, rel=1e-12)
    assert cell_fraction((3.0, 0.0), 1.0, 1.0) == 0.0
    # quarter disc of radius 1 inside the unit square [0,1]^2
    assert cell_fraction((0.5, 0.5), 1.0, 1.0) == pytest.approx(math.pi / 4, rel=1e-12)
    # octant of the unit ball inside [0,1]^3
    assert cell_fraction((0.5, 0.5, 0.5), 1.0, 1.0) == pytest.approx(math.pi / 6, rel=1e-12)


def test_ball_box_integral_second_moment():
    # int over the quarter disc of |s|^2 = (pi/2) R^4 / 4
    f = lambda p: np.sum(p**2, axis=1)
    assert ball_box_integral([(0, 2), (0, 2)], 1.5, f) == pytest.approx(math.pi * 1.5**4 / 8, rel=1e-12)


@pytest.mark.parametrize("d, N, delta", [(2, 32, 0.4), (3, 16, 0.8)])
def test_stencil_mass_matches_ball_integral(d, N, delta):
    grid = PeriodicGrid(d, N)
    k = kern(constant("diffusion"), delta, d)
    st = build_stencil(grid, k)
    c = float(k(0.0))
    ball = (math.pi * delta**2) if d == 2 else 4 * math.pi * delta**3 / 3
    centre = c * grid.h**d
    assert np.sum(st.weights) == pytest.approx(c * ball - centre, rel=1e-10)
    assert np.max(np.abs(np.sum(st.vectors, axis=0))) < 1e-14


def test_L_on_zero_field_and_constants():
    grid = PeriodicGrid(2, 32)
    k = kern(cubic_spline("diffusion"))
    assert np.all(apply_operator_realspace("L", LatticeField(grid, np.zeros(grid.shape)), k).values == 0)
    gp = apply_operator_realspace("G", LatticeField(grid, np.full(grid.shape, 3.0)), kern(fractional(-0.5)))
    assert np.all(gp.values == 0)


def test_G_on_sine_example():
    grid = PeriodicGrid(2, 64)
    k = kern(cubic_spline())
    p = LatticeField.from_function(grid, lambda x: np.sin(x[0]))
    gp = apply_operator_realspace("G", p, k).values
    x = grid.points()
    b = b_symbol(k, 1.0)
    assert np.max(np.abs(gp[0] - b * np.cos(x[0]))) < grid.h**2
    assert np.max(np.abs(gp[1])) < 1e-14


def test_plus_and_minus_forms_agree():
    grid = PeriodicGrid(2, 32)
    u, _ = random_pair(grid, 1)
    k = kern(fractional(-0.5))
    plus = apply_operator_realspace("D", u, k, form="plus").values
    minus = apply_operator_realspace("D", u, k, form="minus").values
    assert np.max(np.abs(plus - minus)) < 1e-12 * np.max(np.abs(plus))


@pytest.mark.parametrize("rule", ["volume", "point"])
def test_adjointness(rule):
    grid = PeriodicGrid(2, 32)
    k = kern(fractional(0.5))
    for seed in range(5):
        u, p = random_pair(grid, seed)
        assert adjointness_residual(u, p, k, rule=rule) <= 1e-12


def test_adjointness_trivial_cases():
    grid = PeriodicGrid(2, 16)
    k = kern(constant(), 0.8)
    u, p = random_pair(grid, 3)
    one = LatticeField(grid, np.ones(grid.shape))
    assert abs(u.inner(apply_operator_realspace("G", one, k))) < 1e-13
    assert abs(apply_operator_realspace("D", u, k).inner(one)) < 1e-12
    zero = LatticeField(grid, np.zeros((2,) + grid.shape))
    assert adjointness_residual(zero, p, k) == 0.0


def test_fractional_nonnegative_beta_carries_warning():
    grid = PeriodicGrid(2, 32)
    p = LatticeField(grid, np.zeros(grid.shape))
    assert apply_operator_realspace("G", p, kern(fractional(0.5))).warnings
    assert not apply_operator_realspace("G", p, kern(fractional(-0.5))).warnings


def test_preconditions():
    grid = PeriodicGrid(2, 8)
    p = LatticeField(grid, np.zeros(grid.shape))
    with pytest.raises(RealSpaceError):
        apply_operator_realspace("G", p, kern(constant(), 0.4))
    with pytest.raises(RealSpaceError):
        apply_operator_realspace("G", LatticeField(PeriodicGrid(2, 64), np.zeros((64, 64))),
                                 kern(constant(), 3.2))
    with pytest.raises(RealSpaceError):
        apply_operator_realspace("G", LatticeField(grid, np.zeros((2, 8, 8))), kern(constant(), 1.0))
    with pytest.raises(RealSpaceError):
        adjointness_residual(LatticeField(grid, np.zeros((2, 8, 8))),
                             LatticeField(PeriodicGrid(2, 16), np.zeros((16, 16))), kern(constant(), 1.0))
    with pytest.raises(RealSpaceError):
        LatticeField(grid, np.full((8, 8), np.nan))
    with pytest.raises(RealSpaceError):
        planewave_symbol_check("L", kern(constant("diffusion")), (1, 0), 8, 1.0)


def test_planewave_zero_mode():
    k = kern(constant("diffusion"))
    assert planewave_symbol_check("L", k, (0, 0), 32, 0.0) == 0.0


def test_planewave_L_constant_kernel_example():
    k = kern(constant("diffusion"))
    lam = lambda_symbol(k, 1.0)
    e = [planewave_symbol_check("L", k, (1, 0), N, lam) for N in (32, 64, 128)]
    assert observed_order(e)[-1] == pytest.approx(2.0, abs=0.3)


@pytest.mark.parametrize("profile", [cubic_spline("diffusion"), truncated_gaussian(0.5, "diffusion")])
def test_planewave_L_smooth_kernels(profile):
    k = kern(profile)
    lam = lambda_symbol(k, 1.0)
    e = [planewave_symbol_check("L", k, (1, 0), N, lam) for N in (32, 64, 128)]
    assert all(abs(o - 2.0) <= 0.3 for o in observed_order(e))


def test_planewave_G_converges():
    k = kern(cubic_spline())
    b = b_symbol(k, 1.0)
    e = [planewave_symbol_check("G", k, (1, 0), N, b) for N in (32, 64, 128)]
    assert all(o >= 1.7 for o in observed_order(e))
