import math

import numpy as np
import pytest

from nlstokes.forcing import exp_decay, make_forcing, random_band_limited, taylor_green, trig_product
from nlstokes.spectral import PeriodicGrid, SpectralError, SpectralField


def test_trig_product_synthesizes_sin_cos():
    g = PeriodicGrid(2, 8)
    x = g.points()
    v = SpectralField(g, trig_product(g, "sc", 2.0)).to_real()[0]
    assert np.allclose(v, 2 * np.sin(x[0]) * np.cos(x[1]), atol=1e-13)


@pytest.mark.parametrize("d", [2, 3])
def test_taylor_green_fields(d):
    g = PeriodicGrid(d, 8)
    tg = taylor_green(g, nu=0.5)
    x = g.points()
    u = tg.velocity.to_real()
    assert np.allclose(u[0], np.sin(x[0]) * np.cos(x[1]) * (np.cos(x[2]) if d == 3 else 1), atol=1e-13)
    p = tg.pressure.to_real()[0]
    assert np.allclose(p, np.prod(np.sin(x), axis=0), atol=1e-13)
    # f = d nu u + grad p, first component
    gp0 = np.cos(x[0]) * np.prod(np.sin(x[1:]), axis=0)
    assert np.allclose(tg.forcing.to_real()[0], d * 0.5 * u[0] + gp0, atol=1e-13)


def test_taylor_green_needs_2d_or_3d():
    with pytest.raises(SpectralError):
        taylor_green(PeriodicGrid(1, 8))


def test_random_field_is_grid_independent_and_seeded():
    a = random_band_limited(PeriodicGrid(2, 16), 4, seed=3)
    b = random_band_limited(PeriodicGrid(2, 32), 4, seed=3)
    assert np.array_equal(a.on_grid(b.grid).coeffs, b.coeffs)
    c = random_band_limited(PeriodicGrid(2, 16), 4, seed=4)
    assert not np.array_equal(a.coeffs, c.coeffs)
    assert a.is_real() and a.is_zero_mean()
    assert np.all(a.coeffs[:, 5, :] == 0)
    with pytest.raises(SpectralError):
        random_band_limited(PeriodicGrid(2, 8), 4, seed=0)


def test_exp_decay_envelope():
    g = PeriodicGrid(2, 16)
    f = exp_decay(g, rate=0.5)
    idx = (0,) + g.index_of((3, 4))
    assert abs(f.coeffs[idx]) == pytest.approx((2 * math.pi) ** 2 * math.exp(-2.5))
    assert f.is_real() and f.is_zero_mean()


def test_make_forcing_kinds():
    g = PeriodicGrid(2, 8)
    m = make_forcing({"kind": "modes", "modes": [{"xi": [1, 0], "amp": [[0, 0], [1, 0]]}]}, g)
    assert m.coeffs[1, 1, 0] == 1 and m.coeffs[1, -1, 0] == 1
    assert make_forcing({"kind": "random", "band": 2}, g, seed=7).is_real()
    assert make_forcing({"kind": "exp_decay"}, g).ncomp == 2
    assert np.array_equal(make_forcing({}, g).coeffs, taylor_green(g).forcing.coeffs)
    with pytest.raises(SpectralError):
        make_forcing({"kind": "bogus"}, g)
