import math

import numpy as np
import pytest

from nlstokes.quadrature import (composite_rule, gauss_legendre, grading_exponent,
                                 oscillation_panels, radial_rule)


def test_gauss_legendre_integrates_polynomials_exactly():
    x, w = gauss_legendre(8)
    assert np.all((x > 0) & (x < 1))
    for p in range(16):
        assert np.dot(w, x**p) == pytest.approx(1.0 / (p + 1), rel=1e-14)


def test_composite_rule_covers_all_panels():
    x, w = composite_rule([0.0, 0.3, 1.0, 2.5], 10)
    assert w.sum() == pytest.approx(2.5, rel=1e-14)
    assert np.dot(w, np.cos(x)) == pytest.approx(math.sin(2.5), rel=1e-12)


@pytest.mark.parametrize("beta, q", [(None, 1), (1.5, 1), (0.0, 2), (0.5, 4), (-2.0, 1),
                                     (0.9, 16), (0.99, 16)])
def test_grading_exponent(beta, q):
    assert grading_exponent(beta) == q


@pytest.mark.parametrize("a, n", [(0.0, 8), (10.0, 8), (60.0, 39), (200.0, 128)])
def test_oscillation_panels(a, n):
    assert oscillation_panels(a) == n


@pytest.mark.parametrize("e, rel", [(-0.5, 1e-13), (0.0, 1e-13), (1.5, 1e-13), (-0.9, 1e-10)])
def test_graded_rule_on_endpoint_singularity(e, rel):
    # int_0^1 r^e dr = 1 / (1 + e); the grading cap limits accuracy near e = -1
    r, w = radial_rule(8, grading_exponent(-e), singular=True)
    assert np.all(r > 0)
    assert np.dot(w, r**e) == pytest.approx(1.0 / (1.0 + e), rel=rel)


def test_breakpoints_are_panel_edges():
    # integrand with a kink at 0.5 integrates to full precision
    r, w = radial_rule(8, 1, breakpoints=(0.5,))
    f = np.abs(r - 0.5) ** 3
    assert np.dot(w, f) == pytest.approx(2 * 0.5**4 / 4, rel=1e-13)
