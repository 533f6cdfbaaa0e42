"""Composite Gauss-Legendre rules on (0, 1] for radial integrals.

The radial integrands met here have two kinds of trouble: an algebraic
singularity at r = 0 (fractional kernels) and oscillation of frequency
proportional to delta * |xi|.  Both are handled by the same rule:

* a power substitution r = t**q which makes r**(-beta)-type endpoint
  behaviour C^1 in t,
* uniform panels in t whose count scales with the oscillation,
* optional geometric sub-panels towards t = 0 for singular profiles,
* kernel breakpoints (kinks, support changes) inserted as panel edges.
"""

from functools import lru_cache
import math

import numpy as np
from numpy.polynomial.legendre import leggauss

NODES_PER_PANEL = 32
GEOMETRIC_LEVELS = 24
GEOMETRIC_RATIO = 0.5
GEOMETRIC_NODES = 16
R_FLOOR = 1e-100
MAX_GRADING = 16


@lru_cache(maxsize=64)
def gauss_legendre(n):
    """Nodes and weights of the n-point rule on [0, 1]."""
    x, w = leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(edges, n):
    """Composite n-point Gauss-Legendre rule over consecutive panel edges."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(n)
    a = edges[:-1, None]
    h = np.diff(edges)[:, None]
    return (a + h * x).ravel(), (h * w).ravel()


def grading_exponent(beta):
    """Power q of the substitution r = t**q for an r**(-beta) endpoint.

    ``beta=None`` means a bounded integrand; no substitution (q = 1).
    """
    if beta is None or beta >= 1.0:
        return 1
    return min(MAX_GRADING, max(1, math.ceil(2.0 / (1.0 - beta))))


def radial_rule(n_panels, q=1, breakpoints=(), singular=False,
                nodes_per_panel=NODES_PER_PANEL):
    """Nodes ``r`` in (0, 1] and weights for integrals of g(r) dr.

    Parameters
    ----------
    n_panels : int
        Number of uniform panels in the substituted variable t.
    q : int
        Grading exponent, r = t**q.  The Jacobian q t**(q-1) is folded
        into the returned weights.
    breakpoints : sequence of float
        Points of (0, 1) in r where the integrand is not smooth.
    singular : bool
        Add geometric sub-panels towards 0 inside the first panel.

    Returns
    -------
    r, w : ndarray
        Quadrature nodes (strictly positive) and weights.
    """
    edges = np.linspace(0.0, 1.0, int(n_panels) + 1)
    if breakpoints:
        tb = [b ** (1.0 / q) for b in breakpoints if 0.0 < b < 1.0]
        edges = np.union1d(edges, tb)
    first = edges[1]
    t_parts, w_parts = [], []
    if singular:
        # smallest node r = t**q stays above R_FLOOR so power-law
        # integrands neither overflow nor underflow
        x0 = gauss_legendre(GEOMETRIC_NODES)[0][0]
        t_floor = R_FLOOR ** (1.0 / q) / x0
        levels = int(math.log(first / t_floor) / math.log(1.0 / GEOMETRIC_RATIO))
        levels = max(0, min(GEOMETRIC_LEVELS, levels))
        geo = first * GEOMETRIC_RATIO ** np.arange(levels, -1, -1)
        geo = np.concatenate([[0.0], geo])
        tg, wg = composite_rule(geo, GEOMETRIC_NODES)
        t_parts.append(tg)
        w_parts.append(wg)
        edges = edges[1:]
    t, wt = composite_rule(edges, nodes_per_panel)
    t_parts.append(t)
    w_parts.append(wt)
    t = np.concatenate(t_parts)
    wt = np.concatenate(w_parts)
    if q == 1:
        return t, wt
    return t ** q, wt * q * t ** (q - 1)


def oscillation_panels(a, minimum=8):
    """Panel count resolving sin/cos(a r) on (0, 1]: one per quarter period."""
    return int(math.ceil(max(minimum, 2.0 * a / math.pi)))
