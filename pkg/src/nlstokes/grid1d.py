"""Finite-difference nonlocal gradients on 1D periodic lattices.

Two layouts discretize G_delta p(x) = int omega_hat_delta(|s|) sgn(s) (p(x+s) - p(x)) ds:

* regular: nodes at offsets k h, k = 1..r, r = floor(delta / h);
* staggered: nodes at half offsets (k + 1/2) h, k = 0..r-1.

Both have purely imaginary Fourier symbols i b_{delta,h}(n) with

    b_{delta,h}(n) = 2 sum_k d_k sin(n * offset_k).

The regular sum vanishes at the checkerboard mode n h = pi; the staggered
one does not.
"""

from dataclasses import dataclass
import math

import numpy as np

from .kernels import KernelError, ScaledKernel

LAYOUTS = ("regular", "staggered")
RANK_RTOL = 1e-12
# slack on delta / h so that exact multiples are not lost to rounding
_CELL_SLACK = 1e-12

GRID1D_COLUMNS = ("n", "b_regular", "b_staggered")


class StencilError(ValueError):
    """The horizon holds no stencil node."""

    def __init__(self, message="empty stencil"):
        super().__init__(message)


@dataclass(frozen=True)
class Discretization1D:
    """Nonnegative stencil weights of a 1D nonlocal gradient.

    ``offsets`` are in units of h: integers 1..r for the regular layout and
    half-integers 1/2, 3/2, ... for the staggered one.  ``N`` is ``None``
    when the lattice was given by a spacing that does not divide 2 pi.
    """

    h: float
    delta: float
    layout: str
    weights: np.ndarray
    N: int | None = None

    @property
    def r(self):
        """Horizon in cells, floor(delta / h)."""
        return int(math.floor(self.delta / self.h * (1.0 + _CELL_SLACK)))

    @property
    def offsets(self):
        k = np.arange(self.weights.size, dtype=float)
        return k + 1.0 if self.layout == "regular" else k + 0.5

    def first_moment(self):
        """2 sum_k d_k (offset_k h); equals 1 up to O(h) for normalized kernels."""
        return float(2.0 * np.sum(self.weights * self.offsets * self.h))


def build_weights(kernel, delta=None, h=None, layout="regular", N=None):
    """Rectangle-rule weights d_k = omega_hat_delta(offset_k h) h.

    Parameters
    ----------
    kernel : ScaledKernel or RadialProfile
        A d = 1 gradient kernel.  A bare profile is rescaled with ``delta``
        (and should already be normalized).
    delta : float, optional
        Horizon; taken from ``kernel`` when it is a ScaledKernel.
    h, N : spacing or even lattice size (h = 2 pi / N); give one of them.
    layout : {"regular", "staggered"}

    Raises
    ------
    StencilError
        If delta < h (regular) or delta < h/2 (staggered).
    """
    if layout not in LAYOUTS:
        raise KernelError(f"unknown layout {layout!r}")
    if not isinstance(kernel, ScaledKernel):
        if delta is None:
            raise KernelError("delta is required for a bare profile")
        kernel = ScaledKernel(kernel, float(delta), 1)
    if kernel.dim != 1:
        raise KernelError("grid audit needs a d = 1 kernel")
    delta = kernel.delta
    if N is not None:
        N = int(N)
        if N < 2 or N % 2:
            raise KernelError("N must be an even integer >= 2")
        h = 2.0 * math.pi / N
    elif h is None or not h > 0.0:
        raise KernelError("give N or a positive spacing h")
    cells = delta / h * (1.0 + _CELL_SLACK)
    minimum = 1.0 if layout == "regular" else 0.5
    if cells < minimum:
        raise StencilError()
    count = max(1, int(math.floor(cells)))
    k = np.arange(count, dtype=float)
    offsets = k + 1.0 if layout == "regular" else k + 0.5
    weights = np.asarray(kernel(offsets * h), dtype=float) * h
    return Discretization1D(float(h), delta, layout, weights, N)


def _sin_turns(m, M):
    """sin(2 pi m / M) for integers, exactly 0 at multiples of pi and exactly odd."""
    m = np.mod(np.asarray(m, dtype=np.int64), M)
    neg = 2 * m > M
    m = np.where(neg, M - m, m)
    out = np.sin(2.0 * np.pi * m / M)
    out[(m == 0) | (2 * m == M)] = 0.0
    return np.where(neg, -out, out)


def discrete_gradient_symbol(disc, n):
    """b_{delta,h}(n) = 2 sum_k d_k sin(n offset_k h).

    On lattices with integer N the phases are reduced exactly, so the
    zeros at n h in pi Z are exact.  Otherwise ``n`` may be any real and
    the phase is evaluated in floating point.
    """
    if disc.N is not None and float(n).is_integer():
        n = int(n)
        if disc.layout == "regular":
            m = n * np.arange(1, disc.weights.size + 1)
            s = _sin_turns(m, disc.N)
        else:
            m = n * (2 * np.arange(disc.weights.size) + 1)
            s = _sin_turns(m, 2 * disc.N)
    else:
        s = np.sin(float(n) * disc.offsets * disc.h)
    return float(2.0 * np.dot(disc.weights, s))


def symbol_at_phase(disc, theta):
    """Symbol as a function of the phase theta = n h."""
    return float(2.0 * np.dot(disc.weights, np.sin(theta * disc.offsets)))


@dataclass(frozen=True)
class NyquistAudit:
    minimum: float
    maximum: float
    location: int
    verdict: str


def nyquist_audit(disc):
    """Smallest |b_{delta,h}(n)| over n = 1..N/2 and a rank verdict."""
    if disc.N is None:
        raise KernelError("audit needs an integer lattice size N")
    ns = np.arange(1, disc.N // 2 + 1)
    vals = np.abs([discrete_gradient_symbol(disc, n) for n in ns])
    i = int(np.argmin(vals))
    top = float(vals.max())
    verdict = "rank-deficient" if vals[i] < RANK_RTOL * top else "stable"
    return NyquistAudit(float(vals[i]), top, int(ns[i]), verdict)


def symbol_rows(regular, staggered):
    """Rows (n, b_regular, b_staggered) for n = 0..N/2."""
    if regular.N != staggered.N or regular.N is None:
        raise KernelError("layouts must share an integer lattice size")
    return [(n, discrete_gradient_symbol(regular, n), discrete_gradient_symbol(staggered, n))
            for n in range(regular.N // 2 + 1)]
