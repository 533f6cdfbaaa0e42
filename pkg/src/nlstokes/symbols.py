"""Fourier symbols of the nonlocal diffusion and gradient operators.

For a radial kernel the symbols depend on |xi| only.  In polar form

    d = 2:  lambda = 4  int_0^{pi/2}            int_0^delta r   w(r) (1 - cos(r cos(phi) |xi|)) dr dphi
            b      = 4  int_0^{pi/2} cos(phi)   int_0^delta r   w(r) sin(r cos(phi) |xi|) dr dphi
    d = 3:  lambda = 4pi int_0^{pi/2} sin(phi)  int_0^delta r^2 w(r) (1 - cos(...)) dr dphi
            b      = 4pi int_0^{pi/2} sin cos   int_0^delta r^2 w(r) sin(...) dr dphi

and in one dimension lambda = 2 int (1 - cos(xi r)) w dr, b = 2 int sin(xi r) w dr.
Both double integrals are evaluated by tensor Gauss-Legendre rules
(graded composite rule in r, plain rule in phi) with a refinement check.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq

from . import quadrature
from .kernels import KernelError, ScaledKernel

ANGULAR_NODES = 64
MAX_LEVEL = 4
CHUNK = 2_000_000
BISECTION_WIDTH = 1e-6
NEAR_ZERO = 1e-8


class QuadratureError(RuntimeError):
    """Symbol quadrature failed to converge; carries the last two estimates."""

    def __init__(self, xi, previous, last):
        self.xi = xi
        self.estimates = (previous, last)
        super().__init__(
            f"symbol quadrature did not converge at xi={xi!r}: "
            f"last estimates {previous!r}, {last!r}")


def _check_kernel(kernel, role, d):
    if not isinstance(kernel, ScaledKernel):
        raise KernelError("expected a ScaledKernel")
    if kernel.profile.role != role:
        raise KernelError(f"expected a {role} kernel, got {kernel.profile.role}")
    if d is not None and d != kernel.dim:
        raise KernelError(f"dimension mismatch: kernel has d={kernel.dim}, got {d}")


def _angular_rule(d, which, n):
    if d == 1:
        return np.ones(1), np.full(1, 2.0)
    x, w = quadrature.gauss_legendre(n)
    phi = 0.5 * math.pi * x
    w = 0.5 * math.pi * w
    c = np.cos(phi)
    if d == 2:
        a = 4.0 * w if which == "lambda" else 4.0 * c * w
    else:
        s = np.sin(phi)
        a = 4.0 * math.pi * s * w if which == "lambda" else 4.0 * math.pi * s * c * w
    return c, a


def _grading(kernel, which):
    p = kernel.profile
    if not p.singular:
        return 1
    # near 0: r**(d-1) w(r) * osc ~ r**(m - 1 - beta), m = 2 (1-cos) or 1 (sin)
    m = 2 if which == "lambda" else 1
    return quadrature.grading_exponent(p.beta + 1 - m)


def _evaluate(kernel, xis, which, level):
    """Symbol values at ``xis`` (all sharing one rule) at refinement ``level``."""
    d, delta, p = kernel.dim, kernel.delta, kernel.profile
    q = _grading(kernel, which)
    a_max = delta * float(np.max(xis)) if len(xis) else 0.0
    n_pan = quadrature.oscillation_panels(a_max) * 2**level
    s, ws = quadrature.radial_rule(n_pan, q, p.breakpoints, p.singular)
    r = delta * s
    # r**(d-1) * omega_delta(r) * dr, with omega_delta = delta**-e omega(r/delta)
    radial = ws * p.amplitude * p.weighted_shape(s, d, d - 1) \
        * delta ** (d - kernel.exponent)
    n_ang = ANGULAR_NODES * 2**level
    c, wa = _angular_rule(d, which, n_ang)
    out = np.empty(len(xis))
    step = max(1, CHUNK // (r.size * c.size))
    for i in range(0, len(xis), step):
        x = np.asarray(xis[i:i + step], dtype=float)
        arg = x[:, None, None] * r[None, :, None] * c[None, None, :]
        if which == "lambda":
            osc = 2.0 * np.sin(0.5 * arg) ** 2
        else:
            osc = np.sin(arg)
        out[i:i + step] = np.einsum("krp,r,p->k", osc, radial, wa)
    return out


def _tolerance(xis, which):
    x = np.abs(xis)
    return 1e-9 * np.maximum(1.0, x**2 if which == "lambda" else x)


def _symbol_array(kernel, xis, which):
    xis = np.asarray(xis, dtype=float)
    if np.any(xis < 0) or not np.all(np.isfinite(xis)):
        raise ValueError("wavenumbers must be finite and nonnegative")
    out = np.zeros(xis.shape)
    flat = xis.ravel()
    res = out.ravel()
    nz = np.nonzero(flat > 0)[0]
    if nz.size == 0:
        return out
    # group wavenumbers that share a radial panel count
    panels = np.array([quadrature.oscillation_panels(kernel.delta * x) for x in flat[nz]])
    for n in np.unique(panels):
        idx = nz[panels == n]
        xs = flat[idx]
        prev = _evaluate(kernel, xs, which, 0)
        todo = np.arange(idx.size)
        for level in range(1, MAX_LEVEL + 1):
            cur = _evaluate(kernel, xs[todo], which, level)
            ok = np.abs(cur - prev[todo]) <= _tolerance(xs[todo], which)
            res[idx[todo[ok]]] = cur[ok]
            prev[todo] = cur
            todo = todo[~ok]
            if todo.size == 0:
                break
        else:
            j = todo[0]
            raise QuadratureError(float(xs[j]), float(prev[j]), float(cur[~ok][0]))
    return out


def lambda_values(kernel, xis):
    """Vectorized :func:`lambda_symbol` over an array of |xi|."""
    _check_kernel(kernel, "diffusion", None)
    return _symbol_array(kernel, xis, "lambda")


def b_values(kernel, xis):
    """Vectorized :func:`b_symbol` over an array of |xi|."""
    _check_kernel(kernel, "gradient", None)
    return _symbol_array(kernel, xis, "b")


def lambda_symbol(kernel, xi, d=None):
    """Diffusion symbol lambda_delta(|xi|) of a rescaled diffusion kernel.

    Absolute accuracy is 1e-9 * max(1, xi**2); ``xi = 0`` gives exactly 0.

    Raises
    ------
    QuadratureError
        If refinement does not settle within the tolerance.
    """
    _check_kernel(kernel, "diffusion", d)
    return float(_symbol_array(kernel, [xi], "lambda")[0])


def b_symbol(kernel, xi, d=None):
    """Scalar gradient symbol b_delta(|xi|); the vector symbol is b * xi/|xi|.

    May be negative for kernels violating the monotonicity condition.
    """
    _check_kernel(kernel, "gradient", d)
    return float(_symbol_array(kernel, [xi], "b")[0])


class SymbolCache:
    """Memoized lambda and b at distinct |xi| for rescaled kernels.

    Either kernel may be omitted when only the other symbol is needed.
    Values are keyed by |xi| so lattices with many equal-length wave
    vectors trigger one quadrature per distinct length.
    """

    def __init__(self, diffusion=None, gradient=None):
        if diffusion is None and gradient is None:
            raise KernelError("at least one kernel is required")
        if diffusion is not None:
            _check_kernel(diffusion, "diffusion", None)
        if gradient is not None:
            _check_kernel(gradient, "gradient", None)
        if diffusion is not None and gradient is not None and (
                diffusion.delta != gradient.delta or diffusion.dim != gradient.dim):
            raise KernelError("kernels must share delta and dimension")
        self.diffusion = diffusion
        self.gradient = gradient
        self._lam = {}
        self._b = {}

    @property
    def delta(self):
        return (self.gradient or self.diffusion).delta

    def _lookup(self, kmag, store, kernel, which):
        kmag = np.asarray(kmag, dtype=float)
        uniq, inv = np.unique(kmag, return_inverse=True)
        missing = np.array([k for k in uniq if k not in store])
        if missing.size:
            vals = _symbol_array(kernel, missing, which)
            store.update(zip(missing.tolist(), vals.tolist()))
        vals = np.array([store[k] for k in uniq.tolist()])
        return vals[inv].reshape(kmag.shape)

    def lam(self, kmag):
        if self.diffusion is None:
            raise KernelError("no diffusion kernel supplied")
        return self._lookup(kmag, self._lam, self.diffusion, "lambda")

    def b(self, kmag):
        if self.gradient is None:
            raise KernelError("no gradient kernel supplied")
        return self._lookup(kmag, self._b, self.gradient, "b")


class LocalSymbols:
    """Symbols of the local operators: lambda = |xi|**2, b = |xi|."""

    delta = 0.0

    def lam(self, kmag):
        return np.asarray(kmag, dtype=float) ** 2

    def b(self, kmag):
        return np.asarray(kmag, dtype=float)


@dataclass(frozen=True)
class ScanReport:
    """Sign scan of b_delta on a uniform grid of (0, xi_max]."""

    xi: np.ndarray
    b: np.ndarray
    brackets: list = field(default_factory=list)
    near_zero: list = field(default_factory=list)

    @property
    def positive(self):
        return not self.brackets and not self.near_zero


def scan_b_zero_crossings(kernel, xi_max, resolution=512, refine=True):
    """Locate sign changes of b_delta on ``resolution`` samples of (0, xi_max].

    Each sign change is narrowed by bisection to a bracket of width at
    most 1e-6.  Interior grid minima with ``|b| < 1e-8`` that do not change
    sign are reported separately in ``near_zero``.
    """
    _check_kernel(kernel, "gradient", None)
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    xi = xi_max * np.arange(1, resolution + 1) / resolution
    b = b_values(kernel, xi)
    brackets = []
    for i in np.nonzero(np.sign(b[:-1]) * np.sign(b[1:]) < 0)[0]:
        lo, hi, blo = xi[i], xi[i + 1], b[i]
        while refine and hi - lo > BISECTION_WIDTH:
            mid = 0.5 * (lo + hi)
            bm = b_symbol(kernel, mid)
            if bm == 0.0:
                lo = hi = mid
                break
            if np.sign(bm) == np.sign(blo):
                lo, blo = mid, bm
            else:
                hi = mid
        brackets.append((float(lo), float(hi)))
    near = []
    for i in range(1, resolution - 1):
        if abs(b[i]) < NEAR_ZERO and abs(b[i]) <= abs(b[i - 1]) and abs(b[i]) <= abs(b[i + 1]) \
                and np.sign(b[i - 1]) == np.sign(b[i + 1]):
            near.append(float(xi[i]))
    return ScanReport(xi, b, brackets, near)


def refine_root(kernel, bracket, xtol=1e-15):
    """Root of b_delta inside a sign-change bracket, to near machine precision."""
    lo, hi = bracket
    return brentq(lambda x: b_symbol(kernel, x), lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class SymbolTable:
    dim: int
    delta: float
    xi: np.ndarray
    lam: np.ndarray
    b: np.ndarray
    quadrature: dict

    def rows(self):
        return [(x, l, b) for x, l, b in zip(self.xi.tolist(), self.lam.tolist(), self.b.tolist())]


SYMBOL_COLUMNS = ("xi", "lambda", "b")


def symbol_table(diffusion, gradient, d, delta, xi, workers=1):
    """Tabulate lambda and b for two profiles on a strictly increasing grid.

    Work is split into contiguous blocks evaluated in a thread pool and
    written back in grid order, so results do not depend on ``workers``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or np.any(xi <= 0) or np.any(np.diff(xi) <= 0):
        raise ValueError("xi grid must be positive and strictly increasing")
    lk = ScaledKernel(diffusion, delta, d)
    gk = ScaledKernel(gradient, delta, d)
    blocks = np.array_split(np.arange(xi.size), max(1, min(workers, xi.size)))

    def run(idx):
        return lambda_values(lk, xi[idx]), b_values(gk, xi[idx])

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(run, blocks))
    lam = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])
    meta = {
        "nodes_per_panel": quadrature.NODES_PER_PANEL,
        "angular_nodes": ANGULAR_NODES,
        "grading_lambda": _grading(lk, "lambda"),
        "grading_b": _grading(gk, "b"),
        "max_level": MAX_LEVEL,
    }
    return SymbolTable(d, delta, xi, lam, b, meta)
