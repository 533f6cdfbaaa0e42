"""Fourier-space Stokes solvers on the periodic cell (-pi, pi)^d.

Fields are stored as Fourier coefficients

    u_hat(xi) = int u(x) exp(-i xi.x) dx,   u(x) = (2 pi)^-d sum u_hat(xi) exp(i xi.x)

on the lattice |xi_k| <= N/2 - 1; the Nyquist rows are always zero.  The
arrays use numpy's FFT ordering, so collocation values at x_j = -pi + j h,
h = 2 pi / N, follow from one FFT.

Each retained mode decouples into a (d+1)x(d+1) system

    [ nu*lam  I    i b ] [u_hat]   [f_hat]
    [ -i b^T       0   ] [p_hat] = [  0  ]

with vector symbol b = b_delta(|xi|) xi/|xi|, solved in closed form.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .kernels import ScaledKernel
from .symbols import LocalSymbols, SymbolCache

VARIANTS = ("nonlocal", "modified", "local")
ILL_POSED_RTOL = 1e-12


class SpectralError(ValueError):
    pass


class IncompatibleForcingError(SpectralError):
    def __init__(self, mean):
        super().__init__(f"incompatible forcing: nonzero mean coefficient {mean!r}")


class IllPosedError(SpectralError):
    """A symbol vanishes (numerically) on retained modes."""

    def __init__(self, what, modes):
        self.modes = [tuple(int(v) for v in m) for m in modes]
        shown = ", ".join(str(m) for m in self.modes[:8])
        more = "" if len(self.modes) <= 8 else f" (+{len(self.modes) - 8} more)"
        super().__init__(f"ill-posed {what} at mode {shown}{more}")


@dataclass(frozen=True)
class PeriodicGrid:
    dim: int
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise SpectralError("dim must be 1, 2 or 3")
        if self.N < 4 or self.N % 2:
            raise SpectralError(f"N must be an even integer >= 4, got {self.N}")

    @property
    def shape(self):
        return (self.N,) * self.dim

    @property
    def h(self):
        return 2.0 * math.pi / self.N

    @property
    def kmax(self):
        return self.N // 2 - 1

    @cached_property
    def k(self):
        """Integer wave vectors, shape (dim, N, ..., N)."""
        k1 = np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)
        return np.stack(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def retained(self):
        return np.all(np.abs(self.k) <= self.kmax, axis=0)

    @cached_property
    def ksq(self):
        return np.sum(self.k**2, axis=0)

    @cached_property
    def kmag(self):
        return np.sqrt(self.ksq.astype(float))

    @cached_property
    def active(self):
        """Retained nonzero modes."""
        return self.retained & (self.ksq > 0)

    @cached_property
    def phase(self):
        # exp(i xi . pi) = (-1)^(sum xi) links x_j = -pi + j h to FFT indexing
        return np.where(np.sum(self.k, axis=0) % 2 == 0, 1.0, -1.0)

    def points(self):
        x1 = -math.pi + self.h * np.arange(self.N)
        return np.stack(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    def index_of(self, xi):
        xi = tuple(int(v) for v in xi)
        if len(xi) != self.dim:
            raise SpectralError(f"mode {xi} has wrong dimension")
        if max(abs(v) for v in xi) > self.kmax:
            raise SpectralError(f"mode {xi} not retained on N={self.N}")
        return tuple(v % self.N for v in xi)

    def sorted_modes(self):
        """Retained wave vectors in lexicographic order (for exports)."""
        r = np.arange(-self.kmax, self.kmax + 1)
        mesh = np.meshgrid(*([r] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Scalar (1 component) or vector (dim components) coefficient field."""

    grid: PeriodicGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == self.grid.dim:
            c = c[None]
        if c.shape[1:] != self.grid.shape:
            raise SpectralError("coefficient array does not match the grid")
        c = np.where(self.grid.retained, c, 0.0)
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self):
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, grid, ncomp=1):
        return cls(grid, np.zeros((ncomp,) + grid.shape, dtype=complex))

    @classmethod
    def from_modes(cls, grid, modes, ncomp=None, real=False):
        """Build from ``[(xi, amplitudes), ...]``.

        With ``real=True`` the conjugate partner ``conj(a)`` is added at
        ``-xi`` so the represented field is real-valued.
        """
        modes = list(modes)
        if ncomp is None:
            ncomp = len(np.atleast_1d(modes[0][1])) if modes else 1
        c = np.zeros((ncomp,) + grid.shape, dtype=complex)
        for xi, amp in modes:
            amp = np.atleast_1d(np.asarray(amp, dtype=complex))
            if amp.size != ncomp:
                raise SpectralError("amplitude length does not match component count")
            c[(slice(None),) + grid.index_of(xi)] += amp
            if real:
                c[(slice(None),) + grid.index_of([-v for v in xi])] += np.conj(amp)
        return cls(grid, c)

    @classmethod
    def from_real(cls, grid, values):
        """Coefficients of collocation samples at x_j = -pi + j h."""
        v = np.asarray(values, dtype=float)
        if v.ndim == grid.dim:
            v = v[None]
        axes = tuple(range(1, grid.dim + 1))
        c = np.fft.fftn(v, axes=axes) * grid.h**grid.dim * grid.phase
        return cls(grid, c)

    def to_real(self):
        axes = tuple(range(1, self.grid.dim + 1))
        scale = self.grid.N**self.grid.dim / (2.0 * math.pi) ** self.grid.dim
        v = np.fft.ifftn(self.coeffs * self.grid.phase, axes=axes) * scale
        return v.real

    @property
    def mean_coefficient(self):
        return self.coeffs[(slice(None),) + (0,) * self.grid.dim]

    def is_zero_mean(self, rtol=1e-12):
        scale = max(1.0, float(np.max(np.abs(self.coeffs), initial=0.0)))
        return bool(np.all(np.abs(self.mean_coefficient) <= rtol * scale))

    def is_real(self, rtol=1e-12):
        c = self.coeffs
        flipped = np.conj(c[(slice(None),) + tuple(np.s_[::-1] for _ in range(self.grid.dim))])
        flipped = np.roll(flipped, 1, axis=tuple(range(1, self.grid.dim + 1)))
        scale = max(1e-300, float(np.max(np.abs(c), initial=0.0)))
        return bool(np.max(np.abs(c - flipped), initial=0.0) <= rtol * scale)

    def on_grid(self, grid):
        """Same field on another lattice (truncated or zero-padded)."""
        if grid.dim != self.grid.dim:
            raise SpectralError("dimension mismatch")
        kk = min(grid.kmax, self.grid.kmax)
        r = np.arange(-kk, kk + 1)
        src = np.ix_(*([r % self.grid.N] * grid.dim))
        dst = np.ix_(*([r % grid.N] * grid.dim))
        c = np.zeros((self.ncomp,) + grid.shape, dtype=complex)
        for j in range(self.ncomp):
            c[j][dst] = self.coeffs[j][src]
        return SpectralField(grid, c)

    def _aligned(self, other):
        if other.grid == self.grid:
            return self, other
        g = self.grid if self.grid.N >= other.grid.N else other.grid
        return self.on_grid(g), other.on_grid(g)

    def __add__(self, other):
        a, b = self._aligned(other)
        return SpectralField(a.grid, a.coeffs + b.coeffs)

    def __sub__(self, other):
        a, b = self._aligned(other)
        return SpectralField(a.grid, a.coeffs - b.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def component(self, j):
        return SpectralField(self.grid, self.coeffs[j])


def field_norm(field, norm="L2", s=0.0, symbols=None):
    """L2, homogeneous H^s, or energy (lambda_delta) norm of a mean-zero field.

    ``norm`` is "L2", "Hs" (with ``s``) or "Sdelta" (with ``symbols``, a
    SymbolCache holding a diffusion kernel, or a diffusion ScaledKernel).
    All use the (2 pi)^-d Parseval weight of the coefficient convention.
    """
    g = field.grid
    power = np.sum(np.abs(field.coeffs) ** 2, axis=0)
    if norm == "L2":
        weight = 1.0
    elif norm == "Hs":
        if s == 0:
            weight = 1.0
        else:
            weight = np.where(g.ksq > 0, g.kmag ** (2.0 * s), 0.0)
    elif norm == "Sdelta":
        symbols = _as_symbols(symbols, "diffusion")
        weight = np.zeros(g.shape)
        mask = g.active
        weight[mask] = symbols.lam(g.kmag[mask])
    else:
        raise SpectralError(f"unknown norm {norm!r}")
    return math.sqrt(float(np.sum(weight * power)) / (2.0 * math.pi) ** g.dim)


def _as_symbols(symbols, role):
    if isinstance(symbols, ScaledKernel):
        return SymbolCache(**{role: symbols})
    if symbols is None:
        raise SpectralError(f"a {role} kernel or symbol cache is required")
    return symbols


@dataclass
class StokesProblem:
    """Forcing, viscosity, kernels and variant of one Stokes solve.

    ``symbols`` may be passed to reuse a cache across solves or to inject
    another symbol pair; otherwise it is built from the kernels
    (``LocalSymbols`` for the local variant).
    """

    forcing: SpectralField
    nu: float = 1.0
    variant: str = "nonlocal"
    diffusion: ScaledKernel | None = None
    gradient: ScaledKernel | None = None
    symbols: object = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SpectralError(f"unknown variant {self.variant!r}")
        if not self.nu > 0:
            raise SpectralError("nu must be positive")
        if self.forcing.ncomp != self.forcing.grid.dim:
            raise SpectralError("forcing must be a vector field")
        if self.symbols is None:
            if self.variant == "local":
                self.symbols = LocalSymbols()
            else:
                if self.gradient is None or (self.variant == "nonlocal" and self.diffusion is None):
                    raise SpectralError(f"variant {self.variant} needs its kernels")
                diff = self.diffusion if self.variant == "nonlocal" else None
                self.symbols = SymbolCache(diff, self.gradient)


@dataclass
class StokesSolution:
    velocity: SpectralField
    pressure: SpectralField
    residual: float
    div_local: float
    div_nonlocal: float


def _mode_symbols(grid, symbols, variant):
    """lambda and scalar b on the active modes of ``grid`` (flattened)."""
    kmag = grid.kmag[grid.active]
    b = symbols.b(kmag)
    lam = b**2 if variant == "modified" else symbols.lam(kmag)
    return lam, b


def _check_b(grid, b, what="kernel"):
    kmag = grid.kmag[grid.active]
    bad = np.abs(b) < ILL_POSED_RTOL * kmag
    if np.any(bad):
        modes = grid.k[:, grid.active][:, bad].T
        raise IllPosedError(what, modes)


def solve_stokes(problem):
    """Closed-form per-mode solve of the (nonlocal/modified/local) Stokes system.

    Raises
    ------
    IncompatibleForcingError
        If the forcing has a nonzero mean.
    IllPosedError
        If |b_delta(|xi|)| < 1e-12 |xi| on a retained mode.
    """
    f = problem.forcing
    g = f.grid
    if not f.is_zero_mean():
        raise IncompatibleForcingError(f.mean_coefficient)
    lam, b = _mode_symbols(g, problem.symbols, problem.variant)
    _check_b(g, b)
    act = g.active
    kmag = g.kmag[act]
    e = g.k[:, act] / kmag                    # unit directions, (d, M)
    bvec = b * e
    fh = f.coeffs[:, act]
    bf = np.sum(bvec * fh, axis=0)
    bb = b * b
    uh = (fh - bvec * (bf / bb)) / (problem.nu * lam)
    ph = -1j * bf / bb

    u = np.zeros_like(f.coeffs)
    p = np.zeros((1,) + g.shape, dtype=complex)
    u[:, act] = uh
    p[0, act] = ph
    res = problem.nu * lam * uh + 1j * bvec * ph - fh
    residual = float(np.max(np.linalg.norm(res, axis=0), initial=0.0))
    div_local = float(np.max(np.abs(np.sum(g.k[:, act] * uh, axis=0)), initial=0.0))
    div_nonlocal = float(np.max(np.abs(np.sum(bvec * uh, axis=0)), initial=0.0))
    return StokesSolution(SpectralField(g, u), SpectralField(g, p),
                          residual, div_local, div_nonlocal)


def apply_nonlocal_operator(op, field, symbols):
    """Apply L (-lambda), G (i b xi/|xi|) or D (i b (xi/|xi|)^T) mode-wise.

    ``symbols`` is a SymbolCache, LocalSymbols, or a ScaledKernel of the
    matching role.
    """
    g = field.grid
    if not field.is_zero_mean():
        raise SpectralError("field must have zero mean")
    act = g.active
    kmag = g.kmag[act]
    out = None
    if op == "L":
        lam = _as_symbols(symbols, "diffusion").lam(kmag)
        out = np.zeros_like(field.coeffs)
        out[:, act] = -lam * field.coeffs[:, act]
    elif op == "G":
        if field.ncomp != 1:
            raise SpectralError("G acts on scalar fields")
        bvec = _as_symbols(symbols, "gradient").b(kmag) * g.k[:, act] / kmag
        out = np.zeros((g.dim,) + g.shape, dtype=complex)
        out[:, act] = 1j * bvec * field.coeffs[0, act]
    elif op == "D":
        if field.ncomp != g.dim:
            raise SpectralError("D acts on vector fields")
        bvec = _as_symbols(symbols, "gradient").b(kmag) * g.k[:, act] / kmag
        out = np.zeros((1,) + g.shape, dtype=complex)
        out[0, act] = 1j * np.sum(bvec * field.coeffs[:, act], axis=0)
    else:
        raise SpectralError(f"unknown operator {op!r}")
    return SpectralField(g, out)


def solve_pressure_poisson(rhs, symbols):
    """Solve -D_delta G_delta p = g: p_hat = g_hat / b_delta(|xi|)**2."""
    g = rhs.grid
    if rhs.ncomp != 1:
        raise SpectralError("pressure Poisson right-hand side must be scalar")
    if not rhs.is_zero_mean():
        raise IncompatibleForcingError(rhs.mean_coefficient)
    symbols = _as_symbols(symbols, "gradient")
    act = g.active
    b = symbols.b(g.kmag[act])
    _check_b(g, b, "pressure operator")
    p = np.zeros_like(rhs.coeffs)
    p[0, act] = rhs.coeffs[0, act] / (b * b)
    return SpectralField(g, p)


def divergence_audit(u, symbols):
    """Largest local |xi . u_hat| and nonlocal |b xi/|xi| . u_hat| over modes."""
    loc, nl = divergence_modes(u, symbols)
    return float(np.max(loc, initial=0.0)), float(np.max(nl, initial=0.0))


def divergence_modes(u, symbols):
    """Per-mode local and nonlocal divergence magnitudes on active modes."""
    g = u.grid
    if u.ncomp != g.dim:
        raise SpectralError("divergence needs a vector field")
    act = g.active
    kmag = g.kmag[act]
    b = _as_symbols(symbols, "gradient").b(kmag)
    uh = u.coeffs[:, act]
    loc = np.abs(np.sum(g.k[:, act] * uh, axis=0))
    nl = np.abs(b * np.sum(g.k[:, act] / kmag * uh, axis=0))
    return loc, nl


def divergence_zero_sets(u, symbols, rtol=1e-12):
    """Boolean masks of modes that are (relatively) divergence-free.

    A mode counts as locally divergence-free when |xi.u| <= rtol |xi||u|
    and nonlocally when |b e.u| <= rtol |b||u|.
    """
    g = u.grid
    loc, nl = divergence_modes(u, symbols)
    act = g.active
    kmag = g.kmag[act]
    b = _as_symbols(symbols, "gradient").b(kmag)
    unorm = np.linalg.norm(u.coeffs[:, act], axis=0)
    return loc <= rtol * kmag * unorm, nl <= rtol * np.abs(b) * unorm


def leray_project(u):
    """Local divergence-free projection I - xi xi^T/|xi|^2 mode-wise."""
    g = u.grid
    act = g.active
    e = g.k[:, act] / g.kmag[act]
    uh = u.coeffs[:, act]
    out = np.zeros_like(u.coeffs)
    out[:, act] = uh - e * np.sum(e * uh, axis=0)
    return SpectralField(g, out)
