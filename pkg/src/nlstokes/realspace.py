"""Direct lattice quadrature of the nonlocal operators on periodic grids.

For an offset s = m h (m integer, 0 < |s| <= delta) with weight h^d:

    L u(x) = sum_s omega_delta(|s|) (u(x+s) - u(x))
    G p(x) = sum_s omega_hat_delta(|s|) s/|s| (p(x+s) - p(x))
    D u(x) = sum_s omega_hat_delta(|s|) s/|s| . (u(x+s) + u(x))

The stencil is symmetric in s, so the lattice G and D are exact negative
adjoints of each other.  This is a validation tool, not a solver.

Two stencil rules are available.  ``"point"`` keeps the lattice points
inside the ball, each with kernel value times h^d.  ``"volume"`` (the
default) replaces that product by the kernel mass of the lattice cell
inside the ball, int omega(|s|) ds (or int omega_hat(|s|) s/|s| ds for G
and D).  The point rule has an erratic O(h) boundary error for kernels
that jump at the horizon; the cell-mass rule is second order for every
bounded kernel.
"""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .kernels import ScaledKernel
from .quadrature import gauss_legendre
from .spectral import PeriodicGrid, SpectralError

OPERATORS = ("L", "G", "D")
RULES = ("volume", "point")
_CELL_NODES = 16
_INTERIOR_NODES = 4
# includes lattice points lying on the horizon up to rounding
_HORIZON_SLACK = 1e-12


class RealSpaceError(SpectralError):
    """Precondition failure of a lattice operator."""


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Real point values on a periodic collocation lattice.

    ``values`` has shape (ncomp, N, ..., N) and lives at x_j = -pi + j h.
    """

    grid: PeriodicGrid
    values: np.ndarray
    warnings: tuple = field(default=())

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == self.grid.dim:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise RealSpaceError("values do not match the lattice")
        if not np.all(np.isfinite(v)):
            raise RealSpaceError("lattice values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def ncomp(self):
        return self.values.shape[0]

    @classmethod
    def from_function(cls, grid, fn):
        """Sample ``fn(x)`` where ``x`` has shape (dim, N, ..., N)."""
        return cls(grid, np.asarray(fn(grid.points()), dtype=float))

    def inner(self, other):
        """Lattice pairing sum_x u(x).v(x) h^d."""
        if other.grid != self.grid:
            raise RealSpaceError("fields live on different lattices")
        return float(np.sum(self.values * other.values) * self.grid.h**self.grid.dim)

    def norm(self):
        return math.sqrt(max(self.inner(self), 0.0))


@dataclass(frozen=True)
class Stencil:
    offsets: np.ndarray        # (M, dim) integer lattice offsets
    weights: np.ndarray        # (M,) scalar kernel mass per cell
    vectors: np.ndarray        # (M, dim) vector kernel mass per cell


def _check(grid, delta):
    if not delta < math.pi:
        raise RealSpaceError("delta must be smaller than pi")
    if grid.h > delta:
        raise RealSpaceError(f"lattice spacing {grid.h:.3g} exceeds delta {delta:.3g}")


def _angle_pieces(lo, hi, R, radii):
    """Pieces of [lo, hi] in t (x = R sin t), cut where sqrt(R^2 - x^2) hits ``radii``."""
    ta, tb = math.asin(lo / R), math.asin(hi / R)
    cuts = {ta, tb}
    for c in radii:
        if 0.0 < c < R:
            a = math.acos(c / R)
            cuts.update((a, -a))
    cuts = sorted(t for t in cuts if ta <= t <= tb)
    return list(zip(cuts[:-1], cuts[1:]))


def _critical_radii(box):
    # distances from the origin at which a ball starts to touch a face, edge or corner
    out = []
    for k in range(1, len(box) + 1):
        for sub in itertools.combinations(box, k):
            for corner in itertools.product(*sub):
                out.append(math.sqrt(sum(c * c for c in corner)))
    return out


def _region_rule(box, R, nodes):
    """Quadrature points and weights on ``box`` intersected with |s| <= R.

    The first coordinate uses x = R sin t so the sqrt edges of the ball are
    smooth, with pieces split wherever the inner limits change form; the
    last coordinate is a plain Gauss rule between its (vectorized) limits.
    """
    x, w = gauss_legendre(nodes)
    lo, hi = max(box[0][0], -R), min(box[0][1], R)
    d = len(box)
    if R <= 0.0 or lo >= hi:
        return np.zeros((0, d)), np.zeros(0)
    if d == 1:
        return (lo + (hi - lo) * x)[:, None], (hi - lo) * w
    pts, wts = [], []
    for a, b in _angle_pieces(lo, hi, R, _critical_radii(box[1:])):
        t = a + (b - a) * x
        rho = R * np.cos(t)
        tw = (b - a) * w * rho
        if d == 2:
            y0 = np.maximum(box[1][0], -rho)
            y1 = np.minimum(box[1][1], rho)
            span = np.maximum(y1 - y0, 0.0)
            y = y0[:, None] + span[:, None] * x[None, :]
            pts.append(np.stack([np.broadcast_to((R * np.sin(t))[:, None], y.shape), y],
                                axis=-1).reshape(-1, 2))
            wts.append((tw[:, None] * span[:, None] * w[None, :]).ravel())
        else:
            for ti, wi, ri in zip(t, tw, rho):
                sp, sw = _region_rule(box[1:], ri, nodes)
                pts.append(np.column_stack([np.full(len(sp), R * math.sin(ti)), sp]))
                wts.append(wi * sw)
    return np.concatenate(pts), np.concatenate(wts)


def ball_box_integral(box, R, f, nodes=_CELL_NODES):
    """Integral of ``f`` over the box ``[(lo, hi), ...]`` intersected with |s| <= R.

    ``f`` maps points of shape (n, d) to values of shape (n,) or (n, k).
    Exact to quadrature precision for smooth ``f``.
    """
    pts, wts = _region_rule([tuple(map(float, side)) for side in box], float(R), nodes)
    return np.tensordot(wts, f(pts), axes=1)


def _cell_status(center, h, R):
    # +1 fully inside the ball, -1 fully outside, 0 cut by the sphere
    near = np.linalg.norm(np.maximum(np.abs(center) - h / 2, 0.0))
    far = np.linalg.norm(np.abs(center) + h / 2)
    return 1 if far <= R else (-1 if near >= R else 0)


def cell_fraction(center, h, R):
    """Fraction of the cube of side h at ``center`` inside the ball of radius R."""
    center = np.asarray(center, dtype=float)
    status = _cell_status(center, h, R)
    if status:
        return float(status > 0)
    box = [(c - h / 2, c + h / 2) for c in center]
    one = lambda pts: np.ones(len(pts))
    return float(ball_box_integral(box, R, one)) / h**center.size


def _kernel_integrand(kernel, vector):
    delta = kernel.delta

    def f(pts):
        r = np.linalg.norm(pts, axis=-1)
        v = np.asarray(kernel(np.minimum(r, delta)), dtype=float)
        return v[..., None] * pts / r[..., None] if vector else v

    return f


def _interior_masses(centers, h, f):
    """Tensor Gauss rule on whole cells, all cells at once."""
    x, w = gauss_legendre(_INTERIOR_NODES)
    d = centers.shape[1]
    local = np.stack(np.meshgrid(*([h * (x - 0.5)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    ww = np.ones(1)
    for _ in range(d):
        ww = np.multiply.outer(ww, w * h).ravel()
    vals = f(centers[:, None, :] + local[None, :, :])
    return np.tensordot(vals, ww, axes=([1], [0])) if vals.ndim == 2 else \
        np.einsum("mqk,q->mk", vals, ww)


def _cell_masses(centers, h, kernel, vector):
    """Kernel mass of each cell inside the ball.

    Scalar: int omega(|s|) ds; vector: int omega_hat(|s|) s/|s| ds.
    """
    f = _kernel_integrand(kernel, vector)
    status = np.array([_cell_status(c, h, kernel.delta) for c in centers])
    shape = (len(centers), centers.shape[1]) if vector else (len(centers),)
    out = np.zeros(shape)
    inner = status > 0
    if np.any(inner):
        out[inner] = _interior_masses(centers[inner], h, f)
    for i in np.nonzero(status == 0)[0]:
        box = [(c - h / 2, c + h / 2) for c in centers[i]]
        out[i] = ball_box_integral(box, kernel.delta, f)
    return out


def build_stencil(grid, kernel, rule="volume"):
    """Lattice offsets m != 0 interacting with the origin and their weights.

    The scalar ``weights`` drive L; the vector ``vectors`` drive G and D.
    """
    if rule not in RULES:
        raise RealSpaceError(f"unknown stencil rule {rule!r}")
    _check(grid, kernel.delta)
    h, delta = grid.h, kernel.delta
    reach = int(math.floor(delta / h * (1.0 + _HORIZON_SLACK))) + (rule == "volume")
    rng = range(-reach, reach + 1)
    m = np.array([o for o in itertools.product(rng, repeat=grid.dim) if any(o)], dtype=np.int64)
    s = m * h
    r = np.linalg.norm(s, axis=1)
    if rule == "point":
        keep = r <= delta * (1.0 + _HORIZON_SLACK)
        m, s, r = m[keep], s[keep], r[keep]
        w = np.asarray(kernel(r), dtype=float) * h**grid.dim
        return Stencil(m, w, w[:, None] * s / r[:, None])
    keep = np.array([_cell_status(c, h, delta) >= 0 for c in s])
    m, s = m[keep], s[keep]
    w = _cell_masses(s, h, kernel, False)
    v = _cell_masses(s, h, kernel, True)
    # symmetrize exactly so that odd sums cancel in floating point
    order = {tuple(o): i for i, o in enumerate(m)}
    mirror = np.array([order[tuple(-o)] for o in m])
    w = 0.5 * (w + w[mirror])
    v = 0.5 * (v - v[mirror])
    return Stencil(m, w, v)


def _shifted(values, m):
    # value at x + m h, with array axes 1..dim
    return np.roll(values, tuple(-int(v) for v in m), axis=tuple(range(1, len(m) + 1)))


def _singular_warning(kernel):
    p = kernel.profile
    if p.singular and p.beta >= 0.0:
        return (f"fractional kernel with beta={p.beta:g} >= 0: lattice sum is "
                "dominated by the nearest neighbours and is h-sensitive",)
    return ()


def apply_operator_realspace(op, field, kernel, delta=None, form="plus", rule="volume",
                             stencil=None):
    """Apply L, G or D by the lattice sum over the interaction ball.

    Parameters
    ----------
    op : {"L", "G", "D"}
    field : LatticeField
        Any number of components for L, scalar for G, vector for D.
    kernel : ScaledKernel or RadialProfile
        Diffusion kernel for L, gradient kernel for G and D.  A bare profile
        is rescaled with ``delta``.
    form : {"plus", "minus"}
        Sign of the u(x) term in D.  Both agree to roundoff because the
        odd weights sum to zero.
    rule : {"volume", "point"}
        Stencil weighting, see the module notes.

    Returns
    -------
    LatticeField
        Carries a warning for fractional kernels with beta >= 0.
    """
    if op not in OPERATORS:
        raise RealSpaceError(f"unknown operator {op!r}")
    g = field.grid
    if not isinstance(kernel, ScaledKernel):
        if delta is None:
            raise RealSpaceError("delta is required for a bare profile")
        kernel = ScaledKernel(kernel, float(delta), g.dim)
    if kernel.dim != g.dim:
        raise RealSpaceError("kernel and lattice dimensions differ")
    st = stencil or build_stencil(g, kernel, rule)
    u = field.values
    if op == "L":
        out = np.zeros_like(u)
        for m, w in zip(st.offsets, st.weights):
            out += w * (_shifted(u, m) - u)
    elif op == "G":
        if field.ncomp != 1:
            raise RealSpaceError("G acts on scalar fields")
        out = np.zeros((g.dim,) + g.shape)
        for m, v in zip(st.offsets, st.vectors):
            out += v.reshape((g.dim,) + (1,) * g.dim) * (_shifted(u, m) - u)
    else:
        if field.ncomp != g.dim:
            raise RealSpaceError("D acts on vector fields")
        if form not in ("plus", "minus"):
            raise RealSpaceError(f"unknown form {form!r}")
        sign = 1.0 if form == "plus" else -1.0
        out = np.zeros((1,) + g.shape)
        for m, v in zip(st.offsets, st.vectors):
            out[0] += np.tensordot(v, _shifted(u, m) + sign * u, axes=1)
    return LatticeField(g, out, _singular_warning(kernel))


def adjointness_residual(u, p, kernel, delta=None, rule="volume", floor=1e-300):
    """|<u, G p> + <D u, p>| / (||u|| ||p|| + floor) on the lattice."""
    if u.grid != p.grid:
        raise RealSpaceError("u and p live on different lattices")
    if not isinstance(kernel, ScaledKernel):
        kernel = ScaledKernel(kernel, float(delta), u.grid.dim)
    st = build_stencil(u.grid, kernel, rule)
    gp = apply_operator_realspace("G", p, kernel, stencil=st)
    du = apply_operator_realspace("D", u, kernel, stencil=st)
    return abs(u.inner(gp) + du.inner(p)) / (u.norm() * p.norm() + floor)


def planewave_symbol_check(op, kernel, xi, N, symbol, rule="volume"):
    """Max deviation of the lattice operator from its Fourier symbol.

    ``L`` acts on cos(xi.x) and should give -lambda cos(xi.x); ``G`` acts on
    sin(xi.x) and should give b cos(xi.x) xi/|xi|.  ``symbol`` is the
    reference value lambda_delta(|xi|) or b_delta(|xi|).  The deviation is
    the max pointwise error relative to |symbol|; it is 0 for xi = 0.
    """
    xi = np.asarray(xi, dtype=float)
    grid = PeriodicGrid(kernel.dim, int(N))
    if np.max(np.abs(xi)) > grid.kmax:
        raise RealSpaceError(f"mode {tuple(xi)} not retained on N={N}")
    kmag = float(np.linalg.norm(xi))
    if kmag == 0.0:
        _check(grid, kernel.delta)
        return 0.0
    x = grid.points()
    phase = np.tensordot(xi, x, axes=1)
    if op == "L":
        got = apply_operator_realspace("L", LatticeField(grid, np.cos(phase)), kernel,
                                       rule=rule).values
        want = -symbol * np.cos(phase)[None]
    elif op == "G":
        got = apply_operator_realspace("G", LatticeField(grid, np.sin(phase)), kernel,
                                       rule=rule).values
        want = symbol * (xi / kmag).reshape((-1,) + (1,) * grid.dim) * np.cos(phase)[None]
    else:
        raise RealSpaceError("plane-wave check covers L and G")
    return float(np.max(np.abs(got - want)) / abs(symbol))
