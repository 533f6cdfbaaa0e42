"""Refinement studies: delta -> 0, N -> infinity, and joint (delta, N) paths.

All studies share the same machinery: build the forcing on a lattice,
solve the nonlocal system with normalized kernels rescaled to each delta,
compare against a reference solve, and turn consecutive error ratios into
observed orders.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from .forcing import make_forcing
from .kernels import ScaledKernel, normalize_profile
from .spectral import PeriodicGrid, StokesProblem, field_norm, solve_stokes
from .symbols import SymbolCache

REPORT_COLUMNS = ("rung", "delta", "N", "err_u_L2", "err_p_L2", "order_u", "order_p")


def observed_order(errors, ratio=2.0):
    """Orders log(e_k / e_{k+1}) / log(ratio_k) for consecutive pairs.

    ``ratio`` is a refinement factor or a sequence with one factor per
    pair.  Pairs with a nonpositive error give ``None``.
    """
    errors = list(errors)
    n = len(errors) - 1
    ratios = [ratio] * n if np.isscalar(ratio) else list(ratio)
    if len(ratios) != n:
        raise ValueError("need one refinement ratio per consecutive pair")
    out = []
    for k in range(n):
        a, b = errors[k], errors[k + 1]
        if not (a > 0 and b > 0):
            out.append(None)
        else:
            out.append(math.log(a / b) / math.log(ratios[k]))
    return out


@dataclass
class Rung:
    rung: int
    delta: float
    N: int
    err_u: float
    err_p: float
    order_u: float | None = None
    order_p: float | None = None
    extra: dict = field(default_factory=dict)

    def row(self):
        return (self.rung, self.delta, self.N, self.err_u, self.err_p,
                self.order_u, self.order_p)


@dataclass
class RateReport:
    kind: str
    rungs: list
    reference: str
    flags: list = field(default_factory=list)

    @property
    def errors_u(self):
        return [r.err_u for r in self.rungs]

    @property
    def errors_p(self):
        return [r.err_p for r in self.rungs]

    @property
    def orders_u(self):
        return [r.order_u for r in self.rungs[1:]]

    @property
    def orders_p(self):
        return [r.order_p for r in self.rungs[1:]]

    def rows(self):
        return [r.row() for r in self.rungs]


@dataclass
class RateStudy:
    """Problem template plus a refinement ladder.

    ``forcing`` is a config mapping understood by
    :func:`nlstokes.forcing.make_forcing` or a callable ``grid -> field``.
    Profiles are normalized before use.  ``deltas``/``Ns`` hold the
    ladder; the unused one is fixed by ``delta``/``N``.
    """

    diffusion: object
    gradient: object
    dim: int = 2
    nu: float = 1.0
    forcing: object = field(default_factory=lambda: {"kind": "taylor_green"})
    deltas: list | None = None
    Ns: list | None = None
    delta: float | None = None
    N: int | None = None
    N_ref: int | None = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.diffusion = normalize_profile(self.diffusion, self.dim)
        self.gradient = normalize_profile(self.gradient, self.dim)

    def make_forcing(self, grid):
        if callable(self.forcing):
            return self.forcing(grid)
        return make_forcing(self.forcing, grid, self.nu, self.seed)

    def symbols(self, delta):
        return SymbolCache(ScaledKernel(self.diffusion, delta, self.dim),
                           ScaledKernel(self.gradient, delta, self.dim))

    def solve(self, f, delta, symbols=None, variant="nonlocal"):
        if variant == "local":
            return solve_stokes(StokesProblem(f, self.nu, "local"))
        return solve_stokes(StokesProblem(f, self.nu, variant,
                                          symbols=symbols or self.symbols(delta)))


def _check_ladder(values, name, decreasing):
    if not values:
        raise ValueError(f"{name} ladder is empty")
    d = np.diff(np.asarray(values, dtype=float))
    if np.any(d >= 0 if decreasing else d <= 0):
        raise ValueError(f"{name} ladder must be strictly {'de' if decreasing else 'in'}creasing")


def _attach_orders(rungs, scale):
    """Fill orders from consecutive errors; ``scale`` gives the refinement parameter."""
    flags = []
    ratios = [scale(rungs[k]) / scale(rungs[k + 1]) for k in range(len(rungs) - 1)]
    ou = observed_order([r.err_u for r in rungs], ratios) if len(rungs) > 1 else []
    op = observed_order([r.err_p for r in rungs], ratios) if len(rungs) > 1 else []
    for k, (a, b) in enumerate(zip(ou, op), start=1):
        rungs[k].order_u, rungs[k].order_p = a, b
        for name, v in (("u", a), ("p", b)):
            if v is None:
                flags.append(f"rung {k}: order_{name} undefined")
            elif v < 0:
                flags.append(f"rung {k}: negative order_{name} {v:.3g}")
    return flags


def _map(study, fn, items):
    if study.workers > 1:
        with ThreadPoolExecutor(max_workers=study.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def delta_refinement_study(study):
    """Nonlocal vs local solutions on one lattice for a decreasing delta ladder.

    The local solve is exact for forcing band-limited within the lattice.
    """
    _check_ladder(study.deltas, "delta", decreasing=True)
    grid = PeriodicGrid(study.dim, study.N)
    f = study.make_forcing(grid)
    ref = study.solve(f, None, variant="local")

    def rung(item):
        k, delta = item
        sym = study.symbols(delta)
        sol = study.solve(f, delta, sym)
        du = sol.velocity - ref.velocity
        return Rung(k, delta, grid.N, field_norm(du), field_norm(sol.pressure - ref.pressure),
                    extra={"err_u_energy": field_norm(du, "Sdelta", symbols=sym),
                           "residual": sol.residual})

    rungs = _map(study, rung, list(enumerate(study.deltas)))
    flags = _attach_orders(rungs, lambda r: r.delta)
    return RateReport("delta", rungs, f"local solve on N={grid.N}", flags)


def spectral_refinement_study(study):
    """Truncated nonlocal solves at fixed delta vs a finer nonlocal reference."""
    _check_ladder(study.Ns, "N", decreasing=False)
    n_ref = study.N_ref or 2 * max(study.Ns)
    ref_grid = PeriodicGrid(study.dim, n_ref)
    f_ref = study.make_forcing(ref_grid)
    sym = study.symbols(study.delta)
    ref = study.solve(f_ref, study.delta, sym)

    def rung(item):
        k, n = item
        grid = PeriodicGrid(study.dim, n)
        sol = study.solve(f_ref.on_grid(grid), study.delta, sym)
        return Rung(k, study.delta, n, field_norm(sol.velocity - ref.velocity),
                    field_norm(sol.pressure - ref.pressure))

    rungs = [rung(x) for x in enumerate(study.Ns)]
    flags = _attach_orders(rungs, lambda r: 1.0 / r.N)
    return RateReport("spectral", rungs, f"nonlocal solve on N_ref={n_ref}", flags)


def asymptotic_compatibility_study(study, path=None):
    """Joint refinement along ``path`` = [(delta, N), ...] vs the local limit.

    Each rung also records the two triangle-inequality terms: the
    delta-gap ||u_delta - u|| (on the reference lattice) and the truncation
    error ||u^N - u||, and whether the combined error respects their sum.
    The reference lattice defaults to the finest rung, which is exact for
    forcing band-limited within it.
    """
    path = path if path is not None else list(zip(study.deltas, study.Ns))
    if not path:
        raise ValueError("empty (delta, N) path")
    n_ref = study.N_ref or max(n for _, n in path)
    ref_grid = PeriodicGrid(study.dim, n_ref)
    f_ref = study.make_forcing(ref_grid)
    ref = study.solve(f_ref, None, variant="local")

    def rung(item):
        k, (delta, n) = item
        grid = PeriodicGrid(study.dim, n)
        f = f_ref.on_grid(grid)
        sym = study.symbols(delta)
        sol = study.solve(f, delta, sym)
        loc = study.solve(f, None, variant="local")
        full = study.solve(f_ref, delta, sym)
        err_u = field_norm(sol.velocity - ref.velocity)
        err_p = field_norm(sol.pressure - ref.pressure)
        gap_u = field_norm(full.velocity - ref.velocity)
        gap_p = field_norm(full.pressure - ref.pressure)
        trunc_u = field_norm(loc.velocity - ref.velocity)
        trunc_p = field_norm(loc.pressure - ref.pressure)
        slack = 1e-12 * max(1.0, field_norm(ref.velocity) + field_norm(ref.pressure))
        return Rung(k, delta, n, err_u, err_p, extra={
            "gap_u": gap_u, "gap_p": gap_p, "trunc_u": trunc_u, "trunc_p": trunc_p,
            "triangle_ok": err_u <= gap_u + trunc_u + slack and err_p <= gap_p + trunc_p + slack,
        })

    rungs = _map(study, rung, list(enumerate(path)))
    flags = _attach_orders(rungs, lambda r: r.delta)
    for r in rungs:
        if not r.extra["triangle_ok"]:
            flags.append(f"rung {r.rung}: triangle bound violated")
    return RateReport("asymptotic", rungs, f"local solve on N_ref={n_ref}", flags)


def modified_gap_study(study):
    """||u_modified - u_nonlocal|| along the delta ladder on one lattice."""
    _check_ladder(study.deltas, "delta", decreasing=True)
    grid = PeriodicGrid(study.dim, study.N)
    f = study.make_forcing(grid)
    rungs = []
    for k, delta in enumerate(study.deltas):
        sym = study.symbols(delta)
        nl = study.solve(f, delta, sym)
        mod = study.solve(f, delta, sym, variant="modified")
        rungs.append(Rung(k, delta, grid.N, field_norm(mod.velocity - nl.velocity),
                          field_norm(mod.pressure - nl.pressure),
                          extra={"residual": mod.residual, "div_local": mod.div_local,
                                 "div_nonlocal": mod.div_nonlocal,
                                 "f_norm": field_norm(f), "u_norm": field_norm(mod.velocity)}))
    flags = _attach_orders(rungs, lambda r: r.delta)
    return RateReport("modified", rungs, "nonlocal solve on the same lattice", flags)


