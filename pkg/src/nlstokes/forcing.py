"""Forcing fields: manufactured Taylor-Green flow, explicit modes, seeded
random band-limited fields and smooth exponentially decaying fields.

Every builder is defined mode-by-mode independently of the lattice size,
so the same forcing can be laid on grids of different N.  Random fields
draw from ``numpy.random.Generator(PCG64(seed))`` in a fixed lattice order.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .spectral import SpectralField, SpectralError


def rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


@dataclass(frozen=True)
class TaylorGreen:
    """Exact solution triple (f, u, p) of the local Stokes problem.

    d = 2: u = (sin x cos y, -cos x sin y),  p = sin x sin y
    d = 3: u = (sin x cos y cos z, -cos x sin y cos z, 0),  p = sin x sin y sin z
    with f = -nu Lap u + grad p = d nu u + grad p.
    """

    forcing: SpectralField
    velocity: SpectralField
    pressure: SpectralField


def trig_product(grid, factors, amplitude=1.0):
    """Coefficients of amplitude * prod_a f_a(x_a), f_a in {"s": sin, "c": cos, "1": 1}.

    Built mode by mode (no FFT), so the band-limited field is exact.
    """
    out = np.zeros((1,) + grid.shape, dtype=complex)
    choices = [(1,) if f == "1" else (1, -1) for f in factors]
    for signs in itertools.product(*choices):
        c = amplitude * (2.0 * math.pi) ** grid.dim
        xi = []
        for f, sgn in zip(factors, signs):
            if f == "1":
                xi.append(0)
                continue
            c *= 0.5 if f == "c" else sgn / 2j
            xi.append(sgn)
        out[(0,) + grid.index_of(xi)] += c
    return out


def taylor_green(grid, nu=1.0, amplitude=1.0):
    if grid.dim == 2:
        u = [trig_product(grid, "sc"), -trig_product(grid, "cs")]
        p = trig_product(grid, "ss")
        gp = [trig_product(grid, "cs"), trig_product(grid, "sc")]
    elif grid.dim == 3:
        u = [trig_product(grid, "scc"), -trig_product(grid, "csc"),
             np.zeros((1,) + grid.shape, dtype=complex)]
        p = trig_product(grid, "sss")
        gp = [trig_product(grid, "css"), trig_product(grid, "scs"), trig_product(grid, "ssc")]
    else:
        raise SpectralError("Taylor-Green flow needs d = 2 or 3")
    u = np.concatenate(u)
    f = grid.dim * nu * u + np.concatenate(gp)
    a = amplitude
    return TaylorGreen(SpectralField(grid, a * f), SpectralField(grid, a * u),
                       SpectralField(grid, a * p))


def _half_lattice(dim, band):
    """Nonzero wave vectors with |xi_k| <= band, one of each +-xi pair."""
    r = range(-band, band + 1)
    for xi in itertools.product(r, repeat=dim):
        nz = [v for v in xi if v != 0]
        if nz and nz[0] > 0:
            yield xi


def random_band_limited(grid, band, seed, ncomp=None, amplitude=1.0):
    """Real-valued mean-zero random field with modes |xi_k| <= band.

    Coefficients are standard complex normals scaled by ``amplitude``
    times (2 pi)^d, drawn in lexicographic order of the half lattice, so a
    given (band, seed) yields the same field on every grid that holds it.
    """
    if band > grid.kmax:
        raise SpectralError(f"band {band} exceeds lattice kmax {grid.kmax}")
    ncomp = grid.dim if ncomp is None else ncomp
    g = rng(seed)
    scale = amplitude * (2.0 * math.pi) ** grid.dim
    modes = []
    for xi in _half_lattice(grid.dim, band):
        z = g.standard_normal(ncomp) + 1j * g.standard_normal(ncomp)
        modes.append((xi, scale * z / math.sqrt(2.0)))
    return SpectralField.from_modes(grid, modes, ncomp=ncomp, real=True)


def exp_decay(grid, rate=1.0, amplitude=1.0, ncomp=None):
    """Smooth real field with f_hat_j(xi) = A exp(-rate |xi|) exp(i xi . c_j).

    The phase vectors c_j are fixed, making the field deterministic and
    independent of N apart from truncation.
    """
    ncomp = grid.dim if ncomp is None else ncomp
    c = np.array([[0.3 + 0.7 * j, 0.5 - 0.2 * j, 0.1 * j + 0.2][:grid.dim]
                  for j in range(ncomp)])
    k = grid.k.reshape(grid.dim, -1)
    env = amplitude * (2.0 * math.pi) ** grid.dim * np.exp(-rate * grid.kmag.ravel())
    coeffs = np.stack([env * np.exp(1j * (c[j] @ k)) for j in range(ncomp)])
    coeffs = coeffs.reshape((ncomp,) + grid.shape)
    coeffs[(slice(None),) + (0,) * grid.dim] = 0.0
    return SpectralField(grid, coeffs)


def make_forcing(spec, grid, nu=1.0, seed=0):
    """Forcing from a config mapping ``{"kind": ..., ...}``.

    Kinds: ``taylor_green`` (amplitude), ``modes`` (list of
    ``{"xi": [...], "amp": [[re, im], ...]}``, real=True by default),
    ``random`` (band, amplitude; uses ``seed``), ``exp_decay`` (rate,
    amplitude).
    """
    kind = spec.get("kind", "taylor_green")
    amp = float(spec.get("amplitude", 1.0))
    if kind == "taylor_green":
        return taylor_green(grid, nu, amp).forcing
    if kind == "modes":
        modes = []
        for m in spec["modes"]:
            a = [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
                 for v in m["amp"]]
            modes.append((m["xi"], np.array(a) * amp))
        return SpectralField.from_modes(grid, modes, ncomp=grid.dim,
                                        real=bool(spec.get("real", True)))
    if kind == "random":
        return random_band_limited(grid, int(spec.get("band", 4)), seed, amplitude=amp)
    if kind == "exp_decay":
        return exp_decay(grid, float(spec.get("rate", 1.0)), amp)
    raise SpectralError(f"unknown forcing kind {kind!r}")


FORCING_KINDS = ("taylor_green", "modes", "random", "exp_decay")


