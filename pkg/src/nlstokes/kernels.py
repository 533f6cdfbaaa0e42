"""Radial interaction profiles, their normalization and delta-rescaling.

A profile lives on the unit ball (support [0, 1]).  Its rescaled form at
smoothing length delta is

    diffusion:  omega_delta(r) = delta**-(d+2) * omega(r / delta)
    gradient:   omega_delta(r) = delta**-(d+1) * omega(r / delta)

Normalization fixes the second moment of the diffusion kernel and the
first moment of the gradient kernel to the space dimension d.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from . import quadrature

KINDS = ("fractional", "constant", "cubic_spline", "truncated_gaussian",
         "piecewise_fractional")
ROLES = ("diffusion", "gradient")

MONOTONICITY_SAMPLES = 4096


class KernelError(ValueError):
    """Invalid kernel parameters."""


class DivergentMomentError(KernelError):
    """The normalization moment of a profile is infinite."""

    def __init__(self, message="divergent moment"):
        super().__init__(message)


def sphere_measure(d):
    """Surface measure of the unit sphere in R^d (2 points for d = 1)."""
    if d == 1:
        return 2.0
    if d == 2:
        return 2.0 * math.pi
    if d == 3:
        return 4.0 * math.pi
    raise KernelError(f"dimension must be 1, 2 or 3, got {d}")


@dataclass(frozen=True)
class RadialProfile:
    """Radial profile on [0, 1] with an amplitude and an operator role.

    ``beta`` is the power-law exponent of the fractional kinds, where the
    profile behaves like ``amplitude * r**(-d - beta)`` near the origin;
    the dimension enters only at evaluation time.  ``sigma`` is the width
    of the truncated Gaussian and ``epsilon`` the cut-over radius of the
    piecewise fractional kind (constant outer tail matched continuously).
    """

    kind: str
    amplitude: float = 1.0
    role: str = "gradient"
    beta: float | None = None
    sigma: float | None = None
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.role not in ROLES:
            raise KernelError(f"unknown kernel role {self.role!r}")
        if not (self.amplitude >= 0.0 and math.isfinite(self.amplitude)):
            raise KernelError("amplitude must be a nonnegative finite number")
        if self.kind in ("fractional", "piecewise_fractional"):
            if self.beta is None or not math.isfinite(self.beta):
                raise KernelError(f"{self.kind} kernel needs a finite beta")
        if self.kind == "truncated_gaussian":
            if self.sigma is None or not self.sigma > 0.0:
                raise KernelError("truncated_gaussian needs sigma > 0")
        if self.kind == "piecewise_fractional" and not 0.0 < self.epsilon <= 1.0:
            raise KernelError("epsilon must lie in (0, 1]")

    @property
    def singular(self):
        return self.kind in ("fractional", "piecewise_fractional")

    @property
    def breakpoints(self):
        if self.kind == "cubic_spline":
            return (0.5,)
        if self.kind == "piecewise_fractional" and self.epsilon < 1.0:
            return (self.epsilon,)
        return ()

    @property
    def admissibility(self):
        """Classification of the fractional exponent.

        Returns "admissible" for fractional gradient kernels with beta in
        (-1, 1) and "inadmissible" for beta <= -1 (still evaluable).  It
        returns "divergent" when the normalization moment is infinite.
        Bounded kinds are "bounded".
        """
        if not self.singular:
            return "bounded"
        limit = 1.0 if self.role == "gradient" else 2.0
        if self.beta >= limit:
            return "divergent"
        if self.role == "diffusion":
            return "admissible"
        if self.beta > -1.0:
            return "admissible"
        return "inadmissible"

    def with_amplitude(self, amplitude):
        return replace(self, amplitude=float(amplitude))

    def shape(self, r, d):
        """Unit-amplitude profile values; zero outside [0, 1]."""
        r = np.asarray(r, dtype=float)
        inside = r <= 1.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.kind == "constant":
                v = np.ones_like(r)
            elif self.kind == "fractional":
                v = np.where(r > 0.0, r ** (-d - self.beta), np.inf)
            elif self.kind == "piecewise_fractional":
                rr = np.minimum(r, self.epsilon)
                v = np.where(r > 0.0, rr ** (-d - self.beta), np.inf)
            elif self.kind == "cubic_spline":
                s = 2.0 * r
                v = np.where(s <= 1.0, 1.0 - 1.5 * s**2 + 0.75 * s**3,
                             0.25 * (2.0 - s) ** 3)
            else:
                v = np.exp(-(r / self.sigma) ** 2)
        if self.kind in ("fractional", "piecewise_fractional") and -d - self.beta >= 0:
            # bounded power (e.g. beta = -d gives a constant): finite at 0
            v = np.where(r > 0.0, v, 0.0 ** (-d - self.beta))
        return np.where(inside, v, 0.0)

    def __call__(self, r, d):
        return self.amplitude * self.shape(r, d)

    def weighted_shape(self, r, d, power):
        """``r**power * shape(r, d)`` evaluated without intermediate overflow."""
        r = np.asarray(r, dtype=float)
        if not self.singular:
            return r**power * self.shape(r, d)
        e = power - d - self.beta
        rr = np.minimum(r, self.epsilon)
        v = rr**e * (r / rr) ** power
        return np.where(r <= 1.0, v, 0.0)


def fractional(beta, role="gradient", amplitude=1.0):
    return RadialProfile("fractional", amplitude, role, beta=float(beta))


def constant(role="gradient", amplitude=1.0):
    return RadialProfile("constant", amplitude, role)


def cubic_spline(role="gradient", amplitude=1.0):
    return RadialProfile("cubic_spline", amplitude, role)


def truncated_gaussian(sigma, role="gradient", amplitude=1.0):
    return RadialProfile("truncated_gaussian", amplitude, role, sigma=float(sigma))


def piecewise_fractional(beta, epsilon=1.0, role="gradient", amplitude=1.0):
    return RadialProfile("piecewise_fractional", amplitude, role,
                         beta=float(beta), epsilon=float(epsilon))


def _moment_power(role, d):
    # exponent of r multiplying the profile inside the moment integral
    return d + 1 if role == "diffusion" else d


def _unit_moment(profile, d):
    p = _moment_power(profile.role, d)
    if profile.singular:
        # integrand ~ r**(p - d - beta) near the origin
        tail = p - d - profile.beta
        if tail <= -1.0:
            raise DivergentMomentError()
        beta_eff = -tail
    else:
        beta_eff = None
    q = quadrature.grading_exponent(beta_eff)
    r, w = quadrature.radial_rule(8, q, profile.breakpoints, profile.singular)
    integral = float(np.dot(w, profile.weighted_shape(r, d, p)))
    factor = 0.5 if profile.role == "diffusion" else 1.0
    return factor * sphere_measure(d) * integral


def kernel_moment(profile, d):
    """Normalization moment of ``profile`` in dimension ``d``.

    Diffusion role: ``(1/2) S_{d-1} int_0^1 omega(r) r**(d+1) dr``;
    gradient role: ``S_{d-1} int_0^1 omega(r) r**d dr``.

    Raises
    ------
    DivergentMomentError
        If the integral diverges at the origin.
    """
    sphere_measure(d)
    if profile.amplitude == 0.0:
        return 0.0
    return profile.amplitude * _unit_moment(profile, d)


def normalize_profile(profile, d):
    """Return ``profile`` with the amplitude making its moment equal to d.

    The amplitude is computed from the unit-amplitude moment, so the
    operation is exactly idempotent.
    """
    m = _unit_moment(profile, d)
    if not m > 0.0 or not math.isfinite(m):
        raise KernelError("zero or invalid moment, cannot normalize")
    return profile.with_amplitude(d / m)


@dataclass(frozen=True)
class ScaledKernel:
    """Profile rescaled to support radius ``delta`` in dimension ``dim``."""

    profile: RadialProfile
    delta: float
    dim: int

    def __post_init__(self):
        if not self.delta > 0.0:
            raise KernelError("delta must be positive")
        sphere_measure(self.dim)

    @property
    def exponent(self):
        return self.dim + 2 if self.profile.role == "diffusion" else self.dim + 1

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.profile(r / self.delta, self.dim) / self.delta**self.exponent


def eval_scaled_kernel(kernel, r):
    """Rescaled kernel value at distance ``r`` (0 beyond ``kernel.delta``).

    A singular fractional profile returns ``inf`` at ``r = 0``.
    """
    if np.any(np.asarray(r) < 0):
        raise KernelError("r must be nonnegative")
    out = kernel(r)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MonotonicityResult:
    passed: bool
    violation: tuple | None = None
    analytic: bool = False

    def __bool__(self):
        return self.passed


def check_gradient_monotonicity(profile, d, samples=MONOTONICITY_SAMPLES):
    """Check that r**(d-1) * profile(r) is nonincreasing on (0, 1).

    Fractional profiles are decided analytically (the weighted profile is
    r**(-1-beta)); the sampled scan still locates the first violating
    subinterval ``(r_lo, r_hi)`` on failure.
    """
    if profile.role != "gradient":
        raise KernelError("monotonicity check applies to gradient kernels")
    r = (np.arange(samples) + 0.5) / samples
    g = r ** (d - 1) * profile.shape(r, d)
    rises = np.nonzero(g[1:] > g[:-1] * (1.0 + 1e-12) + 1e-300)[0]
    violation = (float(r[rises[0]]), float(r[rises[0] + 1])) if rises.size else None
    if profile.kind == "fractional":
        return MonotonicityResult(profile.beta >= -1.0,
                                  None if profile.beta >= -1.0 else violation,
                                  analytic=True)
    return MonotonicityResult(violation is None, violation)
