import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlstokes.kernels import (DivergentMomentError, KernelError, RadialProfile, ScaledKernel,
                              check_gradient_monotonicity, constant, cubic_spline,
                              eval_scaled_kernel, fractional, kernel_moment, normalize_profile,
                              piecewise_fractional, sphere_measure, truncated_gaussian)

S = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def mp_moment(profile, d):
    """Independent moment oracle by mpmath quadrature of the unit profile."""
    p = d + 1 if profile.role == "diffusion" else d
    f = lambda r: float(profile.shape(float(r), d)) * r**p
    pts = [0, *profile.breakpoints, 1]
    val = float(mpmath.quad(f, pts))
    return profile.amplitude * S[d] * val * (0.5 if profile.role == "diffusion" else 1.0)


def test_sphere_measure():
    assert [sphere_measure(d) for d in (1, 2, 3)] == [2.0, 2 * math.pi, 4 * math.pi]
    with pytest.raises(KernelError):
        sphere_measure(4)


def test_fractional_gradient_moment_closed_form():
    assert kernel_moment(fractional(0.5), 2) == pytest.approx(4 * math.pi, abs=1e-10)


def test_constant_diffusion_moment_closed_form():
    assert kernel_moment(constant("diffusion"), 3) == pytest.approx(2 * math.pi / 5, abs=1e-10)


def test_zero_amplitude_has_zero_moment():
    assert kernel_moment(cubic_spline(amplitude=0.0), 2) == 0.0


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("beta", [-2.5, -1.2, -0.5, 0.0, 0.5, 0.8])
def test_fractional_gradient_moment(d, beta):
    # S c / (1 - beta)
    assert kernel_moment(fractional(beta), d) == pytest.approx(S[d] / (1 - beta), rel=1e-11)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("beta", [-1.0, 0.5, 1.5])
def test_fractional_diffusion_moment(d, beta):
    # (1/2) S c / (2 - beta)
    got = kernel_moment(fractional(beta, "diffusion"), d)
    assert got == pytest.approx(0.5 * S[d] / (2 - beta), rel=1e-11)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("profile", [
    cubic_spline(), cubic_spline("diffusion"), truncated_gaussian(0.4),
    truncated_gaussian(0.7, "diffusion"), constant(), piecewise_fractional(0.3, 0.25),
    piecewise_fractional(-0.5, 0.6, "diffusion"),
])
def test_moment_matches_mpmath(profile, d):
    assert kernel_moment(profile, d) == pytest.approx(mp_moment(profile, d), abs=1e-10)


def test_normalize_examples():
    assert normalize_profile(fractional(0.0), 2).amplitude == pytest.approx(1 / math.pi, rel=1e-12)
    c = normalize_profile(constant("diffusion"), 3).amplitude
    assert c == pytest.approx(15 / (2 * math.pi), rel=1e-12)


@pytest.mark.parametrize("beta", [1.0, 1.5])
def test_divergent_gradient_moment(beta):
    with pytest.raises(DivergentMomentError, match="divergent moment"):
        kernel_moment(fractional(beta), 2)
    with pytest.raises(DivergentMomentError):
        normalize_profile(fractional(beta), 3)


def test_divergent_diffusion_moment():
    with pytest.raises(DivergentMomentError):
        kernel_moment(fractional(2.0, "diffusion"), 2)


def test_zero_moment_cannot_be_normalized():
    # a vanishingly narrow Gaussian has a moment that underflows to 0
    with pytest.raises(KernelError):
        normalize_profile(truncated_gaussian(1e-200), 2)


profiles = st.one_of(
    st.builds(fractional, st.floats(-2.5, 0.8), st.sampled_from(["gradient", "diffusion"])),
    st.builds(constant, st.sampled_from(["gradient", "diffusion"])),
    st.builds(cubic_spline, st.sampled_from(["gradient", "diffusion"])),
    st.builds(truncated_gaussian, st.floats(0.1, 2.0), st.sampled_from(["gradient", "diffusion"])),
    st.builds(piecewise_fractional, st.floats(-1.5, 0.8), st.floats(0.05, 1.0)),
)


@settings(max_examples=60, deadline=None)
@given(profiles, st.sampled_from([1, 2, 3]))
def test_normalization_is_idempotent_and_hits_d(profile, d):
    n = normalize_profile(profile, d)
    assert kernel_moment(n, d) == pytest.approx(d, abs=1e-9)
    assert normalize_profile(n, d) == n


@settings(max_examples=60, deadline=None)
@given(profiles, st.sampled_from([1, 2, 3]), st.floats(1e-3, 3.0),
       st.floats(0.0, 2.0))
def test_scaling_identity_and_support(profile, d, delta, rho):
    k = ScaledKernel(profile, delta, d)
    r = rho * delta
    v = eval_scaled_kernel(k, r)
    assert v >= 0
    if rho > 1:
        assert v == 0.0
    elif r > 0:
        assert v * delta**k.exponent == pytest.approx(float(profile(rho, d)), rel=1e-12)


def test_scaled_kernel_examples():
    c = 1.7
    k = ScaledKernel(constant(amplitude=c), 0.5, 2)
    assert eval_scaled_kernel(k, 0.25) == pytest.approx(8 * c, rel=1e-15)
    assert eval_scaled_kernel(k, 0.75) == 0.0
    unit = ScaledKernel(cubic_spline(), 1.0, 3)
    assert eval_scaled_kernel(unit, 0.3) == float(cubic_spline()(0.3, 3))
    assert ScaledKernel(constant("diffusion"), 0.5, 3).exponent == 5
    assert eval_scaled_kernel(ScaledKernel(fractional(0.5), 1.0, 2), 0.0) == math.inf
    with pytest.raises(KernelError):
        eval_scaled_kernel(k, -0.1)


def test_profile_shapes():
    r = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.5])
    spline = cubic_spline().shape(r, 2)
    assert spline.tolist() == pytest.approx([1.0, 0.71875, 0.25, 0.03125, 0.0, 0.0])
    g = truncated_gaussian(0.5).shape(r, 2)
    assert g[1] == pytest.approx(math.exp(-0.25))
    pw = piecewise_fractional(0.5, 0.25).shape(r, 2)
    assert pw[2] == pytest.approx(0.25**-2.5)       # constant tail continues the core
    assert pw[5] == 0.0


@pytest.mark.parametrize("kw", [dict(kind="nope"), dict(kind="constant", role="other"),
                                dict(kind="constant", amplitude=-1.0),
                                dict(kind="fractional"), dict(kind="truncated_gaussian"),
                                dict(kind="piecewise_fractional", beta=0.1, epsilon=0.0)])
def test_invalid_profiles(kw):
    with pytest.raises(KernelError):
        RadialProfile(**kw)


def test_scaled_kernel_rejects_bad_delta_and_dim():
    with pytest.raises(KernelError):
        ScaledKernel(constant(), 0.0, 2)
    with pytest.raises(KernelError):
        ScaledKernel(constant(), 1.0, 4)


@pytest.mark.parametrize("beta, label", [(0.5, "admissible"), (-0.99, "admissible"),
                                         (-1.0, "inadmissible"),
                                         (-2.0, "inadmissible"),
                                         (1.0, "divergent")])
def test_admissibility_labels(beta, label):
    assert fractional(beta).admissibility == label
    assert constant().admissibility == "bounded"


def test_monotonicity_examples():
    assert check_gradient_monotonicity(fractional(0.5), 3).passed
    res = check_gradient_monotonicity(fractional(-2.0), 2)
    assert not res.passed and res.analytic
    assert res.violation[0] < 0.01
    assert not check_gradient_monotonicity(cubic_spline(), 2)
    with pytest.raises(KernelError):
        check_gradient_monotonicity(constant("diffusion"), 2)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("beta", np.linspace(-0.99, 0.95, 7).tolist())
def test_admissible_fractional_always_monotone(beta, d):
    assert check_gradient_monotonicity(fractional(beta), d).passed


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("profile", [constant(), cubic_spline(), truncated_gaussian(0.3),
                                     truncated_gaussian(2.0)])
def test_bounded_kernels_fail_monotonicity(profile, d):
    res = check_gradient_monotonicity(profile, d)
    assert not res.passed and res.violation is not None


def test_constant_in_one_dimension_is_monotone():
    # r^0 * c is flat, hence nonincreasing
    assert check_gradient_monotonicity(constant(), 1).passed
