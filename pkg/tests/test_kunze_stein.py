import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypsobolev.kernels import RadialKernel, SpectralParameter, resolvent
from hypsobolev.kunze_stein import (
    ExponentRangeError,
    LebesgueExponent,
    exponent_table,
    ks_norm_bound,
    ks_uniformity_sweep,
)


def mp_ks(n, eps, kappa, a=0.0):
    """Independent high-precision evaluation of the weighted integral."""
    p = 1 + eps
    f = lambda r: mp.sinh(r) ** (n - 1) * (1 + r) * mp.e ** (-(n - 1) * r / 2) * abs(kappa(r)) ** p
    with mp.workdps(30):
        # dyadic breakpoints keep tanh-sinh accurate on integrable origin singularities
        pts = [mp.mpf(0)] + [mp.mpf(2) ** -k for k in (30, 20, 10, 5)] + [1, 4, 16, mp.inf] if a < 1 else [a, 4, 16, mp.inf]
        return float(mp.quad(f, pts) ** (1 / p))


def test_exponent_type():
    q = LebesgueExponent(1.5)
    assert q.q_dual == pytest.approx(3.0) and q.eps == pytest.approx(0.5)
    assert LebesgueExponent.from_eps(0.5).q == pytest.approx(1.5)
    assert q.in_range(3) and q.in_range(6)
    assert not LebesgueExponent(1.1).in_range(3)
    assert LebesgueExponent(1.2).in_range(3)  # endpoint eps = 2/(n-2)
    for bad in (1.0, 2.0, 2.5):
        with pytest.raises(ExponentRangeError):
            LebesgueExponent(bad)
    with pytest.raises(ExponentRangeError):
        LebesgueExponent.from_eps(0.0)


@settings(max_examples=60, deadline=None)
@given(q=st.floats(1.001, 1.999), n=st.integers(3, 10))
def test_exponent_invariants(q, n):
    e = LebesgueExponent(q)
    assert 1 / e.q + 1 / e.q_dual == pytest.approx(1.0)
    assert e.q_dual == pytest.approx(2 + 2 * e.eps)
    # eps <= 2/(n-2) exactly when q >= 2n/(n+2)
    assert e.in_range(n) == (q >= 2 * n / (n + 2) * (1 - 1e-12))


def test_closed_form_example():
    kappa = RadialKernel.tabulated(3, lambda r: np.where(r > 1, np.exp(-r) / np.sinh(r), 0.0), breakpoints=(1.0,))
    res = ks_norm_bound(3, LebesgueExponent.from_eps(0.5), kappa)
    assert res.value == pytest.approx(0.23770733454454065, rel=1e-8)
    assert res.value == pytest.approx(mp_ks(3, 0.5, lambda r: mp.e**-r / mp.sinh(r), a=1), rel=1e-8)
    assert not res.diverged and res.relative_error < 1e-6


def test_zero_kernel():
    res = ks_norm_bound(4, LebesgueExponent(1.5), RadialKernel.tabulated(4, lambda r: np.zeros_like(r)))
    assert res.value == 0.0 and not res.diverged


def test_resolvent_kernel_against_mpmath():
    res = ks_norm_bound(3, LebesgueExponent.from_eps(0.9), resolvent(3, SpectralParameter.from_alpha(-1.0)))
    ref = mp_ks(3, 0.9, lambda r: mp.e**-r / (4 * mp.pi * mp.sinh(r)))
    assert res.value == pytest.approx(ref, rel=1e-8)
    # local exponent (n-1) + (1+eps)(2-n) of the weighted integrand
    assert res.origin_exponent == pytest.approx(2 - 1.9, abs=1e-3)


def test_singular_origin_against_mpmath():
    kappa = RadialKernel.tabulated(5, lambda r: r**-3.0 * np.exp(-2 * r), origin_power=-3.0)
    res = ks_norm_bound(5, LebesgueExponent.from_eps(0.6), kappa)
    assert res.value == pytest.approx(mp_ks(5, 0.6, lambda r: r**-3 * mp.e ** (-2 * r)), rel=1e-8)
    # the origin exponent is estimated from the panels when none is declared
    bare = RadialKernel.tabulated(5, lambda r: r**-3.0 * np.exp(-2 * r), origin_power=None)
    assert ks_norm_bound(5, LebesgueExponent.from_eps(0.6), bare).value == pytest.approx(res.value, rel=1e-7)


def test_divergence_flag_at_endpoint():
    kappa = RadialKernel.tabulated(5, lambda r: r**-3.0 * np.exp(-2 * r), origin_power=-3.0)
    res = ks_norm_bound(5, LebesgueExponent.from_eps(2 / 3), kappa)
    assert res.diverged and math.isinf(res.value) and math.isinf(res.relative_error)
    inside = ks_norm_bound(5, LebesgueExponent.from_eps(0.95 * 2 / 3), kappa)
    assert not inside.diverged and math.isfinite(inside.value)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_divergence_flag_for_resolvent(n):
    kern = resolvent(n, SpectralParameter.from_alpha(-1.0))
    assert ks_norm_bound(n, LebesgueExponent.from_eps(2 / (n - 2)), kern).diverged
    assert not ks_norm_bound(n, LebesgueExponent.from_eps(0.9 * 2 / (n - 2)), kern).diverged


def test_truncation_is_monotone():
    q = LebesgueExponent(1.5)
    kern = resolvent(3, SpectralParameter.from_alpha(-0.01))
    short = ks_norm_bound(3, q, kern, rho_max=5.0)
    long_ = ks_norm_bound(3, q, kern, rho_max=10.0)
    full = ks_norm_bound(3, q, kern)
    assert short.tail_truncation == 5.0 and long_.tail_truncation == 10.0
    assert long_.value >= short.value * (1 - 1e-12)
    assert full.value >= long_.value * (1 - 1e-12)
    assert full.value - long_.value <= long_.quadrature_error + 1e-9 * full.value


def test_singleton_sweep():
    q = LebesgueExponent(1.5)
    res = ks_uniformity_sweep(4, q, [-1.0])
    assert res.sup == ks_norm_bound(4, q, resolvent(4, SpectralParameter.from_alpha(-1.0))).value
    assert res.argmax == -1.0 and not res.diverged


def test_sweep_order_and_parallel_merge():
    q = LebesgueExponent.from_eps(0.5)
    betas = [-1e-3, -10.0, -1.0, -1e3]
    serial = ks_uniformity_sweep(3, q, betas)
    assert [b for b, _ in serial.rows] == sorted(betas)
    par = ks_uniformity_sweep(3, q, betas, jobs=2)
    assert [(b, k.value) for b, k in par.rows] == [(b, k.value) for b, k in serial.rows]


def test_sweep_errors():
    q = LebesgueExponent(1.5)
    with pytest.raises(ValueError):
        ks_uniformity_sweep(3, q, [])
    with pytest.raises(ValueError):
        ks_uniformity_sweep(3, q, [-1.0, 0.5])


def test_sweep_finite_n4():
    res = ks_uniformity_sweep(4, LebesgueExponent.from_eps(0.9), -np.geomspace(1e-6, 1e6, 9))
    assert not res.diverged and math.isfinite(res.sup)


def test_exponent_table_examples():
    e1, e2, tag = exponent_table(3, 1.6)
    assert (e1, e2) == pytest.approx((-0.125, -0.625)) and tag == "high-q"
    assert exponent_table(3, 1.2)[1] == pytest.approx(0.0, abs=1e-15)
    assert exponent_table(3, 1.2)[2] == "low-q"
    with pytest.raises(ExponentRangeError):
        exponent_table(3, 1.1)
    with pytest.raises(ExponentRangeError):
        exponent_table(3, 2.0)


@pytest.mark.parametrize("n", range(3, 9))
def test_junction(n):
    qj = 2 * (n + 1) / (n + 3)
    e1, e2, _ = exponent_table(n, qj)
    assert abs(e1 - e2) < 1e-12
    assert e1 == pytest.approx(-1 / (n + 1), abs=1e-12)
    assert exponent_table(n, 2 * n / (n + 2))[1] == pytest.approx(0.0, abs=1e-12)
