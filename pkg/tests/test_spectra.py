import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from hypsobolev.discrete import PotentialSpec, StepProfile, assemble_L, attach_potential, build_grid
from hypsobolev.kernels import SpectralParameter
from hypsobolev.kunze_stein import LebesgueExponent
from hypsobolev.spectra import (
    ProbeFamily,
    artifact_band,
    check_bounds,
    classify_genuine,
    eigen_report,
    eigen_solve,
    numerical_range_sector,
    opnorm_probe_lower,
    small_potential_scan,
    sobolev_sweep,
)


def well_levels(V0, a):
    """Bound states of -u'' - V0 1[0,a] u on the half-line with u(0) = 0.

    Roots E = |lambda| of sqrt(V0 - E) cot(sqrt(V0 - E) a) = -sqrt(E).
    """
    f = lambda E: math.sqrt(V0 - E) / math.tan(math.sqrt(V0 - E) * a) + math.sqrt(E)
    Es = np.linspace(1e-9, V0 - 1e-9, 20001)
    vals = [f(e) for e in Es]
    roots = []
    for e0, e1, v0, v1 in zip(Es, Es[1:], vals, vals[1:]):
        # sign changes through the cot pole are skipped by the magnitude guard
        if np.sign(v0) != np.sign(v1) and abs(v0) < 50 and abs(v1) < 50:
            roots.append(-optimize.brentq(f, e0, e1, xtol=1e-15))
    return sorted(roots)


def step_potential(grid, value, a=1.0, gamma=0.5):
    return PotentialSpec.from_function(grid, StepProfile(value, a), gamma)


@pytest.fixture(scope="module")
def g20():
    return build_grid(3, 20.0, 400)


# ---------------------------------------------------------------- probes

def test_probe_lower_positive_and_grid_stable():
    q = LebesgueExponent(1.5)
    sp = SpectralParameter.from_alpha(-1.0)
    coarse = opnorm_probe_lower(3, q, sp, build_grid(3, 20.0, 400))
    fine = opnorm_probe_lower(3, q, sp, build_grid(3, 20.0, 800))
    assert 0 < coarse < math.inf
    assert fine == pytest.approx(coarse, rel=0.02)


def test_probe_lower_decays_far_from_spectrum(g20):
    q = LebesgueExponent(1.5)
    near = opnorm_probe_lower(3, q, SpectralParameter.from_alpha(-1.0), g20)
    far = opnorm_probe_lower(3, q, SpectralParameter.from_alpha(-1e6), g20)
    assert far < 1e-4 * near


def test_probe_max_dominates_members(g20):
    q = LebesgueExponent(1.5)
    sp = SpectralParameter.from_alpha(-2.0)
    full = ProbeFamily(n_random=4)
    single = ProbeFamily(centers=(2.0,), widths=(0.5,), n_random=0)
    assert opnorm_probe_lower(3, q, sp, g20, single) <= opnorm_probe_lower(3, q, sp, g20, full)


def test_probe_family_shape(g20):
    rows = ProbeFamily().build(g20)
    # centers {0, 1, 2, 4, 8} x 3 widths + 32 random
    assert rows.shape == (5 * 3 + 32, g20.nodes.size)
    assert np.array_equal(rows, ProbeFamily().build(g20))


# ---------------------------------------------------------------- sweeps

def test_sweep_sandwich_and_shape(g20):
    q = LebesgueExponent(1.5)
    sw = sobolev_sweep(3, q, math.pi, [1.0, 4.0, 16.0, 64.0], grid=g20, probes=ProbeFamily(n_random=4))
    assert [abs(r.alpha) for r in sw.rows] == pytest.approx([1.0, 4.0, 16.0, 64.0])
    lo = np.array([r.probe_lower for r in sw.rows])
    hi = np.array([r.ks_upper for r in sw.rows])
    assert np.all(lo > 0) and np.all(np.isfinite(hi))
    # one constant per run: the row ratios share a scale
    ratio = lo / hi
    assert ratio.max() == pytest.approx(sw.sandwich_constant)
    assert ratio.max() / ratio.min() < 10
    assert sw.regime == "high-q" and sw.predicted_slope == pytest.approx(0.5 - 1 / 1.5)


def test_sweep_without_probes_and_errors():
    q = LebesgueExponent(1.5)
    sw = sobolev_sweep(3, q, math.pi / 2, [1.0, 10.0])
    assert all(math.isnan(r.probe_lower) for r in sw.rows)
    assert math.isnan(sw.probe_slope) and math.isfinite(sw.ks_slope)
    with pytest.raises(ValueError):
        sobolev_sweep(3, q, 0.0, [1.0])
    with pytest.raises(ValueError):
        sobolev_sweep(3, q, math.pi, [0.0, 1.0])


def test_sweep_parallel_matches_serial():
    q = LebesgueExponent(1.6)
    mags = [1.0, 3.0, 9.0]
    a = sobolev_sweep(3, q, math.pi / 2, mags)
    b = sobolev_sweep(3, q, math.pi / 2, mags, jobs=2)
    assert [r.ks_upper for r in a.rows] == [r.ks_upper for r in b.rows]


def test_sweep_divergent_rows_flagged():
    # at the endpoint q = 2n/(n+2) the resolvent KS integral diverges at the origin
    sw = sobolev_sweep(4, LebesgueExponent(4 / 3), math.pi, [1.0, 2.0])
    assert all(r.ks_diverged and math.isinf(r.ks_upper) for r in sw.rows)
    assert math.isnan(sw.ks_slope)


# ---------------------------------------------------------------- eigensolves

def test_free_dirichlet_spectrum():
    g = build_grid(3, 30.0, 1500)
    sol = eigen_solve(assemble_L(3, g))
    assert np.all(sol.values.imag == 0)
    k = np.arange(1, 6)
    # second-order stencil symbol (2 - 2 cos(k pi h / R)) / h^2
    exact = (2 - 2 * np.cos(k * math.pi * g.h / g.R)) / g.h**2
    assert sol.values.real[:5] == pytest.approx(exact, rel=1e-9)
    assert sol.values.real[:5] == pytest.approx((k * math.pi / 30.0) ** 2, rel=1e-4)
    assert not sol.failures and sol.residuals.max() < 1e-8


@pytest.mark.parametrize("V0,a,R,N", [(10.0, 1.0, 20.0, 20000), (30.0, 0.5, 20.0, 40000), (50.0, 1.0, 10.0, 80000)])
def test_square_well_oracle(V0, a, R, N):
    # the O(h^2) stencil error grows with the well depth, so deeper wells need finer meshes
    g = build_grid(3, R, N)
    M = attach_potential(assemble_L(3, g), step_potential(g, -V0, a))
    sol = eigen_solve(M, select=(-V0 - 1.0, 0.0))
    ref = well_levels(V0, a)
    assert len(ref) >= 1 and sol.values.size == len(ref)
    assert sol.values.real == pytest.approx(ref, abs=1e-6)


def test_complex_dense_solve_residuals(g20):
    M = attach_potential(assemble_L(3, g20), step_potential(g20, 8 * (1 + 1j)))
    sol = eigen_solve(M)
    assert sol.values.size == M.size and not sol.failures
    assert sol.residuals.max() < 1e-8


def test_shift_invert_agrees_with_dense(g20):
    M = attach_potential(assemble_L(3, g20), step_potential(g20, 8 * (1 + 1j)))
    dense = eigen_solve(M).values
    target = 15 + 4j
    near = eigen_solve(M, targets=[target], k=3).values
    for z in near:
        assert np.min(np.abs(dense - z)) < 1e-8 * max(1, abs(z))
    assert np.min(np.abs(near - target)) == pytest.approx(np.min(np.abs(dense - target)), abs=1e-8)


def test_large_complex_needs_targets():
    g = build_grid(3, 30.0, 3000)
    M = attach_potential(assemble_L(3, g), step_potential(g, 1j))
    with pytest.raises(ValueError):
        eigen_solve(M)


def test_imaginary_potential_continuity(g20):
    base = np.sort(eigen_solve(assemble_L(3, g20)).values.real)[:5]
    prev = None
    for s in (0.0, 1e-4, 1e-3, 1e-2):
        M = attach_potential(assemble_L(3, g20), step_potential(g20, 1j * s))
        vals = eigen_solve(M).values
        vals = vals[np.argsort(vals.real)][:5]
        assert np.abs(vals - base).max() <= 2 * s + 1e-12
        if s > 0:
            assert np.all(vals.imag > 0)
        if prev is not None:
            assert np.abs(vals.imag).max() >= np.abs(prev.imag).max()
        prev = vals


# ---------------------------------------------------------------- classification

@pytest.mark.parametrize("R,N", [(20.0, 400), (30.0, 600), (20.0, 800), (10.0, 200)])
def test_free_operator_has_no_genuine_eigenvalues(R, N):
    g = build_grid(3, R, N)
    rep = eigen_report(PotentialSpec(g, np.zeros(g.nodes.size)))
    assert rep.genuine.size == 0
    assert rep.band == artifact_band(g) == max(5 * (math.pi / R) ** 2, 1e-3)


def test_attractive_well_is_genuine(g20):
    rep = eigen_report(step_potential(g20, -10.0))
    assert rep.genuine.size == 1
    assert rep.genuine[0].real == pytest.approx(well_levels(10.0, 1.0)[0], abs=2e-3)


def test_weak_imaginary_well_is_artifact(g20):
    rep = eigen_report(step_potential(g20, 0.01j))
    assert rep.genuine.size == 0
    assert np.abs(rep.eigenvalues.imag).max() < rep.band


def test_classify_drops_unresolved_and_unstable(g20):
    band = artifact_band(g20)
    eigs = np.array([-1.0, 2.0 + 0.5 * band * 1j, 1e7 + 5j, -3.0 + 1j])
    assert classify_genuine(eigs, g20).tolist() == [-3.0 + 1j, -1.0]
    # a recompute that never reproduces the values rejects everything
    assert classify_genuine(eigs, g20, recompute=lambda R: np.array([-50.0])).size == 0
    assert classify_genuine(eigs, g20, recompute=lambda R: np.array([-1.01, -3.0 + 1.05j])).size == 2


@settings(max_examples=25, deadline=None)
@given(z=st.complex_numbers(max_magnitude=100, allow_nan=False, allow_infinity=False))
def test_genuine_is_subset(z):
    g = build_grid(3, 20.0, 400)
    out = classify_genuine(np.array([z]), g)
    assert out.size <= 1
    if out.size:
        d = abs(z.imag) if z.real >= 0 else abs(z)
        assert out[0] == z and d > artifact_band(g)


# ---------------------------------------------------------------- bounds

def test_complex_family_ratios(g20):
    maxima = []
    for s in (8.0, 16.0, 32.0):
        rep = eigen_report(step_potential(g20, s * (1 + 1j)))
        assert rep.genuine.size >= 1
        b = check_bounds(rep, 0.5)
        assert b.kind == "long" and not b.vacuous and math.isfinite(b.max_ratio) and b.max_ratio > 0
        short = check_bounds(rep, 0.25)
        assert short.kind == "short" and np.all(short.ratios > 0)
        maxima.append(b.max_ratio)
    assert max(maxima) / min(maxima) < 100


def test_ratio_definition(g20):
    V = step_potential(g20, -10.0, gamma=0.25)
    rep = eigen_report(V)
    short, long_ = rep.ratios()
    p = 0.25 + 1.5
    mass = np.sum(g20.weights * np.abs(V.samples) ** p)
    assert short[0] == pytest.approx(abs(rep.genuine[0]) ** 0.25 / mass, rel=1e-12)
    assert long_[0] == pytest.approx(abs(rep.genuine[0]) ** 0.5 / mass, rel=1e-12)


def test_vacuous_and_gamma_error(g20):
    rep = eigen_report(PotentialSpec(g20, np.zeros(g20.nodes.size)))
    b = check_bounds(rep, 0.5)
    assert b.vacuous and math.isnan(b.max_ratio)
    with pytest.raises(ValueError):
        check_bounds(rep, -0.1)


# ---------------------------------------------------------------- scans

def test_imaginary_step_threshold(g20):
    scan = small_potential_scan(step_potential(g20, 1j), [64.0, 32.0, 16.0, 8.0, 4.0, 2.0, 1.0, 0.5])
    assert scan.found and scan.s_star > 0 and scan.monotone
    i = scan.scales.index(scan.s_star)
    assert all(c == 0 for c in scan.genuine_counts[i:])
    assert scan.genuine_counts[0] > 0


def test_scan_none_found(g20):
    scan = small_potential_scan(step_potential(g20, -1.0), [400.0, 300.0, 200.0])
    assert not scan.found and scan.s_star is None


def test_scan_rejects_bad_scales(g20):
    V = step_potential(g20, 1j)
    for bad in ([1.0, 2.0], [1.0, 1.0], [1.0, -1.0]):
        with pytest.raises(ValueError):
            small_potential_scan(V, bad)


def test_real_well_threshold():
    # Dirichlet half-line well -s 1[0,1] binds for s > pi^2/4; the artifact
    # band biases the empirical threshold upward by about band^(1/2) * 2
    g = build_grid(3, 200.0, 4000)
    scales = np.geomspace(2.8, 2.2, 21)
    scan = small_potential_scan(step_potential(g, -1.0), scales)
    assert scan.found and scan.monotone
    assert scan.s_star == pytest.approx(math.pi**2 / 4, rel=0.05)
    assert scan.s_star >= math.pi**2 / 4


# ---------------------------------------------------------------- sectors

def test_free_sector_is_degenerate(g20):
    est = numerical_range_sector(assemble_L(3, g20))
    assert est.vertex == 0.0 and est.theta < 1e-9 and not est.failed
    assert np.all(np.abs(est.quotients.imag) < 1e-10) and est.quotients.real.min() >= -1e-10
    assert est.sample_count == 10_000 + g20.nodes.size


@pytest.mark.parametrize("value", [1j, -3 + 2j, 5 * (1 + 1j), -10.0])
def test_sector_contains_all_quotients(g20, value):
    M = attach_potential(assemble_L(3, g20), step_potential(g20, value))
    est = numerical_range_sector(M)
    assert not est.failed and 0 <= est.theta < math.pi / 2
    assert np.all(np.abs(np.angle(est.quotients - est.vertex)) <= est.theta + 1e-9)


def test_imaginary_sector_bounds(g20):
    est = numerical_range_sector(attach_potential(assemble_L(3, g20), step_potential(g20, 1j)))
    assert np.all(est.quotients.imag >= -1e-12) and np.all(est.quotients.imag <= 1 + 1e-12)
    assert est.vertex == 0.0 and est.theta > 0


def test_vertex_shrinks_with_potential():
    g = build_grid(3, 20.0, 400)
    vertices = []
    for s in (10.0, 1.0, 0.1):
        est = numerical_range_sector(attach_potential(assemble_L(3, g), step_potential(g, -s)))
        assert est.vertex >= -2 * s
        vertices.append(est.vertex)
    assert vertices[0] < 0 and vertices == sorted(vertices)


def test_sector_seeded_and_sample_floor(g20):
    M = attach_potential(assemble_L(3, g20), step_potential(g20, 1j))
    a = numerical_range_sector(M, seed=3)
    b = numerical_range_sector(M, seed=3)
    assert a.theta == b.theta and np.array_equal(a.quotients, b.quotients)
    with pytest.raises(ValueError):
        numerical_range_sector(M, samples=999)
