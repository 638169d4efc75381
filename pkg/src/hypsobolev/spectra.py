"""Resolvent norm sweeps, non-self-adjoint eigensolves and numerical-range sectors.

Everything here works on radial functions through the half-density matrices
of :mod:`hypsobolev.discrete`.  Upper bounds for ``||(L - alpha)^-1||_{q -> q'}``
come from the Kunze-Stein integral of the exact kernel; lower bounds come from
solving against explicit probe functions.
"""
from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.linalg import lapack
from scipy.sparse.linalg import eigs

from .discrete import (
    DiscreteOperator,
    PotentialSpec,
    RadialGrid,
    assemble_L,
    attach_potential,
    build_grid,
    default_radius,
    lp_norm,
    resolvent_apply,
)
from .kernels import SpectralParameter, resolvent
from .kunze_stein import LebesgueExponent, exponent_table, ks_norm_bound

__all__ = [
    "ProbeFamily",
    "SweepRow",
    "SobolevSweep",
    "EigenSolution",
    "EigenReport",
    "BoundReport",
    "ScanResult",
    "SectorEstimate",
    "default_grid",
    "opnorm_probe_lower",
    "sobolev_sweep",
    "eigen_solve",
    "artifact_band",
    "classify_genuine",
    "eigen_report",
    "check_bounds",
    "small_potential_scan",
    "numerical_range_sector",
]

DENSE_LIMIT = 2000


def default_grid(n: int, h: float = 0.01) -> RadialGrid:
    R = default_radius(n)
    return build_grid(n, R, int(round(R / h)))


# --------------------------------------------------------------------------
# operator-norm lower bounds

@dataclass(frozen=True)
class ProbeFamily:
    """Bumps at ``centers`` with ``widths`` plus seeded random-sign step functions.

    ``None`` centers mean ``{0, 1, 2, 4, ..., R/2}``; ``None`` widths mean
    ``{8h, 0.5, 1}``.
    """

    centers: tuple[float, ...] | None = None
    widths: tuple[float, ...] | None = None
    n_random: int = 32
    seed: int = 0

    def build(self, grid: RadialGrid) -> np.ndarray:
        rho = grid.nodes
        centers = self.centers
        if centers is None:
            centers, c = [0.0], 1.0
            while c <= grid.R / 2:
                centers.append(c)
                c *= 2.0
        widths = self.widths if self.widths is not None else (8 * grid.h, 0.5, 1.0)
        rows = [np.exp(-(((rho - c) / w) ** 2)) for c in centers for w in widths]
        rng = np.random.default_rng(self.seed)
        for _ in range(self.n_random):
            pieces = int(rng.integers(2, 17))
            top = rng.uniform(0.5, grid.R / 2)
            cuts = np.sort(rng.uniform(0.0, top, pieces - 1))
            signs = rng.choice([-1.0, 1.0], pieces)
            idx = np.searchsorted(cuts, rho)
            rows.append(np.where(rho < top, signs[np.minimum(idx, pieces - 1)], 0.0))
        return np.array(rows)


def opnorm_probe_lower(n: int, q: LebesgueExponent, sp: SpectralParameter, grid: RadialGrid,
                       probes: ProbeFamily = ProbeFamily()) -> float:
    """max_f ||(L - alpha)^-1 f||_{q'} / ||f||_q over the probe family (radial sector)."""
    Lh = assemble_L(n, grid)
    half = grid.half_density
    best = 0.0
    for f in probes.build(grid):
        den = lp_norm(f, q.q, grid)
        if den == 0:
            continue
        u = resolvent_apply(Lh, sp, half * f)
        best = max(best, lp_norm(u, q.q_dual, grid, half_density=True) / den)
    return best


# --------------------------------------------------------------------------
# Sobolev exponent sweeps

@dataclass(frozen=True)
class SweepRow:
    alpha: complex
    q: float
    ks_upper: float
    probe_lower: float
    regime: str
    ks_diverged: bool = False


@dataclass(frozen=True)
class SobolevSweep:
    n: int
    q: float
    ray: float
    rows: tuple[SweepRow, ...]
    ks_slope: float
    probe_slope: float
    exponents: tuple[float, float]
    regime: str
    sandwich_constant: float

    @property
    def predicted_slope(self) -> float:
        return self.exponents[1] if self.regime == "low-q" else self.exponents[0]


def _sweep_row(n: int, q: LebesgueExponent, grid: RadialGrid | None, probes: ProbeFamily | None,
               alpha: complex) -> SweepRow:
    sp = SpectralParameter.from_alpha(alpha)
    ks = ks_norm_bound(n, q, resolvent(n, sp))
    lower = float("nan")
    if grid is not None:
        lower = opnorm_probe_lower(n, q, sp, grid, probes or ProbeFamily())
    regime = exponent_table(n, q.q)[2] if q.in_range(n) else "out-of-range"
    return SweepRow(sp.alpha, q.q, ks.value, lower, regime, ks.diverged)


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def sobolev_sweep(n: int, q: LebesgueExponent, ray: float, magnitudes: Sequence[float],
                  grid: RadialGrid | None = None, probes: ProbeFamily | None = None,
                  jobs: int = 1) -> SobolevSweep:
    """KS upper and probe lower bounds along ``alpha = |alpha| exp(i ray)``.

    Pass ``grid=None`` to skip the probe column.  Rows whose KS integral
    diverges carry ``ks_upper = inf`` and are left out of the slope fit.
    """
    mags = np.asarray(magnitudes, dtype=float)
    if np.any(mags <= 0):
        raise ValueError("magnitudes must be positive")
    if abs(math.remainder(ray, 2 * math.pi)) < 1e-12:
        raise ValueError("ray lies on the spectrum [0, inf)")
    alphas = [complex(m * math.cos(ray), m * math.sin(ray)) for m in mags]
    work = functools.partial(_sweep_row, n, q, grid, probes)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, alphas))
    else:
        rows = [work(a) for a in alphas]
    ks = np.array([r.ks_upper for r in rows])
    lo = np.array([r.probe_lower for r in rows])
    e1, e2, regime = exponent_table(n, q.q) if q.in_range(n) else (float("nan"),) * 2 + ("out-of-range",)
    ratio = lo / ks
    ratio = ratio[np.isfinite(ratio)]
    return SobolevSweep(n, q.q, ray, tuple(rows), _loglog_slope(mags, ks), _loglog_slope(mags, lo),
                        (e1, e2), regime, float(ratio.max()) if ratio.size else float("nan"))


# --------------------------------------------------------------------------
# eigenvalues

@dataclass(frozen=True)
class EigenSolution:
    values: np.ndarray
    residuals: np.ndarray
    failures: tuple[int, ...] = ()

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return self.values.size


def _residuals(M: DiscreteOperator, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    out = np.empty(vals.size)
    for k in range(vals.size):
        v = vecs[:, k]
        out[k] = np.linalg.norm(M.matvec(v) - vals[k] * v) / np.linalg.norm(v)
    return out


def _refine(M: DiscreteOperator, lam: complex, v: np.ndarray, steps: int = 3) -> tuple[complex, np.ndarray, float]:
    """Inverse iteration at a slightly perturbed shift, Rayleigh update."""
    off = M.off.astype(complex)
    for _ in range(steps):
        shift = lam + 1e-10 * max(1.0, abs(lam))
        dl, d, du, du2, ipiv, info = lapack.zgttrf(off.copy(), (M.diag - shift).astype(complex), off.copy())
        if info:
            break
        x, _ = lapack.zgttrs(dl, d, du, du2, ipiv, v)
        v = x / np.linalg.norm(x)
        lam = complex(np.vdot(v, M.matvec(v)))
    res = float(np.linalg.norm(M.matvec(v) - lam * v))
    return lam, v, res


def eigen_solve(M: DiscreteOperator, targets: Sequence[complex] | None = None, k: int = 6,
                select: tuple[float, float] | None = None, tol: float = 1e-8) -> EigenSolution:
    """Eigenvalues of the tridiagonal matrix.

    Real symmetric matrices use the tridiagonal symmetric solver (optionally
    restricted to the value window ``select``).  Complex matrices with
    ``N <= 2000`` get a full dense solve; larger ones need ``targets`` and
    use shift-invert Arnoldi for ``k`` eigenvalues near each target.  Pairs
    whose residual exceeds ``tol`` after inverse-iteration refinement are
    listed in ``failures`` rather than raising.
    """
    N = M.size
    if M.is_real():
        kw = dict(select="v", select_range=select) if select is not None else {}
        if N <= DENSE_LIMIT or select is not None:
            vals, vecs = linalg.eigh_tridiagonal(M.diag, M.off, **kw)
            res = _residuals(M, vals, vecs)
        else:
            vals = linalg.eigh_tridiagonal(M.diag, M.off, eigvals_only=True, **kw)
            # backward-stable symmetric solver: residual bounded by eps * ||M||
            res = np.full(vals.size, np.finfo(float).eps * (np.abs(M.diag).max() + 2 * np.abs(M.off).max()))
        vals = vals.astype(complex)
    elif N <= DENSE_LIMIT and targets is None:
        vals, vecs = linalg.eig(M.to_dense())
        res = _residuals(M, vals, vecs)
        for i in np.nonzero(res > tol)[0]:
            vals[i], vecs[:, i], res[i] = _refine(M, vals[i], vecs[:, i])
    else:
        if targets is None:
            raise ValueError(f"N={N} > {DENSE_LIMIT}: complex eigensolve needs shift-invert targets")
        A = M.to_sparse().tocsc()
        found: list[complex] = []
        resid: list[float] = []
        for t in targets:
            w, v = eigs(A, k=min(k, N - 2), sigma=complex(t))
            for j in range(w.size):
                lam, vec, r = _refine(M, complex(w[j]), v[:, j] / np.linalg.norm(v[:, j]), steps=1)
                if all(abs(lam - f) > 1e-9 * max(1.0, abs(lam)) for f in found):
                    found.append(lam)
                    resid.append(r)
        vals = np.array(found, dtype=complex)
        res = np.array(resid)
    order = np.lexsort((vals.imag, vals.real))
    vals, res = vals[order], res[order]
    failures = tuple(int(i) for i in np.nonzero(res > tol)[0])
    return EigenSolution(vals, res, failures)


def artifact_band(grid: RadialGrid) -> float:
    """Default band around [0, inf): max(5 (pi/R)^2, 1e-3)."""
    return max(5.0 * (math.pi / grid.R) ** 2, 1e-3)


def _dist_to_spectrum(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.where(z.real >= 0, np.abs(z.imag), np.abs(z))


def _candidates(eigs: np.ndarray, grid: RadialGrid, band: float) -> np.ndarray:
    z = np.asarray(eigs, dtype=complex)
    resolved = np.abs(z) <= 1.0 / grid.h**2
    return z[resolved & (_dist_to_spectrum(z) > band)]


def classify_genuine(eigs, grid: RadialGrid, band: float | None = None,
                     recompute: Callable[[float], np.ndarray] | None = None,
                     stretch: float = 1.5, drift: float = 0.1) -> np.ndarray:
    """Eigenvalues attributed to genuine point spectrum.

    A value is kept when it is resolved by the mesh (``|z| <= 1/h^2``), lies
    farther than ``band`` from ``[0, inf)``, and, if ``recompute`` is given,
    reappears after re-solving at radius ``stretch * R``: some candidate of
    the re-solve must lie within ``drift * dist(z, [0, inf))`` of it.
    Truncation modes shift by a fixed fraction of their distance to the
    continuum under that stretch and fail the test.
    """
    band = artifact_band(grid) if band is None else band
    cand = _candidates(eigs, grid, band)
    if recompute is None or cand.size == 0:
        return np.sort_complex(cand)
    R2 = stretch * grid.R
    other = np.asarray(recompute(R2), dtype=complex)
    g2 = build_grid(grid.n, R2, int(round(R2 / grid.h)))
    other = _candidates(other, g2, artifact_band(g2))
    keep = []
    for z in cand:
        if other.size and np.min(np.abs(other - z)) <= drift * _dist_to_spectrum(np.array([z]))[0]:
            keep.append(z)
    return np.sort_complex(np.array(keep, dtype=complex))


@dataclass(frozen=True)
class _WellSolver:
    """Picklable R -> eigenvalues for a potential profile at fixed spacing."""

    n: int
    h: float
    V: PotentialSpec

    def __call__(self, R: float) -> np.ndarray:
        grid = build_grid(self.n, R, int(round(R / self.h)))
        M = attach_potential(assemble_L(self.n, grid), self.V.resample(grid))
        return eigen_solve(M).values


@dataclass(frozen=True)
class EigenReport:
    V: PotentialSpec
    eigenvalues: np.ndarray
    genuine: np.ndarray
    band: float
    residuals: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    def ratios(self, gamma: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(r_short, r_long) = (|z|^gamma, |z|^(1/2)) / ||V||_p^p with p = gamma + n/2."""
        gamma = self.V.gamma if gamma is None else gamma
        p = gamma + self.V.grid.n / 2.0
        mass = lp_norm(self.V.samples, p, self.V.grid) ** p
        mod = np.abs(self.genuine)
        return mod**gamma / mass, np.sqrt(mod) / mass


def eigen_report(V: PotentialSpec, stability: bool = True,
                 targets: Sequence[complex] | None = None) -> EigenReport:
    """Solve for L + V on V's grid and classify the spectrum.

    ``targets`` switches to shift-invert (needed for complex V when N > 2000);
    the stability re-solve is then skipped.
    """
    grid = V.grid
    M = attach_potential(assemble_L(grid.n, grid), V)
    sol = eigen_solve(M, targets=targets)
    recompute = _WellSolver(grid.n, grid.h, V) if stability and targets is None else None
    band = artifact_band(grid)
    genuine = classify_genuine(sol.values, grid, band, recompute)
    return EigenReport(V, sol.values, genuine, band, sol.residuals)


@dataclass(frozen=True)
class BoundReport:
    kind: str
    gamma: float
    max_ratio: float
    ratios: np.ndarray
    vacuous: bool


def check_bounds(report: EigenReport, gamma: float) -> BoundReport:
    """Largest short-range (gamma < 1/2) or long-range (gamma >= 1/2) ratio.

    At gamma = 1/2 the two ratios coincide; the result is labelled long.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    short, long_ = report.ratios(gamma)
    kind = "short" if gamma < 0.5 else "long"
    r = short if kind == "short" else long_
    if r.size == 0:
        return BoundReport(kind, gamma, float("nan"), r, True)
    return BoundReport(kind, gamma, float(r.max()), r, False)


@dataclass(frozen=True)
class ScanResult:
    scales: tuple[float, ...]
    genuine_counts: tuple[int, ...]
    s_star: float | None
    monotone: bool
    found: bool


def _scan_point(V0: PotentialSpec, s: float) -> int:
    return int(eigen_report(V0.scaled(s)).genuine.size)


def small_potential_scan(V0: PotentialSpec, scales: Sequence[float], jobs: int = 1) -> ScanResult:
    """Threshold below which ``L + sV0`` shows no genuine eigenvalues.

    Walking down the decreasing ``scales``, ``s_star`` is the first scale
    with an empty genuine set; ``monotone`` is False if eigenvalues reappear
    at a smaller scale.  ``found`` is False when no scale is empty.
    """
    scales = [float(s) for s in scales]
    if any(s <= 0 for s in scales) or any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be positive and strictly decreasing")
    work = functools.partial(_scan_point, V0)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(work, scales))
    else:
        counts = [work(s) for s in scales]
    empty = [c == 0 for c in counts]
    if not any(empty):
        return ScanResult(tuple(scales), tuple(counts), None, True, False)
    first = empty.index(True)
    monotone = all(empty[first:])
    return ScanResult(tuple(scales), tuple(counts), scales[first], monotone, True)


# --------------------------------------------------------------------------
# numerical range

@dataclass(frozen=True)
class SectorEstimate:
    vertex: float
    theta: float
    sample_count: int
    failed: bool
    quotients: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0, complex))


def _quotients(M: DiscreteOperator, U: np.ndarray) -> np.ndarray:
    MU = M.diag[:, None] * U
    MU[:-1] += M.off[:, None] * U[1:]
    MU[1:] += M.off[:, None] * U[:-1]
    return np.einsum("ij,ij->j", U.conj(), MU) / np.einsum("ij,ij->j", U.conj(), U).real


def numerical_range_sector(M: DiscreteOperator, samples: int = 10_000, seed: int = 0,
                           include_eigenvectors: bool = True) -> SectorEstimate:
    """Sector {|arg(z - vertex)| <= theta} containing sampled Rayleigh quotients.

    Samples mix white complex noise, smooth combinations of the lowest
    Dirichlet modes, and noise confined to ``rho <= 2``; the eigenvectors
    are added when a dense solve is affordable.  The vertex is
    ``2 min(0, min Re z)``; ``failed`` is set when theta reaches
    ``(pi/2)(1 - 1e-6)``.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = np.random.default_rng(seed)
    N = M.size
    rho = M.grid.nodes
    modes = np.sin(np.outer(rho, np.arange(1, 33)) * math.pi / M.grid.R)
    near = (rho <= 2.0).astype(float)[:, None]
    zs = []
    chunk = 500
    done = 0
    kind = 0
    while done < samples:
        m = min(chunk, samples - done)
        if kind == 0:
            U = rng.standard_normal((N, m)) + 1j * rng.standard_normal((N, m))
        elif kind == 1:
            c = (rng.standard_normal((32, m)) + 1j * rng.standard_normal((32, m))) / np.arange(1, 33)[:, None]
            U = modes @ c
        else:
            U = near * (rng.standard_normal((N, m)) + 1j * rng.standard_normal((N, m)))
        zs.append(_quotients(M, U))
        done += m
        kind = (kind + 1) % 3
    if include_eigenvectors and N <= DENSE_LIMIT:
        if M.is_real():
            _, V = linalg.eigh_tridiagonal(M.diag, M.off)
        else:
            _, V = linalg.eig(M.to_dense())
        zs.append(_quotients(M, V.astype(complex)))
    z = np.concatenate(zs)
    vertex = 2.0 * min(0.0, float(z.real.min()))
    theta = float(np.max(np.abs(np.angle(z - vertex))))
    failed = theta >= 0.5 * math.pi * (1 - 1e-6)
    return SectorEstimate(vertex, theta, int(z.size), failed, z)
