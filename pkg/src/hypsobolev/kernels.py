"""Radial kernels on real hyperbolic space H^n.

Conventions
-----------
``L = Delta - (n-1)^2/4`` has spectrum ``[0, inf)``.  A spectral parameter
``alpha`` off the spectrum is stored together with its square root ``lam``
on the decaying branch ``Im lam > 0``, so every resolvent kernel carries the
factor ``exp(i lam rho)``.

Odd ``n``: the kernel is built from the one-dimensional Green's function
``i exp(i lam rho) / (2 lam)`` by ``(n-1)/2`` applications of the
interdimensional step ``D = -(2 pi sinh rho)^-1 d/drho``, done symbolically
in the basis ``(i lam)^m coth^a csch^b``.

Even ``n``: the same step, applied under the integral sign to the ``n = 2``
base kernel, gives the descent formula

    G_n(rho) = sqrt(2) int_rho^inf G_{n+1}(s) sinh(s) (cosh s - cosh rho)^(-1/2) ds

which is evaluated after ``s = rho + v^2`` by graded Gauss-Legendre panels.
"""
from __future__ import annotations

import cmath
import enum
import functools
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .discrete import RadialGrid, assemble_L
from .specfun import QuadratureConvergenceError

__all__ = [
    "BranchError",
    "SingularInputError",
    "RegimeError",
    "SpectralParameter",
    "RadialKernel",
    "Case",
    "CutoffSpec",
    "DeltaTestResult",
    "resolvent_kernel",
    "resolvent",
    "normalize_delta_test",
    "resolvent_bound_case",
    "heat_kernel_comparator",
    "heat_kernel_exact_h3",
    "spectral_measure_h3",
    "cutoff_resolvent_kernel_h3",
]


class BranchError(ValueError):
    """Square root on the growing branch (Im lam < 0)."""


class SingularInputError(ValueError):
    """Kernel requested at rho <= 0, where it diverges."""


class RegimeError(ValueError):
    """Parameters outside the regime an evaluator was built for."""


@dataclass(frozen=True)
class SpectralParameter:
    """A point ``alpha`` of C minus [0, inf) and its root ``lam``, ``Im lam > 0``.

    On-spectrum limits ``alpha = lam0^2 +- i0`` are built with
    :meth:`on_spectrum`; they carry ``side`` in ``{+1, -1}`` and a real
    ``lam`` (``+lam0`` from above, ``-lam0`` from below).
    """

    alpha: complex
    lam: complex
    side: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "lam", complex(self.lam))
        if self.side not in (-1, 0, 1):
            raise ValueError("side must be -1, 0 or +1")
        if self.side == 0:
            if self.lam.imag <= 0:
                raise BranchError(f"need Im lam > 0 off the spectrum, got lam={self.lam}")
        elif self.lam.imag != 0:
            raise BranchError("on-spectrum limit must carry a real lam")
        if abs(self.lam * self.lam - self.alpha) > 1e-12 * max(1.0, abs(self.alpha)):
            raise ValueError(f"lam^2 = {self.lam ** 2} does not match alpha = {self.alpha}")

    @classmethod
    def from_alpha(cls, alpha: complex) -> "SpectralParameter":
        alpha = complex(alpha)
        if alpha.imag == 0 and alpha.real >= 0:
            raise BranchError(f"alpha={alpha} lies on the spectrum [0, inf); use on_spectrum()")
        return cls(alpha, 1j * cmath.sqrt(-alpha))

    @classmethod
    def on_spectrum(cls, lam0: float, side: int = 1) -> "SpectralParameter":
        lam0 = float(lam0)
        if lam0 <= 0:
            raise ValueError("on-spectrum limit needs lam0 > 0")
        if side not in (-1, 1):
            raise ValueError("side must be +1 (alpha + i0) or -1 (alpha - i0)")
        return cls(complex(lam0 * lam0), complex(side * lam0), side)

    @property
    def magnitude(self) -> float:
        return abs(self.alpha)

    @property
    def arg(self) -> float:
        """Argument of alpha in (0, 2 pi)."""
        a = cmath.phase(self.alpha)
        if a < 0 or (a == 0 and self.side < 0):
            a += 2 * math.pi
        return a


# --------------------------------------------------------------------------
# odd dimensions: symbolic recursion

@functools.lru_cache(maxsize=None)
def _odd_table(n: int) -> tuple[tuple[int, int, int, int], ...]:
    """Integer coefficients c of  sum c (i lam)^m coth^a csch^b  after (n-1)/2 steps of
    (1/sinh) d/drho applied to exp(i lam rho) (the exponential is factored out)."""
    if n < 1 or n % 2 == 0:
        raise ValueError("odd table needs odd n >= 1")
    terms: dict[tuple[int, int, int], int] = {(0, 0, 0): 1}
    for _ in range((n - 1) // 2):
        new: dict[tuple[int, int, int], int] = {}

        def add(key, c):
            new[key] = new.get(key, 0) + c

        for (m, a, b), c in terms.items():
            add((m + 1, a, b + 1), c)
            if a:
                add((m, a - 1, b + 3), -a * c)
            if b:
                add((m, a + 1, b + 1), -b * c)
        terms = {k: v for k, v in new.items() if v}
    return tuple((m, a, b, c) for (m, a, b), c in sorted(terms.items()))


def _coth_csch(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = np.exp(-2.0 * rho)
    den = -np.expm1(-2.0 * rho)
    return (1.0 + q) / den, 2.0 * np.exp(-rho) / den


def _odd_sum(n: int, lam: complex, rho: np.ndarray, csch_shift: int = 0) -> np.ndarray:
    """Closed-form odd-n kernel (times sinh^csch_shift) without the exp(i lam rho) factor."""
    k = (n - 1) // 2
    coth, csch = _coth_csch(rho)
    il = 1j * lam
    out = np.zeros(rho.shape, dtype=complex)
    for m, a, b, c in _odd_table(n):
        out += c * il ** (m - 1) * coth**a * csch ** (b - csch_shift)
    return -0.5 * (-1.0 / (2.0 * math.pi)) ** k * out


def _odd_kernel(n: int, lam: complex, rho: np.ndarray) -> np.ndarray:
    return _odd_sum(n, lam, rho) * np.exp(1j * lam * rho)


# --------------------------------------------------------------------------
# even dimensions: descent from n + 1

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _descent_panels(rho: float, lam: complex, n: int) -> np.ndarray:
    decay = (n - 2) / 2.0 + 0.25 + max(lam.imag, 0.0)
    vmax = math.sqrt(46.0 / decay)
    r = math.sqrt(rho)
    edges = [0.0]
    v = min(r, 1.0) / 16.0
    while v < 1.0 and v < vmax:
        edges.append(v)
        v *= 2.0
    start = edges[-1]
    dv = min(0.5, 0.7 / math.sqrt(decay))
    if abs(lam.real) > 0:
        dv = min(dv, 2.5 / (abs(lam.real) * vmax))
    m = max(1, int(math.ceil((vmax - start) / dv)))
    edges.extend(np.linspace(start, vmax, m + 1)[1:].tolist())
    return np.asarray(edges)


def _even_kernel_point(n: int, lam: complex, rho: float) -> complex:
    edges = _descent_panels(rho, lam, n)
    a, b = edges[:-1, None], edges[1:, None]
    v = (0.5 * (b - a) * _GL_X + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * _GL_W).ravel()
    s = rho + v * v
    half = 0.5 * v * v
    # v / sqrt(sinh(v^2/2)) with the v -> 0 limit
    ratio = np.where(half > 1e-8, np.sinh(np.maximum(half, 1e-300)) / np.maximum(half, 1e-300), 1.0 + half * half / 6.0)
    jac = 2.0 * math.sqrt(2.0) / np.sqrt(np.sinh(rho + half) * ratio)
    # log-domain exp(i lam s) * sinh(s)^-shift stays finite for large s
    g = _odd_sum(n + 1, lam, s, csch_shift=1) * np.exp(1j * lam * s)
    return complex(np.sum(w * g * jac))


def _even_kernel(n: int, lam: complex, rho: np.ndarray) -> np.ndarray:
    out = np.empty(rho.shape, dtype=complex)
    flat = rho.ravel()
    res = out.ravel()
    for i, r in enumerate(flat):
        res[i] = _even_kernel_point(n, lam, float(r))
    return res.reshape(rho.shape)


def resolvent_kernel(n: int, sp: SpectralParameter, rho):
    """Kernel of ``(L - alpha)^-1`` on H^n at geodesic distance ``rho``.

    Normalized so that ``(L - alpha) G = delta``; near the origin
    ``G ~ Gamma(n/2 - 1) / (4 pi^(n/2) rho^(n-2))`` for ``n >= 3``.
    Accepts scalar or array ``rho``.
    """
    if n < 2:
        raise ValueError("dimension must be >= 2")
    if sp.side == 0 and sp.lam.imag <= 0:
        raise BranchError("Im lam must be positive")
    arr = np.asarray(rho, dtype=float)
    if np.any(arr <= 0):
        raise SingularInputError("resolvent kernel diverges at rho = 0")
    if n % 2:
        out = _odd_kernel(n, sp.lam, arr)
    else:
        out = _even_kernel(n, sp.lam, arr)
    return complex(out) if np.ndim(rho) == 0 else out


@dataclass(frozen=True)
class RadialKernel:
    """An evaluable radial kernel kappa(rho) on H^n.

    ``origin_power`` is the exponent p of the leading ``rho^p`` behaviour at
    the origin; ``breakpoints`` are radii where kappa is not smooth.
    """

    n: int
    backend: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    origin_power: float = 0.0
    breakpoints: tuple[float, ...] = ()

    def __call__(self, rho):
        return self.evaluator(np.asarray(rho, dtype=float))

    @classmethod
    def tabulated(cls, n: int, func: Callable, origin_power: float = 0.0, breakpoints=()) -> "RadialKernel":
        return cls(n, "tabulated", func, origin_power, tuple(breakpoints))


def resolvent(n: int, sp: SpectralParameter) -> RadialKernel:
    backend = "closed-form-odd" if n % 2 else "recursion-even"
    return RadialKernel(n, backend, functools.partial(resolvent_kernel, n, sp), origin_power=2.0 - n)


# --------------------------------------------------------------------------
# normalization check against the discrete operator

@dataclass(frozen=True)
class DeltaTestResult:
    residual: float
    best_scale: complex
    too_coarse: bool


_DELTA_WIDTHS = (0.5, 1.0, 2.0)
_DELTA_SHIFTS = (2.0, 4.0)


def _delta_tests(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    funcs = [np.exp(-((rho / s) ** 2)) for s in _DELTA_WIDTHS]
    vals = [1.0] * len(_DELTA_WIDTHS)
    for c in _DELTA_SHIFTS:
        funcs.append(np.exp(-(((rho - c) / 0.5) ** 2)))
        vals.append(math.exp(-((c / 0.5) ** 2)))
    return np.array(funcs), np.array(vals)


def normalize_delta_test(n: int, sp: SpectralParameter, grid: RadialGrid, scale: complex = 1.0) -> DeltaTestResult:
    """Weak-form delta residual of the sampled kernel under the discrete operator.

    The half-density kernel column ``u`` is hit by ``L_h - alpha`` and paired
    with half-density test functions ``v_k = sinh^((n-1)/2) f_k``:
    ``m_k = omega h sum_i ((L_h - alpha) u)_i v_k,i`` must reproduce
    ``f_k(0)``.  Centered Gaussians probe the unit source at the origin,
    off-center bumps probe the homogeneous equation away from it.  The
    residual is ``||m - f(0)|| / ||f(0)||``; ``best_scale`` is the complex
    factor that would minimize it (1 for a correctly normalized kernel).

    Raises
    ------
    RegimeError
        If ``sp`` is an on-spectrum limit.
    ValueError
        If the grid ends before the weighted test functions have decayed.
    """
    if sp.side != 0:
        raise RegimeError("delta test needs alpha strictly off the spectrum")
    if grid.n != n:
        raise ValueError("grid dimension does not match n")
    rho = grid.nodes
    tests, expected = _delta_tests(rho)
    keep = np.max(np.abs(tests), axis=0) > 1e-18
    last = min(int(np.nonzero(keep)[0].max()) + 2, rho.size)
    half = np.sinh(rho[:last]) ** ((n - 1) / 2.0)
    weighted = np.abs(tests[:, :last]) * half
    if last == rho.size and weighted[:, -1].max() > 1e-12 * weighted.max():
        # the Dirichlet end would clip the test functions
        raise ValueError(f"grid radius {grid.R} too small for the delta tests")
    u = np.zeros(rho.size, dtype=complex)
    u[:last] = scale * half * np.asarray(resolvent_kernel(n, sp, rho[:last]))
    op = assemble_L(n, grid)
    lu = op.matvec(u) - sp.alpha * u
    v = tests[:, :last] * half
    measured = grid.omega * grid.h * (v @ lu[:last])
    denom = np.linalg.norm(expected)
    residual = float(np.linalg.norm(measured - expected) / denom)
    best = complex(np.vdot(measured, expected) / np.vdot(measured, measured))
    return DeltaTestResult(residual, best, residual > 0.1)


# --------------------------------------------------------------------------
# six-case bound ledger for real beta < 0

class Case(enum.Enum):
    I = ("i", "rho > 1, sqrt(-beta) > 1")
    II = ("ii", "rho > 1, sqrt(-beta) < 1, rho sqrt(-beta) > 1")
    III = ("iii", "rho < 1, sqrt(-beta) > 1, rho sqrt(-beta) > 1")
    IV = ("iv", "rho < 1, sqrt(-beta) > 1, rho sqrt(-beta) < 1")
    V = ("v", "rho > 1, sqrt(-beta) < 1, rho sqrt(-beta) < 1")
    VI = ("vi", "rho < 1, sqrt(-beta) < 1")

    @property
    def tag(self) -> str:
        return self.value[0]

    @property
    def predicate(self) -> str:
        return self.value[1]


def _classify(beta: float, rho: float) -> Case:
    k = math.sqrt(-beta)
    far = rho >= 1.0
    big = k >= 1.0
    outer = rho * k >= 1.0
    if far:
        if big:
            return Case.I
        return Case.II if outer else Case.V
    if big:
        return Case.III if outer else Case.IV
    return Case.VI


def resolvent_bound_case(n: int, beta: float, rho: float) -> tuple[Case, float]:
    """Case label and the bound expression (constant 1) for |Ker (L - beta)^-1|."""
    if beta >= 0 or rho <= 0:
        raise ValueError("need beta < 0 and rho > 0")
    case = _classify(beta, rho)
    k = math.sqrt(-beta)
    if case in (Case.I, Case.II):
        val = math.exp(-(n - 1) * rho / 2.0)
    elif case is Case.III:
        val = math.exp(-rho * k) * (1.0 + beta * beta) ** ((n - 3) / 8.0)
    elif case is Case.V:
        val = math.exp(-(n - 1) * rho / 2.0) * rho ** ((3 - n) / 2.0)
    else:
        val = rho ** (2.0 - n)
    return case, val


# --------------------------------------------------------------------------
# heat kernel

def heat_kernel_comparator(n: int, t, rho, log: bool = False):
    """t^-n/2 exp(-(n-1) rho/2 - rho^2/4t) (1 + rho + t)^(n/2 - 3/2) (1 + rho).

    ``log=True`` returns the natural log, which stays finite where the value underflows.
    """
    t = np.asarray(t, dtype=float)
    rho = np.asarray(rho, dtype=float)
    out = (
        -(n / 2.0) * np.log(t)
        - (n - 1) * rho / 2.0
        - rho**2 / (4.0 * t)
        + (n / 2.0 - 1.5) * np.log1p(rho + t)
        + np.log1p(rho)
    )
    if not log:
        out = np.exp(out)
    return float(out) if out.ndim == 0 else out


def heat_kernel_exact_h3(t, rho, log: bool = False):
    """Kernel of exp(-tL) on H^3: (4 pi t)^-3/2 (rho / sinh rho) exp(-rho^2 / 4t)."""
    t = np.asarray(t, dtype=float)
    rho = np.asarray(rho, dtype=float)
    safe = np.where(rho > 1e-8, rho, 1.0)
    # log(rho / sinh rho) = log(2 rho) - rho - log1p(-exp(-2 rho))
    shape = np.where(rho > 1e-8, np.log(2.0 * safe) - safe - np.log(-np.expm1(-2.0 * safe)), -(rho**2) / 6.0)
    out = -1.5 * np.log(4.0 * math.pi * t) + shape - rho**2 / (4.0 * t)
    if not log:
        out = np.exp(out)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# spectral measure of sqrt(L) on H^3

def spectral_measure_h3(lam, rho, j: int = 0):
    """j-th lam-derivative of dE_sqrt(L)(lam)(rho) = lam sin(lam rho) / (2 pi^2 sinh rho).

    This is ``(2 lam / pi) Im G(lam + i0)`` with ``G`` the n = 3 resolvent kernel.
    """
    lam = np.asarray(lam, dtype=float)
    rho = np.asarray(rho, dtype=float)
    pref = 1.0 / (2.0 * math.pi**2 * np.sinh(rho))
    s, c = np.sin(lam * rho), np.cos(lam * rho)
    if j == 0:
        out = lam * s
    elif j == 1:
        out = s + lam * rho * c
    elif j == 2:
        out = 2.0 * rho * c - lam * rho**2 * s
    else:
        raise ValueError("j must be 0, 1 or 2")
    out = pref * out
    return float(out) if out.ndim == 0 else out


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth cutoff: 0 outside (lo, hi), 1 on [flat_lo, flat_hi], C-infinity in between."""

    lo: float = 0.5
    flat_lo: float = 0.8
    flat_hi: float = 1.25
    hi: float = 1.6
    amplitude: float = 1.0

    def __post_init__(self):
        if not (0 <= self.lo < self.flat_lo <= self.flat_hi < self.hi):
            raise ValueError("cutoff needs lo < flat_lo <= flat_hi < hi")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        up = _smoothstep((x - self.lo) / (self.flat_lo - self.lo))
        down = _smoothstep((self.hi - x) / (self.hi - self.flat_hi))
        return self.amplitude * up * down


def _quad(f, a: float, b: float, **kw) -> float:
    """scipy quad that raises instead of warning when QUADPACK gives up."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return integrate.quad(f, a, b, **kw)[0]
        except integrate.IntegrationWarning as exc:
            raise QuadratureConvergenceError(f"quadrature on [{a:.6g}, {b:.6g}]: {exc}") from None


def cutoff_resolvent_kernel_h3(sp: SpectralParameter, rho: float, phi: CutoffSpec = CutoffSpec()) -> complex:
    """Kernel of phi(L/|alpha|) (L - alpha)^-1 on H^3 from the spectral measure.

    Low-energy regime only (|alpha| < 1).  The integrand has a pole at the
    root ``p`` of ``lam^2 = alpha`` with ``Re p >= 0``.  For on-spectrum limits
    it is split into a principal value plus ``side * i pi`` times the
    residue; off the axis the value at ``Re p`` is subtracted and its
    integral against ``1/(lam - p)`` is taken in closed form, so the result
    stays accurate as ``Im alpha -> 0``.

    Raises
    ------
    RegimeError
        If ``|alpha| >= 1``.
    QuadratureConvergenceError
        If an adaptive quadrature misses its tolerance.
    """
    if sp.magnitude >= 1.0:
        raise RegimeError("cutoff kernel is for the low-energy regime |alpha| < 1")
    if rho <= 0:
        raise SingularInputError("rho must be positive")
    if phi.amplitude == 0:
        return 0j
    scale = sp.magnitude
    a, b = math.sqrt(phi.lo * scale), math.sqrt(phi.hi * scale)
    pts = [math.sqrt(phi.flat_lo * scale), math.sqrt(phi.flat_hi * scale)]
    opts = dict(limit=400, epsabs=1e-15, epsrel=1e-11)

    # spectral measure with its 1/sinh(rho) factor pulled out, so that the
    # quadrature tolerances are relative to an O(1) integrand at every rho
    csch = 2.0 * math.exp(-rho) / -math.expm1(-2.0 * rho)

    def dens(lam):
        return float(phi(lam * lam / scale)) * lam * math.sin(lam * rho) / (2.0 * math.pi**2)

    if sp.side:
        lam0 = abs(sp.lam.real)

        def smooth(lam):
            return dens(lam) / (lam + lam0)

        if a < lam0 < b:
            pv = _quad(smooth, a, b, weight="cauchy", wvar=lam0, **opts)
            return csch * complex(pv, sp.side * math.pi * smooth(lam0))
        return csch * complex(_quad(lambda x: smooth(x) / (x - lam0), a, b, points=pts, **opts), 0.0)

    p = sp.lam if sp.lam.real >= 0 else -sp.lam
    x0 = p.real

    def s_(lam):
        return dens(lam) / (lam + p)

    if a < x0 < b:
        # subtract the first-order Taylor part of s at Re p; both pieces
        # integrate against 1/(lam - p) in closed form
        d = 1e-3 * x0
        s0 = s_(x0)
        s1 = (8 * (s_(x0 + d) - s_(x0 - d)) - (s_(x0 + 2 * d) - s_(x0 - 2 * d))) / (12 * d)
        logs = cmath.log(b - p) - cmath.log(a - p)
        base = s0 * logs + s1 * ((b - a) + (p - x0) * logs)

        def g(lam):
            return (s_(lam) - s0 - s1 * (lam - x0)) / (lam - p)

        # breakpoints bracket the width-|Im p| feature left in the remainder
        eta = abs(p.imag)
        near = [x0 + k * eta for k in (-100, -10, 0, 10, 100)]
        pts = sorted(set(pts + [x for x in near if a < x < b]))
        opts.update(epsabs=1e-11 * abs(s0) * (b - a), epsrel=1e-10)
    else:
        base = 0j

        def g(lam):
            return s_(lam) / (lam - p)

    re = _quad(lambda x: g(x).real, a, b, points=pts, **opts)
    im = _quad(lambda x: g(x).imag, a, b, points=pts, **opts)
    return csch * (complex(re, im) + base)
