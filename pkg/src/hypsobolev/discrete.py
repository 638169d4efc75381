"""Radial finite differences for L = Delta - (n-1)^2/4 on H^n.

Radial functions are handled through the half-density ``u = sinh(rho)^((n-1)/2) f``,
which turns ``L`` into the Sturm-Liouville operator ``-d^2/drho^2 + q_n`` with
``q_n = ((n-1)(n-3)/4) / sinh(rho)^2``.  Dirichlet conditions at both ends
give a tridiagonal matrix on the interior nodes ``rho_i = i h``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.linalg import lapack

__all__ = [
    "GridSizeError",
    "GridMismatchError",
    "NearSingularError",
    "RadialGrid",
    "DiscreteOperator",
    "PotentialSpec",
    "StepProfile",
    "sphere_area",
    "default_radius",
    "build_grid",
    "assemble_L",
    "attach_potential",
    "resolvent_apply",
    "lp_norm",
    "read_potential_table",
]


class GridSizeError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


class NearSingularError(ArithmeticError):
    """The shifted matrix is numerically singular at the requested alpha."""


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^(n-1) in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def default_radius(n: int) -> float:
    return 60.0 / (n - 1)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    n: int
    R: float
    N: int

    @property
    def h(self) -> float:
        return self.R / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.N) * self.h

    @property
    def omega(self) -> float:
        return sphere_area(self.n)

    @property
    def half_density(self) -> np.ndarray:
        """sinh(rho_i)^((n-1)/2)."""
        return np.sinh(self.nodes) ** ((self.n - 1) / 2.0)

    @property
    def weights(self) -> np.ndarray:
        return self.omega * np.sinh(self.nodes) ** (self.n - 1) * self.h

    def same_as(self, other: "RadialGrid") -> bool:
        return self.n == other.n and self.N == other.N and self.R == other.R


def build_grid(n: int, R: float, N: int) -> RadialGrid:
    """Uniform grid ``rho_i = i R / N``, ``i = 1..N-1``."""
    if n < 2:
        raise ValueError("dimension must be >= 2")
    if not R > 0:
        raise ValueError("R must be positive")
    if N < 16:
        raise GridSizeError(f"need N >= 16 nodes, got {N}")
    return RadialGrid(int(n), float(R), int(N))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Tridiagonal matrix of -d^2/drho^2 + q_n + V on half-density samples."""

    n: int
    grid: RadialGrid
    diag: np.ndarray
    off: np.ndarray
    potential_attached: bool = False
    boundary: str = "dirichlet"

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def is_real(self) -> bool:
        return not np.any(np.imag(self.diag))

    def is_hermitian(self) -> bool:
        # off-diagonal is real and symmetric by construction
        return self.is_real()


def assemble_L(n: int, grid: RadialGrid) -> DiscreteOperator:
    """Second-order finite differences of ``-d^2/drho^2 + q_n`` with Dirichlet ends."""
    if grid.n != n:
        raise GridMismatchError("grid dimension does not match n")
    rho = grid.nodes
    h2 = grid.h**2
    # 1/sinh^2 written with e^-rho so large radii do not overflow
    q = ((n - 1) * (n - 3) / 4.0) * (2.0 * np.exp(-rho) / -np.expm1(-2.0 * rho)) ** 2
    diag = (2.0 / h2 + q).astype(float)
    off = np.full(rho.size - 1, -1.0 / h2)
    return DiscreteOperator(n, grid, diag, off)


@dataclass(frozen=True)
class StepProfile:
    """``value * 1[0, a]`` with the midpoint value at a node sitting on the jump."""

    value: complex
    a: float = 1.0

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.where(rho < self.a, 1.0, 0.0)
        out = np.where(np.isclose(rho, self.a, rtol=0.0, atol=1e-12 * max(1.0, self.a)), 0.5, out)
        return complex(self.value) * out


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Radial potential sampled on a grid, with Lebesgue exponent p = gamma + n/2.

    ``profile``, when given, is the exact radial function behind the samples
    and is used by :meth:`resample`; otherwise samples are interpolated.
    """

    grid: RadialGrid
    samples: np.ndarray
    gamma: float = 0.5
    profile: object = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != self.grid.nodes.shape:
            raise GridMismatchError("potential samples do not match the grid")
        if not np.all(np.isfinite(s)):
            raise ValueError("potential samples must be finite")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        object.__setattr__(self, "samples", s)

    @property
    def p(self) -> float:
        return self.gamma + self.grid.n / 2.0

    @property
    def norm(self) -> float:
        return lp_norm(self.samples, self.p, self.grid)

    @classmethod
    def from_function(cls, grid: RadialGrid, func, gamma: float = 0.5) -> "PotentialSpec":
        return cls(grid, np.asarray(func(grid.nodes), dtype=complex), gamma, func)

    def resample(self, grid: RadialGrid) -> "PotentialSpec":
        if self.profile is not None:
            return PotentialSpec.from_function(grid, self.profile, self.gamma)
        rho = self.grid.nodes
        re = np.interp(grid.nodes, rho, self.samples.real, right=0.0)
        im = np.interp(grid.nodes, rho, self.samples.imag, right=0.0)
        return PotentialSpec(grid, re + 1j * im, self.gamma)

    def scaled(self, s: float) -> "PotentialSpec":
        prof = None if self.profile is None else _Scaled(self.profile, s)
        return PotentialSpec(self.grid, s * self.samples, self.gamma, prof)

    def with_gamma(self, gamma: float) -> "PotentialSpec":
        return PotentialSpec(self.grid, self.samples, gamma, self.profile)


@dataclass(frozen=True)
class _Scaled:
    base: object
    s: float

    def __call__(self, rho):
        return self.s * np.asarray(self.base(rho), dtype=complex)


def attach_potential(Lh: DiscreteOperator, V: PotentialSpec) -> DiscreteOperator:
    """Add diag(V) to the half-density matrix."""
    if not V.grid.same_as(Lh.grid):
        raise GridMismatchError("potential sampled on a different grid")
    diag = Lh.diag + V.samples
    if not np.any(diag.imag):
        diag = diag.real
    return replace(Lh, diag=diag, potential_attached=True)


def _shift_of(alpha) -> complex:
    return complex(getattr(alpha, "alpha", alpha))


def resolvent_apply(Lh: DiscreteOperator, alpha, f: np.ndarray) -> np.ndarray:
    """Solve ``(L_h - alpha) u = f`` by tridiagonal LU (LAPACK gttrf/gttrs).

    ``alpha`` is a complex number or anything with an ``alpha`` attribute.

    Raises
    ------
    NearSingularError
        If a pivot falls below ``1e-12`` times the matrix scale, or the
        solve amplifies ``f`` by more than ``1e10``.
    """
    a = _shift_of(alpha)
    f = np.asarray(f, dtype=complex)
    if f.shape[0] != Lh.size:
        raise GridMismatchError("right-hand side length does not match the operator")
    d = (Lh.diag - a).astype(complex)
    off = Lh.off.astype(complex)
    dl, d_, du, du2, ipiv, info = lapack.zgttrf(off.copy(), d, off.copy())
    scale = float(np.max(np.abs(d)) + 2.0 * np.max(np.abs(off)))
    if info > 0 or np.min(np.abs(d_)) < 1e-12 * scale:
        raise NearSingularError(f"tridiagonal pivot below 1e-12*scale at alpha={a}")
    u, info = lapack.zgttrs(dl, d_, du, du2, ipiv, f)
    if info != 0:  # pragma: no cover
        raise ArithmeticError(f"zgttrs failed with info={info}")
    fn = np.linalg.norm(f)
    if fn > 0 and np.linalg.norm(u) > 1e10 * fn:
        raise NearSingularError(f"alpha={a} is within 1e-10 of the discrete spectrum")
    return u


def lp_norm(f: np.ndarray, p: float, grid: RadialGrid, half_density: bool = False) -> float:
    """Volume-weighted L^p norm ``(sum w_i |f_i|^p)^(1/p)``.

    With ``half_density=True`` the samples are ``u = sinh^((n-1)/2) f`` and the
    norm of the underlying ``f`` is returned.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    a = np.abs(np.asarray(f))
    if half_density:
        w = grid.omega * grid.h * np.sinh(grid.nodes) ** (-(grid.n - 1) * (p - 2) / 2.0)
    else:
        w = grid.weights
    if np.isinf(p):
        return float(a.max())
    return float(np.sum(w * a**p) ** (1.0 / p))


def read_potential_table(path, grid: RadialGrid, gamma: float = 0.5) -> PotentialSpec:
    """Read ``rho ReV [ImV]`` rows ('#' comments) and interpolate onto the grid.

    A ``.json`` path is read as an eigen report carrying a ``potential``
    block.  Outside the tabulated range the potential is taken to be zero.
    """
    if str(path).endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            block = json.load(fh)["potential"]
        data = np.column_stack([block["rho"], block["re"], block["im"]])
    else:
        data = np.atleast_2d(np.loadtxt(path, comments="#", dtype=float))
    if data.shape[1] not in (2, 3):
        raise ValueError("potential table needs 2 or 3 columns: rho ReV [ImV]")
    order = np.argsort(data[:, 0])
    data = data[order]
    rho = grid.nodes
    re = np.interp(rho, data[:, 0], data[:, 1], left=0.0, right=0.0)
    im = np.interp(rho, data[:, 0], data[:, 2], left=0.0, right=0.0) if data.shape[1] == 3 else 0.0
    return PotentialSpec(grid, re + 1j * im, gamma)
