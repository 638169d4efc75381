"""Modified Bessel function K_nu and the Laplace-transform identity behind it.

``bessel_k`` is a two-regime evaluator (Temme series for ``|h| <= 2``,
Steed/Temme continued fraction above) followed by upward recurrence in the
order.  ``laplace_transform_oracle`` evaluates

    int_0^inf t^(nu-1) exp(-xi/t - zeta t) dt  =  2 (xi/zeta)^(nu/2) K_nu(2 sqrt(xi zeta))

by direct adaptive quadrature, which makes it an independent check on
``bessel_k``.
"""
from __future__ import annotations

import cmath
import math

import numpy as np
from scipy import integrate
from scipy.special import rgamma

__all__ = [
    "BesselDomainError",
    "BesselUnderflowError",
    "QuadratureConvergenceError",
    "bessel_k",
    "bessel_k_scaled",
    "bessel_k_half_integer",
    "laplace_transform_oracle",
    "small_argument_constant",
]

EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-16
_MAXIT = 10000
_CROSSOVER = 2.0

# Taylor coefficients of 1/Gamma(1+x) at odd powers x, x^3, x^5, x^7.
_RGAMMA_ODD = (EULER_GAMMA, -0.0420026350340952355, -0.0421977345555443367, 0.00721894324666309954)
# ... and at even powers 1, x^2, x^4, x^6.
_RGAMMA_EVEN = (1.0, -0.6558780715202538811, 0.1665386113822914895, -0.0096219715278769736)


class BesselDomainError(ValueError):
    """Raised for ``Re h <= 0`` or a negative / non-finite order."""


class BesselUnderflowError(ArithmeticError):
    """Raised when ``exp(-h)`` underflows so K_nu(h) cannot be represented."""


class QuadratureConvergenceError(ArithmeticError):
    """Adaptive quadrature missed its relative error target."""


def _check_args(nu: float, h: complex) -> tuple[float, complex]:
    nu = float(nu)
    h = complex(h)
    if not math.isfinite(nu) or nu < 0:
        raise BesselDomainError(f"order must be finite and >= 0, got {nu!r}")
    if not (h.real > 0) or not cmath.isfinite(h):
        raise BesselDomainError(f"argument must have Re h > 0, got {h!r}")
    return nu, h


def _gam12(mu: float) -> tuple[float, float, float, float]:
    """Return (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2."""
    if abs(mu) < 1e-2:
        m2 = mu * mu
        odd = _RGAMMA_ODD[0] + m2 * (_RGAMMA_ODD[1] + m2 * (_RGAMMA_ODD[2] + m2 * _RGAMMA_ODD[3]))
        even = _RGAMMA_EVEN[0] + m2 * (_RGAMMA_EVEN[1] + m2 * (_RGAMMA_EVEN[2] + m2 * _RGAMMA_EVEN[3]))
        gampl = even + mu * odd
        gammi = even - mu * odd
        return -odd, even, gampl, gammi
    gampl = float(rgamma(1.0 + mu))
    gammi = float(rgamma(1.0 - mu))
    return (gammi - gampl) / (2.0 * mu), 0.5 * (gammi + gampl), gampl, gammi


def _temme_series(mu: float, z: complex) -> tuple[complex, complex]:
    """K_mu(z), K_{mu+1}(z) by Temme's series; accurate for |z| <= 2."""
    x2 = 0.5 * z
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -cmath.log(x2)
    e = mu * d
    fact2 = 1.0 + e * e / 6.0 if abs(e) < 1e-4 else cmath.sinh(e) / e
    gam1, gam2, gampl, gammi = _gam12(mu)
    ff = fact * (gam1 * cmath.cosh(e) + gam2 * fact2 * d)
    total = ff
    ee = cmath.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = 1.0 + 0j
    dd = x2 * x2
    total1 = p
    mu2 = mu * mu
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu2)
        c *= dd / i
        p /= i - mu
        q /= i + mu
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if abs(delta) < abs(total) * _EPS:
            break
    else:  # pragma: no cover - |z| <= 2 converges in < 40 terms
        raise ArithmeticError("Temme series failed to converge")
    return total, total1 * 2.0 / z


def _steed_cf(mu: float, z: complex) -> tuple[complex, complex]:
    """exp(z) K_mu(z), exp(z) K_{mu+1}(z) by Steed's continued fraction."""
    mu2 = mu * mu
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = delh = d
    q1 = 0.0 + 0j
    q2 = 1.0 + 0j
    a1 = 0.25 - mu2
    q = c = a1 + 0j
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels) < abs(s) * _EPS:
            break
    else:  # pragma: no cover
        raise ArithmeticError("Steed continued fraction failed to converge")
    h = a1 * h
    kmu = cmath.sqrt(math.pi / (2.0 * z)) / s
    k1 = kmu * (mu + z + 0.5 - h) / z
    return kmu, k1


def _bessel_k_pair(nu: float, h: complex) -> tuple[complex, bool]:
    """Return (value, scaled); scaled=True means value is exp(h) K_nu(h)."""
    n = int(math.floor(nu + 0.5))
    mu = nu - n
    if abs(h) <= _CROSSOVER:
        kmu, kmu1 = _temme_series(mu, h)
        scaled = False
    else:
        kmu, kmu1 = _steed_cf(mu, h)
        scaled = True
    # upward recurrence K_{m+1} = (2m/h) K_m + K_{m-1} is stable for K
    for k in range(1, n):
        kmu, kmu1 = kmu1, (2.0 * (mu + k) / h) * kmu1 + kmu
    return (kmu if n == 0 else kmu1), scaled


def bessel_k_scaled(nu: float, h: complex) -> complex:
    """exp(h) * K_nu(h), free of the exponential under/overflow."""
    nu, h = _check_args(nu, h)
    val, scaled = _bessel_k_pair(nu, h)
    return val if scaled else val * cmath.exp(h)


def bessel_k(nu: float, h: complex) -> complex:
    """Modified Bessel function of the second kind K_nu(h).

    Parameters
    ----------
    nu : float
        Order, ``nu >= 0``.
    h : complex
        Argument with ``Re h > 0``.

    Raises
    ------
    BesselDomainError
        If ``Re h <= 0`` or ``nu`` is negative.
    BesselUnderflowError
        If the exponential factor underflows (roughly ``Re h > 745``).
    """
    nu, h = _check_args(nu, h)
    val, scaled = _bessel_k_pair(nu, h)
    if not scaled:
        return val
    decay = cmath.exp(-h)
    if decay == 0 or (val != 0 and val * decay == 0):
        raise BesselUnderflowError(f"K_{nu}({h}) underflows double precision")
    return val * decay


def bessel_k_half_integer(nu: float, h: complex) -> complex:
    """Finite closed form for nu = m + 1/2.

    K_{m+1/2}(h) = sqrt(pi/(2h)) e^{-h} sum_k (m+k)! / (k! (m-k)! (2h)^k)
    """
    m = nu - 0.5
    if m < 0 or abs(m - round(m)) > 1e-12:
        raise BesselDomainError(f"order {nu!r} is not a nonnegative half-integer")
    m = int(round(m))
    h = complex(h)
    total = 0j
    for k in range(m + 1):
        total += math.factorial(m + k) / (math.factorial(k) * math.factorial(m - k)) / (2.0 * h) ** k
    return cmath.sqrt(math.pi / (2.0 * h)) * cmath.exp(-h) * total


def small_argument_constant(nu: float) -> float:
    """Leading coefficient Gamma(nu) 2^(nu-1) of K_nu(h) ~ C h^-nu as h -> 0."""
    if nu <= 0:
        raise BesselDomainError("small-argument constant needs nu > 0")
    return math.gamma(nu) * 2.0 ** (nu - 1.0)


def laplace_transform_oracle(nu: float, xi: complex, zeta: complex, rtol: float = 1e-10) -> complex:
    """Evaluate int_0^inf t^(nu-1) exp(-xi/t - zeta*t) dt by adaptive quadrature.

    The substitution t = e^u maps both endpoints to +-inf where the integrand
    is doubly-exponentially small; the integration window is bracketed around
    the peak of the modulus and handed to QUADPACK on the real and imaginary
    parts separately.
    """
    xi = complex(xi)
    zeta = complex(zeta)
    if xi.real <= 0 or zeta.real <= 0:
        raise BesselDomainError("need Re xi > 0 and Re zeta > 0")
    a, b = xi.real, zeta.real

    def log_mod(u: float) -> float:
        return nu * u - a * math.exp(-u) - b * math.exp(u)

    # modulus peaks where nu + a e^-u - b e^u = 0
    u_peak = math.log((nu + math.sqrt(nu * nu + 4.0 * a * b)) / (2.0 * b))
    top = log_mod(u_peak)
    cut = top - 50.0
    lo = u_peak - 1.0
    while log_mod(lo) > cut:
        lo -= 1.0
    hi = u_peak + 1.0
    while log_mod(hi) > cut:
        hi += 1.0

    def integrand(u: float) -> complex:
        return cmath.exp(nu * u - xi * math.exp(-u) - zeta * math.exp(u) - top)

    # oscillation from Im xi, Im zeta needs panel breaks
    width = max(abs(xi.imag) * math.exp(-lo), abs(zeta.imag) * math.exp(hi), 1.0)
    npanel = int(min(max(8, width), 2000))
    edges = np.linspace(lo, hi, npanel + 1)
    total = 0j
    err = 0.0
    for u0, u1 in zip(edges[:-1], edges[1:]):
        re, ere = integrate.quad(lambda u: integrand(u).real, u0, u1, epsabs=1e-15, epsrel=1e-12, limit=200)
        im, eim = integrate.quad(lambda u: integrand(u).imag, u0, u1, epsabs=1e-15, epsrel=1e-12, limit=200)
        total += complex(re, im)
        err += ere + eim
    scale = math.exp(top)
    if not abs(total) > 0 or err > rtol * abs(total):
        raise QuadratureConvergenceError(
            f"Laplace integral missed rtol={rtol:g}: |value|={abs(total) * scale:.3e}, err={err * scale:.3e}"
        )
    return total * scale
