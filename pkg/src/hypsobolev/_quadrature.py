"""Fixed panel rules: Gauss-Kronrod 7/15 and Gauss-Jacobi for an algebraic endpoint."""
from __future__ import annotations

import functools

import numpy as np
from scipy.special import roots_jacobi

# Kronrod 15-point abscissae/weights on [-1, 1] and the embedded 7-point Gauss weights
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

KRONROD_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
_gauss_full = np.zeros(15)
_gauss_full[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])
GAUSS_WEIGHTS = _gauss_full


def gk15_nodes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronrod nodes for each panel [a_k, b_k], shape (panels, 15)."""
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    return 0.5 * (a + b) + 0.5 * (b - a) * KRONROD_NODES


def gk15_reduce(values: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Panel integrals and error estimates from integrand values at :func:`gk15_nodes`."""
    half = 0.5 * (np.asarray(b, dtype=float) - np.asarray(a, dtype=float))
    k = half * (values @ KRONROD_WEIGHTS)
    g = half * (values @ GAUSS_WEIGHTS)
    return k, np.abs(k - g)


@functools.lru_cache(maxsize=64)
def _jacobi(m: int, a: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_jacobi(m, 0.0, a)
    return x, w


def gauss_jacobi_origin(m: int, a: float, r0: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with int_0^r0 rho^a g(rho) drho ~ sum w g(x).

    ``a > -1``; the weight ``rho^a`` is absorbed exactly.
    """
    if not a > -1:
        raise ValueError("Gauss-Jacobi origin rule needs a > -1")
    x, w = _jacobi(m, round(float(a), 15))
    rho = 0.5 * r0 * (x + 1.0)
    return rho, w * (0.5 * r0) ** (a + 1.0)
