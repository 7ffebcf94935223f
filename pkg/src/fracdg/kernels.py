"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names dispatch on :data:`fracdg._accel.USE_NUMBA`; the ``*_numpy``
and ``*_numba`` variants stay importable so the benchmark and the tests can
compare both paths directly.
"""

import math

import numpy as np
from scipy.special import gammaln

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

# {{{ truncated powers


def power_plus_numpy(x, p):
    """Evaluate ``x_+^p`` elementwise, returning 0 where ``x <= 0``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(p * np.log(x[pos]))
    return out


@njit(cache=True)
def _pp(x, p):
    if x <= 0.0:
        return 0.0
    return math.exp(p * math.log(x))


# }}}

# {{{ step-function kernel matrix


def step_kernel_numpy(nodes, ts, exponent, right=False):
    nodes = np.asarray(nodes, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    if right:
        a = nodes[None, 1:] - ts[:, None]
        b = nodes[None, :-1] - ts[:, None]
    else:
        a = ts[:, None] - nodes[None, :-1]
        b = ts[:, None] - nodes[None, 1:]
    return power_plus_numpy(a, exponent) - power_plus_numpy(b, exponent)


@njit(cache=True)
def _step_kernel_loop(nodes, ts, exponent, right):
    npts = ts.shape[0]
    nslab = nodes.shape[0] - 1
    out = np.empty((npts, nslab))
    for p in range(npts):
        t = ts[p]
        for i in range(nslab):
            if right:
                a = nodes[i + 1] - t
                b = nodes[i] - t
            else:
                a = t - nodes[i]
                b = t - nodes[i + 1]
            out[p, i] = _pp(a, exponent) - _pp(b, exponent)
    return out


def step_kernel_numba(nodes, ts, exponent, right=False):
    return _step_kernel_loop(
        np.ascontiguousarray(nodes, dtype=np.float64),
        np.ascontiguousarray(ts, dtype=np.float64),
        float(exponent), bool(right))


def step_kernel(nodes, ts, exponent, right=False):
    r"""Matrix ``K[p, i]`` of truncated-power differences for slab indicators.

    For the left side, ``K[p, i] = (t_p - t_i)_+^e - (t_p - t_{i+1})_+^e``;
    for the right side the roles of ``t_p`` and the slab end points are
    swapped.  Dividing by :math:`\Gamma(e + 1)` gives the Riemann-Liouville
    integral (``e > 0``) or derivative (``e < 0``) of the slab indicator
    :math:`\chi_{(t_i, t_{i+1})}` evaluated at ``t_p``.
    """
    if USE_NUMBA:
        return step_kernel_numba(nodes, ts, exponent, right)
    return step_kernel_numpy(nodes, ts, exponent, right)


# }}}

# {{{ simplex element matrices


def simplex_matrices_numpy(coords, elements):
    """Local P1 mass and stiffness matrices and element measures.

    Returns ``(mass, stiffness, measure)`` with shapes ``(E, d+1, d+1)``,
    ``(E, d+1, d+1)`` and ``(E,)``.  The measure is signed (negative for
    clockwise triangles).
    """
    coords = np.asarray(coords, dtype=np.float64)
    elements = np.asarray(elements, dtype=np.int64)
    d = coords.shape[1]
    v = coords[elements]                                  # (E, d+1, d)
    jac = np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))  # (E, d, d)
    det = np.linalg.det(jac)
    fact = math.factorial(d)
    measure = det / fact

    grads = np.zeros_like(v)
    ok = det != 0
    inv = np.zeros_like(jac)
    inv[ok] = np.linalg.inv(jac[ok])
    grads[:, 1:, :] = inv
    grads[:, 0, :] = -inv.sum(axis=1)

    vol = np.abs(measure)
    stiff = vol[:, None, None] * np.einsum("eik,ejk->eij", grads, grads)
    base = np.ones((d + 1, d + 1)) + np.eye(d + 1)
    mass = vol[:, None, None] * base / ((d + 1) * (d + 2))
    return mass, stiff, measure


@njit(cache=True)
def _simplex_loop(coords, elements):
    ne = elements.shape[0]
    nv = elements.shape[1]
    d = coords.shape[1]
    mass = np.empty((ne, nv, nv))
    stiff = np.empty((ne, nv, nv))
    measure = np.empty(ne)
    fact = 1.0
    for k in range(2, d + 1):
        fact *= k
    grads = np.zeros((nv, d))
    for e in range(ne):
        if d == 1:
            x0 = coords[elements[e, 0], 0]
            x1 = coords[elements[e, 1], 0]
            det = x1 - x0
            if det != 0.0:
                grads[1, 0] = 1.0 / det
                grads[0, 0] = -1.0 / det
        else:
            ax = coords[elements[e, 1], 0] - coords[elements[e, 0], 0]
            ay = coords[elements[e, 1], 1] - coords[elements[e, 0], 1]
            bx = coords[elements[e, 2], 0] - coords[elements[e, 0], 0]
            by = coords[elements[e, 2], 1] - coords[elements[e, 0], 1]
            det = ax * by - bx * ay
            if det != 0.0:
                # rows of the inverse Jacobian are the barycentric gradients
                grads[1, 0] = by / det
                grads[1, 1] = -bx / det
                grads[2, 0] = -ay / det
                grads[2, 1] = ax / det
                grads[0, 0] = -grads[1, 0] - grads[2, 0]
                grads[0, 1] = -grads[1, 1] - grads[2, 1]
        measure[e] = det / fact
        vol = abs(det) / fact
        for i in range(nv):
            for j in range(nv):
                s = 0.0
                if det != 0.0:
                    for k in range(d):
                        s += grads[i, k] * grads[j, k]
                stiff[e, i, j] = vol * s
                mass[e, i, j] = vol * (2.0 if i == j else 1.0) / (nv * (nv + 1))
    return mass, stiff, measure


def simplex_matrices_numba(coords, elements):
    return _simplex_loop(np.ascontiguousarray(coords, dtype=np.float64),
                         np.ascontiguousarray(elements, dtype=np.int64))


def simplex_matrices(coords, elements):
    coords = np.asarray(coords)
    if USE_NUMBA and coords.shape[1] in (1, 2):
        return simplex_matrices_numba(coords, elements)
    return simplex_matrices_numpy(coords, elements)


# }}}

# {{{ Mittag-Leffler Taylor series in double precision


def ml_series_numpy(alpha, beta, x, nterms):
    """Sum ``sum_k (-x)^k / Gamma(alpha k + beta)`` for ``k < nterms``."""
    x = np.asarray(x, dtype=np.float64)
    k = np.arange(nterms, dtype=np.float64)
    lg = gammaln(alpha * k + beta)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logx = np.log(x)
        logterm = k[None, :] * logx[:, None] - lg[None, :]
        terms = sign[None, :] * np.exp(logterm)
    # 0**0 == 1 for the constant term
    terms[:, 0] = np.exp(-lg[0])
    return terms.sum(axis=1)


@njit(cache=True)
def _ml_series_loop(x, lg):
    out = np.empty(x.shape[0])
    nterms = lg.shape[0]
    for p in range(x.shape[0]):
        xp = x[p]
        s = math.exp(-lg[0])
        if xp > 0.0:
            logx = math.log(xp)
            for k in range(1, nterms):
                term = math.exp(k * logx - lg[k])
                if k % 2 == 1:
                    s -= term
                else:
                    s += term
        out[p] = s
    return out


def ml_series_numba(alpha, beta, x, nterms):
    x = np.ascontiguousarray(x, dtype=np.float64)
    lg = gammaln(alpha * np.arange(nterms, dtype=np.float64) + beta)
    return _ml_series_loop(x, lg)


def ml_series(alpha, beta, x, nterms):
    if USE_NUMBA:
        return ml_series_numba(alpha, beta, x, nterms)
    return ml_series_numpy(alpha, beta, x, nterms)


# }}}

__all__ = [
    "HAVE_NUMBA",
    "USE_NUMBA",
    "ml_series",
    "power_plus_numpy",
    "simplex_matrices",
    "step_kernel",
]
