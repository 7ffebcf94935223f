r"""Mittag-Leffler function on the negative real axis.

:math:`E_{\alpha,\beta}(-x)` for :math:`0 < \alpha \le 1`, :math:`\beta > 0`,
:math:`x \ge 0` is evaluated in three regimes of the scaled argument
:math:`s = x^{1/\alpha}`, which controls both the cancellation in the Taylor
series (its largest term grows like :math:`e^s`) and the accuracy of the
algebraic asymptotic expansion (its optimal truncation error decays like
:math:`e^{-s}`):

* ``s <= SERIES_DOUBLE_MAX``: Taylor series in double precision;
* ``s <= CONTOUR_MAX``: numerical inversion of the Laplace transform
  :math:`s^{\alpha-\beta} / (s^\alpha + 1)` on a parabolic contour
  (absolute accuracy a few units of 1e-13);
* otherwise: :math:`\sum_{k \ge 1} (-1)^{k+1} x^{-k} / \Gamma(\beta - \alpha k)`,
  truncated at its smallest term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import DomainError
from .kernels import ml_series

SERIES_DOUBLE_MAX = 4.0
CONTOUR_MAX = 40.0

_TOL = 1e-17
_MAX_ASYMPTOTIC_TERMS = 2000
_CONTOUR_NODES = 24


@dataclass(frozen=True)
class MLQuery:
    """Validated arguments of :math:`E_{\\alpha,\\beta}(-x)`."""

    alpha: float
    beta: float
    x: float

    def __post_init__(self) -> None:
        _check_params(self.alpha, self.beta)
        if not self.x >= 0:
            raise DomainError(f"x must be nonnegative, got {self.x}")

    def evaluate(self) -> float:
        return float(ml_neg(self.alpha, self.beta, self.x))


def _check_params(alpha, beta):
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")


def _series_terms(alpha, s):
    # the terms peak near k ~ s / alpha; go well past it
    return int(math.ceil((2.0 * s + 60.0) / alpha)) + 8


def _series_double(alpha, beta, x):
    if x.size == 0:
        return x.copy()
    s = float(np.max(x)) ** (1.0 / alpha)
    return ml_series(alpha, beta, x, _series_terms(alpha, s))


def _contour(alpha, beta, x):
    # inverse Laplace transform of s^(alpha-beta) / (s^alpha + 1) along a
    # parabolic Bromwich contour, trapezoidal rule in the contour parameter
    out = np.zeros_like(x)
    if x.size == 0:
        return out
    t = x ** (1.0 / alpha)
    n = _CONTOUR_NODES
    h = 3.0 / n
    u = np.arange(-n, n + 1) * h
    mu = np.pi * n / (12.0 * t)
    w = 1.0 + 1j * u
    s = mu[:, None] * w[None, :] ** 2
    ds = 2j * mu[:, None] * w[None, :]
    sa = s**alpha
    f = np.exp(s * t[:, None]) * sa / s**beta / (sa + 1.0) * ds
    out[:] = (h / (2j * np.pi) * f.sum(axis=1)).real
    return t ** (1.0 - beta) * out


def _asymptotic(alpha, beta, x):
    out = np.zeros_like(x)
    if x.size == 0:
        return out
    logx = np.log(x)
    active = np.ones(x.shape, dtype=bool)
    prev_env = np.full(x.shape, np.inf)
    for k in range(1, _MAX_ASYMPTOTIC_TERMS):
        arg = beta - alpha * k
        if arg > 0:
            env = np.exp(-k * logx - gammaln(arg))
        else:
            # smooth envelope Gamma(1 - arg) / pi from the reflection formula;
            # optimal truncation is judged on it only past the last positive arg
            with np.errstate(over="ignore"):
                env = np.exp(-k * logx + gammaln(1.0 - arg) - math.log(math.pi))
            active &= ~(env > prev_env)
            if not np.any(active):
                break
        sign = 1.0 if k % 2 == 1 else -1.0
        term = sign * np.exp(-k * logx[active]) * rgamma(arg)
        out[active] += term
        if arg <= 0:
            prev_env = env
            active &= env > _TOL * np.maximum(np.abs(out), 1e-300)
            if not np.any(active):
                break
    return out


def ml_neg(alpha: float, beta: float, x):
    r"""Evaluate :math:`E_{\alpha,\beta}(-x)` for ``x >= 0`` (scalar or array)."""
    _check_params(alpha, beta)
    xa = np.asarray(x, dtype=np.float64)
    if np.any(~(xa >= 0)):
        raise DomainError("x must be nonnegative")
    if alpha == 1.0 and beta == 1.0:
        out = np.exp(-xa)
        return float(out) if out.ndim == 0 else out
    flat = xa.ravel()
    out = np.empty_like(flat)
    s = flat ** (1.0 / alpha)

    small = s <= SERIES_DOUBLE_MAX
    middle = (~small) & (s <= CONTOUR_MAX)
    large = s > CONTOUR_MAX

    out[small] = _series_double(alpha, beta, flat[small])
    out[middle] = _contour(alpha, beta, flat[middle])
    out[large] = _asymptotic(alpha, beta, flat[large])

    out = out.reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


def mode_solution(alpha: float, lam: float, t):
    r"""Temporal factor :math:`E_{\alpha,1}(-\lambda t^\alpha)` of a Dirichlet eigenmode."""
    if not lam > 0:
        raise DomainError(f"eigenvalue must be positive, got {lam}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")
    return ml_neg(alpha, 1.0, lam * t**alpha)


def mode_derivative(alpha: float, lam: float, t):
    r"""Time derivative :math:`-\lambda t^{\alpha-1} E_{\alpha,\alpha}(-\lambda t^\alpha)` for ``t > 0``."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise DomainError("mode derivative needs t > 0")
    return -lam * t ** (alpha - 1.0) * ml_neg(alpha, alpha, lam * t**alpha)


def mode_frac_derivative(alpha: float, lam: float, gamma: float, t):
    r"""Riemann-Liouville derivative :math:`t^{-\gamma} E_{\alpha,1-\gamma}(-\lambda t^\alpha)`.

    Valid for ``0 < gamma < 1`` and ``t > 0``.
    """
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise DomainError("fractional derivative needs t > 0")
    return t ** (-gamma) * ml_neg(alpha, 1.0 - gamma, lam * t**alpha)


__all__ = [
    "MLQuery",
    "mode_derivative",
    "mode_frac_derivative",
    "mode_solution",
    "ml_neg",
]
