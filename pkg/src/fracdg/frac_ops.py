r"""Riemann-Liouville fractional calculus on piecewise-constant functions.

Step functions on a partition :math:`0 = t_0 < \dots < t_J = T` admit closed
forms for the fractional integral and derivative of every order, since the
operators are linear and the indicator of a slab is mapped to a difference
of truncated powers.  This module provides those closed forms, the
convolution weights of the DG time-stepping scheme, a Gauss-Jacobi oracle
for the fractional integral of generic functions, and an estimator of the
:math:`H^\gamma` seminorm of the zero extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import roots_jacobi, zeta

from .errors import DomainError, SingularityError
from .kernels import step_kernel

# {{{ grids and step functions


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """A partition ``0 = t_0 < t_1 < ... < t_J = T`` of ``[0, T]``."""

    nodes: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=np.float64).ravel()
        if nodes.size < 2:
            raise DomainError("a time grid needs at least one slab")
        if nodes[0] != 0.0:
            raise DomainError(f"time grid must start at 0, got {nodes[0]}")
        if not np.all(np.diff(nodes) > 0):
            raise DomainError("time grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, T: float, J: int) -> "TimeGrid":
        if J < 1 or T <= 0:
            raise DomainError(f"need J >= 1 and T > 0, got J={J}, T={T}")
        nodes = T * np.arange(J + 1, dtype=np.float64) / J
        nodes[-1] = T
        return cls(nodes)

    @property
    def J(self) -> int:
        return self.nodes.size - 1

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def tau(self) -> np.ndarray:
        """Slab lengths ``tau_j = t_j - t_{j-1}``."""
        return np.diff(self.nodes)

    @property
    def tau_max(self) -> float:
        return float(self.tau.max())

    @property
    def is_uniform(self) -> bool:
        tau = self.tau
        return bool(np.all(np.abs(tau - tau[0]) <= 1e-12 * tau[0]))

    def slab(self, j: int) -> tuple[float, float]:
        """End points of the slab ``I_j``, with ``1 <= j <= J``."""
        if not 1 <= j <= self.J:
            raise DomainError(f"slab index {j} outside 1..{self.J}")
        return float(self.nodes[j - 1]), float(self.nodes[j])

    def locate(self, t) -> np.ndarray:
        """0-based slab index of ``t``, using the convention ``t in (t_{j-1}, t_j]``.

        ``t = 0`` is assigned to the first slab.
        """
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.nodes, t, side="left") - 1
        return np.clip(idx, 0, self.J - 1)

    def is_refinement_of(self, coarse: "TimeGrid") -> bool:
        """True if every node of ``coarse`` is (to rounding) a node of ``self``."""
        if abs(self.T - coarse.T) > 1e-12 * self.T:
            return False
        pos = np.searchsorted(self.nodes, coarse.nodes)
        pos = np.clip(pos, 0, self.J)
        lo = np.clip(pos - 1, 0, self.J)
        dist = np.minimum(np.abs(self.nodes[pos] - coarse.nodes),
                          np.abs(self.nodes[lo] - coarse.nodes))
        return bool(np.all(dist <= 1e-12 * self.T))

    def __eq__(self, other) -> bool:
        return (isinstance(other, TimeGrid)
                and self.nodes.shape == other.nodes.shape
                and bool(np.all(self.nodes == other.nodes)))

    def __hash__(self) -> int:
        return hash(self.nodes.tobytes())

    def __repr__(self) -> str:
        return f"TimeGrid(J={self.J}, T={self.T:g})"


@dataclass(frozen=True)
class ScalarStepFunction:
    """A real function that is constant on every slab of ``grid``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size != self.grid.J:
            raise DomainError(
                f"expected {self.grid.J} slab values, got {values.size}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.where((t < 0) | (t > self.grid.T), 0.0,
                       self.values[self.grid.locate(t)])
        return out if out.ndim else float(out)

    def __mul__(self, c: float) -> "ScalarStepFunction":
        return ScalarStepFunction(self.grid, c * self.values)

    __rmul__ = __mul__


# }}}

# {{{ closed forms


def _check_times(t, T):
    t = np.asarray(t, dtype=np.float64)
    tol = 1e-14 * max(T, 1.0)
    if np.any(t < -tol) or np.any(t > T + tol):
        raise DomainError(f"evaluation time outside [0, {T}]")
    return np.clip(t, 0.0, T)


def _check_side(side):
    if side not in ("left", "right"):
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    return side == "right"


def rl_integral_matrix(gamma: float, grid: TimeGrid, t, side="left") -> np.ndarray:
    """Matrix mapping slab values to ``I^gamma v`` at the times ``t``."""
    if not gamma > 0:
        raise DomainError(f"fractional integral needs gamma > 0, got {gamma}")
    right = _check_side(side)
    t = _check_times(np.atleast_1d(t), grid.T)
    return step_kernel(grid.nodes, t, gamma, right) / gamma_fn(gamma + 1.0)


def rl_integral_step(gamma: float, v: ScalarStepFunction, t, side="left"):
    r"""Riemann-Liouville integral of a step function.

    For the left-sided operator (the default)

    .. math::

        (I_{0+}^\gamma v)(t) = \frac{1}{\Gamma(\gamma + 1)} \sum_j v_j
            \left[(t - t_{j-1})_+^\gamma - (t - t_j)_+^\gamma\right],

    and ``side="right"`` gives :math:`I_{T-}^\gamma` by reflection.
    """
    scalar = np.ndim(t) == 0
    out = rl_integral_matrix(gamma, v.grid, t, side) @ v.values
    return float(out[0]) if scalar else out


def rl_derivative_matrix(gamma: float, grid: TimeGrid, t, side="left") -> np.ndarray:
    """Matrix mapping slab values to ``D^gamma v`` at the times ``t``."""
    if not 0 < gamma < 1:
        raise DomainError(f"fractional derivative needs 0 < gamma < 1, got {gamma}")
    right = _check_side(side)
    t = _check_times(np.atleast_1d(t), grid.T)
    gap = np.min(np.abs(t[:, None] - grid.nodes[None, :]), axis=1)
    if np.any(gap <= 1e-15 * grid.T):
        raise SingularityError("fractional derivative of a step function is "
                               "singular at grid nodes")
    return step_kernel(grid.nodes, t, -gamma, right) / gamma_fn(1.0 - gamma)


def rl_derivative_step(gamma: float, v: ScalarStepFunction, t, side="left"):
    r"""Riemann-Liouville derivative :math:`D^\gamma = D I^{1-\gamma}` of a step function.

    Away from the grid nodes

    .. math::

        (D_{0+}^\gamma v)(t) = \frac{1}{\Gamma(1 - \gamma)} \sum_j v_j
            \left[(t - t_{j-1})_+^{-\gamma} - (t - t_j)_+^{-\gamma}\right].
    """
    scalar = np.ndim(t) == 0
    out = rl_derivative_matrix(gamma, v.grid, t, side) @ v.values
    return float(out[0]) if scalar else out


# }}}

# {{{ convolution weights


def _uniform_second_difference(alpha: float, J: int) -> np.ndarray:
    # (d+1)^a - 2 d^a + (d-1)^a, written to avoid cancellation for large d
    c = np.empty(J)
    c[0] = 1.0
    if J > 1:
        d = np.arange(1, J, dtype=np.float64)
        x = 1.0 / d
        with np.errstate(divide="ignore"):
            lo = np.expm1(alpha * np.log1p(-x))
        c[1:] = d**alpha * (np.expm1(alpha * np.log1p(x)) + lo)
    return c


@dataclass(frozen=True)
class WeightTable:
    r"""Convolution weights :math:`\omega_{j,i} = \int_{I_j} D_{0+}^{1-\alpha}\chi_{I_i}`.

    On uniform grids only the Toeplitz symbol ``toeplitz[j - i]`` is stored;
    otherwise ``matrix[j-1, i-1]`` holds the dense lower triangle.
    """

    alpha: float
    grid: TimeGrid
    toeplitz: np.ndarray | None = field(default=None, repr=False)
    matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_toeplitz(self) -> bool:
        return self.toeplitz is not None

    def __getitem__(self, key) -> float:
        j, i = key
        J = self.grid.J
        if not (1 <= i <= J and 1 <= j <= J):
            raise DomainError(f"weight index ({j}, {i}) outside 1..{J}")
        if i > j:
            return 0.0
        if self.toeplitz is not None:
            return float(self.toeplitz[j - i])
        return float(self.matrix[j - 1, i - 1])

    def diagonal(self, j: int) -> float:
        return self[j, j]

    def row(self, j: int) -> np.ndarray:
        """Weights ``omega_{j,1..j}``."""
        if self.toeplitz is not None:
            return self.toeplitz[:j][::-1].copy()
        return self.matrix[j - 1, :j].copy()

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix.copy()
        J = self.grid.J
        d = np.arange(J)[:, None] - np.arange(J)[None, :]
        return np.where(d >= 0, self.toeplitz[np.clip(d, 0, None)], 0.0)


def convolution_weights(alpha: float, grid: TimeGrid) -> WeightTable:
    r"""Weights of the fractional history term of the DG scheme.

    .. math::

        \omega_{j,i} = \frac{(t_j - t_{i-1})^\alpha - (t_j - t_i)_+^\alpha
            - (t_{j-1} - t_{i-1})_+^\alpha + (t_{j-1} - t_i)_+^\alpha}
            {\Gamma(\alpha + 1)}.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    g = gamma_fn(alpha + 1.0)
    if grid.is_uniform:
        tau = grid.T / grid.J
        symbol = tau**alpha * _uniform_second_difference(alpha, grid.J) / g
        symbol.setflags(write=False)
        return WeightTable(alpha, grid, toeplitz=symbol)

    kernel = step_kernel(grid.nodes, grid.nodes, alpha, False)
    matrix = np.diff(kernel, axis=0) / g
    matrix = np.tril(matrix)
    matrix.setflags(write=False)
    return WeightTable(alpha, grid, matrix=matrix)


# }}}

# {{{ Gauss-Jacobi quadrature


@lru_cache(maxsize=128)
def _jacobi_rule(n: int, a: float, b: float):
    x, w = roots_jacobi(n, a, b)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_jacobi(n: int, lo: float, hi: float,
                 right_exponent: float = 0.0, left_exponent: float = 0.0):
    r"""Nodes and weights for :math:`\int_{lo}^{hi} (hi - s)^p (s - lo)^q g(s)\,ds`.

    ``p = right_exponent`` and ``q = left_exponent`` are folded into the rule,
    so ``sum(w * g(s))`` is exact for polynomial ``g`` of degree ``2n - 1``.
    """
    if n < 1:
        raise DomainError("quadrature needs at least one point")
    if right_exponent <= -1 or left_exponent <= -1:
        raise DomainError("endpoint exponents must exceed -1")
    x, w = _jacobi_rule(int(n), float(right_exponent), float(left_exponent))
    half = 0.5 * (hi - lo)
    s = lo + half * (1.0 + x)
    return s, w * half ** (1.0 + right_exponent + left_exponent)


def _call_vectorized(f, s):
    val = np.asarray(f(s), dtype=np.float64)
    if val.shape != s.shape:
        val = np.array([f(float(si)) for si in s], dtype=np.float64)
    return val


def frac_integral_quadrature(gamma: float, f, t: float, refinement: int = 1,
                             points: int = 16, left_exponent: float = 0.0) -> float:
    r"""Composite Gauss-Jacobi approximation of :math:`(I_{0+}^\gamma f)(t)`.

    ``[0, t]`` is split into ``refinement`` equal panels.  The kernel factor
    :math:`(t - s)^{\gamma - 1}` is folded into the rule of the last panel; if
    ``left_exponent`` is nonzero, ``f`` is taken to behave like
    :math:`s^q g(s)` with smooth ``g`` and the factor :math:`s^q` is folded into
    the rule of the first panel.
    """
    if not gamma > 0:
        raise DomainError(f"fractional integral needs gamma > 0, got {gamma}")
    if refinement < 1:
        raise DomainError("refinement must be a positive panel count")
    if t < 0:
        raise DomainError("evaluation time must be nonnegative")
    if t == 0:
        return 0.0

    edges = np.linspace(0.0, t, refinement + 1)
    total = 0.0
    for p in range(refinement):
        lo, hi = edges[p], edges[p + 1]
        last = p == refinement - 1
        first = p == 0
        rexp = gamma - 1.0 if last else 0.0
        lexp = left_exponent if first else 0.0
        s, w = gauss_jacobi(points, lo, hi, rexp, lexp)
        g = _call_vectorized(f, s)
        if lexp != 0.0:
            g = g / s**lexp
        if not last:
            g = g * (t - s) ** (gamma - 1.0)
        total += float(w @ g)
    return total / gamma_fn(gamma)


# }}}

# {{{ H^gamma seminorm


def hgamma_seminorm(gamma: float, v: ScalarStepFunction, oversample: int = 16) -> float:
    r"""Estimate :math:`|v|_{H^\gamma(0,T)}` of the zero extension of ``v``.

    ``v`` is sampled at the centres of ``oversample * J`` uniform cells and
    extended by zero to an interval eight times longer; the discrete Fourier
    sum of the samples is weighted with the exact transform of a cell
    indicator.  For ``gamma < 1/2`` the aliased spectrum is summed in closed
    form (Hurwitz zeta), which makes the estimate exact up to the periodic
    wrap-around for data that are constant on the sampling cells.  For
    ``gamma >= 1/2`` piecewise constants have infinite seminorm and only the
    principal band is summed, so the value grows with ``oversample``.
    """
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    if oversample < 4:
        raise DomainError("oversample must be at least 4")

    grid = v.grid
    T = grid.T
    M = oversample * grid.J
    dx = T / M
    centers = (np.arange(M) + 0.5) * dx
    samples = v(centers)
    if not np.any(samples):
        return 0.0

    L = 8 * M
    S2 = np.abs(np.fft.fft(samples, n=L)) ** 2
    k = np.arange(L)
    P = 2.0 * np.pi / dx
    xi = 2.0 * np.pi * k / (8.0 * T)
    s = 2.0 - 2.0 * gamma

    W = np.zeros(L)
    q = xi[1:] / P
    if gamma < 0.5:
        lattice = P**(-s) * (zeta(s, q) + zeta(s, 1.0 - q))
        W[1:] = (2.0 / np.pi) * np.sin(0.5 * xi[1:] * dx) ** 2 * lattice
    else:
        # principal band only: xi in (-P/2, P/2)
        band = np.where(xi[1:] < 0.5 * P, xi[1:], P - xi[1:])
        W[1:] = ((2.0 / np.pi) * np.sin(0.5 * band * dx) ** 2
                 * band ** (2.0 * gamma - 2.0))

    dxi = 2.0 * np.pi / (8.0 * T)
    return math.sqrt(max(dxi * float(S2 @ W), 0.0))


# }}}

__all__ = [
    "ScalarStepFunction",
    "TimeGrid",
    "WeightTable",
    "convolution_weights",
    "frac_integral_quadrature",
    "gauss_jacobi",
    "hgamma_seminorm",
    "rl_derivative_matrix",
    "rl_derivative_step",
    "rl_integral_matrix",
    "rl_integral_step",
]
