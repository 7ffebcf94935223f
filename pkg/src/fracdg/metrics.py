r"""Error norms against reference solutions and observed convergence orders.

``E1`` is the :math:`L^2(0,T;L^2(\Omega))` norm of the error and ``E2`` the
:math:`L^2(0,T;\dot H^1(\Omega))` norm of its Riemann-Liouville derivative of
order :math:`(1-\alpha)/2`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma as gamma_fn

from .dg import DGSolution
from .errors import DomainError
from .fem import prolongation_matrix
from .frac_ops import ScalarStepFunction, TimeGrid, gauss_jacobi
from .reference import FineReference, SpectralReference

_BLOCK_ROWS = 256
_GEOMETRIC_PANELS = 40

# {{{ helpers


def _as_solution(ref):
    if isinstance(ref, FineReference):
        return ref.solution
    return ref


def _owners(coarse: TimeGrid, fine: TimeGrid) -> np.ndarray:
    if not fine.is_refinement_of(coarse):
        raise DomainError("reference grid does not refine the solution grid")
    mid = 0.5 * (fine.nodes[:-1] + fine.nodes[1:])
    return coarse.locate(mid)


def _lifted(U: DGSolution, ref: DGSolution):
    """Coarse slabs interpolated onto the reference space (coarse time grid)."""
    if not math.isclose(U.grid.T, ref.grid.T, rel_tol=1e-12):
        raise DomainError("solution and reference horizons differ")
    P = prolongation_matrix(U.space, ref.space)
    return np.asarray((P @ U.slabs.T).T)


def _quad_form_rows(Mat, E):
    # row-wise e^T Mat e for a block of row vectors
    return np.einsum("jn,jn->j", E, np.asarray((Mat @ E.T).T))


def difference_slabs(U: DGSolution, ref) -> np.ndarray:
    """``ref - U`` on the reference grids, shape ``(J_ref, N_ref)``."""
    R = _as_solution(ref)
    owner = _owners(U.grid, R.grid)
    return R.slabs - _lifted(U, R)[owner]


# }}}

# {{{ E1 and nodal errors


def e1_l2l2(U: DGSolution, ref) -> float:
    r""":math:`\|\tilde u - U\|_{L^2(0,T;L^2(\Omega))}`.

    For a fine-grid reference the coarse solution is prolonged exactly and the
    error Gram form is summed slab by slab.  For a spectral reference each
    slab is integrated with an 8-point Gauss rule in time (on geometrically
    graded panels for the first slab) and Parseval in space.
    """
    if isinstance(ref, SpectralReference):
        return _e1_spectral(U, ref)
    R = _as_solution(ref)
    owner = _owners(U.grid, R.grid)
    lifted = _lifted(U, R)
    tau = R.grid.tau
    total = 0.0
    for start in range(0, R.J, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, R.J)
        E = R.slabs[start:stop] - lifted[owner[start:stop]]
        total += float(tau[start:stop] @ _quad_form_rows(R.space.mass, E))
    return math.sqrt(max(total, 0.0))


def _e1_spectral(U: DGSolution, ref: SpectralReference, points: int = 8) -> float:
    if not math.isclose(U.grid.T, ref.T, rel_tol=1e-12):
        raise DomainError("solution and reference horizons differ")
    B = ref.basis.hat_moments(U.space)            # (K, N)
    BU = B @ U.slabs.T                            # (K, J)
    UMU = _quad_form_rows(U.space.mass, U.slabs)  # (J,)
    total = 0.0
    for j in range(1, U.J + 1):
        lo, hi = U.grid.slab(j)
        if lo == 0.0:
            # modes behave like t^alpha at the origin: geometric panels
            edges = np.concatenate([[0.0], hi * 2.0 ** -np.arange(_GEOMETRIC_PANELS, -1, -1)])
            rules = [gauss_jacobi(points, a, b) for a, b in zip(edges[:-1], edges[1:])]
            s = np.concatenate([r[0] for r in rules])
            w = np.concatenate([r[1] for r in rules])
        else:
            s, w = gauss_jacobi(points, lo, hi)
        m = ref.modal(s)                          # (Q, K)
        err = np.sum(m * m, axis=1) - 2.0 * (m @ BU[:, j - 1]) + UMU[j - 1]
        total += float(w @ err)
    return math.sqrt(max(total, 0.0))


def nodal_error(U: DGSolution, ref) -> float:
    r""":math:`\max_j \|\tilde u(t_j) - U_j^-\|_{L^2(\Omega)}` over the solution's nodes.

    A fine reference is read on the fine slab ending at ``t_j``.
    """
    t = U.grid.nodes[1:]
    if isinstance(ref, SpectralReference):
        B = ref.basis.hat_moments(U.space)
        m = ref.modal(t)                          # (J, K)
        UMU = _quad_form_rows(U.space.mass, U.slabs)
        sq = np.sum(m * m, axis=1) - 2.0 * np.einsum("jk,kj->j", m, B @ U.slabs.T) + UMU
        return math.sqrt(max(float(np.max(sq)), 0.0))
    R = _as_solution(ref)
    _owners(U.grid, R.grid)
    fine_idx = R.grid.locate(t)
    E = R.slabs[fine_idx] - _lifted(U, R)
    return math.sqrt(max(float(np.max(_quad_form_rows(R.space.mass, E))), 0.0))


# }}}

# {{{ E2


def _remainder_uniform(jumps, tau, gamma, xi):
    # R_m(s) = sum_{d>=1} jump_{m-d} (s + d tau)^(-gamma) at s = tau * xi
    J = jumps.shape[0]
    d = np.arange(J, dtype=np.float64)
    kern = ((xi + d) * tau) ** (-gamma)
    kern[0] = 0.0
    return fftconvolve(jumps, kern[:, None], axes=0)[:J]


def _remainder_direct(jumps, nodes, gamma, xi):
    J = jumps.shape[0]
    tau = np.diff(nodes)
    s = nodes[:-1] + tau * xi                     # evaluation time in each slab
    dist = s[:, None] - nodes[None, :-1]          # t - t_{i-1}
    mask = np.arange(J)[None, :] < np.arange(J)[:, None]
    K = np.where(mask, np.where(mask, dist, 1.0) ** (-gamma), 0.0)
    return K @ jumps


def _panel_edges(grid: TimeGrid) -> np.ndarray:
    # The remainder on slab m is analytic up to distance tau_{m-1} to the
    # left, so panels grow geometrically from that scale (in units of tau_m).
    tau = grid.tau
    r = np.ones(grid.J)
    r[1:] = np.minimum(tau[:-1] / tau[1:], 1.0)
    npan = 1 + int(np.ceil(np.log2(1.0 / r.min()))) if r.min() < 1.0 else 1
    k = np.arange(npan + 1)
    edges = np.minimum(r[:, None] * 2.0 ** (k[None, :] - 1), 1.0)
    edges[:, 0] = 0.0
    edges[:, -1] = 1.0
    return edges                                  # (J, npan + 1)


def frac_derivative_energy(slabs, grid: TimeGrid, gamma: float, A,
                           points: int = 12, method: str = "auto") -> float:
    r""":math:`\int_0^T \|D_{0+}^\gamma e(t)\|_A^2\,dt` for a step function ``e``.

    On slab :math:`I_m`, :math:`\Gamma(1-\gamma) D^\gamma e` equals the jump
    :math:`e_m - e_{m-1}` times :math:`(t - t_{m-1})^{-\gamma}` plus a
    remainder that is smooth on the closed slab.  The squared singular part
    is integrated exactly, the cross term with a Gauss-Jacobi rule carrying
    :math:`(t - t_{m-1})^{-\gamma}` and the remainder with Gauss-Legendre.
    The remainder at the rule nodes is a discrete convolution of the jumps,
    evaluated by FFT on uniform grids (``method="fft"``) or as a dense
    product (``method="direct"``); the dense route also refines the rules
    geometrically on slabs that follow a much shorter one.
    """
    if not 0 < gamma < 0.5:
        raise DomainError(f"the A-energy of D^gamma e is finite only for 0 < gamma < 1/2, got {gamma}")
    E = np.asarray(slabs, dtype=np.float64)
    if E.shape[0] != grid.J:
        raise DomainError("one coefficient vector per slab is required")
    if method == "auto":
        method = "fft" if grid.is_uniform else "direct"
    if method not in ("fft", "direct"):
        raise DomainError(f"unknown method {method!r}")
    if method == "fft" and not grid.is_uniform:
        raise DomainError("the FFT route needs a uniform grid")

    jumps = np.diff(E, axis=0, prepend=np.zeros((1, E.shape[1])))
    tau = grid.tau
    AJ = np.asarray((A @ jumps.T).T)
    jAj = np.einsum("jn,jn->j", jumps, AJ)

    if method == "fft":
        edges = np.tile([0.0, 1.0], (grid.J, 1))
        h = grid.T / grid.J

        def remainder(x):
            return _remainder_uniform(jumps, h, gamma, x[0])
    else:
        edges = _panel_edges(grid)

        def remainder(x):
            return _remainder_direct(jumps, grid.nodes, gamma, x)

    xg, wg = gauss_jacobi(points, 0.0, 1.0)
    xs, ws = gauss_jacobi(points, 0.0, 1.0, 0.0, -gamma)

    cross = np.zeros(grid.J)
    smooth = np.zeros(grid.J)
    for p in range(edges.shape[1] - 1):
        a, b = edges[:, p], edges[:, p + 1]
        width = b - a
        if not np.any(width > 0):
            continue
        if p == 0:
            # a == 0: the weight xi^(-gamma) is folded into the rule
            for x, w in zip(xs, ws):
                cross += w * width ** (1.0 - gamma) * np.einsum(
                    "jn,jn->j", AJ, remainder(width * x))
        for x, w in zip(xg, wg):
            xi = a + width * x
            Rx = remainder(xi)
            smooth += w * width * _quad_form_rows(A, Rx)
            if p > 0:
                cross += w * width * xi ** (-gamma) * np.einsum("jn,jn->j", AJ, Rx)

    total = float(np.sum(jAj * tau ** (1.0 - 2.0 * gamma))) / (1.0 - 2.0 * gamma)
    total += 2.0 * float(np.sum(tau ** (1.0 - gamma) * cross))
    total += float(np.sum(tau * smooth))
    return max(total, 0.0) / gamma_fn(1.0 - gamma) ** 2


def e2_fractional(U: DGSolution, ref, alpha: float | None = None, **kwargs) -> float:
    r""":math:`\|D_{0+}^{(1-\alpha)/2}(\tilde u - U)\|_{L^2(0,T;\dot H^1(\Omega))}` for a fine reference."""
    if isinstance(ref, SpectralReference):
        raise DomainError("E2 needs a fine-grid reference")
    R = _as_solution(ref)
    alpha = U.alpha if alpha is None else alpha
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    E = difference_slabs(U, R)
    return math.sqrt(frac_derivative_energy(E, R.grid, 0.5 * (1.0 - alpha),
                                            R.space.stiffness, **kwargs))


# }}}

# {{{ temporal interpolants


def interpolate_right(v, grid: TimeGrid) -> ScalarStepFunction:
    """Right-endpoint interpolant: ``v(t_j)`` on slab ``j``."""
    return ScalarStepFunction(grid, np.asarray(v(grid.nodes[1:]), dtype=np.float64))


def interpolate_left(v, grid: TimeGrid) -> ScalarStepFunction:
    """Left-endpoint interpolant: ``v(t_{j-1})`` on slab ``j``."""
    return ScalarStepFunction(grid, np.asarray(v(grid.nodes[:-1]), dtype=np.float64))


# }}}

# {{{ orders and reports


def observed_orders(errors, ratio: float = 2.0) -> list:
    """``log_ratio(E_{i-1} / E_i)``; the first entry is ``None`` and
    nonpositive or non-finite errors give ``nan``."""
    errs = [float(e) for e in errors]
    out = [None] if errs else []
    for a, b in zip(errs[:-1], errs[1:]):
        if a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b):
            out.append(math.log(a / b) / math.log(ratio))
        else:
            out.append(float("nan"))
    return out


@dataclass(frozen=True)
class ErrorRow:
    """Errors at one ladder level; ``size`` is ``h`` or ``tau``."""

    level: int
    size: float
    e1: float
    e2: float | None = None
    nodal: float | None = None


@dataclass(frozen=True)
class ErrorReport:
    axis: str
    rows: tuple

    def values(self, metric: str) -> list:
        return [getattr(r, metric) for r in self.rows]

    def orders(self, metric: str) -> list:
        vals = self.values(metric)
        if any(v is None for v in vals):
            return [None] * len(vals)
        return observed_orders(vals)


# }}}

__all__ = [
    "ErrorReport",
    "ErrorRow",
    "difference_slabs",
    "e1_l2l2",
    "e2_fractional",
    "frac_derivative_energy",
    "interpolate_left",
    "interpolate_right",
    "nodal_error",
    "observed_orders",
]
