"""Reference solutions: fine-grid DG runs and spectral closures in 1D."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .dg import DGSolution, ProblemData, solve
from .errors import DomainError
from .fem import FemSpace, assemble, build_interval_mesh, build_square_mesh
from .frac_ops import TimeGrid, gauss_jacobi
from .mittag_leffler import ml_neg

logger = logging.getLogger(__name__)

# {{{ spectral basis


@dataclass(frozen=True)
class SpectralBasis1D:
    r"""Dirichlet eigenpairs :math:`\sqrt{2}\sin(k\pi x)`, :math:`k^2\pi^2` on ``(0, 1)``."""

    K: int

    def __post_init__(self) -> None:
        if self.K < 1:
            raise DomainError("need at least one mode")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.K + 1)

    @property
    def eigenvalues(self) -> np.ndarray:
        return (self.modes * np.pi) ** 2

    def __call__(self, x) -> np.ndarray:
        """Eigenfunction values, shape ``(K, len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return math.sqrt(2.0) * np.sin(np.pi * np.outer(self.modes, x))

    def hat_moments(self, space: FemSpace) -> np.ndarray:
        r"""Exact :math:`\langle \phi_k, \varphi_i \rangle`, shape ``(K, N)``, on a uniform 1D mesh."""
        if space.dim != 1 or space.mesh.n is None:
            raise DomainError("hat moments need a uniform interval mesh")
        h = 1.0 / space.mesh.n
        kp = self.modes * np.pi
        factor = 2.0 * (1.0 - np.cos(kp * h)) / (h * kp**2)
        xi = space.coordinates()[:, 0]
        return math.sqrt(2.0) * factor[:, None] * np.sin(np.outer(kp, xi))


def modal_coefficients(f, basis: SpectralBasis1D, singular_exponent: float = 0.0,
                       panels: int | None = None, points: int = 24) -> np.ndarray:
    r"""Sine coefficients :math:`\int_0^1 f\phi_k` by composite Gauss quadrature.

    The first panel carries :math:`x^q` (``q = singular_exponent``) in a
    Gauss-Jacobi rule; ``panels`` defaults to resolving the highest mode with
    about two half-waves per panel.
    """
    if panels is None:
        panels = max(16, basis.K // 4)
    edges = np.linspace(0.0, 1.0, panels + 1)
    xs, ws = [], []
    for p in range(panels):
        q = singular_exponent if p == 0 else 0.0
        s, w = gauss_jacobi(points, edges[p], edges[p + 1], 0.0, q)
        vals = np.asarray(f(s), dtype=np.float64)
        if q:
            vals = vals / s**q
        xs.append(s)
        ws.append(w * vals)
    x = np.concatenate(xs)
    fw = np.concatenate(ws)
    out = np.empty(basis.K)
    chunk = max(1, 4_000_000 // x.size)
    for k0 in range(0, basis.K, chunk):
        k = np.arange(k0 + 1, min(k0 + chunk, basis.K) + 1)
        out[k0:k0 + len(k)] = np.sin(np.pi * np.outer(k, x)) @ fw
    return math.sqrt(2.0) * out


def spectral_f0(u0_modal, alpha: float, basis: SpectralBasis1D, t):
    r"""Modal values :math:`c_k E_{\alpha,1}(-\lambda_k t^\alpha)` of the ``f = 0`` solution.

    ``t`` may be a scalar (result shape ``(K,)``) or an array (``(len(t), K)``).
    """
    c = np.asarray(u0_modal, dtype=np.float64)
    if c.shape != (basis.K,):
        raise DomainError(f"expected {basis.K} modal coefficients")
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")
    x = np.multiply.outer(t**alpha, basis.eigenvalues)
    return c * ml_neg(alpha, 1.0, x)


def ml_decay_bound(alpha: float, x):
    r"""Upper bound :math:`1 / (1 + x/\Gamma(1+\alpha))` for :math:`E_{\alpha,1}(-x)`."""
    return 1.0 / (1.0 + np.asarray(x, dtype=np.float64) / gamma_fn(1.0 + alpha))


@dataclass(frozen=True, eq=False)
class SpectralReference:
    """Truncated eigen-expansion of the ``f = 0`` solution on ``(0, 1)``.

    ``norm_sq`` is :math:`\\|u_0\\|_{L^2}^2` when known; it feeds the tail bound.
    """

    alpha: float
    T: float
    basis: SpectralBasis1D
    coefficients: np.ndarray = field(repr=False)
    norm_sq: float | None = None

    @classmethod
    def from_function(cls, alpha, T, u0, K=64, singular_exponent=0.0, norm_sq=None):
        basis = SpectralBasis1D(K)
        return cls(alpha, T, basis, modal_coefficients(u0, basis, singular_exponent), norm_sq)

    def modal(self, t):
        return spectral_f0(self.coefficients, self.alpha, self.basis, t)

    def __call__(self, x, t):
        """Point values of the truncated expansion at ``(x, t)``."""
        return self.modal(t) @ self.basis(x)

    def l2_norm(self, t) -> np.ndarray:
        return np.sqrt(np.sum(self.modal(t) ** 2, axis=-1))

    def tail_bound(self) -> float:
        r"""Bound on the truncation error in :math:`L^2(0,T;L^2)`.

        The discarded modes carry at most :math:`\|u_0\|^2 - \sum c_k^2` in
        total, and each decays no slower than the mode :math:`K+1`.
        """
        if self.norm_sq is None:
            raise DomainError("tail bound needs the squared L2 norm of the initial datum")
        tail_c = max(self.norm_sq - float(np.sum(self.coefficients**2)), 0.0)
        lam = ((self.basis.K + 1) * np.pi) ** 2
        a = self.alpha
        decay, _ = integrate.quad(lambda t: ml_decay_bound(a, lam * t**a) ** 2, 0.0, self.T,
                                  points=[min(self.T, lam ** (-1.0 / a))], limit=200)
        return math.sqrt(tail_c * decay)


# }}}

# {{{ fine-grid references


@dataclass(frozen=True, eq=False)
class FineReference:
    """A fine DG solution used in place of the exact solution."""

    solution: DGSolution
    h_level: int
    tau_level: int
    path: Path | None = None


def space_for_level(dim: int, level: int) -> FemSpace:
    n = 2**level
    mesh = build_interval_mesh(n) if dim == 1 else build_square_mesh(n)
    return assemble(mesh)


def _cache_key(key: str, dim: int, h_level: int, tau_level: int, alpha: float, T: float) -> str:
    raw = f"{key}|d={dim}|h={h_level}|tau={tau_level}|alpha={alpha!r}|T={T!r}"
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def fine_reference(data: ProblemData, h_level: int, tau_level: int, dim: int = 1,
                   cache_dir=None, key: str | None = None,
                   space: FemSpace | None = None) -> FineReference:
    """Solve on ``(h, tau) = (2^-h_level, 2^-tau_level)`` and cache the result.

    With ``cache_dir`` and ``key`` set, a checkpoint named after a hash of
    the key and levels is reused when present and written otherwise.
    """
    if h_level < 1 or tau_level < 0:
        raise DomainError("reference levels must be nonnegative dyadic exponents")
    if space is None:
        space = space_for_level(dim, h_level)
    grid = TimeGrid.uniform(data.T, int(round(data.T * 2**tau_level)))

    path = None
    if cache_dir is not None and key is not None:
        cache = Path(cache_dir)
        cache.mkdir(parents=True, exist_ok=True)
        path = cache / f"ref-{_cache_key(key, dim, h_level, tau_level, data.alpha, data.T)}.fdg"
        if path.exists():
            sol = DGSolution.load(path, space)
            if sol.grid == grid and sol.alpha == data.alpha:
                logger.info("reusing reference checkpoint %s", path)
                return FineReference(sol, h_level, tau_level, path)
            logger.warning("stale reference checkpoint %s, recomputing", path)

    sol = solve(data, space, grid)
    if path is not None:
        sol.save(path)
    return FineReference(sol, h_level, tau_level, path)


# }}}

__all__ = [
    "FineReference",
    "SpectralBasis1D",
    "SpectralReference",
    "fine_reference",
    "ml_decay_bound",
    "modal_coefficients",
    "space_for_level",
    "spectral_f0",
]
