r"""Piecewise-constant DG time stepping for :math:`\partial_t u - \partial_t^{1-\alpha}\Delta u = f`.

On slab :math:`I_j` the coefficient vector :math:`U_j` solves

.. math::

    (M + \omega_{j,j} A) U_j = M U_{j-1} + F_j - A \sum_{i<j} \omega_{j,i} U_i,

with :math:`M U_0` the load of the initial datum and :math:`F_j` the slab
integral of the source against the hats.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu

from .errors import DataError, DomainError, SolverError
from .fem import FemSpace, dirac_approx, l2_project, load_slab, load_vector, prolongation_matrix
from .frac_ops import TimeGrid, convolution_weights, gauss_jacobi

RESIDUAL_TOL = 1e-10
CG_RTOL = 1e-12

# {{{ temporal factors


@dataclass(frozen=True)
class PowerLaw:
    r"""Time factor :math:`c\,t^p` with ``p > -1``; slab integrals are exact."""

    exponent: float
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        if not self.exponent > -1:
            raise DomainError("power-law exponent must exceed -1 to be integrable")

    @property
    def singular_exponent(self) -> float:
        return self.exponent if self.exponent < 0 else 0.0

    def __call__(self, t):
        return self.coefficient * np.asarray(t, dtype=np.float64) ** self.exponent

    def integral(self, lo: float, hi: float) -> float:
        e = self.exponent + 1.0
        return self.coefficient * (hi**e - lo**e) / e


@dataclass(frozen=True)
class TimeFunction:
    """Generic time factor ``g``; slab integrals by Gauss-Jacobi quadrature.

    ``singular_exponent`` ``q`` declares ``g(t) ~ t^q`` near ``t = 0``.
    """

    g: object
    singular_exponent: float = 0.0
    points: int = 16

    def __call__(self, t):
        return self.g(t)

    def integral(self, lo: float, hi: float) -> float:
        q = self.singular_exponent if lo == 0.0 else 0.0
        s, w = gauss_jacobi(self.points, lo, hi, 0.0, q)
        vals = np.asarray(self.g(s), dtype=np.float64)
        if q:
            vals = vals / s**q
        return float(w @ vals)


# }}}

# {{{ data


class Source:
    """Right-hand side ``f``; subclasses provide the slab loads."""

    def slab_loads(self, space: FemSpace, grid: TimeGrid) -> np.ndarray | None:
        """Array ``(J, N)`` of slab loads, or ``None`` for a zero source."""
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroSource(Source):
    def slab_loads(self, space, grid):
        return None


@dataclass(frozen=True)
class SeparableSource(Source):
    """``f(t, x) = g(t) w(x)``; the spatial load is computed once."""

    time: object
    space_fn: object
    space_exponent: float = 0.0

    def slab_loads(self, space, grid):
        b = load_vector(space, self.space_fn, self.space_exponent)
        g = np.array([self.time.integral(*grid.slab(j)) for j in range(1, grid.J + 1)])
        return g[:, None] * b[None, :]


@dataclass(frozen=True)
class SpaceTimeSource(Source):
    """General ``f(t, x)`` integrated by tensor quadrature on every slab."""

    f: object
    time_exponent: float = 0.0
    space_exponent: float = 0.0

    def slab_loads(self, space, grid):
        return np.stack([
            load_slab(space, self.f, grid.slab(j), self.time_exponent, self.space_exponent)
            for j in range(1, grid.J + 1)])


@dataclass(frozen=True)
class DiracSource(Source):
    r"""``f = g(t)\,\delta_{x_0}``, discretized through :math:`\delta_{x_0,h}`."""

    point: tuple
    time: object

    def slab_loads(self, space, grid):
        b = dirac_approx(space, self.point).moment_vector()
        g = np.array([self.time.integral(*grid.slab(j)) for j in range(1, grid.J + 1)])
        return g[:, None] * b[None, :]


@dataclass(frozen=True)
class SumSource(Source):
    parts: tuple

    def slab_loads(self, space, grid):
        total = None
        for p in self.parts:
            F = p.slab_loads(space, grid)
            if F is not None:
                total = F if total is None else total + F
        return total


class Initial:
    """Initial datum; ``load`` gives its integrals against the hats."""

    def load(self, space: FemSpace) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroInitial(Initial):
    def load(self, space):
        return np.zeros(space.N)


@dataclass(frozen=True)
class InitialCoefficients(Initial):
    """Finite element coefficients given directly on the solve space."""

    values: np.ndarray = field(repr=False)

    def load(self, space):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (space.N,):
            raise DomainError(f"expected {space.N} coefficients, got {v.shape}")
        return space.mass @ v


@dataclass(frozen=True)
class InitialFunction(Initial):
    """A function to be L2-projected; ``singular_exponent`` as in ``load_vector``."""

    f: object
    singular_exponent: float = 0.0

    def load(self, space):
        return load_vector(space, self.f, self.singular_exponent)


@dataclass(frozen=True)
class InitialDirac(Initial):
    point: tuple

    def load(self, space):
        return dirac_approx(space, self.point).moment_vector()


@dataclass(frozen=True)
class SumInitial(Initial):
    parts: tuple

    def load(self, space):
        return sum(p.load(space) for p in self.parts)


@dataclass(frozen=True)
class ProblemData:
    """Order ``alpha``, horizon ``T``, initial datum and source."""

    alpha: float
    T: float = 1.0
    initial: Initial = field(default_factory=ZeroInitial)
    source: Source = field(default_factory=ZeroSource)

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.T > 0:
            raise DomainError(f"horizon must be positive, got {self.T}")
        if not isinstance(self.initial, Initial):
            raise DomainError("initial must be an Initial instance")
        if not isinstance(self.source, Source):
            raise DomainError("source must be a Source instance")

    def __add__(self, other: "ProblemData") -> "ProblemData":
        if (self.alpha, self.T) != (other.alpha, other.T):
            raise DomainError("can only add data with equal alpha and T")
        return ProblemData(self.alpha, self.T,
                           SumInitial((self.initial, other.initial)),
                           SumSource((self.source, other.source)))


# }}}

# {{{ solutions


_MAGIC = b"FDGSOL01"
_HEADER = struct.Struct("<ddqqq")


@dataclass(frozen=True, eq=False)
class DGSolution:
    """Slab values ``slabs[j-1] = U_j`` and initial coefficients ``U_0``."""

    alpha: float
    space: FemSpace = field(repr=False)
    grid: TimeGrid
    slabs: np.ndarray = field(repr=False)
    initial: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        slabs = np.array(self.slabs, dtype=np.float64)
        init = np.array(self.initial, dtype=np.float64)
        if slabs.shape != (self.grid.J, self.space.N):
            raise DomainError(f"slabs must have shape {(self.grid.J, self.space.N)}")
        if init.shape != (self.space.N,):
            raise DomainError("initial vector has the wrong length")
        slabs.setflags(write=False)
        init.setflags(write=False)
        object.__setattr__(self, "slabs", slabs)
        object.__setattr__(self, "initial", init)

    @property
    def J(self) -> int:
        return self.grid.J

    def slab(self, j: int) -> np.ndarray:
        """``U_j`` for ``1 <= j <= J``."""
        if not 1 <= j <= self.J:
            raise DomainError(f"slab index {j} out of range 1..{self.J}")
        return self.slabs[j - 1]

    def l2_norms(self) -> np.ndarray:
        """``||U_j||_{L2}`` for every slab."""
        MU = (self.space.mass @ self.slabs.T).T
        return np.sqrt(np.maximum(np.einsum("jn,jn->j", self.slabs, MU), 0.0))

    def l2l2_norm(self) -> float:
        return float(math.sqrt(np.sum(self.grid.tau * self.l2_norms() ** 2)))

    def prolong_time(self, finer: TimeGrid) -> "DGSolution":
        """Re-express the step function on a finer nested grid."""
        if finer == self.grid:
            return self
        if not finer.is_refinement_of(self.grid):
            raise DomainError("target grid does not refine the solution grid")
        mid = 0.5 * (finer.nodes[:-1] + finer.nodes[1:])
        owner = self.grid.locate(mid)
        return DGSolution(self.alpha, self.space, finer, self.slabs[owner], self.initial)

    def prolong_space(self, finer: FemSpace) -> "DGSolution":
        """P1 interpolation of every slab onto a nested finer space."""
        if finer is self.space:
            return self
        P = prolongation_matrix(self.space, finer)
        return DGSolution(self.alpha, finer, self.grid,
                          (P @ self.slabs.T).T, P @ self.initial)

    def save(self, path) -> Path:
        """Write the little-endian binary checkpoint.

        Layout: 8-byte magic ``FDGSOL01``; header ``<ddqqq`` holding
        ``(alpha, T, J, N, dim)``; then ``J+1`` grid nodes, ``N`` initial
        coefficients and ``J*N`` slab coefficients (slab-major), all ``<f8``.
        """
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(_HEADER.pack(self.alpha, self.grid.T, self.J, self.space.N, self.space.dim))
            for arr in (self.grid.nodes, self.initial, self.slabs):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path, space: FemSpace) -> "DGSolution":
        """Read a checkpoint written by :meth:`save` for the given space."""
        raw = Path(path).read_bytes()
        if raw[:len(_MAGIC)] != _MAGIC:
            raise DataError(f"{path} is not a DG solution checkpoint")
        off = len(_MAGIC)
        alpha, T, J, N, dim = _HEADER.unpack_from(raw, off)
        off += _HEADER.size
        if N != space.N or dim != space.dim:
            raise DataError("checkpoint does not match the given space")
        body = np.frombuffer(raw, dtype="<f8", offset=off)
        if body.size != (J + 1) + N + J * N:
            raise DataError("checkpoint is truncated or corrupt")
        nodes = body[:J + 1]
        init = body[J + 1:J + 1 + N]
        slabs = body[J + 1 + N:].reshape(J, N)
        return cls(alpha, space, TimeGrid(nodes.copy()), slabs, init)


# }}}

# {{{ solver


def _check_residual(K, x, b, step):
    r = np.linalg.norm(K @ x - b)
    nb = np.linalg.norm(b)
    if not np.isfinite(r) or r > RESIDUAL_TOL * max(nb, 1e-300):
        raise SolverError(f"slab {step}: relative residual {r / max(nb, 1e-300):.2e}",
                          step=step, residual=float(r))


def _pcg(K, b, step, x0):
    diag = K.diagonal()
    precond = sp.diags(1.0 / diag)
    iters = [0]

    def count(_):
        iters[0] += 1

    x, info = cg(K, b, x0=x0, rtol=CG_RTOL, atol=0.0, M=precond,
                 maxiter=10 * K.shape[0] + 100, callback=count)
    if info != 0:
        r = float(np.linalg.norm(K @ x - b))
        raise SolverError(f"CG did not converge on slab {step}", step=step,
                          iterations=iters[0], residual=r)
    return x


def solve(data: ProblemData, space: FemSpace, grid: TimeGrid) -> DGSolution:
    """Run the DG time stepping and return all slab values."""
    if not math.isclose(grid.T, data.T, rel_tol=1e-12):
        raise DomainError(f"grid horizon {grid.T} differs from data horizon {data.T}")
    J, N = grid.J, space.N
    M, A = space.mass, space.stiffness
    weights = convolution_weights(data.alpha, grid)

    load0 = data.initial.load(space)
    U0 = space.solve_mass(load0) if np.any(load0) else np.zeros(N)
    F = data.source.slab_loads(space, grid)
    if F is not None and not np.all(np.isfinite(F)):
        raise DataError("source loads are not finite")

    U = np.zeros((J, N))
    if not np.any(load0) and F is None:
        return DGSolution(data.alpha, space, grid, U, U0)

    if weights.is_toeplitz:
        w = weights.toeplitz  # w[d] = omega_{j, j-d}
        wrev = np.ascontiguousarray(w[::-1])
        K = (M + w[0] * A).tocsc()
        lu = splu(K)
    else:
        W = weights.dense()

    prev = load0
    for j in range(1, J + 1):
        rhs = prev.copy()
        if F is not None:
            rhs += F[j - 1]
        if j > 1:
            if weights.is_toeplitz:
                # omega_{j,i} = w[j - i] for i = 1..j-1
                hist = wrev[J - j:J - 1] @ U[:j - 1]
            else:
                hist = W[j - 1, :j - 1] @ U[:j - 1]
            rhs -= A @ hist
        if weights.is_toeplitz:
            x = lu.solve(rhs)
            _check_residual(K, x, rhs, j)
        else:
            Kj = (M + W[j - 1, j - 1] * A).tocsr()
            x = _pcg(Kj, rhs, j, U[j - 2] if j > 1 else U0)
            _check_residual(Kj, x, rhs, j)
        U[j - 1] = x
        prev = M @ x
    return DGSolution(data.alpha, space, grid, U, U0)


# }}}

__all__ = [
    "DGSolution",
    "DiracSource",
    "InitialCoefficients",
    "InitialDirac",
    "InitialFunction",
    "PowerLaw",
    "ProblemData",
    "SeparableSource",
    "SpaceTimeSource",
    "SumInitial",
    "SumSource",
    "TimeFunction",
    "ZeroInitial",
    "ZeroSource",
    "solve",
]
